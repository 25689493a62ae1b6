#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "stylet/classifier.hpp"
#include "stylet/config.hpp"
#include "stylet/tensor.hpp"

namespace stylet {

// A label-editing step: unit-row-normalized offset direction plus a scalar
// step size. Rows whose gradient vanished are left zero and reported.
struct EditDirection {
    Tensor direction;  // {N, D}
    double alpha = 0.5;
    std::size_t attribute = 0;
    double target = 1.0;
    std::vector<std::size_t> zero_rows;
};

// Scalar objective over a style code, built on the given tape. Both editing
// orders are defined against an arbitrary objective so oracles (linear
// probes, quadratic losses) can stand in for the trained classifier.
using ScalarLossFn = std::function<Tensor(Tape*, const Tensor&)>;

// BCE of the k-th classifier logit against the target label.
ScalarLossFn target_bce(const LatentClassifier& clf, std::size_t k, double y_t);

// Gradient of the objective at w. Pure: w is cloned before tracking.
Tensor loss_grad(const ScalarLossFn& loss, const Tensor& w);

// direction = -grad row-normalized, where grad is d BCE(C_l^k(w), y_t) / dw.
EditDirection first_order_direction(const Tensor& w, std::size_t k, double y_t,
                                    const LatentClassifier& clf, double alpha = 0.5);
EditDirection first_order_direction(const Tensor& w, const ScalarLossFn& loss,
                                    double alpha = 0.5);

struct PowerIterResult {
    Tensor d;   // final unit iterate
    Tensor hd;  // last (unnormalized) Hessian-vector product
};

// Power iteration on the finite-difference Hessian-vector product:
// Hd ~ (grad(w + xi*d) - grad(w)) / xi. With iters=1 this is a single
// product applied to a random unit start; larger iters converge to the
// dominant curvature direction.
PowerIterResult hessian_power_iteration(const Tensor& w, const ScalarLossFn& loss, double xi,
                                        std::size_t iters, Rng& rng);

// The final direction is -Hd row-normalized.
EditDirection second_order_direction(const Tensor& w, std::size_t k, double y_t,
                                     const LatentClassifier& clf, double xi, std::size_t iters,
                                     Rng& rng, double alpha = 0.5);
EditDirection second_order_direction(const Tensor& w, const ScalarLossFn& loss, double xi,
                                     std::size_t iters, Rng& rng, double alpha = 0.5);

// w + alpha * direction; never mutates w.
Tensor apply_edit(const Tensor& w, const EditDirection& dir);

struct RefEditorParams {
    Tensor wq, wk, wv;  // {D, D}

    static RefEditorParams init(std::size_t dim, Rng& rng);
    ParamList params(const std::string& prefix = "editor");
};

struct ReferenceEditResult {
    Tensor delta_w;
    Tensor edited;
};

ReferenceEditResult reference_edit(Tape* tape, const Tensor& w_src, const Tensor& w_ref,
                                   const RefEditorParams& editor);

struct EditorLosses {
    Tensor emb_sr;    // || C_f^k(w_e) - C_f^k(w_r) ||
    Tensor emb_keep;  // sum over j != k of || C_f^j(w_e) - C_f^j(w_s) ||
    Tensor reg;       // || w_e - w_s ||
};

EditorLosses editor_losses(Tape* tape, const Tensor& w_src, const Tensor& w_ref,
                           const Tensor& w_edit, const LatentClassifier& clf, std::size_t k);

struct EditorTrainResult {
    RefEditorParams editor;
    std::vector<double> loss_curve;       // per step, training pairs
    double validation_start = 0.0;        // fixed pairing, before training
    double validation_end = 0.0;          // fixed pairing, after training
};

EditorTrainResult train_reference_editor(const std::vector<Tensor>& sources,
                                         const std::vector<Tensor>& references, std::size_t k,
                                         const LatentClassifier& clf, const LossConfig& loss,
                                         std::size_t steps, double lr, std::uint64_t seed);

}  // namespace stylet
