#include "stylet/editing.hpp"

#include <cmath>
#include <stdexcept>

#include "stylet/attention.hpp"
#include "stylet/ops.hpp"
#include "stylet/optim.hpp"

namespace stylet {

namespace op = ops;

ScalarLossFn target_bce(const LatentClassifier& clf, std::size_t k, double y_t) {
    return [&clf, k, y_t](Tape* tape, const Tensor& w) {
        Tensor z = op::slice_cols(tape, clf.raw_logits(tape, w), k, k + 1);
        return op::bce_logits(tape, z, Tensor::scalar(y_t));
    };
}

Tensor loss_grad(const ScalarLossFn& loss, const Tensor& w) {
    Tape tape;
    Tensor wc = w.clone();
    wc.set_requires_grad();
    Tensor l = loss(&tape, wc);
    tape.backward(l);
    return Tensor::from_values(w.shape(), wc.grad());
}

namespace {

// direction = -g with each row scaled to unit norm; vanishing rows zeroed.
EditDirection normalize_direction(const Tensor& g, std::size_t k, double y_t, double alpha) {
    EditDirection dir;
    dir.alpha = alpha;
    dir.attribute = k;
    dir.target = y_t;
    dir.direction = Tensor(g.shape());
    const std::size_t rows = g.rows(), cols = g.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        double norm = 0.0;
        for (std::size_t j = 0; j < cols; ++j) norm += g.at(i, j) * g.at(i, j);
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            dir.zero_rows.push_back(i);
            continue;
        }
        for (std::size_t j = 0; j < cols; ++j) dir.direction.at(i, j) = -g.at(i, j) / norm;
    }
    return dir;
}

}  // namespace

EditDirection first_order_direction(const Tensor& w, const ScalarLossFn& loss, double alpha) {
    return normalize_direction(loss_grad(loss, w), 0, 0.0, alpha);
}

EditDirection first_order_direction(const Tensor& w, std::size_t k, double y_t,
                                    const LatentClassifier& clf, double alpha) {
    EditDirection dir = first_order_direction(w, target_bce(clf, k, y_t), alpha);
    dir.attribute = k;
    dir.target = y_t;
    return dir;
}

PowerIterResult hessian_power_iteration(const Tensor& w, const ScalarLossFn& loss, double xi,
                                        std::size_t iters, Rng& rng) {
    if (xi <= 0.0) throw std::invalid_argument("hessian_power_iteration: xi must be positive");
    if (iters < 1) throw std::invalid_argument("hessian_power_iteration: iters must be >= 1");
    Tensor d = Tensor::randn(w.shape(), rng);
    double norm = 0.0;
    for (double x : d.values()) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : d.values()) x /= norm;

    // The gradient at r=0 does not depend on the iterate.
    Tensor grad0 = loss_grad(loss, w);
    Tensor hd;
    for (std::size_t it = 0; it < iters; ++it) {
        Tensor shifted = w.clone();
        for (std::size_t i = 0; i < shifted.numel(); ++i) shifted.values()[i] += xi * d.values()[i];
        Tensor grad_d = loss_grad(loss, shifted);
        hd = Tensor(w.shape());
        for (std::size_t i = 0; i < hd.numel(); ++i)
            hd.values()[i] = (grad_d.values()[i] - grad0.values()[i]) / xi;
        double hn = 0.0;
        for (double x : hd.values()) hn += x * x;
        hn = std::sqrt(hn);
        if (hn < 1e-12)
            throw std::runtime_error("hessian_power_iteration: degenerate curvature at iteration " +
                                     std::to_string(it));
        d = hd.clone();
        for (double& x : d.values()) x /= hn;
    }
    return {d, hd};
}

EditDirection second_order_direction(const Tensor& w, const ScalarLossFn& loss, double xi,
                                     std::size_t iters, Rng& rng, double alpha) {
    PowerIterResult pi = hessian_power_iteration(w, loss, xi, iters, rng);
    return normalize_direction(pi.hd, 0, 0.0, alpha);
}

EditDirection second_order_direction(const Tensor& w, std::size_t k, double y_t,
                                     const LatentClassifier& clf, double xi, std::size_t iters,
                                     Rng& rng, double alpha) {
    EditDirection dir = second_order_direction(w, target_bce(clf, k, y_t), xi, iters, rng, alpha);
    dir.attribute = k;
    dir.target = y_t;
    return dir;
}

Tensor apply_edit(const Tensor& w, const EditDirection& dir) {
    if (w.shape() != dir.direction.shape())
        throw std::invalid_argument("apply_edit: shape mismatch " + w.shape_str() + " vs " +
                                    dir.direction.shape_str());
    Tensor out = w.clone();
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.values()[i] += dir.alpha * dir.direction.values()[i];
    return out;
}

RefEditorParams RefEditorParams::init(std::size_t dim, Rng& rng) {
    RefEditorParams p;
    p.wq = Tensor::glorot(dim, dim, rng).set_requires_grad();
    p.wk = Tensor::glorot(dim, dim, rng).set_requires_grad();
    p.wv = Tensor::glorot(dim, dim, rng).set_requires_grad();
    return p;
}

ParamList RefEditorParams::params(const std::string& prefix) {
    return {{prefix + ".wq", wq}, {prefix + ".wk", wk}, {prefix + ".wv", wv}};
}

ReferenceEditResult reference_edit(Tape* tape, const Tensor& w_src, const Tensor& w_ref,
                                   const RefEditorParams& editor) {
    ReferenceEditResult res;
    res.delta_w = routing_attention(tape, w_src, w_ref, editor.wq, editor.wk, editor.wv);
    res.edited = op::add(tape, w_src, res.delta_w);
    return res;
}

EditorLosses editor_losses(Tape* tape, const Tensor& w_src, const Tensor& w_ref,
                           const Tensor& w_edit, const LatentClassifier& clf, std::size_t k) {
    EditorLosses l;
    l.emb_sr = op::l2_norm(tape, op::sub(tape, clf.embed(tape, w_edit, k), clf.embed(tape, w_ref, k)));
    l.emb_keep = Tensor::scalar(0.0);
    for (std::size_t j = 0; j < clf.n_attrs(); ++j) {
        if (j == k) continue;
        Tensor term =
            op::l2_norm(tape, op::sub(tape, clf.embed(tape, w_edit, j), clf.embed(tape, w_src, j)));
        l.emb_keep = op::add(tape, l.emb_keep, term);
    }
    l.reg = op::l2_norm(tape, op::sub(tape, w_edit, w_src));
    return l;
}

EditorTrainResult train_reference_editor(const std::vector<Tensor>& sources,
                                         const std::vector<Tensor>& references, std::size_t k,
                                         const LatentClassifier& clf, const LossConfig& loss,
                                         std::size_t steps, double lr, std::uint64_t seed) {
    if (sources.empty() || references.empty())
        throw std::invalid_argument("train_reference_editor: empty source or reference set");
    const std::size_t dim = sources[0].cols();
    Rng rng = Rng::stream(seed, "editor");
    EditorTrainResult result;
    result.editor = RefEditorParams::init(dim, rng);
    ParamList params = result.editor.params();
    Adam opt(lr);

    auto total_loss = [&](Tape* tape, const Tensor& ws, const Tensor& wr) {
        ReferenceEditResult edit = reference_edit(tape, ws, wr, result.editor);
        EditorLosses l = editor_losses(tape, ws, wr, edit.edited, clf, k);
        Tensor t = op::scale(tape, l.emb_sr, loss.lambda_ref);
        t = op::add(tape, t, op::scale(tape, l.emb_keep, loss.lambda_keep));
        return op::add(tape, t, op::scale(tape, l.reg, loss.lambda_reg));
    };

    // Fixed validation pairing: i-th source with i-th reference.
    auto validation = [&] {
        const std::size_t n = std::min(sources.size(), references.size());
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += total_loss(nullptr, sources[i], references[i]).item();
        return total / static_cast<double>(n);
    };

    result.validation_start = validation();
    for (std::size_t step = 0; step < steps; ++step) {
        Tape tape;
        const Tensor& ws = sources[rng.below(sources.size())];
        const Tensor& wr = references[rng.below(references.size())];
        Tensor t = total_loss(&tape, ws, wr);
        result.loss_curve.push_back(t.item());
        tape.backward(t);
        opt.step(params);
    }
    result.validation_end = validation();
    return result;
}

}  // namespace stylet
