#pragma once

#include <cstdint>
#include <vector>

#include "stylet/attention.hpp"
#include "stylet/config.hpp"
#include "stylet/generator.hpp"
#include "stylet/tensor.hpp"

namespace stylet {

// Multi-branch attribute classifier over flattened style codes: a shared
// 4-layer trunk, then per attribute an embedding head and a sigmoid logit
// head. Branches share no parameters across attributes.
class LatentClassifier {
public:
    LatentClassifier(const ModelConfig& cfg, std::uint64_t seed);

    // Per-attribute embedding C_f^k, shape {1, E}.
    Tensor embed(Tape* tape, const Tensor& w, std::size_t k) const;

    // All K sigmoid logits, shape {1, K}, entries strictly in (0, 1).
    Tensor logits(Tape* tape, const Tensor& w) const;
    // Pre-sigmoid logits {1, K}; feed these to bce_logits during training so
    // a saturated sigmoid cannot produce an exact 0 or 1.
    Tensor raw_logits(Tape* tape, const Tensor& w) const;
    Tensor logit(Tape* tape, const Tensor& w, std::size_t k) const;

    std::size_t n_attrs() const { return n_attrs_; }
    ParamList params();
    std::uint64_t checksum() const;

    // Zeroes a logit head (test hook: all-0.5 outputs).
    void zero_logit_head(std::size_t k);
    // Perturbs a branch's parameters (test hook for branch disjointness).
    void nudge_branch(std::size_t k, double delta);

private:
    Tensor trunk_forward(Tape* tape, const Tensor& w) const;

    std::size_t n_attrs_, in_dim_, embed_dim_;
    std::vector<std::pair<Tensor, Tensor>> trunk_;  // (weight, bias) x 4
    struct Branch {
        Tensor embed_w, embed_b;  // {64, E}, {1, E}
        Tensor logit_w, logit_b;  // {E, 1}, {1, 1}
    };
    std::vector<Branch> branches_;
};

struct TrainCurve {
    std::vector<double> loss_per_epoch;
};

// Minimizes mean BCE over all attributes with Adam. The dataset must be
// non-empty; codes are consumed as-is (no augmentation).
TrainCurve train_classifier(LatentClassifier& clf, const LatentDataset& ds, std::size_t epochs,
                            double lr, std::size_t batch_size = 8);

// Fraction of records whose thresholded prediction matches the label, per
// attribute.
std::vector<double> classifier_accuracy(const LatentClassifier& clf, const LatentDataset& ds,
                                        std::size_t begin, std::size_t end);

}  // namespace stylet
