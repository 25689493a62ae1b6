#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "stylet/generator.hpp"
#include "stylet/tensor.hpp"

namespace stylet {

// Maps a style code to K attribute logits. Implementations may render the
// code and score the image; the metric code does not care.
using AttributeEvaluator = std::function<std::vector<double>(const Tensor& code)>;
// Maps (code, step size) to an edited code.
using EditFn = std::function<Tensor(const Tensor& code, double alpha)>;

double mse(const Tensor& a, const Tensor& b);

struct ADReport {
    std::size_t attribute = 0;
    std::vector<double> steps;          // ascending step sizes
    std::vector<double> target_change;  // mean |delta l_k| / sigma_k per step
    std::vector<double> mean_ad;        // mean over j != k of |delta l_j| / sigma_j
};

// Per-attribute standard deviation of evaluator logits over a code sample.
std::vector<double> logit_sigmas(const AttributeEvaluator& eval, const std::vector<Tensor>& codes);

ADReport mean_ad(const std::vector<Tensor>& codes, std::size_t k, std::vector<double> steps,
                 const EditFn& editor, const AttributeEvaluator& eval,
                 const std::vector<double>& sigma);

// Mean logit change per attribute after one edit (the re-scoring table row).
std::vector<double> rescoring(const std::vector<Tensor>& codes, const EditFn& editor, double alpha,
                              const AttributeEvaluator& eval);

// Sliced Wasserstein distance: averages the 1-D W1 distance of the two
// sample sets over `projections` seeded random unit directions. Sample
// counts must match (order statistics are paired directly).
double swd(const std::vector<std::vector<double>>& samples_a,
           const std::vector<std::vector<double>>& samples_b, std::size_t projections,
           std::uint64_t seed);

// Independent per-attribute logistic probes over rendered images; the AD
// evaluator that stands in for an image-domain attribute classifier. Kept
// separate from the latent classifier so editing is not scored by its own
// trainer.
class ImageProbes {
public:
    ImageProbes(const ToyGenerator& gen, const LatentDataset& ds, std::size_t epochs = 200,
                double lr = 0.5);

    std::vector<double> logits_for_image(const Tensor& image) const;
    AttributeEvaluator evaluator(const ToyGenerator& gen) const;

private:
    std::vector<std::vector<double>> weights_;  // [K][pixels*channels]
    std::vector<double> biases_;
};

}  // namespace stylet
