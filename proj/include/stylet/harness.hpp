#pragma once

#include <cstdint>
#include <vector>

#include "stylet/config.hpp"
#include "stylet/encoder.hpp"
#include "stylet/generator.hpp"
#include "stylet/optim.hpp"
#include "stylet/tensor.hpp"

namespace stylet {

// Fixed seeded stand-ins for the perceptual and identity networks: a
// two-layer feature net for the perceptual term and a single projection for
// the identity cosine term. Frozen after construction.
class SurrogateNets {
public:
    SurrogateNets(const ModelConfig& cfg, std::uint64_t seed);

    Tensor features(Tape* tape, const Tensor& image) const;  // {1, 64}
    Tensor id_vec(Tape* tape, const Tensor& image) const;    // {1, 32}
    std::uint64_t checksum() const;

private:
    std::size_t in_dim_;
    Tensor f_w1_, f_b1_, f_w2_, f_b2_;
    Tensor r_w_, r_b_;
};

struct InversionLossTerms {
    Tensor total, l2, perceptual, id;
};

// lambda_2 * L2 + lambda_lpips * ||F(I)-F(I_hat)|| + lambda_id * (1 - cos).
InversionLossTerms inversion_loss(Tape* tape, const Tensor& image, const Tensor& recon,
                                  const SurrogateNets& sur, const LossConfig& weights);

struct InversionTrainResult {
    std::vector<double> loss_curve;  // total loss per step
};

// Optimizes every encoder parameter against the frozen generator and
// surrogates over the given images. Deterministic for a fixed config.
// Throws on NaN loss, reporting the step and the offending term.
InversionTrainResult train_inversion(StyleEncoder& enc, const ToyGenerator& gen,
                                     const SurrogateNets& sur, const std::vector<Tensor>& images,
                                     const Config& cfg, std::size_t steps, bool use_self = true,
                                     Adam* opt_out = nullptr);

}  // namespace stylet
