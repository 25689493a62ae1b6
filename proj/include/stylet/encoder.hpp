#pragma once

#include <array>
#include <cstdint>

#include "stylet/attention.hpp"
#include "stylet/config.hpp"
#include "stylet/tensor.hpp"

namespace stylet {

struct FeaturePyramid {
    Tensor f1, f2, f3;  // token counts strictly increase, all width D
};

// Inversion pipeline: learnable seeds -> shared mapper MLP -> three
// transformer stages, each consuming one pyramid level coarse to fine.
class StyleEncoder {
public:
    StyleEncoder(const ModelConfig& cfg, std::uint64_t seed);

    // w0: the mapped initial queries. The nonlinearity switch exists for
    // test harnesses that need the MLP to behave as a pure linear map.
    Tensor init_queries(Tape* tape, bool mapper_nonlinearity = true) const;

    FeaturePyramid encode_pyramid(Tape* tape, const Tensor& image) const;

    // use_self = false bypasses the self-attention sublayer entirely
    // (the no-self ablation).
    Tensor invert(Tape* tape, const Tensor& image, bool use_self = true) const;

    ParamList params();

    const Tensor& seeds() const { return z_; }
    ModelConfig config() const { return cfg_; }

    // Test hooks.
    std::vector<std::pair<Tensor, Tensor>>& mapper() { return mapper_; }
    std::array<TransformerBlockParams, 3>& blocks() { return blocks_; }

private:
    ModelConfig cfg_;
    Tensor z_;  // {N, D} latent seeds, trainable
    std::vector<std::pair<Tensor, Tensor>> mapper_;      // L x (weight {D,D}, bias {1,D})
    std::array<std::pair<Tensor, Tensor>, 3> patchify_;  // per level: (weight {p*p*c, D}, bias)
    std::array<std::size_t, 3> patch_sizes_;
    std::array<TransformerBlockParams, 3> blocks_;
};

}  // namespace stylet
