#pragma once

#include <cstdint>
#include <vector>

#include "stylet/attention.hpp"
#include "stylet/config.hpp"
#include "stylet/ops.hpp"
#include "stylet/tensor.hpp"

namespace stylet {

// Frozen style-modulated synthesis network. Features are {pixels, channels}
// matrices; layers are 1x1 modulated linear maps over channels with
// demodulation, arranged in resolution stages of two layers each with
// nearest-neighbor 2x upsampling between stages. None of its parameters
// require grad; gradients flow through synthesize() to the style code only.
class ToyGenerator {
public:
    ToyGenerator(const ModelConfig& cfg, std::uint64_t seed);

    // w: {N, D} style code -> image {img_size*img_size, 3}.
    Tensor synthesize(Tape* tape, const Tensor& w) const;

    std::size_t layers() const { return n_layers_; }
    std::size_t img_size() const { return img_size_; }

    // FNV-1a over every parameter byte; used to assert frozen-ness.
    std::uint64_t checksum() const;

    // Zeroes affine row n (test hook for modulation-locality checks).
    void zero_affine(std::size_t layer);

private:
    struct Layer {
        Tensor affine;       // {D, C}
        Tensor affine_bias;  // {1, C}
        Tensor weight;       // {C, C}
        Tensor weight_sq;    // precomputed element-wise square of weight
        bool upsample_before = false;
    };

    std::size_t n_layers_, dim_, channels_, img_size_, base_size_;
    Tensor const_input_;  // {base*base, C}
    std::vector<Layer> layers_;
    Tensor out_proj_;      // {C, 3}
    Tensor out_bias_;      // {1, 3}
};

// One record per sampled code: the code, its rendered image, and K binary
// attribute labels derived from fixed linear functionals of the flattened
// code thresholded at the sample median.
struct LatentDataset {
    std::vector<Tensor> codes;            // each {N, D}
    std::vector<Tensor> images;           // each {img*img, 3}
    std::vector<std::vector<int>> labels; // [count][K]
    std::vector<Tensor> functionals;      // each {1, N*D}, unit norm
    std::vector<double> thresholds;       // per attribute median
};

LatentDataset sample_latent_dataset(const ToyGenerator& gen, const ModelConfig& cfg,
                                    std::size_t count, std::uint64_t seed,
                                    bool render_images = true);

}  // namespace stylet
