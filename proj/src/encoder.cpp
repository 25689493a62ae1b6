#include "stylet/encoder.hpp"

#include <stdexcept>

namespace stylet {

namespace op = ops;

StyleEncoder::StyleEncoder(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    const std::size_t n = cfg.n_styles, d = cfg.dim, c = cfg.img_channels, img = cfg.img_size;
    patch_sizes_ = {img / 2, img / 4, img / 8};  // tokens 4, 16, 64 at img=16
    for (std::size_t p : patch_sizes_)
        if (p == 0 || img % p != 0)
            throw std::invalid_argument("encoder: image size " + std::to_string(img) +
                                        " not divisible into patches");

    Rng rng = Rng::stream(seed, "encoder");
    z_ = Tensor::randn({n, d}, rng);
    z_.set_requires_grad();
    for (std::size_t l = 0; l < cfg.mapper_layers; ++l) {
        Tensor w = Tensor::glorot(d, d, rng).set_requires_grad();
        Tensor b = Tensor({1, d}, 0.0);
        b.set_requires_grad();
        mapper_.emplace_back(w, b);
    }
    for (std::size_t lv = 0; lv < 3; ++lv) {
        std::size_t p = patch_sizes_[lv];
        Tensor w = Tensor::glorot(p * p * c, d, rng).set_requires_grad();
        Tensor b = Tensor({1, d}, 0.0);
        b.set_requires_grad();
        patchify_[lv] = {w, b};
        blocks_[lv] = TransformerBlockParams::init(d, cfg.heads, cfg.ffn_inner, rng);
    }
}

Tensor StyleEncoder::init_queries(Tape* tape, bool mapper_nonlinearity) const {
    Tensor w = z_;
    for (const auto& [weight, bias] : mapper_) {
        w = op::add_rowvec(tape, op::matmul(tape, w, weight), bias);
        if (mapper_nonlinearity) w = op::leaky_relu(tape, w);
    }
    return w;
}

FeaturePyramid StyleEncoder::encode_pyramid(Tape* tape, const Tensor& image) const {
    const std::size_t img = cfg_.img_size, c = cfg_.img_channels;
    if (image.rows() != img * img || image.cols() != c)
        throw std::invalid_argument("encode_pyramid: image shape " + image.shape_str() +
                                    " does not match configured " + std::to_string(img) + "x" +
                                    std::to_string(img) + "x" + std::to_string(c));
    FeaturePyramid pyr;
    Tensor* out[3] = {&pyr.f1, &pyr.f2, &pyr.f3};
    for (std::size_t lv = 0; lv < 3; ++lv) {
        Tensor patches = op::patchify(tape, image, img, img, c, patch_sizes_[lv]);
        Tensor tokens =
            op::add_rowvec(tape, op::matmul(tape, patches, patchify_[lv].first), patchify_[lv].second);
        *out[lv] = op::leaky_relu(tape, tokens);
    }
    return pyr;
}

Tensor StyleEncoder::invert(Tape* tape, const Tensor& image, bool use_self) const {
    FeaturePyramid pyr = encode_pyramid(tape, image);
    const Tensor* levels[3] = {&pyr.f1, &pyr.f2, &pyr.f3};
    Tensor w = init_queries(tape);
    for (std::size_t st = 0; st < 3; ++st) {
        const TransformerBlockParams& blk = blocks_[st];
        if (use_self) w = self_attention_block(tape, w, blk.self_attn, blk.ln_self);
        w = cross_attention_block(tape, w, *levels[st], blk.cross_attn, blk.ln_cross, blk.ffn,
                                  blk.ln_ffn);
    }
    return w;
}

ParamList StyleEncoder::params() {
    ParamList out{{"encoder.z", z_}};
    for (std::size_t l = 0; l < mapper_.size(); ++l) {
        out.push_back({"encoder.mapper." + std::to_string(l) + ".w", mapper_[l].first});
        out.push_back({"encoder.mapper." + std::to_string(l) + ".b", mapper_[l].second});
    }
    for (std::size_t lv = 0; lv < 3; ++lv) {
        out.push_back({"encoder.patchify." + std::to_string(lv) + ".w", patchify_[lv].first});
        out.push_back({"encoder.patchify." + std::to_string(lv) + ".b", patchify_[lv].second});
        ParamList blk = blocks_[lv].params("encoder.block." + std::to_string(lv));
        out.insert(out.end(), blk.begin(), blk.end());
    }
    return out;
}

}  // namespace stylet
