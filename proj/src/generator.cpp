#include "stylet/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stylet/hash.hpp"

namespace stylet {

namespace op = ops;

ToyGenerator::ToyGenerator(const ModelConfig& cfg, std::uint64_t seed) {
    n_layers_ = cfg.n_styles;
    dim_ = cfg.dim;
    channels_ = cfg.gen_channels;
    img_size_ = cfg.img_size;
    const std::size_t stages = n_layers_ / 2;
    base_size_ = img_size_ >> (stages - 1);
    if (base_size_ == 0 || (base_size_ << (stages - 1)) != img_size_)
        throw std::invalid_argument("generator: img_size " + std::to_string(img_size_) +
                                    " incompatible with " + std::to_string(stages) + " stages");

    Rng rng = Rng::stream(seed, "generator");
    const_input_ = Tensor::randn({base_size_ * base_size_, channels_}, rng);
    double wscale = 1.0 / std::sqrt(static_cast<double>(channels_));
    double ascale = 0.25 / std::sqrt(static_cast<double>(dim_));
    layers_.resize(n_layers_);
    for (std::size_t n = 0; n < n_layers_; ++n) {
        Layer& l = layers_[n];
        l.affine = Tensor::randn({dim_, channels_}, rng, ascale);
        l.affine_bias = Tensor::randn({1, channels_}, rng, 0.05);
        l.weight = Tensor::randn({channels_, channels_}, rng, wscale);
        l.weight_sq = Tensor({channels_, channels_});
        for (std::size_t i = 0; i < l.weight.numel(); ++i)
            l.weight_sq.values()[i] = l.weight.values()[i] * l.weight.values()[i];
        l.upsample_before = (n >= 2) && (n % 2 == 0);
    }
    out_proj_ = Tensor::randn({channels_, 3}, rng, wscale);
    out_bias_ = Tensor::randn({1, 3}, rng, 0.05);
}

Tensor ToyGenerator::synthesize(Tape* tape, const Tensor& w) const {
    if (w.rows() != n_layers_ || w.cols() != dim_)
        throw std::invalid_argument("synthesize: style code " + w.shape_str() + ", want {" +
                                    std::to_string(n_layers_) + "," + std::to_string(dim_) + "}");
    constexpr double kDemodEps = 1e-8;
    Tensor x = const_input_;
    std::size_t res = base_size_;
    for (std::size_t n = 0; n < n_layers_; ++n) {
        const Layer& l = layers_[n];
        if (l.upsample_before) {
            x = op::upsample2x(tape, x, res, res);
            res *= 2;
        }
        Tensor wn = op::slice_rows(tape, w, n, n + 1);
        // s = A(w_n) + bias + 1: zero style stays near identity modulation.
        Tensor s = op::add_scalar(tape, op::add(tape, op::matmul(tape, wn, l.affine), l.affine_bias), 1.0);
        Tensor y = op::matmul(tape, op::mul_rowvec(tape, x, s), l.weight);
        // Demodulate per output channel by the RMS of the modulated weights.
        Tensor rms = op::sqrt_ew(
            tape, op::add_scalar(tape, op::matmul(tape, op::mul(tape, s, s), l.weight_sq), kDemodEps));
        x = op::leaky_relu(tape, op::div_rowvec(tape, y, rms));
    }
    return op::add_rowvec(tape, op::matmul(tape, x, out_proj_), out_bias_);
}

std::uint64_t ToyGenerator::checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    h = fnv_tensor(h, const_input_);
    for (const Layer& l : layers_) {
        h = fnv_tensor(h, l.affine);
        h = fnv_tensor(h, l.affine_bias);
        h = fnv_tensor(h, l.weight);
    }
    h = fnv_tensor(h, out_proj_);
    h = fnv_tensor(h, out_bias_);
    return h;
}

void ToyGenerator::zero_affine(std::size_t layer) {
    Layer& l = layers_.at(layer);
    std::fill(l.affine.values().begin(), l.affine.values().end(), 0.0);
    std::fill(l.affine_bias.values().begin(), l.affine_bias.values().end(), 0.0);
}

LatentDataset sample_latent_dataset(const ToyGenerator& gen, const ModelConfig& cfg,
                                    std::size_t count, std::uint64_t seed, bool render_images) {
    if (count < 1) throw std::invalid_argument("sample_latent_dataset: count must be >= 1");
    const std::size_t n = cfg.n_styles, d = cfg.dim, k = cfg.n_attrs;

    // A fixed two-layer MLP pushes Gaussian rows away from the raw prior,
    // mimicking a mapped latent distribution.
    Rng mlp_rng = Rng::stream(seed, "data.mlp");
    Tensor w1 = Tensor::randn({d, d}, mlp_rng, 1.0 / std::sqrt(double(d)));
    Tensor b1 = Tensor::randn({1, d}, mlp_rng, 0.1);
    Tensor w2 = Tensor::randn({d, d}, mlp_rng, 1.0 / std::sqrt(double(d)));
    Tensor b2 = Tensor::randn({1, d}, mlp_rng, 0.1);

    Rng z_rng = Rng::stream(seed, "data.z");
    LatentDataset ds;
    ds.codes.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Tensor z = Tensor::randn({n, d}, z_rng);
        Tensor h = op::leaky_relu(nullptr, op::add_rowvec(nullptr, op::matmul(nullptr, z, w1), b1));
        ds.codes.push_back(op::add_rowvec(nullptr, op::matmul(nullptr, h, w2), b2));
    }

    if (render_images) {
        ds.images.reserve(count);
        for (const Tensor& w : ds.codes) ds.images.push_back(gen.synthesize(nullptr, w));
    }

    Rng f_rng = Rng::stream(seed, "data.functionals");
    ds.functionals.reserve(k);
    for (std::size_t a = 0; a < k; ++a) {
        Tensor f = Tensor::randn({1, n * d}, f_rng);
        double norm = 0.0;
        for (double x : f.values()) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : f.values()) x /= norm;
        ds.functionals.push_back(f);
    }

    ds.labels.assign(count, std::vector<int>(k, 0));
    ds.thresholds.resize(k);
    for (std::size_t a = 0; a < k; ++a) {
        std::vector<double> scores(count);
        for (std::size_t i = 0; i < count; ++i) {
            double s = 0.0;
            const auto& wv = ds.codes[i].values();
            const auto& fv = ds.functionals[a].values();
            for (std::size_t j = 0; j < wv.size(); ++j) s += wv[j] * fv[j];
            scores[i] = s;
        }
        std::vector<double> sorted = scores;
        std::sort(sorted.begin(), sorted.end());
        double median = count % 2 == 1 ? sorted[count / 2]
                                       : 0.5 * (sorted[count / 2 - 1] + sorted[count / 2]);
        ds.thresholds[a] = median;
        for (std::size_t i = 0; i < count; ++i) ds.labels[i][a] = scores[i] > median ? 1 : 0;
    }
    return ds;
}

}  // namespace stylet
