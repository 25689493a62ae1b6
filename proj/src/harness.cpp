#include "stylet/harness.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "stylet/hash.hpp"
#include "stylet/ops.hpp"

namespace stylet {

namespace op = ops;

SurrogateNets::SurrogateNets(const ModelConfig& cfg, std::uint64_t seed) {
    in_dim_ = cfg.img_size * cfg.img_size * cfg.img_channels;
    Rng rng = Rng::stream(seed, "surrogates");
    f_w1_ = Tensor::glorot(in_dim_, 128, rng);
    f_b1_ = Tensor::randn({1, 128}, rng, 0.05);
    f_w2_ = Tensor::glorot(128, 64, rng);
    f_b2_ = Tensor::randn({1, 64}, rng, 0.05);
    r_w_ = Tensor::glorot(in_dim_, 32, rng);
    r_b_ = Tensor::randn({1, 32}, rng, 0.05);
}

Tensor SurrogateNets::features(Tape* tape, const Tensor& image) const {
    Tensor x = op::reshape(tape, image, {1, in_dim_});
    Tensor h = op::leaky_relu(tape, op::add_rowvec(tape, op::matmul(tape, x, f_w1_), f_b1_));
    return op::add_rowvec(tape, op::matmul(tape, h, f_w2_), f_b2_);
}

Tensor SurrogateNets::id_vec(Tape* tape, const Tensor& image) const {
    Tensor x = op::reshape(tape, image, {1, in_dim_});
    return op::add_rowvec(tape, op::matmul(tape, x, r_w_), r_b_);
}

std::uint64_t SurrogateNets::checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const Tensor* t : {&f_w1_, &f_b1_, &f_w2_, &f_b2_, &r_w_, &r_b_}) h = fnv_tensor(h, *t);
    return h;
}

InversionLossTerms inversion_loss(Tape* tape, const Tensor& image, const Tensor& recon,
                                  const SurrogateNets& sur, const LossConfig& weights) {
    InversionLossTerms t;
    Tensor diff = op::sub(tape, recon, image);
    t.l2 = op::mean_all(tape, op::mul(tape, diff, diff));

    Tensor fd = op::sub(tape, sur.features(tape, recon), sur.features(tape, image));
    t.perceptual = op::l2_norm(tape, fd);

    Tensor ra = sur.id_vec(tape, image);
    Tensor rb = sur.id_vec(tape, recon);
    Tensor dot = op::sum_all(tape, op::mul(tape, ra, rb));
    Tensor denom = op::mul(tape, op::l2_norm(tape, ra), op::l2_norm(tape, rb));
    t.id = op::sub(tape, Tensor::scalar(1.0), op::div(tape, dot, denom));

    t.total = op::add(
        tape,
        op::add(tape, op::scale(tape, t.l2, weights.lambda_l2),
                op::scale(tape, t.perceptual, weights.lambda_lpips)),
        op::scale(tape, t.id, weights.lambda_id));
    return t;
}

InversionTrainResult train_inversion(StyleEncoder& enc, const ToyGenerator& gen,
                                     const SurrogateNets& sur, const std::vector<Tensor>& images,
                                     const Config& cfg, std::size_t steps, bool use_self,
                                     Adam* opt_out) {
    if (images.empty()) throw std::invalid_argument("train_inversion: no images");
    ParamList params = enc.params();
    Adam local_opt(cfg.train.invert_lr);
    Adam& opt = opt_out ? *opt_out : local_opt;
    Rng batch_rng = Rng::stream(cfg.seed, "invert.batches");
    const std::uint64_t gen_checksum = gen.checksum();

    InversionTrainResult result;
    result.loss_curve.reserve(steps);
    for (std::size_t step = 0; step < steps; ++step) {
        Tape tape;
        Tensor batch_total = Tensor::scalar(0.0);
        const std::size_t bs = std::min<std::size_t>(cfg.train.batch_size, images.size());
        InversionLossTerms last_terms;
        for (std::size_t b = 0; b < bs; ++b) {
            const Tensor& img = images[images.size() == 1 ? 0 : batch_rng.below(images.size())];
            Tensor w = enc.invert(&tape, img, use_self);
            Tensor recon = gen.synthesize(&tape, w);
            last_terms = inversion_loss(&tape, img, recon, sur, cfg.loss);
            batch_total = op::add(&tape, batch_total, last_terms.total);
        }
        batch_total = op::scale(&tape, batch_total, 1.0 / static_cast<double>(bs));
        double loss = batch_total.item();
        if (!std::isfinite(loss)) {
            double max_abs = 0.0;
            for (const NamedTensor& p : params)
                for (double x : p.tensor.values()) max_abs = std::max(max_abs, std::abs(x));
            throw std::runtime_error(
                "train_inversion: non-finite loss at step " + std::to_string(step) +
                " (l2=" + std::to_string(last_terms.l2.item()) +
                ", perceptual=" + std::to_string(last_terms.perceptual.item()) +
                ", id=" + std::to_string(last_terms.id.item()) +
                ", max|param|=" + std::to_string(max_abs) + ")");
        }
        result.loss_curve.push_back(loss);
        tape.backward(batch_total);
        opt.step(params);
    }
    if (gen.checksum() != gen_checksum)
        throw std::logic_error("train_inversion: frozen generator was mutated");
    return result;
}

}  // namespace stylet
