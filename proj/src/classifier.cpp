#include "stylet/classifier.hpp"

#include <algorithm>
#include <stdexcept>

#include "stylet/hash.hpp"
#include "stylet/ops.hpp"
#include "stylet/optim.hpp"

namespace stylet {

namespace op = ops;

LatentClassifier::LatentClassifier(const ModelConfig& cfg, std::uint64_t seed)
    : n_attrs_(cfg.n_attrs), in_dim_(cfg.n_styles * cfg.dim), embed_dim_(cfg.embed_dim) {
    Rng rng = Rng::stream(seed, "classifier");
    const std::size_t widths[5] = {in_dim_, 256, 128, 64, 64};
    for (std::size_t l = 0; l < 4; ++l) {
        Tensor w = Tensor::glorot(widths[l], widths[l + 1], rng).set_requires_grad();
        Tensor b = Tensor({1, widths[l + 1]}, 0.0);
        b.set_requires_grad();
        trunk_.emplace_back(w, b);
    }
    branches_.resize(n_attrs_);
    for (Branch& br : branches_) {
        br.embed_w = Tensor::glorot(64, embed_dim_, rng).set_requires_grad();
        br.embed_b = Tensor({1, embed_dim_}, 0.0);
        br.embed_b.set_requires_grad();
        br.logit_w = Tensor::glorot(embed_dim_, 1, rng).set_requires_grad();
        br.logit_b = Tensor({1, 1}, 0.0);
        br.logit_b.set_requires_grad();
    }
}

Tensor LatentClassifier::trunk_forward(Tape* tape, const Tensor& w) const {
    Tensor x = op::reshape(tape, w, {1, in_dim_});
    for (const auto& [weight, bias] : trunk_)
        x = op::leaky_relu(tape, op::add_rowvec(tape, op::matmul(tape, x, weight), bias));
    return x;
}

Tensor LatentClassifier::embed(Tape* tape, const Tensor& w, std::size_t k) const {
    if (k >= n_attrs_)
        throw std::out_of_range("classifier: attribute " + std::to_string(k) + " out of range [0," +
                                std::to_string(n_attrs_) + ")");
    const Branch& br = branches_[k];
    return op::add_rowvec(tape, op::matmul(tape, trunk_forward(tape, w), br.embed_w), br.embed_b);
}

Tensor LatentClassifier::logit(Tape* tape, const Tensor& w, std::size_t k) const {
    const Branch& br = branches_.at(k);
    Tensor e = embed(tape, w, k);
    return op::sigmoid(tape, op::add(tape, op::matmul(tape, e, br.logit_w), br.logit_b));
}

Tensor LatentClassifier::raw_logits(Tape* tape, const Tensor& w) const {
    Tensor trunk = trunk_forward(tape, w);
    std::vector<Tensor> per_attr;
    per_attr.reserve(n_attrs_);
    for (std::size_t k = 0; k < n_attrs_; ++k) {
        const Branch& br = branches_[k];
        Tensor e = op::add_rowvec(tape, op::matmul(tape, trunk, br.embed_w), br.embed_b);
        per_attr.push_back(op::add(tape, op::matmul(tape, e, br.logit_w), br.logit_b));
    }
    return op::concat_cols(tape, per_attr);
}

Tensor LatentClassifier::logits(Tape* tape, const Tensor& w) const {
    return op::sigmoid(tape, raw_logits(tape, w));
}

ParamList LatentClassifier::params() {
    ParamList out;
    for (std::size_t l = 0; l < trunk_.size(); ++l) {
        out.push_back({"classifier.trunk." + std::to_string(l) + ".w", trunk_[l].first});
        out.push_back({"classifier.trunk." + std::to_string(l) + ".b", trunk_[l].second});
    }
    for (std::size_t k = 0; k < branches_.size(); ++k) {
        std::string p = "classifier.branch." + std::to_string(k);
        out.push_back({p + ".embed_w", branches_[k].embed_w});
        out.push_back({p + ".embed_b", branches_[k].embed_b});
        out.push_back({p + ".logit_w", branches_[k].logit_w});
        out.push_back({p + ".logit_b", branches_[k].logit_b});
    }
    return out;
}

std::uint64_t LatentClassifier::checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& [w, b] : trunk_) {
        h = fnv_tensor(h, w);
        h = fnv_tensor(h, b);
    }
    for (const Branch& br : branches_) {
        h = fnv_tensor(h, br.embed_w);
        h = fnv_tensor(h, br.embed_b);
        h = fnv_tensor(h, br.logit_w);
        h = fnv_tensor(h, br.logit_b);
    }
    return h;
}

void LatentClassifier::zero_logit_head(std::size_t k) {
    Branch& br = branches_.at(k);
    std::fill(br.logit_w.values().begin(), br.logit_w.values().end(), 0.0);
    std::fill(br.logit_b.values().begin(), br.logit_b.values().end(), 0.0);
}

void LatentClassifier::nudge_branch(std::size_t k, double delta) {
    Branch& br = branches_.at(k);
    for (double& x : br.embed_w.values()) x += delta;
    for (double& x : br.logit_w.values()) x += delta;
}

TrainCurve train_classifier(LatentClassifier& clf, const LatentDataset& ds, std::size_t epochs,
                            double lr, std::size_t batch_size) {
    if (ds.codes.empty()) throw std::invalid_argument("train_classifier: empty dataset");
    ParamList params = clf.params();
    Adam opt(lr);
    TrainCurve curve;
    const std::size_t count = ds.codes.size();
    const std::size_t k = clf.n_attrs();
    Rng shuffle_rng(0x5eed5eedull);
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    // Entry 0 is the untrained loss (~ln 2 with near-zero initial logits).
    {
        double initial = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            Tensor target({1, k});
            for (std::size_t a = 0; a < k; ++a) target.values()[a] = ds.labels[i][a];
            initial += op::bce_logits(nullptr, clf.raw_logits(nullptr, ds.codes[i]), target).item();
        }
        curve.loss_per_epoch.push_back(initial / static_cast<double>(count));
    }
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        // Fisher-Yates with the deterministic stream.
        for (std::size_t i = count - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.below(i + 1)]);
        double epoch_loss = 0.0;
        std::size_t pos = 0;
        while (pos < count) {
            std::size_t bend = std::min(pos + batch_size, count);
            Tape tape;
            Tensor batch_loss = Tensor::scalar(0.0);
            for (std::size_t b = pos; b < bend; ++b) {
                const std::size_t i = order[b];
                Tensor target({1, k});
                for (std::size_t a = 0; a < k; ++a) target.values()[a] = ds.labels[i][a];
                Tensor z = clf.raw_logits(&tape, ds.codes[i]);
                batch_loss = op::add(&tape, batch_loss, op::bce_logits(&tape, z, target));
            }
            batch_loss = op::scale(&tape, batch_loss, 1.0 / static_cast<double>(bend - pos));
            epoch_loss += batch_loss.item() * static_cast<double>(bend - pos);
            tape.backward(batch_loss);
            opt.step(params);
            pos = bend;
        }
        curve.loss_per_epoch.push_back(epoch_loss / static_cast<double>(count));
    }
    return curve;
}

std::vector<double> classifier_accuracy(const LatentClassifier& clf, const LatentDataset& ds,
                                        std::size_t begin, std::size_t end) {
    std::vector<double> acc(clf.n_attrs(), 0.0);
    for (std::size_t i = begin; i < end; ++i) {
        Tensor p = clf.logits(nullptr, ds.codes[i]);
        for (std::size_t a = 0; a < clf.n_attrs(); ++a)
            if ((p.values()[a] > 0.5 ? 1 : 0) == ds.labels[i][a]) acc[a] += 1.0;
    }
    for (double& a : acc) a /= static_cast<double>(end - begin);
    return acc;
}

}  // namespace stylet
