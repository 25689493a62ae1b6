#include "stylet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stylet/rng.hpp"

namespace stylet {

double mse(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("mse: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        double d = a.values()[i] - b.values()[i];
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

std::vector<double> logit_sigmas(const AttributeEvaluator& eval, const std::vector<Tensor>& codes) {
    if (codes.empty()) throw std::invalid_argument("logit_sigmas: empty code sample");
    std::vector<std::vector<double>> logits;
    logits.reserve(codes.size());
    for (const Tensor& c : codes) logits.push_back(eval(c));
    const std::size_t k = logits[0].size();
    std::vector<double> sigma(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        double mean = 0.0;
        for (const auto& l : logits) mean += l[a];
        mean /= static_cast<double>(logits.size());
        double var = 0.0;
        for (const auto& l : logits) {
            double d = l[a] - mean;
            var += d * d;
        }
        sigma[a] = std::sqrt(var / static_cast<double>(logits.size()));
    }
    return sigma;
}

ADReport mean_ad(const std::vector<Tensor>& codes, std::size_t k, std::vector<double> steps,
                 const EditFn& editor, const AttributeEvaluator& eval,
                 const std::vector<double>& sigma) {
    for (std::size_t a = 0; a < sigma.size(); ++a)
        if (sigma[a] < 1e-9)
            throw std::invalid_argument("mean_ad: degenerate attribute " + std::to_string(a) +
                                     " (sigma < 1e-9)");
    std::sort(steps.begin(), steps.end());
    ADReport report;
    report.attribute = k;
    report.steps = steps;

    std::vector<std::vector<double>> before;
    before.reserve(codes.size());
    for (const Tensor& c : codes) before.push_back(eval(c));

    for (double alpha : steps) {
        double target = 0.0, others = 0.0;
        for (std::size_t i = 0; i < codes.size(); ++i) {
            std::vector<double> after =
                alpha == 0.0 ? before[i] : eval(editor(codes[i], alpha));
            double off = 0.0;
            std::size_t off_count = 0;
            for (std::size_t a = 0; a < after.size(); ++a) {
                double nd = std::abs(after[a] - before[i][a]) / sigma[a];
                if (a == k) {
                    target += nd;
                } else {
                    off += nd;
                    ++off_count;
                }
            }
            others += off_count ? off / static_cast<double>(off_count) : 0.0;
        }
        report.target_change.push_back(target / static_cast<double>(codes.size()));
        report.mean_ad.push_back(others / static_cast<double>(codes.size()));
    }
    return report;
}

std::vector<double> rescoring(const std::vector<Tensor>& codes, const EditFn& editor, double alpha,
                              const AttributeEvaluator& eval) {
    if (codes.empty()) throw std::invalid_argument("rescoring: empty code set");
    std::vector<double> delta;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        std::vector<double> before = eval(codes[i]);
        std::vector<double> after = alpha == 0.0 ? before : eval(editor(codes[i], alpha));
        if (delta.empty()) delta.assign(before.size(), 0.0);
        for (std::size_t a = 0; a < before.size(); ++a) delta[a] += after[a] - before[a];
    }
    for (double& d : delta) d /= static_cast<double>(codes.size());
    return delta;
}

double swd(const std::vector<std::vector<double>>& samples_a,
           const std::vector<std::vector<double>>& samples_b, std::size_t projections,
           std::uint64_t seed) {
    if (projections < 1) throw std::invalid_argument("swd: need at least one projection");
    if (samples_a.empty() || samples_a.size() != samples_b.size())
        throw std::invalid_argument("swd: sample counts must match and be non-empty (" +
                                    std::to_string(samples_a.size()) + " vs " +
                                    std::to_string(samples_b.size()) + ")");
    const std::size_t dim = samples_a[0].size(), n = samples_a.size();
    for (const auto& s : samples_a)
        if (s.size() != dim) throw std::invalid_argument("swd: inconsistent vector width");
    for (const auto& s : samples_b)
        if (s.size() != dim) throw std::invalid_argument("swd: inconsistent vector width");

    Rng rng = Rng::stream(seed, "swd");
    std::vector<double> pa(n), pb(n), theta(dim);
    double total = 0.0;
    for (std::size_t p = 0; p < projections; ++p) {
        double norm = 0.0;
        for (double& t : theta) {
            t = rng.gaussian();
            norm += t * t;
        }
        norm = std::sqrt(norm);
        for (double& t : theta) t /= norm;
        for (std::size_t i = 0; i < n; ++i) {
            double da = 0.0, db = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                da += samples_a[i][j] * theta[j];
                db += samples_b[i][j] * theta[j];
            }
            pa[i] = da;
            pb[i] = db;
        }
        std::sort(pa.begin(), pa.end());
        std::sort(pb.begin(), pb.end());
        double w1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) w1 += std::abs(pa[i] - pb[i]);
        total += w1 / static_cast<double>(n);
    }
    return total / static_cast<double>(projections);
}

ImageProbes::ImageProbes(const ToyGenerator& gen, const LatentDataset& ds, std::size_t epochs,
                         double lr) {
    if (ds.images.empty())
        throw std::invalid_argument("image probes: dataset was sampled without rendered images");
    const std::size_t k = ds.labels[0].size();
    const std::size_t dim = ds.images[0].numel();
    const std::size_t count = ds.images.size();
    weights_.assign(k, std::vector<double>(dim, 0.0));
    biases_.assign(k, 0.0);
    // Plain full-batch logistic regression; the gradient is (p - y) * x.
    for (std::size_t a = 0; a < k; ++a) {
        auto& w = weights_[a];
        for (std::size_t e = 0; e < epochs; ++e) {
            std::vector<double> gw(dim, 0.0);
            double gb = 0.0;
            for (std::size_t i = 0; i < count; ++i) {
                const auto& x = ds.images[i].values();
                double z = biases_[a];
                for (std::size_t j = 0; j < dim; ++j) z += w[j] * x[j];
                double p = 1.0 / (1.0 + std::exp(-z));
                double err = p - static_cast<double>(ds.labels[i][a]);
                for (std::size_t j = 0; j < dim; ++j) gw[j] += err * x[j];
                gb += err;
            }
            double inv = lr / static_cast<double>(count);
            for (std::size_t j = 0; j < dim; ++j) w[j] -= inv * gw[j];
            biases_[a] -= inv * gb;
        }
    }
    (void)gen;
}

std::vector<double> ImageProbes::logits_for_image(const Tensor& image) const {
    std::vector<double> out(weights_.size());
    for (std::size_t a = 0; a < weights_.size(); ++a) {
        double z = biases_[a];
        const auto& x = image.values();
        for (std::size_t j = 0; j < weights_[a].size(); ++j) z += weights_[a][j] * x[j];
        out[a] = z;
    }
    return out;
}

AttributeEvaluator ImageProbes::evaluator(const ToyGenerator& gen) const {
    return [this, &gen](const Tensor& code) { return logits_for_image(gen.synthesize(nullptr, code)); };
}

}  // namespace stylet
