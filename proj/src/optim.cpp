#include "stylet/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace stylet {

void Adam::step(ParamList& params) {
    if (state_.empty()) {
        state_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state_[i].m.assign(params[i].tensor.numel(), 0.0);
            state_[i].v.assign(params[i].tensor.numel(), 0.0);
        }
    }
    if (state_.size() != params.size())
        throw std::logic_error("adam: parameter list changed size mid-training");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i].tensor;
        if (!p.has_grad()) continue;
        auto& m = state_[i].m;
        auto& v = state_[i].v;
        auto& g = p.grad();
        auto& x = p.values();
        for (std::size_t j = 0; j < x.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            x[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
        }
        p.zero_grad();
    }
}

}  // namespace stylet
