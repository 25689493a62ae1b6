#pragma once

#include <vector>

#include "stylet/attention.hpp"

namespace stylet {

// Adaptive-moment optimizer (beta1=0.9, beta2=0.999) with bias correction.
// One instance serves inversion, classifier and editor training.
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Applies one update from the accumulated gradients, then zeroes them.
    void step(ParamList& params);

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

    // Flat (m, v, t) state per parameter, for checkpointing.
    struct State {
        std::vector<double> m, v;
    };
    std::vector<State>& state() { return state_; }
    long t() const { return t_; }
    void set_t(long t) { t_ = t; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<State> state_;
};

}  // namespace stylet
