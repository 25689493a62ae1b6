#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylet/rng.hpp"

namespace stylet {

// Dense row-major float64 tensor. At most 2-D in practice: shape {m} is a
// vector, {m, n} a matrix. Gradient storage (adjoint) lives next to the
// values and is allocated lazily when a tensor participates in a taped
// computation with requires_grad set.
class Tensor {
public:
    struct Data {
        std::vector<std::size_t> shape;
        std::vector<double> v;
        std::vector<double> g;  // adjoint; empty until needed
        bool requires_grad = false;
    };

    Tensor() : d_(std::make_shared<Data>()) {}

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : d_(std::make_shared<Data>()) {
        d_->shape = std::move(shape);
        d_->v.assign(numel_of(d_->shape), fill);
    }

    static Tensor scalar(double x) {
        Tensor t({1, 1});
        t.d_->v[0] = x;
        return t;
    }

    static Tensor from_values(std::vector<std::size_t> shape, std::vector<double> values) {
        Tensor t;
        if (numel_of(shape) != values.size())
            throw std::invalid_argument("tensor: shape/value length mismatch");
        t.d_->shape = std::move(shape);
        t.d_->v = std::move(values);
        return t;
    }

    static Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0) {
        Tensor t(std::move(shape));
        for (double& x : t.d_->v) x = stddev * rng.gaussian();
        return t;
    }

    // Glorot-style uniform init for a fan_in x fan_out projection.
    static Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
        double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Tensor t({fan_in, fan_out});
        for (double& x : t.d_->v) x = rng.uniform(-limit, limit);
        return t;
    }

    const std::vector<std::size_t>& shape() const { return d_->shape; }
    std::size_t ndim() const { return d_->shape.size(); }
    std::size_t numel() const { return d_->v.size(); }
    std::size_t rows() const { return d_->shape.empty() ? 0 : d_->shape[0]; }
    std::size_t cols() const { return d_->shape.size() < 2 ? 1 : d_->shape[1]; }
    bool is_scalar() const { return numel() == 1; }

    std::vector<double>& values() { return d_->v; }
    const std::vector<double>& values() const { return d_->v; }

    double& at(std::size_t i, std::size_t j) { return d_->v[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return d_->v[i * cols() + j]; }
    double item() const {
        if (!is_scalar()) throw std::logic_error("item() on non-scalar tensor");
        return d_->v[0];
    }

    bool requires_grad() const { return d_->requires_grad; }
    Tensor& set_requires_grad(bool b = true) {
        d_->requires_grad = b;
        return *this;
    }

    bool has_grad() const { return !d_->g.empty(); }
    // Tensor is a shared handle; adjoint access is shallow-const.
    std::vector<double>& grad() const {
        if (d_->g.empty()) d_->g.assign(d_->v.size(), 0.0);
        return d_->g;
    }
    void zero_grad() const {
        if (!d_->g.empty()) d_->g.assign(d_->v.size(), 0.0);
    }

    // Deep copy of values (fresh node, no grad, no history).
    Tensor clone() const {
        Tensor t;
        t.d_->shape = d_->shape;
        t.d_->v = d_->v;
        return t;
    }

    bool same_node(const Tensor& o) const { return d_ == o.d_; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < d_->shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(d_->shape[i]);
        }
        return s + "]";
    }

    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t s : shape) n *= s;
        return n;
    }

private:
    std::shared_ptr<Data> d_;
};

// Records the backward rule of every primitive executed on it, in forward
// order. backward() replays them in reverse once; a second call without a
// fresh tape is an error.
class Tape {
public:
    void record(std::function<void()> backward_rule) {
        ops_.push_back(std::move(backward_rule));
    }

    std::size_t size() const { return ops_.size(); }

    // Seeds the scalar loss adjoint with 1 and replays all recorded rules
    // in reverse order. Leaves with requires_grad end up with accumulated
    // adjoints.
    void backward(Tensor loss) {
        if (!loss.is_scalar())
            throw std::invalid_argument("backward: loss must be scalar, got " + loss.shape_str());
        if (consumed_)
            throw std::logic_error("backward: tape already consumed; build a fresh graph");
        consumed_ = true;
        loss.grad()[0] += 1.0;
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    }

    void reset() {
        ops_.clear();
        consumed_ = false;
    }

private:
    std::vector<std::function<void()>> ops_;
    bool consumed_ = false;
};

}  // namespace stylet
