#include "stylet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stylet::ops {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
}

bool track(Tape* tape, const Tensor& a) { return tape && a.requires_grad(); }
bool track(Tape* tape, const Tensor& a, const Tensor& b) {
    return tape && (a.requires_grad() || b.requires_grad());
}

Tensor out_like(std::vector<std::size_t> shape, bool req) {
    Tensor t(std::move(shape));
    t.set_requires_grad(req);
    return t;
}

}  // namespace

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
        throw std::invalid_argument("matmul: incompatible shapes " + a.shape_str() + " and " +
                                    b.shape_str());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    bool req = track(tape, a, b);
    Tensor out = out_like({m, n}, req);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = a.at(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * b.at(p, j);
        }
    if (req) {
        tape->record([a, b, out, m, k, n]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * b.at(p, j);
                        ga[i * k + p] += s;
                    }
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t i = 0; i < m; ++i) {
                        double av = a.at(i, p);
                        if (av == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
                    }
            }
        });
    }
    return out;
}

Tensor transpose(Tape* tape, const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    bool req = track(tape, a);
    Tensor out = out_like({n, m}, req);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    if (req) {
        tape->record([a, out, m, n]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
        });
    }
    return out;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    bool req = track(tape, a, b);
    Tensor out = out_like(a.shape(), req);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values()[i] = a.values()[i] + b.values()[i];
    if (req) {
        tape->record([a, b, out]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    bool req = track(tape, a, b);
    Tensor out = out_like(a.shape(), req);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values()[i] = a.values()[i] - b.values()[i];
    if (req) {
        tape->record([a, b, out]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    bool req = track(tape, a, b);
    Tensor out = out_like(a.shape(), req);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values()[i] = a.values()[i] * b.values()[i];
    if (req) {
        tape->record([a, b, out]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.values()[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.values()[i];
            }
        });
    }
    return out;
}

Tensor div(Tape* tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "div");
    bool req = track(tape, a, b);
    Tensor out = out_like(a.shape(), req);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values()[i] = a.values()[i] / b.values()[i];
    if (req) {
        tape->record([a, b, out]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / b.values()[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double bv = b.values()[i];
                    gb[i] -= g[i] * a.values()[i] / (bv * bv);
                }
            }
        });
    }
    return out;
}

Tensor scale(Tape* tape, const Tensor& a, double c) {
    bool req = track(tape, a);
    Tensor out = out_like(a.shape(), req);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values()[i] = a.values()[i] * c;
    if (req) {
        tape->record([a, out, c]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
        });
    }
    return out;
}

Tensor add_scalar(Tape* tape, const Tensor& a, double c) {
    bool req = track(tape, a);
    Tensor out = out_like(a.shape(), req);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values()[i] = a.values()[i] + c;
    if (req) {
        tape->record([a, out]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }
    return out;
}

Tensor add_rowvec(Tape* tape, const Tensor& a, const Tensor& b) {
    if (b.rows() != 1 || b.cols() != a.cols())
        throw std::invalid_argument("add_rowvec: want {1," + std::to_string(a.cols()) +
                                    "}, got " + b.shape_str());
    const std::size_t m = a.rows(), n = a.cols();
    bool req = track(tape, a, b);
    Tensor out = out_like({m, n}, req);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) + b.values()[j];
    if (req) {
        tape->record([a, b, out, m, n]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
            }
        });
    }
    return out;
}

Tensor mul_rowvec(Tape* tape, const Tensor& a, const Tensor& b) {
    if (b.rows() != 1 || b.cols() != a.cols())
        throw std::invalid_argument("mul_rowvec: want {1," + std::to_string(a.cols()) +
                                    "}, got " + b.shape_str());
    const std::size_t m = a.rows(), n = a.cols();
    bool req = track(tape, a, b);
    Tensor out = out_like({m, n}, req);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) * b.values()[j];
    if (req) {
        tape->record([a, b, out, m, n]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * b.values()[j];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j] * a.at(i, j);
            }
        });
    }
    return out;
}

Tensor div_rowvec(Tape* tape, const Tensor& a, const Tensor& b) {
    if (b.rows() != 1 || b.cols() != a.cols())
        throw std::invalid_argument("div_rowvec: want {1," + std::to_string(a.cols()) +
                                    "}, got " + b.shape_str());
    const std::size_t m = a.rows(), n = a.cols();
    bool req = track(tape, a, b);
    Tensor out = out_like({m, n}, req);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) / b.values()[j];
    if (req) {
        tape->record([a, b, out, m, n]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] / b.values()[j];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t j = 0; j < n; ++j) {
                    double bv = b.values()[j];
                    double s = 0.0;
                    for (std::size_t i = 0; i < m; ++i) s += g[i * n + j] * a.at(i, j);
                    gb[j] -= s / (bv * bv);
                }
            }
        });
    }
    return out;
}

Tensor div_colvec(Tape* tape, const Tensor& a, const Tensor& v) {
    if (v.cols() != 1 || v.rows() != a.rows())
        throw std::invalid_argument("div_colvec: want {" + std::to_string(a.rows()) +
                                    ",1}, got " + v.shape_str());
    const std::size_t m = a.rows(), n = a.cols();
    bool req = track(tape, a, v);
    Tensor out = out_like({m, n}, req);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) / v.values()[i];
    if (req) {
        tape->record([a, v, out, m, n]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] / v.values()[i];
            }
            if (v.requires_grad()) {
                auto& gv = v.grad();
                for (std::size_t i = 0; i < m; ++i) {
                    double vi = v.values()[i];
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * a.at(i, j);
                    gv[i] -= s / (vi * vi);
                }
            }
        });
    }
    return out;
}

Tensor sigmoid(Tape* tape, const Tensor& a) {
    bool req = track(tape, a);
    Tensor out = out_like(a.shape(), req);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values()[i] = 1.0 / (1.0 + std::exp(-a.values()[i]));
    if (req) {
        tape->record([a, out]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                double s = out.values()[i];
                ga[i] += g[i] * s * (1.0 - s);
            }
        });
    }
    return out;
}

Tensor leaky_relu(Tape* tape, const Tensor& a, double slope) {
    bool req = track(tape, a);
    Tensor out = out_like(a.shape(), req);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        double x = a.values()[i];
        out.values()[i] = x >= 0.0 ? x : slope * x;
    }
    if (req) {
        tape->record([a, out, slope]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i] += g[i] * (a.values()[i] >= 0.0 ? 1.0 : slope);
        });
    }
    return out;
}

Tensor sqrt_ew(Tape* tape, const Tensor& a) {
    bool req = track(tape, a);
    Tensor out = out_like(a.shape(), req);
    for (std::size_t i = 0; i < a.numel(); ++i) out.values()[i] = std::sqrt(a.values()[i]);
    if (req) {
        tape->record([a, out]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 0.5 / out.values()[i];
        });
    }
    return out;
}

Tensor softmax_rows(Tape* tape, const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    bool req = track(tape, a);
    Tensor out = out_like({m, n}, req);
    for (std::size_t i = 0; i < m; ++i) {
        double mx = a.at(i, 0);
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a.at(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double e = std::exp(a.at(i, j) - mx);
            out.at(i, j) = e;
            z += e;
        }
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) /= z;
    }
    if (req) {
        tape->record([a, out, m, n]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * out.at(i, j);
                for (std::size_t j = 0; j < n; ++j)
                    ga[i * n + j] += out.at(i, j) * (g[i * n + j] - dot);
            }
        });
    }
    return out;
}

Tensor softmax_cols(Tape* tape, const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    bool req = track(tape, a);
    Tensor out = out_like({m, n}, req);
    for (std::size_t j = 0; j < n; ++j) {
        double mx = a.at(0, j);
        for (std::size_t i = 1; i < m; ++i) mx = std::max(mx, a.at(i, j));
        double z = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double e = std::exp(a.at(i, j) - mx);
            out.at(i, j) = e;
            z += e;
        }
        for (std::size_t i = 0; i < m; ++i) out.at(i, j) /= z;
    }
    if (req) {
        tape->record([a, out, m, n]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t j = 0; j < n; ++j) {
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) dot += g[i * n + j] * out.at(i, j);
                for (std::size_t i = 0; i < m; ++i)
                    ga[i * n + j] += out.at(i, j) * (g[i * n + j] - dot);
            }
        });
    }
    return out;
}

Tensor sum_rows(Tape* tape, const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    bool req = track(tape, a);
    Tensor out = out_like({m, 1}, req);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a.at(i, j);
        out.values()[i] = s;
    }
    if (req) {
        tape->record([a, out, m, n]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i];
        });
    }
    return out;
}

Tensor l2_norm_rows(Tape* tape, const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    bool req = track(tape, a);
    Tensor out = out_like({m, 1}, req);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a.at(i, j) * a.at(i, j);
        out.values()[i] = std::sqrt(s);
    }
    if (req) {
        tape->record([a, out, m, n]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t i = 0; i < m; ++i) {
                double r = out.values()[i];
                if (r == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i] * a.at(i, j) / r;
            }
        });
    }
    return out;
}

Tensor layer_norm_rows(Tape* tape, const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps) {
    const std::size_t m = a.rows(), n = a.cols();
    if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n)
        throw std::invalid_argument("layer_norm_rows: gain/bias must be {1," + std::to_string(n) +
                                    "}, got " + gain.shape_str() + " and " + bias.shape_str());
    bool req = tape && (a.requires_grad() || gain.requires_grad() || bias.requires_grad());
    Tensor out = out_like({m, n}, req);
    Tensor xhat({m, n});
    Tensor inv_std({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += a.at(i, j);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double d = a.at(i, j) - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        double is = 1.0 / std::sqrt(var + eps);
        inv_std.values()[i] = is;
        for (std::size_t j = 0; j < n; ++j) {
            double xh = (a.at(i, j) - mu) * is;
            xhat.at(i, j) = xh;
            out.at(i, j) = gain.values()[j] * xh + bias.values()[j];
        }
    }
    if (req) {
        tape->record([a, gain, bias, out, xhat, inv_std, m, n]() mutable {
            const auto& g = out.grad();
            if (gain.requires_grad()) {
                auto& gg = gain.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat.at(i, j);
            }
            if (bias.requires_grad()) {
                auto& gb = bias.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
            }
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < m; ++i) {
                    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        double dxh = g[i * n + j] * gain.values()[j];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xhat.at(i, j);
                    }
                    mean_dxhat /= static_cast<double>(n);
                    mean_dxhat_xhat /= static_cast<double>(n);
                    double is = inv_std.values()[i];
                    for (std::size_t j = 0; j < n; ++j) {
                        double dxh = g[i * n + j] * gain.values()[j];
                        ga[i * n + j] += is * (dxh - mean_dxhat - xhat.at(i, j) * mean_dxhat_xhat);
                    }
                }
            }
        });
    }
    return out;
}

Tensor sum_all(Tape* tape, const Tensor& a) {
    bool req = track(tape, a);
    Tensor out = out_like({1, 1}, req);
    double s = 0.0;
    for (double x : a.values()) s += x;
    out.values()[0] = s;
    if (req) {
        tape->record([a, out]() mutable {
            auto& ga = a.grad();
            double g = out.grad()[0];
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
    }
    return out;
}

Tensor mean_all(Tape* tape, const Tensor& a) {
    bool req = track(tape, a);
    Tensor out = out_like({1, 1}, req);
    double s = 0.0;
    for (double x : a.values()) s += x;
    out.values()[0] = s / static_cast<double>(a.numel());
    if (req) {
        tape->record([a, out]() mutable {
            auto& ga = a.grad();
            double g = out.grad()[0] / static_cast<double>(ga.size());
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
    }
    return out;
}

Tensor l2_norm(Tape* tape, const Tensor& a) {
    bool req = track(tape, a);
    Tensor out = out_like({1, 1}, req);
    double s = 0.0;
    for (double x : a.values()) s += x * x;
    out.values()[0] = std::sqrt(s);
    if (req) {
        tape->record([a, out]() mutable {
            double r = out.values()[0];
            if (r == 0.0) return;
            auto& ga = a.grad();
            double g = out.grad()[0];
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * a.values()[i] / r;
        });
    }
    return out;
}

Tensor bce(Tape* tape, const Tensor& p, const Tensor& target) {
    check_same_shape(p, target, "bce");
    for (double x : p.values())
        if (!(x > 0.0 && x < 1.0))
            throw std::domain_error("bce: probability " + std::to_string(x) +
                                    " outside open interval (0,1)");
    bool req = track(tape, p, target);
    Tensor out = out_like({1, 1}, req);
    const std::size_t n = p.numel();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double pv = p.values()[i], y = target.values()[i];
        s -= y * std::log(pv) + (1.0 - y) * std::log(1.0 - pv);
    }
    out.values()[0] = s / static_cast<double>(n);
    if (req) {
        tape->record([p, target, out, n]() mutable {
            double g = out.grad()[0] / static_cast<double>(n);
            if (p.requires_grad()) {
                auto& gp = p.grad();
                for (std::size_t i = 0; i < n; ++i) {
                    double pv = p.values()[i], y = target.values()[i];
                    gp[i] += g * (-y / pv + (1.0 - y) / (1.0 - pv));
                }
            }
            if (target.requires_grad()) {
                auto& gt = target.grad();
                for (std::size_t i = 0; i < n; ++i) {
                    double pv = p.values()[i];
                    gt[i] += g * (-std::log(pv) + std::log(1.0 - pv));
                }
            }
        });
    }
    return out;
}

Tensor bce_logits(Tape* tape, const Tensor& z, const Tensor& target) {
    check_same_shape(z, target, "bce_logits");
    bool req = track(tape, z, target);
    Tensor out = out_like({1, 1}, req);
    const std::size_t n = z.numel();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double zv = z.values()[i], y = target.values()[i];
        s += std::max(zv, 0.0) - zv * y + std::log1p(std::exp(-std::abs(zv)));
    }
    out.values()[0] = s / static_cast<double>(n);
    if (req) {
        tape->record([z, target, out, n]() mutable {
            double g = out.grad()[0] / static_cast<double>(n);
            if (z.requires_grad()) {
                auto& gz = z.grad();
                for (std::size_t i = 0; i < n; ++i) {
                    double zv = z.values()[i], y = target.values()[i];
                    double p = 1.0 / (1.0 + std::exp(-zv));
                    gz[i] += g * (p - y);
                }
            }
            if (target.requires_grad()) {
                auto& gt = target.grad();
                for (std::size_t i = 0; i < n; ++i) gt[i] += g * (-z.values()[i]);
            }
        });
    }
    return out;
}

Tensor slice_rows(Tape* tape, const Tensor& a, std::size_t r0, std::size_t r1) {
    if (r0 >= r1 || r1 > a.rows())
        throw std::invalid_argument("slice_rows: bad range [" + std::to_string(r0) + "," +
                                    std::to_string(r1) + ") for " + a.shape_str());
    const std::size_t n = a.cols(), m = r1 - r0;
    bool req = track(tape, a);
    Tensor out = out_like({m, n}, req);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(r0 + i, j);
    if (req) {
        tape->record([a, out, m, n, r0]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[(r0 + i) * n + j] += g[i * n + j];
        });
    }
    return out;
}

Tensor slice_cols(Tape* tape, const Tensor& a, std::size_t c0, std::size_t c1) {
    if (c0 >= c1 || c1 > a.cols())
        throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," +
                                    std::to_string(c1) + ") for " + a.shape_str());
    const std::size_t m = a.rows(), n = a.cols(), w = c1 - c0;
    bool req = track(tape, a);
    Tensor out = out_like({m, w}, req);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) out.at(i, j) = a.at(i, c0 + j);
    if (req) {
        tape->record([a, out, m, n, w, c0]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j) ga[i * n + c0 + j] += g[i * w + j];
        });
    }
    return out;
}

Tensor concat_cols(Tape* tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    const std::size_t m = parts[0].rows();
    std::size_t n = 0;
    bool req = false;
    for (const Tensor& p : parts) {
        if (p.rows() != m)
            throw std::invalid_argument("concat_cols: row mismatch " + p.shape_str());
        n += p.cols();
        req = req || (tape && p.requires_grad());
    }
    Tensor out = out_like({m, n}, req);
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < p.cols(); ++j) out.at(i, off + j) = p.at(i, j);
        off += p.cols();
    }
    if (req) {
        tape->record([parts, out, m, n]() mutable {
            const auto& g = out.grad();
            std::size_t off = 0;
            for (const Tensor& p : parts) {
                if (p.requires_grad()) {
                    auto& gp = p.grad();
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < p.cols(); ++j)
                            gp[i * p.cols() + j] += g[i * n + off + j];
                }
                off += p.cols();
            }
        });
    }
    return out;
}

Tensor reshape(Tape* tape, const Tensor& a, std::vector<std::size_t> shape) {
    if (Tensor::numel_of(shape) != a.numel())
        throw std::invalid_argument("reshape: element count mismatch for " + a.shape_str());
    bool req = track(tape, a);
    Tensor out = Tensor::from_values(std::move(shape), a.values());
    out.set_requires_grad(req);
    if (req) {
        tape->record([a, out]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }
    return out;
}

Tensor upsample2x(Tape* tape, const Tensor& a, std::size_t h, std::size_t w) {
    if (a.rows() != h * w)
        throw std::invalid_argument("upsample2x: rows != h*w for " + a.shape_str());
    const std::size_t c = a.cols(), H = 2 * h, W = 2 * w;
    bool req = track(tape, a);
    Tensor out = out_like({H * W, c}, req);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            std::size_t src = (y / 2) * w + (x / 2), dst = y * W + x;
            for (std::size_t j = 0; j < c; ++j) out.at(dst, j) = a.at(src, j);
        }
    if (req) {
        tape->record([a, out, h, w, c, H, W]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    std::size_t src = (y / 2) * w + (x / 2), dst = y * W + x;
                    for (std::size_t j = 0; j < c; ++j) ga[src * c + j] += g[dst * c + j];
                }
        });
    }
    return out;
}

Tensor patchify(Tape* tape, const Tensor& a, std::size_t h, std::size_t w, std::size_t c,
                std::size_t patch) {
    if (a.rows() != h * w || a.cols() != c)
        throw std::invalid_argument("patchify: image shape " + a.shape_str() + " does not match " +
                                    std::to_string(h) + "x" + std::to_string(w) + "x" +
                                    std::to_string(c));
    if (h % patch != 0 || w % patch != 0)
        throw std::invalid_argument("patchify: patch size " + std::to_string(patch) +
                                    " does not divide " + std::to_string(h) + "x" + std::to_string(w));
    const std::size_t gh = h / patch, gw = w / patch, pn = gh * gw, pw = patch * patch * c;
    bool req = track(tape, a);
    Tensor out = out_like({pn, pw}, req);
    for (std::size_t py = 0; py < gh; ++py)
        for (std::size_t px = 0; px < gw; ++px) {
            std::size_t row = py * gw + px;
            for (std::size_t dy = 0; dy < patch; ++dy)
                for (std::size_t dx = 0; dx < patch; ++dx)
                    for (std::size_t j = 0; j < c; ++j)
                        out.at(row, (dy * patch + dx) * c + j) =
                            a.at((py * patch + dy) * w + (px * patch + dx), j);
        }
    if (req) {
        tape->record([a, out, h, w, c, patch, gh, gw]() mutable {
            auto& ga = a.grad();
            const auto& g = out.grad();
            const std::size_t pw = patch * patch * c;
            for (std::size_t py = 0; py < gh; ++py)
                for (std::size_t px = 0; px < gw; ++px) {
                    std::size_t row = py * gw + px;
                    for (std::size_t dy = 0; dy < patch; ++dy)
                        for (std::size_t dx = 0; dx < patch; ++dx)
                            for (std::size_t j = 0; j < c; ++j)
                                ga[((py * patch + dy) * w + (px * patch + dx)) * c + j] +=
                                    g[row * pw + (dy * patch + dx) * c + j];
                }
        });
    }
    return out;
}

}  // namespace stylet::ops
