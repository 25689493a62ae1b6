#include <cmath>
#include <vector>

#include "doctest.h"
#include "fd_check.hpp"
#include "stylet/attention.hpp"
#include "stylet/ops.hpp"
#include "stylet/rng.hpp"
#include "stylet/tensor.hpp"

using namespace stylet;
namespace op = stylet::ops;

namespace {

// Independent scalar multi-head attention: explicit loops, no tensor ops.
Tensor naive_mha(const Tensor& q, const Tensor& kv_k, const Tensor& kv_v, const Tensor& wq,
                 const Tensor& wk, const Tensor& wv, const Tensor& wo, std::size_t heads) {
    const std::size_t a = q.rows(), b = kv_k.rows(), dm = q.cols(), d = dm / heads;
    auto proj = [&](const Tensor& x, const Tensor& w, std::size_t i, std::size_t h,
                    std::size_t c) {
        double s = 0.0;
        for (std::size_t t = 0; t < dm; ++t) s += x.at(i, t) * w.at(t, h * d + c);
        return s;
    };
    Tensor concat({a, dm});
    for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < a; ++i) {
            std::vector<double> scores(b, 0.0);
            double mx = -1e300;
            for (std::size_t j = 0; j < b; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < d; ++c)
                    s += proj(q, wq, i, h, c) * proj(kv_k, wk, j, h, c);
                scores[j] = s / std::sqrt(static_cast<double>(d));
                mx = std::max(mx, scores[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j < b; ++j) {
                scores[j] = std::exp(scores[j] - mx);
                z += scores[j];
            }
            for (std::size_t c = 0; c < d; ++c) {
                double out = 0.0;
                for (std::size_t j = 0; j < b; ++j)
                    out += scores[j] / z * proj(kv_v, wv, j, h, c);
                concat.at(i, h * d + c) = out;
            }
        }
    }
    Tensor out({a, dm});
    for (std::size_t i = 0; i < a; ++i)
        for (std::size_t c = 0; c < dm; ++c) {
            double s = 0.0;
            for (std::size_t t = 0; t < dm; ++t) s += concat.at(i, t) * wo.at(t, c);
            out.at(i, c) = s;
        }
    return out;
}

AttentionParams random_attn(std::size_t dim, std::size_t heads, Rng& rng) {
    return AttentionParams::init(dim, heads, rng);
}

}  // namespace

TEST_CASE("multi-head attention matches scalar oracle") {
    Rng rng(101);
    for (int trial = 0; trial < 5; ++trial) {
        AttentionParams p = random_attn(4, 2, rng);
        Tensor q = Tensor::randn({3, 4}, rng);
        Tensor k = Tensor::randn({3, 4}, rng);
        Tensor v = Tensor::randn({3, 4}, rng);
        Tensor got = multi_head_attention(nullptr, op::matmul(nullptr, q, p.wq),
                                          op::matmul(nullptr, k, p.wk),
                                          op::matmul(nullptr, v, p.wv), p);
        Tensor want = naive_mha(q, k, v, p.wq, p.wk, p.wv, p.wo, 2);
        double mx = 0.0;
        for (std::size_t i = 0; i < got.numel(); ++i)
            mx = std::max(mx, std::abs(got.values()[i] - want.values()[i]));
        CHECK(mx < 1e-12);
    }
}

TEST_CASE("single key: output is that value row for every query") {
    Rng rng(102);
    AttentionParams p = random_attn(8, 4, rng);
    Tensor q = Tensor::randn({5, 8}, rng);
    Tensor kv = Tensor::randn({1, 8}, rng);
    Tensor got = multi_head_attention(nullptr, op::matmul(nullptr, q, p.wq),
                                      op::matmul(nullptr, kv, p.wk),
                                      op::matmul(nullptr, kv, p.wv), p);
    // With one key the softmax weight is 1 regardless of the query, so each
    // output row equals kv * wv * wo.
    Tensor want = op::matmul(nullptr, op::matmul(nullptr, kv, p.wv), p.wo);
    for (std::size_t i = 0; i < got.rows(); ++i)
        for (std::size_t j = 0; j < got.cols(); ++j)
            CHECK(std::abs(got.at(i, j) - want.at(0, j)) < 1e-12);
}

TEST_CASE("identical key rows give uniform attention") {
    Rng rng(103);
    AttentionParams p = random_attn(8, 2, rng);
    Tensor q = Tensor::randn({3, 8}, rng);
    Tensor row = Tensor::randn({1, 8}, rng);
    Tensor k({4, 8});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 8; ++j) k.at(i, j) = row.at(0, j);
    Tensor v = Tensor::randn({4, 8}, rng);
    Tensor got = multi_head_attention(nullptr, op::matmul(nullptr, q, p.wq),
                                      op::matmul(nullptr, k, p.wk),
                                      op::matmul(nullptr, v, p.wv), p);
    // Uniform weights average the value rows before projection.
    Tensor vbar({1, 8});
    for (std::size_t j = 0; j < 8; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i) s += v.at(i, j);
        vbar.at(0, j) = s / 4.0;
    }
    Tensor want = op::matmul(nullptr, op::matmul(nullptr, vbar, p.wv), p.wo);
    for (std::size_t i = 0; i < got.rows(); ++i)
        for (std::size_t j = 0; j < got.cols(); ++j)
            CHECK(std::abs(got.at(i, j) - want.at(0, j)) < 1e-9);
}

TEST_CASE("attention is equivariant in queries and invariant to key permutation") {
    Rng rng(104);
    AttentionParams p = random_attn(8, 4, rng);
    Tensor q = Tensor::randn({4, 8}, rng);
    Tensor k = Tensor::randn({5, 8}, rng);
    Tensor v = Tensor::randn({5, 8}, rng);
    auto mha = [&](const Tensor& qq, const Tensor& kk, const Tensor& vv) {
        return multi_head_attention(nullptr, op::matmul(nullptr, qq, p.wq),
                                    op::matmul(nullptr, kk, p.wk),
                                    op::matmul(nullptr, vv, p.wv), p);
    };
    Tensor base = mha(q, k, v);

    std::vector<std::size_t> qperm = {2, 0, 3, 1};
    Tensor qp({4, 8});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 8; ++j) qp.at(i, j) = q.at(qperm[i], j);
    Tensor out_q = mha(qp, k, v);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            CHECK(std::abs(out_q.at(i, j) - base.at(qperm[i], j)) <= 1e-12);

    std::vector<std::size_t> kperm = {4, 2, 0, 1, 3};
    Tensor kp({5, 8}), vp({5, 8});
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
            kp.at(i, j) = k.at(kperm[i], j);
            vp.at(i, j) = v.at(kperm[i], j);
        }
    Tensor out_k = mha(q, kp, vp);
    for (std::size_t i = 0; i < base.numel(); ++i)
        CHECK(std::abs(out_k.values()[i] - base.values()[i]) <= 1e-12);
}

TEST_CASE("attention params reject indivisible head count") {
    Rng rng(105);
    CHECK_THROWS_AS(AttentionParams::init(10, 4, rng), std::invalid_argument);
}

TEST_CASE("self-attention block with one token matches closed form") {
    Rng rng(106);
    TransformerBlockParams blk = TransformerBlockParams::init(6, 2, 12, rng);
    Tensor x = Tensor::randn({1, 6}, rng);
    Tensor got = self_attention_block(nullptr, x, blk.self_attn, blk.ln_self);
    // One token attends only to itself: LN(x + x*Wv*Wo).
    Tensor upd = op::matmul(nullptr, op::matmul(nullptr, x, blk.self_attn.wv), blk.self_attn.wo);
    Tensor want = op::layer_norm_rows(nullptr, op::add(nullptr, x, upd), blk.ln_self.gain,
                                      blk.ln_self.bias);
    for (std::size_t i = 0; i < got.numel(); ++i)
        CHECK(std::abs(got.values()[i] - want.values()[i]) < 1e-12);
}

TEST_CASE("cross-attention block rejects an empty feature set") {
    Rng rng(107);
    TransformerBlockParams blk = TransformerBlockParams::init(4, 2, 8, rng);
    Tensor x = Tensor::randn({2, 4}, rng);
    Tensor empty({0, 4});
    CHECK_THROWS_AS(cross_attention_block(nullptr, x, empty, blk.cross_attn, blk.ln_cross, blk.ffn, blk.ln_ffn), std::invalid_argument);
}

TEST_CASE("multi-head attention gradients match finite differences") {
    Rng rng(108);
    AttentionParams p = random_attn(4, 2, rng);
    Tensor q = Tensor::randn({3, 4}, rng).set_requires_grad();
    Tensor k = Tensor::randn({3, 4}, rng).set_requires_grad();
    Tensor v = Tensor::randn({3, 4}, rng).set_requires_grad();
    p.wq.set_requires_grad();
    p.wo.set_requires_grad();
    auto run = [&](Tape* tape) {
        Tensor o = multi_head_attention(tape, op::matmul(tape, q, p.wq),
                                        op::matmul(tape, k, p.wk),
                                        op::matmul(tape, v, p.wv), p);
        return op::sum_all(tape, op::mul(tape, o, o));
    };
    Tape tape;
    Tensor loss = run(&tape);
    tape.backward(loss);
    auto f = [&]() { return run(nullptr).item(); };
    CHECK(fd::max_rel_error(q, q.grad(), f) < 1e-4);
    CHECK(fd::max_rel_error(k, k.grad(), f) < 1e-4);
    CHECK(fd::max_rel_error(v, v.grad(), f) < 1e-4);
    CHECK(fd::max_rel_error(p.wq, p.wq.grad(), f) < 1e-4);
    CHECK(fd::max_rel_error(p.wo, p.wo.grad(), f) < 1e-4);
}

TEST_CASE("routing attention matches brute-force two-step normalization") {
    Rng rng(109);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor ws = Tensor::randn({3, 4}, rng);
        Tensor wr = Tensor::randn({3, 4}, rng);
        Tensor wq = Tensor::glorot(4, 4, rng);
        Tensor wk = Tensor::glorot(4, 4, rng);
        Tensor wv = Tensor::glorot(4, 4, rng);
        Tensor got = routing_attention(nullptr, ws, wr, wq, wk, wv);

        // Brute force: scores, softmax over the query axis (columns of the
        // N x N matrix sum to one), then row-wise L1 renormalization.
        const std::size_t n = 3, d = 4;
        double scores[3][3];
        auto proj = [&](const Tensor& x, const Tensor& w, std::size_t i, std::size_t c) {
            double s = 0.0;
            for (std::size_t t = 0; t < d; ++t) s += x.at(i, t) * w.at(t, c);
            return s;
        };
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < d; ++c) s += proj(ws, wq, i, c) * proj(wr, wk, j, c);
                scores[i][j] = s / std::sqrt(static_cast<double>(d));
            }
        double soft[3][3];
        for (std::size_t j = 0; j < n; ++j) {
            double mx = -1e300, z = 0.0;
            for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, scores[i][j]);
            for (std::size_t i = 0; i < n; ++i) z += std::exp(scores[i][j] - mx);
            for (std::size_t i = 0; i < n; ++i) soft[i][j] = std::exp(scores[i][j] - mx) / z;
        }
        double att[3][3];
        for (std::size_t i = 0; i < n; ++i) {
            double rsum = 0.0;
            for (std::size_t j = 0; j < n; ++j) rsum += soft[i][j];
            for (std::size_t j = 0; j < n; ++j) att[i][j] = soft[i][j] / (rsum + 1e-8);
        }
        double mx = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += att[i][j] * proj(wr, wv, j, c);
                mx = std::max(mx, std::abs(s - got.at(i, c)));
            }
        CHECK(mx < 1e-10);
    }
}

TEST_CASE("routing attention degenerate and identity cases") {
    Rng rng(110);
    Tensor ws = Tensor::randn({1, 4}, rng);
    Tensor wr = Tensor::randn({1, 4}, rng);
    Tensor wq = Tensor::glorot(4, 4, rng);
    Tensor wk = Tensor::glorot(4, 4, rng);
    Tensor wv = Tensor::glorot(4, 4, rng);

    // N = 1: the attention matrix is exactly [[1/(1+eps)]], so the update is
    // wr * wv up to the stabilizer.
    Tensor got = routing_attention(nullptr, ws, wr, wq, wk, wv);
    Tensor want = op::matmul(nullptr, wr, wv);
    for (std::size_t i = 0; i < got.numel(); ++i)
        CHECK(std::abs(got.values()[i] - want.values()[i] / (1.0 + 1e-8)) < 1e-12);

    // Zero value projection yields a zero update regardless of the scores.
    Tensor wv0({4, 4});
    Tensor zero = routing_attention(nullptr, ws, wr, wq, wk, wv0);
    for (double x : zero.values()) CHECK(x == 0.0);
}

TEST_CASE("routing attention normalization invariants") {
    Rng rng(111);
    Tensor ws = Tensor::randn({6, 8}, rng);
    Tensor wr = Tensor::randn({6, 8}, rng);
    Tensor wq = Tensor::glorot(8, 8, rng);
    Tensor wk = Tensor::glorot(8, 8, rng);
    Tensor wv = Tensor::glorot(8, 8, rng);
    RoutingDiagnostics diag;
    routing_attention(nullptr, ws, wr, wq, wk, wv, &diag);
    CHECK(diag.degenerate_rows.empty());
    // Each column of the pre-normalization matrix sums to one; after L1
    // renormalization each row sums to one within the stabilizer slack.
    for (double s : diag.row_sums_before) CHECK(s > 0.0);
    double total = 0.0;
    for (double s : diag.row_sums_before) total += s;
    CHECK(total == doctest::Approx(6.0).epsilon(1e-9));
    for (double s : diag.row_sums_after) CHECK(std::abs(s - 1.0) < 1e-6);
}

TEST_CASE("routing attention gradients match finite differences") {
    Rng rng(112);
    Tensor ws = Tensor::randn({3, 4}, rng).set_requires_grad();
    Tensor wr = Tensor::randn({3, 4}, rng).set_requires_grad();
    Tensor wq = Tensor::glorot(4, 4, rng).set_requires_grad();
    Tensor wk = Tensor::glorot(4, 4, rng).set_requires_grad();
    Tensor wv = Tensor::glorot(4, 4, rng).set_requires_grad();
    Tape tape;
    Tensor out = routing_attention(&tape, ws, wr, wq, wk, wv);
    Tensor loss = op::sum_all(&tape, op::mul(&tape, out, out));
    tape.backward(loss);
    auto f = [&]() {
        Tensor o = routing_attention(nullptr, ws, wr, wq, wk, wv);
        return op::sum_all(nullptr, op::mul(nullptr, o, o)).item();
    };
    CHECK(fd::max_rel_error(ws, ws.grad(), f) < 1e-4);
    CHECK(fd::max_rel_error(wr, wr.grad(), f) < 1e-4);
    CHECK(fd::max_rel_error(wq, wq.grad(), f) < 1e-4);
    CHECK(fd::max_rel_error(wk, wk.grad(), f) < 1e-4);
    CHECK(fd::max_rel_error(wv, wv.grad(), f) < 1e-4);
}

TEST_CASE("cross-attention block gradients flow to the feature tokens") {
    Rng rng(113);
    TransformerBlockParams blk = TransformerBlockParams::init(4, 2, 8, rng);
    Tensor x = Tensor::randn({2, 4}, rng).set_requires_grad();
    Tensor feats = Tensor::randn({5, 4}, rng).set_requires_grad();
    Tape tape;
    Tensor out = cross_attention_block(&tape, x, feats, blk.cross_attn, blk.ln_cross, blk.ffn, blk.ln_ffn);
    Tensor loss = op::sum_all(&tape, op::mul(&tape, out, out));
    tape.backward(loss);
    auto f = [&]() {
        Tensor o = cross_attention_block(nullptr, x, feats, blk.cross_attn, blk.ln_cross, blk.ffn, blk.ln_ffn);
        return op::sum_all(nullptr, op::mul(nullptr, o, o)).item();
    };
    CHECK(fd::max_rel_error(x, x.grad(), f) < 1e-4);
    CHECK(fd::max_rel_error(feats, feats.grad(), f) < 1e-4);
}
