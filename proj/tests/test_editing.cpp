#include <cmath>
#include <vector>

#include "doctest.h"
#include "stylet/classifier.hpp"
#include "stylet/editing.hpp"
#include "stylet/generator.hpp"
#include "stylet/ops.hpp"
#include "dense_eigen.hpp"
#include "stylet/rng.hpp"

using namespace stylet;
namespace op = stylet::ops;

namespace {

ModelConfig small_cfg() {
    ModelConfig m;
    m.n_styles = 4;
    m.dim = 8;
    m.heads = 2;
    m.ffn_inner = 16;
    m.embed_dim = 4;
    m.n_attrs = 3;
    m.img_size = 8;
    m.gen_channels = 8;
    m.mapper_layers = 2;
    return m;
}

// Linear probe: p = sigmoid(<w, a>), the analytic oracle for first-order
// directions.
ScalarLossFn linear_probe_bce(const Tensor& a, double y_t) {
    return [a, y_t](Tape* tape, const Tensor& w) {
        Tensor z = op::sum_all(tape, op::mul(tape, w, a));
        return op::bce_logits(tape, z, Tensor::scalar(y_t));
    };
}

// Quadratic loss 0.5 * vec(w)' M vec(w) over the flattened code.
ScalarLossFn quadratic_loss(const Tensor& m_mat, std::size_t rows, std::size_t cols) {
    return [m_mat, rows, cols](Tape* tape, const Tensor& w) {
        Tensor flat = op::reshape(tape, w, {1, rows * cols});
        Tensor mw = op::matmul(tape, flat, m_mat);
        return op::scale(tape, op::sum_all(tape, op::mul(tape, flat, mw)), 0.5);
    };
}

Tensor random_symmetric(std::size_t n, Rng& rng) {
    Tensor m({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double v = rng.gaussian();
            m.at(i, j) = v;
            m.at(j, i) = v;
        }
    return m;
}

}  // namespace

TEST_CASE("first-order direction matches the linear-probe analytic form") {
    Rng rng(31);
    const std::size_t n = 4, d = 8;
    Tensor a = Tensor::randn({n, d}, rng);
    Tensor w = Tensor::randn({n, d}, rng);
    for (double y_t : {1.0, 0.0}) {
        EditDirection dir = first_order_direction(w, linear_probe_bce(a, y_t), 0.5);
        // grad = (p - y_t) * a, so the normalized row is -sign(p - y_t) *
        // a_row / ||a_row||.
        double p = 1.0 / (1.0 + std::exp(-op::sum_all(nullptr, op::mul(nullptr, w, a)).item()));
        double sign = (p - y_t) > 0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double norm = 0.0;
            for (std::size_t j = 0; j < d; ++j) norm += a.at(i, j) * a.at(i, j);
            norm = std::sqrt(norm);
            for (std::size_t j = 0; j < d; ++j)
                CHECK(std::abs(dir.direction.at(i, j) - sign * a.at(i, j) / norm) < 1e-9);
        }
    }
}

TEST_CASE("first-order direction is invariant under positive loss rescaling") {
    Rng rng(32);
    Tensor a = Tensor::randn({4, 8}, rng);
    Tensor w = Tensor::randn({4, 8}, rng);
    ScalarLossFn base = linear_probe_bce(a, 1.0);
    // A power-of-two factor cancels exactly; an arbitrary positive factor
    // cancels up to the last ulp of the normalization.
    ScalarLossFn pow2 = [&](Tape* tape, const Tensor& x) {
        return op::scale(tape, base(tape, x), 4.0);
    };
    ScalarLossFn odd = [&](Tape* tape, const Tensor& x) {
        return op::scale(tape, base(tape, x), 3.7);
    };
    EditDirection d1 = first_order_direction(w, base);
    EditDirection d2 = first_order_direction(w, pow2);
    EditDirection d3 = first_order_direction(w, odd);
    for (std::size_t i = 0; i < d1.direction.numel(); ++i) {
        CHECK(d1.direction.values()[i] == d2.direction.values()[i]);
        CHECK(std::abs(d1.direction.values()[i] - d3.direction.values()[i]) < 1e-12);
    }
}

TEST_CASE("small steps along the first-order direction decrease the loss") {
    ModelConfig m = small_cfg();
    LatentClassifier clf(m, 19);
    Rng rng(33);
    for (int t = 0; t < 10; ++t) {
        Tensor w = Tensor::randn({m.n_styles, m.dim}, rng);
        ScalarLossFn loss = target_bce(clf, 1, 1.0);
        double before = loss(nullptr, w).item();
        EditDirection dir = first_order_direction(w, 1, 1.0, clf, 1e-3);
        double after = loss(nullptr, apply_edit(w, dir)).item();
        CHECK(after <= before + 1e-9);
    }
}

TEST_CASE("finite-difference HVP reproduces Md exactly for a quadratic loss") {
    Rng rng(34);
    const std::size_t n = 4, d = 8, dim = n * d;
    Tensor m_mat = random_symmetric(dim, rng);
    ScalarLossFn loss = quadratic_loss(m_mat, n, d);
    Tensor w = Tensor::randn({n, d}, rng);
    Rng pi_rng(35);
    PowerIterResult pi = hessian_power_iteration(w, loss, 1e-4, 1, pi_rng);
    // Reconstruct the start vector: same stream, same draws.
    Rng replay(35);
    Tensor d0 = Tensor::randn({n, d}, replay);
    double norm = 0.0;
    for (double x : d0.values()) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : d0.values()) x /= norm;
    double worst = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        double md = 0.0;
        for (std::size_t j = 0; j < dim; ++j) md += m_mat.at(i, j) * d0.values()[j];
        double denom = std::max(std::abs(md), 1e-8);
        worst = std::max(worst, std::abs(pi.hd.values()[i] - md) / denom);
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("power iteration converges to the dominant eigenvector") {
    Rng rng(36);
    const std::size_t n = 4, d = 8, dim = n * d;
    Tensor m_mat = random_symmetric(dim, rng);
    ScalarLossFn loss = quadratic_loss(m_mat, n, d);
    Tensor w = Tensor::randn({n, d}, rng);
    Rng pi_rng(37);
    PowerIterResult pi = hessian_power_iteration(w, loss, 1e-4, 50, pi_rng);

    std::vector<std::vector<double>> mm(dim, std::vector<double>(dim));
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) mm[i][j] = m_mat.at(i, j);
    std::vector<double> eigvals;
    std::vector<std::vector<double>> eigvecs;
    dense::jacobi_eigen(mm, eigvals, eigvecs);
    std::size_t top = 0;
    for (std::size_t i = 1; i < dim; ++i)
        if (std::abs(eigvals[i]) > std::abs(eigvals[top])) top = i;
    double dot = 0.0, vnorm = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        dot += pi.d.values()[i] * eigvecs[i][top];
        vnorm += eigvecs[i][top] * eigvecs[i][top];
    }
    CHECK(std::abs(dot) / std::sqrt(vnorm) > 0.99);

    // Rayleigh quotient |d' M d| is non-decreasing across iterations.
    Rng r1(37), r2(37);
    double prev = -1.0;
    for (std::size_t iters : {1u, 5u, 15u, 50u}) {
        Rng ri(37);
        PowerIterResult p = hessian_power_iteration(w, loss, 1e-4, iters, ri);
        double q = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            double md = 0.0;
            for (std::size_t j = 0; j < dim; ++j) md += m_mat.at(i, j) * p.d.values()[j];
            q += p.d.values()[i] * md;
        }
        CHECK(std::abs(q) >= prev - 1e-6);
        prev = std::abs(q);
    }
}

TEST_CASE("power iteration results are stable in xi for a quadratic loss") {
    Rng rng(38);
    const std::size_t n = 2, d = 4, dim = n * d;
    Tensor m_mat = random_symmetric(dim, rng);
    ScalarLossFn loss = quadratic_loss(m_mat, n, d);
    Tensor w = Tensor::randn({n, d}, rng);
    Rng r1(39), r2(39);
    PowerIterResult a = hessian_power_iteration(w, loss, 1e-4, 10, r1);
    PowerIterResult b = hessian_power_iteration(w, loss, 1e-3, 10, r2);
    for (std::size_t i = 0; i < dim; ++i)
        CHECK(std::abs(a.d.values()[i] - b.d.values()[i]) < 1e-6);
}

TEST_CASE("degenerate curvature is reported with the iteration index") {
    ScalarLossFn flat = [](Tape* tape, const Tensor& w) {
        return op::scale(tape, op::sum_all(tape, w), 1.0);
    };
    Rng rng(40);
    Tensor w = Tensor::randn({2, 4}, rng);
    CHECK_THROWS_WITH_AS(hessian_power_iteration(w, flat, 1e-4, 3, rng),
                         doctest::Contains("degenerate curvature at iteration 0"),
                         std::runtime_error);
    CHECK_THROWS_AS(hessian_power_iteration(w, flat, 0.0, 3, rng), std::invalid_argument);
    CHECK_THROWS_AS(hessian_power_iteration(w, flat, 1e-4, 0, rng), std::invalid_argument);
}

TEST_CASE("apply_edit is pure, linear in alpha, and shape-checked") {
    Rng rng(41);
    Tensor w = Tensor::randn({4, 8}, rng);
    Tensor w_copy = w.clone();
    EditDirection dir;
    dir.direction = Tensor::randn({4, 8}, rng);
    dir.alpha = 0.0;
    Tensor same = apply_edit(w, dir);
    for (std::size_t i = 0; i < w.numel(); ++i) CHECK(same.values()[i] == w.values()[i]);
    dir.alpha = 0.25;
    Tensor stepped = apply_edit(w, dir);
    for (std::size_t i = 0; i < w.numel(); ++i) {
        CHECK(stepped.values()[i] ==
              doctest::Approx(w.values()[i] + 0.25 * dir.direction.values()[i]).epsilon(1e-15));
        CHECK(w.values()[i] == w_copy.values()[i]);
    }
    dir.direction = Tensor::randn({2, 8}, rng);
    CHECK_THROWS_AS(apply_edit(w, dir), std::invalid_argument);
}

TEST_CASE("editor losses match an independent scalar recomputation") {
    ModelConfig m = small_cfg();
    LatentClassifier clf(m, 19);
    Rng rng(42);
    Tensor ws = Tensor::randn({m.n_styles, m.dim}, rng);
    Tensor wr = Tensor::randn({m.n_styles, m.dim}, rng);
    Tensor we = Tensor::randn({m.n_styles, m.dim}, rng);
    const std::size_t k = 1;
    EditorLosses l = editor_losses(nullptr, ws, wr, we, clf, k);

    auto l2 = [](const Tensor& a, const Tensor& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.numel(); ++i) {
            double diff = a.values()[i] - b.values()[i];
            s += diff * diff;
        }
        return std::sqrt(s);
    };
    CHECK(std::abs(l.emb_sr.item() -
                   l2(clf.embed(nullptr, we, k), clf.embed(nullptr, wr, k))) < 1e-12);
    double keep = 0.0;
    for (std::size_t j = 0; j < m.n_attrs; ++j)
        if (j != k) keep += l2(clf.embed(nullptr, we, j), clf.embed(nullptr, ws, j));
    CHECK(std::abs(l.emb_keep.item() - keep) < 1e-12);
    CHECK(std::abs(l.reg.item() - l2(we, ws)) < 1e-12);

    // Identities at we == ws and we == wr.
    EditorLosses at_src = editor_losses(nullptr, ws, wr, ws, clf, k);
    CHECK(at_src.emb_keep.item() == 0.0);
    CHECK(at_src.reg.item() == 0.0);
    EditorLosses at_ref = editor_losses(nullptr, ws, wr, wr, clf, k);
    CHECK(at_ref.emb_sr.item() == 0.0);
}

TEST_CASE("zero value projection makes reference editing the identity") {
    ModelConfig m = small_cfg();
    Rng rng(43);
    RefEditorParams editor = RefEditorParams::init(m.dim, rng);
    for (double& x : editor.wv.values()) x = 0.0;
    Tensor ws = Tensor::randn({m.n_styles, m.dim}, rng);
    Tensor wr = Tensor::randn({m.n_styles, m.dim}, rng);
    ReferenceEditResult res = reference_edit(nullptr, ws, wr, editor);
    for (std::size_t i = 0; i < ws.numel(); ++i) {
        CHECK(res.delta_w.values()[i] == 0.0);
        CHECK(res.edited.values()[i] == ws.values()[i]);
    }
}

TEST_CASE("editor training lowers the validation loss") {
    ModelConfig m = small_cfg();
    ToyGenerator gen(m, 11);
    LatentDataset ds = sample_latent_dataset(gen, m, 24, 13, false);
    LatentClassifier clf(m, 19);
    train_classifier(clf, ds, /*epochs=*/30, /*lr=*/2e-3);

    std::vector<Tensor> sources(ds.codes.begin(), ds.codes.begin() + 12);
    std::vector<Tensor> refs(ds.codes.begin() + 12, ds.codes.end());
    LossConfig loss;
    EditorTrainResult r =
        train_reference_editor(sources, refs, 1, clf, loss, /*steps=*/200, /*lr=*/1e-3, 7);
    CHECK(r.loss_curve.size() == 200);
    CHECK(r.validation_end < r.validation_start);

    // Rerun is bit-identical.
    EditorTrainResult r2 =
        train_reference_editor(sources, refs, 1, clf, loss, /*steps=*/200, /*lr=*/1e-3, 7);
    CHECK(r.validation_end == r2.validation_end);

    CHECK_THROWS_AS(train_reference_editor({}, refs, 1, clf, loss, 1, 1e-3, 7),
                    std::invalid_argument);
}

TEST_CASE("with no reference term the editor learns to stay put") {
    ModelConfig m = small_cfg();
    ToyGenerator gen(m, 11);
    LatentDataset ds = sample_latent_dataset(gen, m, 16, 13, false);
    LatentClassifier clf(m, 19);
    std::vector<Tensor> sources(ds.codes.begin(), ds.codes.begin() + 8);
    std::vector<Tensor> refs(ds.codes.begin() + 8, ds.codes.end());
    LossConfig loss;
    loss.lambda_ref = 0.0;
    EditorTrainResult r =
        train_reference_editor(sources, refs, 0, clf, loss, /*steps=*/300, /*lr=*/3e-3, 9);

    auto mean_delta = [&](const RefEditorParams& e) {
        double total = 0.0;
        for (std::size_t i = 0; i < sources.size(); ++i) {
            ReferenceEditResult res = reference_edit(nullptr, sources[i], refs[i], e);
            double s = 0.0;
            for (double x : res.delta_w.values()) s += x * x;
            total += std::sqrt(s);
        }
        return total / double(sources.size());
    };
    Rng rng = Rng::stream(9, "editor");
    RefEditorParams fresh = RefEditorParams::init(m.dim, rng);
    CHECK(mean_delta(r.editor) < 0.2 * mean_delta(fresh));
}
