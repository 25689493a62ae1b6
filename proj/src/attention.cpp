#include "stylet/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace stylet {

namespace op = ops;

AttentionParams AttentionParams::init(std::size_t dim, std::size_t heads, Rng& rng) {
    if (heads == 0 || dim % heads != 0)
        throw std::invalid_argument("attention: heads " + std::to_string(heads) +
                                    " must divide dim " + std::to_string(dim));
    AttentionParams p;
    p.heads = heads;
    p.wq = Tensor::glorot(dim, dim, rng).set_requires_grad();
    p.wk = Tensor::glorot(dim, dim, rng).set_requires_grad();
    p.wv = Tensor::glorot(dim, dim, rng).set_requires_grad();
    p.wo = Tensor::glorot(dim, dim, rng).set_requires_grad();
    return p;
}

ParamList AttentionParams::params(const std::string& prefix) {
    return {{prefix + ".wq", wq}, {prefix + ".wk", wk}, {prefix + ".wv", wv}, {prefix + ".wo", wo}};
}

LayerNormParams LayerNormParams::init(std::size_t dim) {
    LayerNormParams p;
    p.gain = Tensor({1, dim}, 1.0);
    p.gain.set_requires_grad();
    p.bias = Tensor({1, dim}, 0.0);
    p.bias.set_requires_grad();
    return p;
}

ParamList LayerNormParams::params(const std::string& prefix) {
    return {{prefix + ".gain", gain}, {prefix + ".bias", bias}};
}

FeedForwardParams FeedForwardParams::init(std::size_t dim, std::size_t inner, Rng& rng) {
    FeedForwardParams p;
    p.w1 = Tensor::glorot(dim, inner, rng).set_requires_grad();
    p.b1 = Tensor({1, inner}, 0.0);
    p.b1.set_requires_grad();
    p.w2 = Tensor::glorot(inner, dim, rng).set_requires_grad();
    p.b2 = Tensor({1, dim}, 0.0);
    p.b2.set_requires_grad();
    return p;
}

ParamList FeedForwardParams::params(const std::string& prefix) {
    return {{prefix + ".w1", w1}, {prefix + ".b1", b1}, {prefix + ".w2", w2}, {prefix + ".b2", b2}};
}

Tensor FeedForwardParams::forward(Tape* tape, const Tensor& x) const {
    Tensor h = op::add_rowvec(tape, op::matmul(tape, x, w1), b1);
    h = op::leaky_relu(tape, h);
    return op::add_rowvec(tape, op::matmul(tape, h, w2), b2);
}

TransformerBlockParams TransformerBlockParams::init(std::size_t dim, std::size_t heads,
                                                    std::size_t ffn_inner, Rng& rng) {
    TransformerBlockParams p;
    p.self_attn = AttentionParams::init(dim, heads, rng);
    p.cross_attn = AttentionParams::init(dim, heads, rng);
    p.ffn = FeedForwardParams::init(dim, ffn_inner, rng);
    p.ln_self = LayerNormParams::init(dim);
    p.ln_cross = LayerNormParams::init(dim);
    p.ln_ffn = LayerNormParams::init(dim);
    return p;
}

ParamList TransformerBlockParams::params(const std::string& prefix) {
    ParamList out;
    for (auto& group :
         {self_attn.params(prefix + ".self"), cross_attn.params(prefix + ".cross"),
          ffn.params(prefix + ".ffn"), ln_self.params(prefix + ".ln_self"),
          ln_cross.params(prefix + ".ln_cross"), ln_ffn.params(prefix + ".ln_ffn")})
        out.insert(out.end(), group.begin(), group.end());
    return out;
}

Tensor multi_head_attention(Tape* tape, const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionParams& p) {
    const std::size_t dim = q.cols();
    if (k.cols() != dim || v.cols() != dim || k.rows() != v.rows())
        throw std::invalid_argument("multi_head_attention: shapes " + q.shape_str() + " " +
                                    k.shape_str() + " " + v.shape_str() + " disagree");
    if (dim % p.heads != 0)
        throw std::invalid_argument("multi_head_attention: heads do not divide dim");
    const std::size_t d = dim / p.heads;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<Tensor> head_outs;
    head_outs.reserve(p.heads);
    for (std::size_t h = 0; h < p.heads; ++h) {
        Tensor qi = op::slice_cols(tape, q, h * d, (h + 1) * d);
        Tensor ki = op::slice_cols(tape, k, h * d, (h + 1) * d);
        Tensor vi = op::slice_cols(tape, v, h * d, (h + 1) * d);
        Tensor scores = op::scale(tape, op::matmul(tape, qi, op::transpose(tape, ki)), inv_sqrt_d);
        Tensor attn = op::softmax_rows(tape, scores);
        head_outs.push_back(op::matmul(tape, attn, vi));
    }
    return op::matmul(tape, op::concat_cols(tape, head_outs), p.wo);
}

Tensor self_attention_block(Tape* tape, const Tensor& x, const AttentionParams& attn,
                            const LayerNormParams& ln) {
    Tensor q = op::matmul(tape, x, attn.wq);
    Tensor k = op::matmul(tape, x, attn.wk);
    Tensor v = op::matmul(tape, x, attn.wv);
    Tensor upd = multi_head_attention(tape, q, k, v, attn);
    return op::layer_norm_rows(tape, op::add(tape, x, upd), ln.gain, ln.bias);
}

Tensor cross_attention_block(Tape* tape, const Tensor& x, const Tensor& f,
                             const AttentionParams& attn, const LayerNormParams& ln_attn,
                             const FeedForwardParams& ffn, const LayerNormParams& ln_ffn) {
    if (f.rows() == 0)
        throw std::invalid_argument("cross_attention_block: empty feature token set");
    Tensor q = op::matmul(tape, x, attn.wq);
    Tensor k = op::matmul(tape, f, attn.wk);
    Tensor v = op::matmul(tape, f, attn.wv);
    Tensor upd = multi_head_attention(tape, q, k, v, attn);
    Tensor y = op::layer_norm_rows(tape, op::add(tape, x, upd), ln_attn.gain, ln_attn.bias);
    Tensor z = ffn.forward(tape, y);
    return op::layer_norm_rows(tape, op::add(tape, y, z), ln_ffn.gain, ln_ffn.bias);
}

Tensor routing_attention(Tape* tape, const Tensor& w_src, const Tensor& w_ref, const Tensor& wq,
                         const Tensor& wk, const Tensor& wv, RoutingDiagnostics* diag) {
    if (w_src.shape() != w_ref.shape())
        throw std::invalid_argument("routing_attention: code shapes differ, " + w_src.shape_str() +
                                    " vs " + w_ref.shape_str());
    const std::size_t dim = w_src.cols();
    Tensor q = op::matmul(tape, w_src, wq);
    Tensor k = op::matmul(tape, w_ref, wk);
    Tensor v = op::matmul(tape, w_ref, wv);
    Tensor scores =
        op::scale(tape, op::matmul(tape, q, op::transpose(tape, k)), 1.0 / std::sqrt(double(dim)));
    // Softmax_Q: each column (fixed key) sums to 1 across queries.
    Tensor a = op::softmax_cols(tape, scores);
    Tensor row_sums = op::sum_rows(tape, a);
    if (diag) {
        for (std::size_t i = 0; i < row_sums.numel(); ++i) {
            diag->row_sums_before.push_back(row_sums.values()[i]);
            if (row_sums.values()[i] < 1e-12) diag->degenerate_rows.push_back(i);
        }
    }
    // Norm_K: L1 renormalization over keys with additive eps.
    Tensor routed = op::div_colvec(tape, a, op::add_scalar(tape, row_sums, 1e-8));
    if (diag) {
        Tensor after = op::sum_rows(nullptr, routed);
        diag->row_sums_after.assign(after.values().begin(), after.values().end());
    }
    return op::matmul(tape, routed, v);
}

}  // namespace stylet
