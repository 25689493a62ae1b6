#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stylet/ops.hpp"
#include "stylet/tensor.hpp"

namespace stylet {

// A named view over trainable tensors, shared by the optimizer and the
// checkpoint writer.
struct NamedTensor {
    std::string name;
    Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

struct AttentionParams {
    Tensor wq, wk, wv, wo;
    std::size_t heads = 1;

    static AttentionParams init(std::size_t dim, std::size_t heads, Rng& rng);
    ParamList params(const std::string& prefix);
};

struct LayerNormParams {
    Tensor gain, bias;

    static LayerNormParams init(std::size_t dim);
    ParamList params(const std::string& prefix);
};

struct FeedForwardParams {
    Tensor w1, b1, w2, b2;

    static FeedForwardParams init(std::size_t dim, std::size_t inner, Rng& rng);
    ParamList params(const std::string& prefix);
    Tensor forward(Tape* tape, const Tensor& x) const;
};

// One encoder-side transformer stage: self-attention, cross-attention
// against a pyramid level, FFN; each sublayer followed by residual add and
// post-norm.
struct TransformerBlockParams {
    AttentionParams self_attn, cross_attn;
    FeedForwardParams ffn;
    LayerNormParams ln_self, ln_cross, ln_ffn;

    static TransformerBlockParams init(std::size_t dim, std::size_t heads, std::size_t ffn_inner,
                                       Rng& rng);
    ParamList params(const std::string& prefix);
};

// Q,K,V are already projected; splits into heads, applies scaled dot-product
// attention per head with Softmax over keys, concatenates, fuses with W^o.
Tensor multi_head_attention(Tape* tape, const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionParams& p);

Tensor self_attention_block(Tape* tape, const Tensor& x, const AttentionParams& attn,
                            const LayerNormParams& ln);

// Cross-attention against feature tokens f, then FFN; both with residual +
// post-norm.
Tensor cross_attention_block(Tape* tape, const Tensor& x, const Tensor& f,
                             const AttentionParams& attn, const LayerNormParams& ln_attn,
                             const FeedForwardParams& ffn, const LayerNormParams& ln_ffn);

struct RoutingDiagnostics {
    // Rows of the query-normalized matrix whose sum fell below 1e-12 before
    // the epsilon was added.
    std::vector<std::size_t> degenerate_rows;
    std::vector<double> row_sums_before;  // row sums of the Softmax_Q matrix
    std::vector<double> row_sums_after;   // row sums after L1 renormalization
};

// Single-head routing attention: scores are normalized over the query axis
// first, then each row is L1-renormalized over keys (additive eps 1e-8).
// Returns the code offset delta_w = A * V.
Tensor routing_attention(Tape* tape, const Tensor& w_src, const Tensor& w_ref, const Tensor& wq,
                         const Tensor& wk, const Tensor& wv, RoutingDiagnostics* diag = nullptr);

}  // namespace stylet
