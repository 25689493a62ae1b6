#pragma once

#include <vector>

#include "stylet/tensor.hpp"

namespace stylet::ops {

// Every op runs the forward computation immediately and, when the output
// requires grad, records its backward rule on the tape. Passing tape as a
// pointer keeps grad-free evaluation cheap: ops called with nullptr never
// record.

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape* tape, const Tensor& a);

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor div(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& a, double c);
Tensor add_scalar(Tape* tape, const Tensor& a, double c);

// Row-vector broadcast: b has shape {1, n}, applied to every row of a {m, n}.
Tensor add_rowvec(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul_rowvec(Tape* tape, const Tensor& a, const Tensor& b);
Tensor div_rowvec(Tape* tape, const Tensor& a, const Tensor& b);
// Column-vector broadcast: v has shape {m, 1}; each row i of a is divided by v[i].
Tensor div_colvec(Tape* tape, const Tensor& a, const Tensor& v);

Tensor sigmoid(Tape* tape, const Tensor& a);
Tensor leaky_relu(Tape* tape, const Tensor& a, double slope = 0.2);
Tensor sqrt_ew(Tape* tape, const Tensor& a);

Tensor softmax_rows(Tape* tape, const Tensor& a);
Tensor softmax_cols(Tape* tape, const Tensor& a);

// {m, n} -> {m, 1}
Tensor sum_rows(Tape* tape, const Tensor& a);
Tensor l2_norm_rows(Tape* tape, const Tensor& a);

Tensor layer_norm_rows(Tape* tape, const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);

Tensor sum_all(Tape* tape, const Tensor& a);
Tensor mean_all(Tape* tape, const Tensor& a);
// Frobenius / vector 2-norm as a scalar.
Tensor l2_norm(Tape* tape, const Tensor& a);

// Mean binary cross-entropy. p must be strictly inside (0, 1); values
// outside are a domain error, not silently clamped.
Tensor bce(Tape* tape, const Tensor& p, const Tensor& target);

// BCE computed from pre-sigmoid logits: mean of max(z,0) - z*y +
// log1p(exp(-|z|)). Same value as bce(sigmoid(z), y) but stable when the
// sigmoid saturates in double precision.
Tensor bce_logits(Tape* tape, const Tensor& z, const Tensor& target);

Tensor slice_rows(Tape* tape, const Tensor& a, std::size_t r0, std::size_t r1);
Tensor slice_cols(Tape* tape, const Tensor& a, std::size_t c0, std::size_t c1);
Tensor concat_cols(Tape* tape, const std::vector<Tensor>& parts);
Tensor reshape(Tape* tape, const Tensor& a, std::vector<std::size_t> shape);

// Image helpers. Images are stored as {h*w, c} with row-major pixel order.
Tensor upsample2x(Tape* tape, const Tensor& a, std::size_t h, std::size_t w);
Tensor patchify(Tape* tape, const Tensor& a, std::size_t h, std::size_t w, std::size_t c,
                std::size_t patch);

}  // namespace stylet::ops
