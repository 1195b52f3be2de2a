#pragma once

#include <cstdint>
#include <vector>

#include "octbio/tensor/tensor.hpp"

// Differentiable tensor operations. Binary elementwise ops broadcast between
// operands of equal rank whose dimensions are equal or 1.
namespace octbio::tensor {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact (erf) form
Tensor sigmoid(const Tensor& x);

// x: [..., in], weight: [out, in], bias: [out] or undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
// a: [G, M, K]; b: [G, K, N], or [G, N, K] when trans_b.
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);
// x: [B, C, H, W], weight: [O, C/groups, k, k], bias: [O] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::int64_t stride,
              std::int64_t pad, std::int64_t groups = 1);

Tensor softmax_last(const Tensor& x);
Tensor layer_norm_last(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
// x viewed as [N, C] rows (C = last dim); out[i] = x[index[i]].
Tensor gather_rows(const Tensor& x, const std::vector<std::int64_t>& index);
Tensor concat(const std::vector<Tensor>& xs, std::size_t dim);
Tensor slice(const Tensor& x, std::size_t dim, std::int64_t start, std::int64_t length);

// Reductions keep reduced dimensions as size 1.
Tensor mean(const Tensor& x, const std::vector<std::size_t>& dims);
Tensor amax(const Tensor& x, const std::vector<std::size_t>& dims);
Tensor sum_all(const Tensor& x);

// Mean binary cross-entropy on logits; targets carry no gradient.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);
Tensor mse(const Tensor& pred, const Tensor& targets);

// Index map from every element of `out` to the broadcast source element of `in`.
std::vector<std::int64_t> broadcast_map(const Shape& out, const Shape& in);

}  // namespace octbio::tensor
