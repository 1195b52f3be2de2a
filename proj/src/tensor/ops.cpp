#include "octbio/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "octbio/core/error.hpp"
#include "octbio/tensor/kernels.hpp"

namespace octbio::tensor {

namespace {

double* grad_ptr(const Tensor& t) {
  return t.defined() && t.requires_grad() ? t.node()->ensure_grad().data() : nullptr;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  if (a.size() != b.size()) {
    throw ContractError(std::string(op) + ": rank mismatch " + to_string(a) + " vs " + to_string(b));
  }
  Shape out(a.size());
  for (std::size_t d = 0; d < a.size(); ++d) {
    if (a[d] != b[d] && a[d] != 1 && b[d] != 1) {
      throw ContractError(std::string(op) + ": cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
    out[d] = std::max(a[d], b[d]);
  }
  return out;
}

std::vector<std::int64_t> strides_of(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (std::size_t d = s.size(); d-- > 1;) st[d - 1] = st[d] * s[d];
  return st;
}

// Walks `out` in row-major order and records the flat offset given by `strides`.
std::vector<std::int64_t> strided_map(const Shape& out, const std::vector<std::int64_t>& strides) {
  const auto n = numel(out);
  std::vector<std::int64_t> map(static_cast<std::size_t>(n));
  std::vector<std::int64_t> idx(out.size(), 0);
  std::int64_t off = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    map[static_cast<std::size_t>(i)] = off;
    for (std::size_t d = out.size(); d-- > 0;) {
      ++idx[d];
      off += strides[d];
      if (idx[d] < out[d]) break;
      off -= strides[d] * out[d];
      idx[d] = 0;
    }
  }
  return map;
}

enum class BinaryKind { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
  const Shape out = broadcast_shape(a.shape(), b.shape(), name);
  const auto n = static_cast<std::size_t>(numel(out));
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> y(n);

  const bool same = a.shape() == out && b.shape() == out;
  auto ma = std::make_shared<std::vector<std::int64_t>>();
  auto mb = std::make_shared<std::vector<std::int64_t>>();
  if (!same) {
    *ma = broadcast_map(out, a.shape());
    *mb = broadcast_map(out, b.shape());
  }
  auto ia = [ma, same](std::size_t i) { return same ? i : static_cast<std::size_t>((*ma)[i]); };
  auto ib = [mb, same](std::size_t i) { return same ? i : static_cast<std::size_t>((*mb)[i]); };

  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[ia(i)], z = bv[ib(i)];
    y[i] = kind == BinaryKind::Add ? x + z : kind == BinaryKind::Sub ? x - z : x * z;
  }
  return make_result(out, std::move(y), {a, b}, [a, b, kind, ia, ib, n](Node& self) {
    double* ga = grad_ptr(a);
    double* gb = grad_ptr(b);
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = self.grad[i];
      const auto pa = ia(i), pb = ib(i);
      if (ga) ga[pa] += kind == BinaryKind::Mul ? g * bv[pb] : g;
      if (gb) gb[pb] += kind == BinaryKind::Mul ? g * av[pa] : kind == BinaryKind::Sub ? -g : g;
    }
  });
}

template <class F, class D>
Tensor unary(const Tensor& x, F f, D df) {
  const auto xv = x.values();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return make_result(x.shape(), std::move(y), {x}, [x, df](Node& self) {
    double* gx = grad_ptr(x);
    const auto xv = x.values();
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += self.grad[i] * df(xv[i], self.value[i]);
  });
}

}  // namespace

std::vector<std::int64_t> broadcast_map(const Shape& out, const Shape& in) {
  if (in.size() != out.size()) throw ContractError("broadcast_map: rank mismatch");
  auto st = strides_of(in);
  for (std::size_t d = 0; d < in.size(); ++d) {
    if (in[d] == 1 && out[d] != 1) {
      st[d] = 0;
    } else if (in[d] != out[d]) {
      throw ContractError("broadcast_map: cannot map " + to_string(in) + " onto " + to_string(out));
    }
  }
  return strided_map(out, st);
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Mul, "mul"); }

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || x.rank() < 1 || x.shape().back() != weight.dim(1)) {
    throw ContractError("linear: input " + to_string(x.shape()) + " incompatible with weight " +
                        to_string(weight.shape()));
  }
  const auto in = weight.dim(1), out = weight.dim(0);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out)) {
    throw ContractError("linear: bias shape " + to_string(bias.shape()));
  }
  const auto rows = x.numel() / in;
  Shape shape = x.shape();
  shape.back() = out;
  std::vector<double> y(static_cast<std::size_t>(rows * out));
  kernels::gemm({.batch = 1, .m = rows, .n = out, .k = in, .a = x.values().data(),
                 .b = weight.values().data(), .c = y.data(), .trans_b = true});
  if (bias.defined()) {
    const auto bv = bias.values();
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t j = 0; j < out; ++j) y[r * out + j] += bv[j];
    }
  }
  return make_result(std::move(shape), std::move(y), {x, weight, bias},
                     [x, weight, bias, rows, in, out](Node& self) {
                       if (double* gx = grad_ptr(x)) {
                         kernels::gemm({.batch = 1, .m = rows, .n = in, .k = out, .a = self.grad.data(),
                                        .b = weight.values().data(), .c = gx, .accumulate = true});
                       }
                       if (double* gw = grad_ptr(weight)) {
                         kernels::gemm({.batch = 1, .m = out, .n = in, .k = rows, .a = self.grad.data(),
                                        .b = x.values().data(), .c = gw, .trans_a = true,
                                        .accumulate = true});
                       }
                       if (double* gb = grad_ptr(bias)) {
                         for (std::int64_t j = 0; j < out; ++j) {
                           double s = 0.0;
                           for (std::int64_t r = 0; r < rows; ++r) s += self.grad[r * out + j];
                           gb[j] += s;
                         }
                       }
                     });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
    throw ContractError("bmm: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const auto g = a.dim(0), m = a.dim(1), k = a.dim(2);
  const auto bk = trans_b ? b.dim(2) : b.dim(1);
  const auto n = trans_b ? b.dim(1) : b.dim(2);
  if (bk != k) throw ContractError("bmm: inner dimension mismatch " + to_string(a.shape()) + " x " +
                                   to_string(b.shape()));
  std::vector<double> y(static_cast<std::size_t>(g * m * n));
  kernels::gemm({.batch = g, .m = m, .n = n, .k = k, .a = a.values().data(), .b = b.values().data(),
                 .c = y.data(), .trans_b = trans_b});
  return make_result({g, m, n}, std::move(y), {a, b}, [a, b, trans_b, g, m, n, k](Node& self) {
    if (double* ga = grad_ptr(a)) {
      // dA = dY * op(B)^T
      kernels::gemm({.batch = g, .m = m, .n = k, .k = n, .a = self.grad.data(), .b = b.values().data(),
                     .c = ga, .trans_b = !trans_b, .accumulate = true});
    }
    if (double* gb = grad_ptr(b)) {
      if (trans_b) {  // B is [N, K]: dB = dY^T * A
        kernels::gemm({.batch = g, .m = n, .n = k, .k = m, .a = self.grad.data(), .b = a.values().data(),
                       .c = gb, .trans_a = true, .accumulate = true});
      } else {  // B is [K, N]: dB = A^T * dY
        kernels::gemm({.batch = g, .m = k, .n = n, .k = m, .a = a.values().data(), .b = self.grad.data(),
                       .c = gb, .trans_a = true, .accumulate = true});
      }
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::int64_t stride,
              std::int64_t pad, std::int64_t groups) {
  if (x.rank() != 4 || weight.rank() != 4) {
    throw ContractError("conv2d: expects 4-d input and weight, got " + to_string(x.shape()) + " and " +
                        to_string(weight.shape()));
  }
  kernels::Conv2dArgs p{.batch = x.dim(0), .in_channels = x.dim(1), .height = x.dim(2), .width = x.dim(3),
                        .out_channels = weight.dim(0), .kernel = weight.dim(2), .stride = stride,
                        .pad = pad, .groups = groups};
  if (groups < 1 || p.in_channels % groups || p.out_channels % groups ||
      weight.dim(1) != p.in_channels / groups || weight.dim(2) != weight.dim(3)) {
    throw ContractError("conv2d: weight " + to_string(weight.shape()) + " incompatible with input " +
                        to_string(x.shape()) + " and groups " + std::to_string(groups));
  }
  if (stride < 1 || p.out_height() < 1 || p.out_width() < 1) {
    throw ContractError("conv2d: empty output for input " + to_string(x.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != p.out_channels)) {
    throw ContractError("conv2d: bias shape " + to_string(bias.shape()));
  }
  Shape shape{p.batch, p.out_channels, p.out_height(), p.out_width()};
  std::vector<double> y(static_cast<std::size_t>(numel(shape)));
  kernels::active().conv2d_forward(p, x.values().data(), weight.values().data(),
                                   bias.defined() ? bias.values().data() : nullptr, y.data());
  return make_result(std::move(shape), std::move(y), {x, weight, bias}, [x, weight, bias, p](Node& self) {
    const auto& k = kernels::active();
    if (double* gx = grad_ptr(x)) k.conv2d_backward_data(p, self.grad.data(), weight.values().data(), gx);
    double* gw = grad_ptr(weight);
    double* gb = grad_ptr(bias);
    if (gw) {
      k.conv2d_backward_weight(p, x.values().data(), self.grad.data(), gw, gb);
    } else if (gb) {
      std::vector<double> scratch(static_cast<std::size_t>(weight.numel()), 0.0);
      k.conv2d_backward_weight(p, x.values().data(), self.grad.data(), scratch.data(), gb);
    }
  });
}

Tensor softmax_last(const Tensor& x) {
  const auto cols = x.shape().back();
  const auto rows = x.numel() / cols;
  std::vector<double> y(x.values().size());
  kernels::active().softmax_rows(rows, cols, x.values().data(), y.data());
  return make_result(x.shape(), std::move(y), {x}, [x, rows, cols](Node& self) {
    if (double* gx = grad_ptr(x)) {
      kernels::active().softmax_rows_backward(rows, cols, self.value.data(), self.grad.data(), gx);
    }
  });
}

Tensor layer_norm_last(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const auto cols = x.shape().back();
  if (gamma.numel() != cols || beta.numel() != cols) {
    throw ContractError("layer_norm: affine size does not match last dim of " + to_string(x.shape()));
  }
  const auto rows = x.numel() / cols;
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto rstd = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
  std::vector<double> y(xv.size());
#pragma omp parallel for schedule(static) if (rows * cols >= (1 << 14))
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * cols;
    double m = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) m += xr[j];
    m /= static_cast<double>(cols);
    double v = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) v += (xr[j] - m) * (xr[j] - m);
    v /= static_cast<double>(cols);
    const double rs = 1.0 / std::sqrt(v + eps);
    (*rstd)[r] = rs;
    for (std::int64_t j = 0; j < cols; ++j) {
      const double h = (xr[j] - m) * rs;
      (*xhat)[r * cols + j] = h;
      y[r * cols + j] = h * gv[j] + bv[j];
    }
  }
  return make_result(x.shape(), std::move(y), {x, gamma, beta},
                     [x, gamma, beta, xhat, rstd, rows, cols](Node& self) {
                       const auto gv = gamma.values();
                       const double* gy = self.grad.data();
                       if (double* gx = grad_ptr(x)) {
#pragma omp parallel for schedule(static) if (rows * cols >= (1 << 14))
                         for (std::int64_t r = 0; r < rows; ++r) {
                           double s1 = 0.0, s2 = 0.0;
                           for (std::int64_t j = 0; j < cols; ++j) {
                             const double gh = gy[r * cols + j] * gv[j];
                             s1 += gh;
                             s2 += gh * (*xhat)[r * cols + j];
                           }
                           const double inv_n = 1.0 / static_cast<double>(cols);
                           for (std::int64_t j = 0; j < cols; ++j) {
                             const double gh = gy[r * cols + j] * gv[j];
                             gx[r * cols + j] += (*rstd)[r] * (gh - inv_n * s1 - (*xhat)[r * cols + j] * inv_n * s2);
                           }
                         }
                       }
                       double* gg = grad_ptr(gamma);
                       double* gb = grad_ptr(beta);
                       for (std::int64_t r = 0; r < rows; ++r) {
                         for (std::int64_t j = 0; j < cols; ++j) {
                           if (gg) gg[j] += gy[r * cols + j] * (*xhat)[r * cols + j];
                           if (gb) gb[j] += gy[r * cols + j];
                         }
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw ContractError("reshape: " + to_string(x.shape()) + " to " + to_string(shape));
  }
  std::vector<double> y(x.values().begin(), x.values().end());
  return make_result(std::move(shape), std::move(y), {x}, [x](Node& self) {
    double* gx = grad_ptr(x);
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  if (order.size() != x.rank()) throw ContractError("permute: order rank mismatch");
  const auto in_strides = strides_of(x.shape());
  Shape out(order.size());
  std::vector<std::int64_t> st(order.size());
  std::vector<bool> used(order.size(), false);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] >= order.size() || used[order[i]]) throw ContractError("permute: invalid order");
    used[order[i]] = true;
    out[i] = x.dim(order[i]);
    st[i] = in_strides[order[i]];
  }
  auto map = std::make_shared<std::vector<std::int64_t>>(strided_map(out, st));
  const auto xv = x.values();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[static_cast<std::size_t>((*map)[i])];
  return make_result(std::move(out), std::move(y), {x}, [x, map](Node& self) {
    double* gx = grad_ptr(x);
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[(*map)[i]] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::int64_t>& index) {
  const auto cols = x.shape().back();
  const auto rows = x.numel() / cols;
  const auto xv = x.values();
  std::vector<double> y(index.size() * static_cast<std::size_t>(cols));
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= rows) throw ContractError("gather_rows: index out of range");
    std::copy_n(xv.data() + index[i] * cols, cols, y.data() + static_cast<std::int64_t>(i) * cols);
  }
  auto idx = std::make_shared<std::vector<std::int64_t>>(index);
  return make_result({static_cast<std::int64_t>(index.size()), cols}, std::move(y), {x},
                     [x, idx, cols](Node& self) {
                       double* gx = grad_ptr(x);
                       for (std::size_t i = 0; i < idx->size(); ++i) {
                         const double* g = self.grad.data() + static_cast<std::int64_t>(i) * cols;
                         double* dst = gx + (*idx)[i] * cols;
                         for (std::int64_t j = 0; j < cols; ++j) dst[j] += g[j];
                       }
                     });
}

Tensor concat(const std::vector<Tensor>& xs, std::size_t dim) {
  if (xs.empty()) throw ContractError("concat: no inputs");
  Shape out = xs.front().shape();
  if (dim >= out.size()) throw ContractError("concat: dim out of range");
  out[dim] = 0;
  for (const auto& t : xs) {
    Shape s = t.shape();
    if (s.size() != out.size()) throw ContractError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != dim && s[d] != out[d]) throw ContractError("concat: shape mismatch " + to_string(s));
    }
    out[dim] += s[dim];
  }
  std::int64_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < dim; ++d) outer *= out[d];
  for (std::size_t d = dim + 1; d < out.size(); ++d) inner *= out[d];
  std::vector<double> y(static_cast<std::size_t>(numel(out)));
  std::int64_t offset = 0;
  std::vector<std::int64_t> offsets;
  for (const auto& t : xs) {
    const auto chunk = t.dim(dim) * inner;
    offsets.push_back(offset);
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy_n(t.values().data() + o * chunk, chunk, y.data() + o * out[dim] * inner + offset);
    }
    offset += chunk;
  }
  const auto row = out[dim] * inner;
  return make_result(std::move(out), std::move(y), xs, [xs, offsets, outer, inner, row, dim](Node& self) {
    for (std::size_t t = 0; t < xs.size(); ++t) {
      double* g = grad_ptr(xs[t]);
      if (!g) continue;
      const auto chunk = xs[t].dim(dim) * inner;
      for (std::int64_t o = 0; o < outer; ++o) {
        const double* src = self.grad.data() + o * row + offsets[t];
        for (std::int64_t j = 0; j < chunk; ++j) g[o * chunk + j] += src[j];
      }
    }
  });
}

Tensor slice(const Tensor& x, std::size_t dim, std::int64_t start, std::int64_t length) {
  if (dim >= x.rank() || start < 0 || length < 0 || start + length > x.dim(dim)) {
    throw ContractError("slice: range [" + std::to_string(start) + ", +" + std::to_string(length) +
                        ") out of bounds for " + to_string(x.shape()));
  }
  Shape out = x.shape();
  out[dim] = length;
  std::int64_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < dim; ++d) outer *= out[d];
  for (std::size_t d = dim + 1; d < out.size(); ++d) inner *= out[d];
  const auto src_row = x.dim(dim) * inner, dst_row = length * inner;
  std::vector<double> y(static_cast<std::size_t>(numel(out)));
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(x.values().data() + o * src_row + start * inner, dst_row, y.data() + o * dst_row);
  }
  return make_result(std::move(out), std::move(y), {x}, [x, outer, src_row, dst_row, start, inner](Node& self) {
    double* g = grad_ptr(x);
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t j = 0; j < dst_row; ++j) g[o * src_row + start * inner + j] += self.grad[o * dst_row + j];
    }
  });
}

namespace {

Shape reduced_shape(const Shape& s, const std::vector<std::size_t>& dims) {
  Shape out = s;
  for (auto d : dims) {
    if (d >= s.size()) throw ContractError("reduction dim out of range for " + to_string(s));
    out[d] = 1;
  }
  return out;
}

}  // namespace

Tensor mean(const Tensor& x, const std::vector<std::size_t>& dims) {
  Shape out = reduced_shape(x.shape(), dims);
  auto map = std::make_shared<std::vector<std::int64_t>>(broadcast_map(x.shape(), out));
  const double count = static_cast<double>(x.numel()) / static_cast<double>(numel(out));
  std::vector<double> y(static_cast<std::size_t>(numel(out)), 0.0);
  const auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) y[(*map)[i]] += xv[i];
  for (double& v : y) v /= count;
  return make_result(std::move(out), std::move(y), {x}, [x, map, count](Node& self) {
    double* g = grad_ptr(x);
    for (std::size_t i = 0; i < map->size(); ++i) g[i] += self.grad[(*map)[i]] / count;
  });
}

Tensor amax(const Tensor& x, const std::vector<std::size_t>& dims) {
  Shape out = reduced_shape(x.shape(), dims);
  const auto map = broadcast_map(x.shape(), out);
  const auto n = static_cast<std::size_t>(numel(out));
  std::vector<double> y(n, -std::numeric_limits<double>::infinity());
  auto arg = std::make_shared<std::vector<std::int64_t>>(n, -1);
  const auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const auto o = static_cast<std::size_t>(map[i]);
    if ((*arg)[o] < 0 || xv[i] > y[o]) {
      y[o] = xv[i];
      (*arg)[o] = static_cast<std::int64_t>(i);
    }
  }
  return make_result(std::move(out), std::move(y), {x}, [x, arg](Node& self) {
    double* g = grad_ptr(x);
    for (std::size_t o = 0; o < arg->size(); ++o) g[(*arg)[o]] += self.grad[o];
  });
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({}, {s}, {x}, [x](Node& self) {
    double* g = grad_ptr(x);
    for (std::int64_t i = 0; i < x.numel(); ++i) g[i] += self.grad[0];
  });
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) {
    throw ContractError("bce_with_logits: shape mismatch " + to_string(logits.shape()) + " vs " +
                        to_string(targets.shape()));
  }
  const auto z = logits.values();
  const auto t = targets.values();
  const double n = static_cast<double>(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    s += std::max(z[i], 0.0) - z[i] * t[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  return make_result({}, {s / n}, {logits}, [logits, targets, n](Node& self) {
    double* g = grad_ptr(logits);
    const auto z = logits.values();
    const auto t = targets.values();
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double p = z[i] >= 0 ? 1.0 / (1.0 + std::exp(-z[i])) : std::exp(z[i]) / (1.0 + std::exp(z[i]));
      g[i] += self.grad[0] * (p - t[i]) / n;
    }
  });
}

Tensor mse(const Tensor& pred, const Tensor& targets) {
  if (pred.shape() != targets.shape()) throw ContractError("mse: shape mismatch");
  const auto p = pred.values();
  const auto t = targets.values();
  const double n = static_cast<double>(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  return make_result({}, {s / n}, {pred}, [pred, targets, n](Node& self) {
    double* g = grad_ptr(pred);
    const auto p = pred.values();
    const auto t = targets.values();
    for (std::size_t i = 0; i < p.size(); ++i) g[i] += self.grad[0] * 2.0 * (p[i] - t[i]) / n;
  });
}

}  // namespace octbio::tensor
