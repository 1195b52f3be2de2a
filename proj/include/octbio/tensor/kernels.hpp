#pragma once

#include <cstdint>

// Dense numeric kernels behind the autograd ops. Each kernel exists twice:
// `serial` is a direct textbook loop nest kept as the reference, `parallel`
// reorders loops for vectorisation and splits independent outputs across
// OpenMP threads. Both accumulate every output in the same order, so they
// agree bit for bit; tests rely on that.
namespace octbio::kernels {

enum class Backend { Serial, Parallel };

void set_backend(Backend b);
Backend backend();

// C[g] (+)= op(A[g]) * op(B[g]) for g in [0, batch). op(X) is X or X^T.
// Row-major; A[g] is M x K (or K x M when trans_a), B[g] is K x N (or N x K).
struct GemmArgs {
  std::int64_t batch = 1, m = 0, n = 0, k = 0;
  const double* a = nullptr;
  const double* b = nullptr;
  double* c = nullptr;
  bool trans_a = false, trans_b = false;
  bool accumulate = false;  // C += result instead of C = result
};

struct Conv2dArgs {
  std::int64_t batch = 0, in_channels = 0, height = 0, width = 0;
  std::int64_t out_channels = 0, kernel = 0, stride = 1, pad = 0, groups = 1;
  std::int64_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::int64_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

struct Ops {
  void (*gemm)(const GemmArgs&);
  // y = conv(x, w) + bias; bias may be null.
  void (*conv2d_forward)(const Conv2dArgs&, const double* x, const double* w, const double* bias, double* y);
  // gx += conv^T(gy, w)
  void (*conv2d_backward_data)(const Conv2dArgs&, const double* gy, const double* w, double* gx);
  // gw += corr(x, gy); gbias += sum(gy) when gbias is non-null
  void (*conv2d_backward_weight)(const Conv2dArgs&, const double* x, const double* gy, double* gw,
                                 double* gbias);
  // Row softmax over `cols` and its vector-Jacobian product.
  void (*softmax_rows)(std::int64_t rows, std::int64_t cols, const double* x, double* y);
  void (*softmax_rows_backward)(std::int64_t rows, std::int64_t cols, const double* y, const double* gy,
                                double* gx);
};

namespace serial {
extern const Ops ops;
}
namespace parallel {
extern const Ops ops;
}

// Kernels for the active backend.
const Ops& active();

inline void gemm(const GemmArgs& a) { active().gemm(a); }

}  // namespace octbio::kernels
