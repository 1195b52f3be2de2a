// OpenMP kernels. Outputs are partitioned across threads (never reduced
// across threads) and every output accumulates its terms in the same order
// as the serial reference, so results do not depend on the thread count.

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include "octbio/tensor/kernels.hpp"

namespace octbio::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::Parallel};
constexpr std::int64_t kMinParallelWork = 1 << 14;
}  // namespace

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }
const Ops& active() { return backend() == Backend::Serial ? serial::ops : parallel::ops; }

namespace parallel {

namespace {

// One C[g] row block: tmp accumulates sum_l a(i,l) * bt(l,:) with l ascending.
void gemm_rows(const GemmArgs& p, const double* a, const double* bt, double* c, std::int64_t i0,
               std::int64_t i1, double* tmp) {
  for (std::int64_t i = i0; i < i1; ++i) {
    std::fill(tmp, tmp + p.n, 0.0);
    for (std::int64_t l = 0; l < p.k; ++l) {
      const double av = p.trans_a ? a[l * p.m + i] : a[i * p.k + l];
      const double* brow = bt + l * p.n;
      for (std::int64_t j = 0; j < p.n; ++j) tmp[j] += av * brow[j];
    }
    double* crow = c + i * p.n;
    if (p.accumulate) {
      for (std::int64_t j = 0; j < p.n; ++j) crow[j] += tmp[j];
    } else {
      std::copy(tmp, tmp + p.n, crow);
    }
  }
}

// op(B[g]) laid out K x N.
const double* dense_b(const GemmArgs& p, const double* b, std::vector<double>& scratch) {
  if (!p.trans_b) return b;
  scratch.resize(static_cast<std::size_t>(p.k * p.n));
  for (std::int64_t j = 0; j < p.n; ++j) {
    for (std::int64_t l = 0; l < p.k; ++l) scratch[l * p.n + j] = b[j * p.k + l];
  }
  return scratch.data();
}

void gemm(const GemmArgs& p) {
  const bool big = p.batch * p.m * p.n * p.k >= kMinParallelWork;
  if (p.batch == 1) {
    std::vector<double> bt_store;
    const double* bt = dense_b(p, p.b, bt_store);
#pragma omp parallel if (big)
    {
      std::vector<double> tmp(static_cast<std::size_t>(p.n));
#pragma omp for schedule(static)
      for (std::int64_t i = 0; i < p.m; ++i) gemm_rows(p, p.a, bt, p.c, i, i + 1, tmp.data());
    }
    return;
  }
#pragma omp parallel if (big)
  {
    std::vector<double> tmp(static_cast<std::size_t>(p.n));
    std::vector<double> bt_store;
#pragma omp for schedule(static)
    for (std::int64_t g = 0; g < p.batch; ++g) {
      const double* bt = dense_b(p, p.b + g * p.k * p.n, bt_store);
      gemm_rows(p, p.a + g * p.m * p.k, bt, p.c + g * p.m * p.n, 0, p.m, tmp.data());
    }
  }
}

// Range of output columns whose input column ox*stride - pad + kx is in [0, width).
inline void valid_range(std::int64_t out, std::int64_t in, std::int64_t stride, std::int64_t pad,
                        std::int64_t k, std::int64_t& lo, std::int64_t& hi) {
  lo = 0;
  while (lo < out && lo * stride - pad + k < 0) ++lo;
  hi = out;
  while (hi > lo && (hi - 1) * stride - pad + k >= in) --hi;
}

void conv2d_forward(const Conv2dArgs& p, const double* x, const double* w, const double* bias, double* y) {
  const auto oh = p.out_height(), ow = p.out_width();
  const auto cg = p.in_channels / p.groups, og = p.out_channels / p.groups;
  const bool big = p.batch * p.out_channels * oh * ow * cg * p.kernel * p.kernel >= kMinParallelWork;
#pragma omp parallel if (big)
  {
    std::vector<double> tmp(static_cast<std::size_t>(oh * ow));
#pragma omp for schedule(static)
    for (std::int64_t plane = 0; plane < p.batch * p.out_channels; ++plane) {
      const auto b = plane / p.out_channels, oc = plane % p.out_channels, grp = oc / og;
      std::fill(tmp.begin(), tmp.end(), 0.0);
      for (std::int64_t icg = 0; icg < cg; ++icg) {
        const double* xp = x + (b * p.in_channels + grp * cg + icg) * p.height * p.width;
        for (std::int64_t ky = 0; ky < p.kernel; ++ky) {
          for (std::int64_t kx = 0; kx < p.kernel; ++kx) {
            const double wv = w[((oc * cg + icg) * p.kernel + ky) * p.kernel + kx];
            std::int64_t x0, x1;
            valid_range(ow, p.width, p.stride, p.pad, kx, x0, x1);
            for (std::int64_t oy = 0; oy < oh; ++oy) {
              const auto iy = oy * p.stride - p.pad + ky;
              if (iy < 0 || iy >= p.height) continue;
              const double* xrow = xp + iy * p.width - p.pad + kx;
              double* trow = tmp.data() + oy * ow;
              for (std::int64_t ox = x0; ox < x1; ++ox) trow[ox] += wv * xrow[ox * p.stride];
            }
          }
        }
      }
      double* yp = y + plane * oh * ow;
      for (std::int64_t i = 0; i < oh * ow; ++i) yp[i] = bias ? tmp[i] + bias[oc] : tmp[i];
    }
  }
}

void conv2d_backward_data(const Conv2dArgs& p, const double* gy, const double* w, double* gx) {
  const auto oh = p.out_height(), ow = p.out_width();
  const auto cg = p.in_channels / p.groups, og = p.out_channels / p.groups;
  const bool big = p.batch * p.out_channels * oh * ow * cg * p.kernel * p.kernel >= kMinParallelWork;
#pragma omp parallel if (big)
  {
    std::vector<double> tmp(static_cast<std::size_t>(p.height * p.width));
#pragma omp for schedule(static)
    for (std::int64_t plane = 0; plane < p.batch * p.in_channels; ++plane) {
      const auto b = plane / p.in_channels, ic = plane % p.in_channels;
      const auto grp = ic / cg, icg = ic % cg;
      std::fill(tmp.begin(), tmp.end(), 0.0);
      for (std::int64_t ocg = 0; ocg < og; ++ocg) {
        const auto oc = grp * og + ocg;
        const double* gp = gy + (b * p.out_channels + oc) * oh * ow;
        for (std::int64_t ky = 0; ky < p.kernel; ++ky) {
          for (std::int64_t kx = 0; kx < p.kernel; ++kx) {
            const double wv = w[((oc * cg + icg) * p.kernel + ky) * p.kernel + kx];
            std::int64_t x0, x1;
            valid_range(ow, p.width, p.stride, p.pad, kx, x0, x1);
            for (std::int64_t oy = 0; oy < oh; ++oy) {
              const auto iy = oy * p.stride - p.pad + ky;
              if (iy < 0 || iy >= p.height) continue;
              double* trow = tmp.data() + iy * p.width - p.pad + kx;
              const double* grow = gp + oy * ow;
              for (std::int64_t ox = x0; ox < x1; ++ox) trow[ox * p.stride] += wv * grow[ox];
            }
          }
        }
      }
      double* gxp = gx + plane * p.height * p.width;
      for (std::int64_t i = 0; i < p.height * p.width; ++i) gxp[i] += tmp[i];
    }
  }
}

void conv2d_backward_weight(const Conv2dArgs& p, const double* x, const double* gy, double* gw,
                            double* gbias) {
  const auto oh = p.out_height(), ow = p.out_width();
  const auto cg = p.in_channels / p.groups, og = p.out_channels / p.groups;
  const bool big = p.batch * p.out_channels * oh * ow * cg * p.kernel * p.kernel >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (std::int64_t oc = 0; oc < p.out_channels; ++oc) {
    const auto grp = oc / og;
    for (std::int64_t icg = 0; icg < cg; ++icg) {
      const auto ic = grp * cg + icg;
      for (std::int64_t ky = 0; ky < p.kernel; ++ky) {
        for (std::int64_t kx = 0; kx < p.kernel; ++kx) {
          std::int64_t x0, x1;
          valid_range(ow, p.width, p.stride, p.pad, kx, x0, x1);
          double s = 0.0;
          for (std::int64_t b = 0; b < p.batch; ++b) {
            const double* gp = gy + (b * p.out_channels + oc) * oh * ow;
            const double* xp = x + (b * p.in_channels + ic) * p.height * p.width;
            for (std::int64_t oy = 0; oy < oh; ++oy) {
              const auto iy = oy * p.stride - p.pad + ky;
              if (iy < 0 || iy >= p.height) continue;
              const double* grow = gp + oy * ow;
              const double* xrow = xp + iy * p.width - p.pad + kx;
              for (std::int64_t ox = x0; ox < x1; ++ox) s += grow[ox] * xrow[ox * p.stride];
            }
          }
          gw[((oc * cg + icg) * p.kernel + ky) * p.kernel + kx] += s;
        }
      }
    }
    if (gbias) {
      double s = 0.0;
      for (std::int64_t b = 0; b < p.batch; ++b) {
        const double* gp = gy + (b * p.out_channels + oc) * oh * ow;
        for (std::int64_t i = 0; i < oh * ow; ++i) s += gp[i];
      }
      gbias[oc] += s;
    }
  }
}

void softmax_rows(std::int64_t rows, std::int64_t cols, const double* x, double* y) {
#pragma omp parallel for schedule(static) if (rows * cols >= kMinParallelWork)
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* yr = y + r * cols;
    double m = xr[0];
    for (std::int64_t j = 1; j < cols; ++j) m = std::max(m, xr[j]);
    double s = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - m);
      s += yr[j];
    }
    for (std::int64_t j = 0; j < cols; ++j) yr[j] /= s;
  }
}

void softmax_rows_backward(std::int64_t rows, std::int64_t cols, const double* y, const double* gy,
                           double* gx) {
#pragma omp parallel for schedule(static) if (rows * cols >= kMinParallelWork)
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* yr = y + r * cols;
    const double* gr = gy + r * cols;
    double dot = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
    double* out = gx + r * cols;
    for (std::int64_t j = 0; j < cols; ++j) out[j] += yr[j] * (gr[j] - dot);
  }
}

}  // namespace

const Ops ops{gemm, conv2d_forward, conv2d_backward_data, conv2d_backward_weight, softmax_rows,
              softmax_rows_backward};

}  // namespace parallel
}  // namespace octbio::kernels
