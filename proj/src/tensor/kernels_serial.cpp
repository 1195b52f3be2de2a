// Reference kernels: one output at a time, in the most literal loop order.

#include <algorithm>
#include <cmath>

#include "octbio/tensor/kernels.hpp"

namespace octbio::kernels::serial {

namespace {

void gemm(const GemmArgs& p) {
  for (std::int64_t g = 0; g < p.batch; ++g) {
    const double* a = p.a + g * p.m * p.k;
    const double* b = p.b + g * p.k * p.n;
    double* c = p.c + g * p.m * p.n;
    for (std::int64_t i = 0; i < p.m; ++i) {
      for (std::int64_t j = 0; j < p.n; ++j) {
        double s = 0.0;
        for (std::int64_t l = 0; l < p.k; ++l) {
          const double av = p.trans_a ? a[l * p.m + i] : a[i * p.k + l];
          const double bv = p.trans_b ? b[j * p.k + l] : b[l * p.n + j];
          s += av * bv;
        }
        c[i * p.n + j] = p.accumulate ? c[i * p.n + j] + s : s;
      }
    }
  }
}

void conv2d_forward(const Conv2dArgs& p, const double* x, const double* w, const double* bias, double* y) {
  const auto oh = p.out_height(), ow = p.out_width();
  const auto cg = p.in_channels / p.groups, og = p.out_channels / p.groups;
  for (std::int64_t b = 0; b < p.batch; ++b) {
    for (std::int64_t oc = 0; oc < p.out_channels; ++oc) {
      const auto grp = oc / og;
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          double s = 0.0;
          for (std::int64_t icg = 0; icg < cg; ++icg) {
            const auto ic = grp * cg + icg;
            for (std::int64_t ky = 0; ky < p.kernel; ++ky) {
              const auto iy = oy * p.stride - p.pad + ky;
              if (iy < 0 || iy >= p.height) continue;
              for (std::int64_t kx = 0; kx < p.kernel; ++kx) {
                const auto ix = ox * p.stride - p.pad + kx;
                if (ix < 0 || ix >= p.width) continue;
                s += w[((oc * cg + icg) * p.kernel + ky) * p.kernel + kx] *
                     x[((b * p.in_channels + ic) * p.height + iy) * p.width + ix];
              }
            }
          }
          y[((b * p.out_channels + oc) * oh + oy) * ow + ox] = bias ? s + bias[oc] : s;
        }
      }
    }
  }
}

void conv2d_backward_data(const Conv2dArgs& p, const double* gy, const double* w, double* gx) {
  const auto oh = p.out_height(), ow = p.out_width();
  const auto cg = p.in_channels / p.groups, og = p.out_channels / p.groups;
  for (std::int64_t b = 0; b < p.batch; ++b) {
    for (std::int64_t ic = 0; ic < p.in_channels; ++ic) {
      const auto grp = ic / cg, icg = ic % cg;
      for (std::int64_t iy = 0; iy < p.height; ++iy) {
        for (std::int64_t ix = 0; ix < p.width; ++ix) {
          double s = 0.0;
          for (std::int64_t ocg = 0; ocg < og; ++ocg) {
            const auto oc = grp * og + ocg;
            for (std::int64_t ky = 0; ky < p.kernel; ++ky) {
              const auto ty = iy + p.pad - ky;
              if (ty < 0 || ty % p.stride != 0 || ty / p.stride >= oh) continue;
              const auto oy = ty / p.stride;
              for (std::int64_t kx = 0; kx < p.kernel; ++kx) {
                const auto tx = ix + p.pad - kx;
                if (tx < 0 || tx % p.stride != 0 || tx / p.stride >= ow) continue;
                const auto ox = tx / p.stride;
                s += w[((oc * cg + icg) * p.kernel + ky) * p.kernel + kx] *
                     gy[((b * p.out_channels + oc) * oh + oy) * ow + ox];
              }
            }
          }
          gx[((b * p.in_channels + ic) * p.height + iy) * p.width + ix] += s;
        }
      }
    }
  }
}

void conv2d_backward_weight(const Conv2dArgs& p, const double* x, const double* gy, double* gw,
                            double* gbias) {
  const auto oh = p.out_height(), ow = p.out_width();
  const auto cg = p.in_channels / p.groups, og = p.out_channels / p.groups;
  for (std::int64_t oc = 0; oc < p.out_channels; ++oc) {
    const auto grp = oc / og;
    for (std::int64_t icg = 0; icg < cg; ++icg) {
      const auto ic = grp * cg + icg;
      for (std::int64_t ky = 0; ky < p.kernel; ++ky) {
        for (std::int64_t kx = 0; kx < p.kernel; ++kx) {
          double s = 0.0;
          for (std::int64_t b = 0; b < p.batch; ++b) {
            for (std::int64_t oy = 0; oy < oh; ++oy) {
              const auto iy = oy * p.stride - p.pad + ky;
              if (iy < 0 || iy >= p.height) continue;
              for (std::int64_t ox = 0; ox < ow; ++ox) {
                const auto ix = ox * p.stride - p.pad + kx;
                if (ix < 0 || ix >= p.width) continue;
                s += gy[((b * p.out_channels + oc) * oh + oy) * ow + ox] *
                     x[((b * p.in_channels + ic) * p.height + iy) * p.width + ix];
              }
            }
          }
          gw[((oc * cg + icg) * p.kernel + ky) * p.kernel + kx] += s;
        }
      }
    }
    if (gbias) {
      double s = 0.0;
      for (std::int64_t b = 0; b < p.batch; ++b) {
        for (std::int64_t i = 0; i < oh * ow; ++i) s += gy[(b * p.out_channels + oc) * oh * ow + i];
      }
      gbias[oc] += s;
    }
  }
}

void softmax_rows(std::int64_t rows, std::int64_t cols, const double* x, double* y) {
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
  for (std::int64_t r = 0; r < rows; ++r) {
    double dot = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) dot += gy[r * cols + j] * y[r * cols + j];
    for (std::int64_t j = 0; j < cols; ++j) gx[r * cols + j] += y[r * cols + j] * (gy[r * cols + j] - dot);
  }
}

}  // namespace

const Ops ops{gemm, conv2d_forward, conv2d_backward_data, conv2d_backward_weight, softmax_rows,
              softmax_rows_backward};

}  // namespace octbio::kernels::serial
