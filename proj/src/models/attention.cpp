#include "octbio/models/attention.hpp"

#include <cmath>

#include "octbio/core/error.hpp"

namespace octbio::models {

using namespace octbio::tensor;

AttentionWeights make_attention(ParameterSet& params, const Initializer& init, const std::string& name,
                                std::int64_t dim) {
  return {make_linear(params, init, name + ".qkv", dim, 3 * dim), make_linear(params, init, name + ".proj", dim, dim)};
}

Tensor multi_head_attention(const Tensor& tokens, int heads, const AttentionWeights& w) {
  if (tokens.rank() != 3) throw ContractError("attention expects [G, T, C], got " + to_string(tokens.shape()));
  const auto g = tokens.dim(0), t = tokens.dim(1), c = tokens.dim(2);
  if (heads < 1 || c % heads != 0) {
    throw ContractError("attention: " + std::to_string(heads) + " heads do not divide width " + std::to_string(c));
  }
  const auto dh = c / heads;
  const Tensor qkv = permute(reshape(w.qkv(tokens), {g, t, 3, heads, dh}), {2, 0, 3, 1, 4});
  auto part = [&](std::int64_t i) { return reshape(slice(qkv, 0, i, 1), {g * heads, t, dh}); };
  const Tensor q = part(0), k = part(1), v = part(2);
  const Tensor attn = softmax_last(scale(bmm(q, k, true), 1.0 / std::sqrt(static_cast<double>(dh))));
  const Tensor out = reshape(permute(reshape(bmm(attn, v), {g, heads, t, dh}), {0, 2, 1, 3}), {g, t, c});
  return w.proj(out);
}

namespace {

void check_divisible(std::int64_t h, std::int64_t w, std::int64_t window) {
  if (window < 1 || h % window != 0 || w % window != 0) {
    throw ContractError("windowed attention: grid " + std::to_string(h) + "x" + std::to_string(w) +
                        " is not divisible by window " + std::to_string(window) + " (H=" + std::to_string(h) +
                        ", W=" + std::to_string(w) + ")");
  }
}

}  // namespace

std::vector<std::int64_t> window_partition(std::int64_t batch, std::int64_t height, std::int64_t width,
                                           std::int64_t window, AttentionMode mode) {
  check_divisible(height, width, window);
  const auto gh = height / window, gw = width / window;
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(batch * height * width));
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t ti = 0; ti < gh; ++ti) {
      for (std::int64_t tj = 0; tj < gw; ++tj) {
        for (std::int64_t a = 0; a < window; ++a) {
          for (std::int64_t e = 0; e < window; ++e) {
            const auto y = mode == AttentionMode::BLOCK ? ti * window + a : a * gh + ti;
            const auto x = mode == AttentionMode::BLOCK ? tj * window + e : e * gw + tj;
            idx.push_back((b * height + y) * width + x);
          }
        }
      }
    }
  }
  return idx;
}

std::vector<std::int64_t> block_grid_permutation(std::int64_t height, std::int64_t width, std::int64_t window) {
  check_divisible(height, width, window);
  const auto gh = height / window, gw = width / window;
  std::vector<std::int64_t> perm(static_cast<std::size_t>(height * width));
  for (std::int64_t ti = 0; ti < gh; ++ti) {
    for (std::int64_t tj = 0; tj < gw; ++tj) {
      for (std::int64_t a = 0; a < window; ++a) {
        for (std::int64_t e = 0; e < window; ++e) {
          perm[(ti * window + a) * width + tj * window + e] = (a * gh + ti) * width + e * gw + tj;
        }
      }
    }
  }
  return perm;
}

std::vector<std::int64_t> invert_permutation(const std::vector<std::int64_t>& perm) {
  std::vector<std::int64_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<std::int64_t>(i);
  return inv;
}

Tensor windowed_attention(const Tensor& x, std::int64_t window, AttentionMode mode, int heads,
                          const AttentionWeights& w) {
  if (x.rank() != 4) throw ContractError("windowed attention expects [B, H, W, C], got " + to_string(x.shape()));
  const auto b = x.dim(0), h = x.dim(1), wd = x.dim(2), c = x.dim(3);
  const auto order = window_partition(b, h, wd, window, mode);
  const Tensor rows = reshape(x, {b * h * wd, c});
  const Tensor groups = reshape(gather_rows(rows, order), {b * (h / window) * (wd / window), window * window, c});
  const Tensor attended = reshape(multi_head_attention(groups, heads, w), {b * h * wd, c});
  return reshape(gather_rows(attended, invert_permutation(order)), {b, h, wd, c});
}

}  // namespace octbio::models
