#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "octbio/models/layers.hpp"

namespace octbio::models {

enum class AttentionMode { BLOCK, GRID };

struct AttentionWeights {
  Linear qkv;   // C -> 3C
  Linear proj;  // C -> C
};

AttentionWeights make_attention(ParameterSet& params, const Initializer& init, const std::string& name,
                                std::int64_t dim);

// Full multi-head self-attention within each group of tokens: [G, T, C] -> [G, T, C].
Tensor multi_head_attention(const Tensor& tokens, int heads, const AttentionWeights& w);

// Row order that lists tokens of a [B, H, W] grid group by group.
// BLOCK groups are window x window tiles; GRID groups are the tokens sharing
// (row mod H/window, col mod W/window). Members keep (a, b) raster order.
std::vector<std::int64_t> window_partition(std::int64_t batch, std::int64_t height, std::int64_t width,
                                           std::int64_t window, AttentionMode mode);

// Token permutation P of one H x W grid with GRID(x) = P^-1(BLOCK(P(x))):
// P(x)[i] = x[perm[i]] in raster order.
std::vector<std::int64_t> block_grid_permutation(std::int64_t height, std::int64_t width, std::int64_t window);

std::vector<std::int64_t> invert_permutation(const std::vector<std::int64_t>& perm);

// x: [B, H, W, C]; H and W must be divisible by window.
Tensor windowed_attention(const Tensor& x, std::int64_t window, AttentionMode mode, int heads,
                          const AttentionWeights& w);

}  // namespace octbio::models
