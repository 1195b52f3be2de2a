#pragma once

#include <cstdint>
#include <string>

#include "octbio/models/layers.hpp"

namespace octbio::models {

// Channel attention (shared two-layer MLP over avg- and max-pooled
// descriptors) followed by spatial attention (k x k conv over the
// channel-wise avg/max maps).
struct CbamParams {
  int channels = 0;
  int reduction = 16;
  int spatial_kernel = 7;

  // Reduction actually used: the largest divisor of `channels` not above
  // `reduction`, clamped to [1, channels].
  int effective_reduction() const;
  int hidden() const { return channels / effective_reduction(); }
  std::int64_t parameter_count() const;
  void validate() const;
};

struct CbamWeights {
  Linear mlp_in;          // C -> C/r
  Linear mlp_out;         // C/r -> C
  Tensor spatial_weight;  // [1, 2, k, k]
  Tensor spatial_bias;    // [1]
};

enum class CbamGates { Learned, ForcedOpen };

CbamWeights make_cbam(ParameterSet& params, const Initializer& init, const std::string& name, const CbamParams& p);

// x * Mc(x) * Ms(x * Mc(x)) for x of shape [B, C, H, W]. ForcedOpen pins
// both gates to 1, which makes the block the identity.
Tensor cbam_apply(const Tensor& x, const CbamParams& p, const CbamWeights& w, CbamGates gates = CbamGates::Learned);

}  // namespace octbio::models
