#include "octbio/models/cbam.hpp"

#include <algorithm>
#include <cmath>

#include "octbio/core/error.hpp"

namespace octbio::models {

using namespace octbio::tensor;

int CbamParams::effective_reduction() const {
  int r = std::clamp(reduction, 1, std::max(1, channels));
  while (r > 1 && channels % r != 0) --r;
  return r;
}

std::int64_t CbamParams::parameter_count() const {
  const std::int64_t c = channels, h = hidden(), k = spatial_kernel;
  return (c * h + h) + (h * c + c) + (2 * k * k + 1);
}

void CbamParams::validate() const {
  if (channels < 1) throw ContractError("CBAM channels must be positive");
  if (reduction < 1) throw ContractError("CBAM reduction must be >= 1");
  if (spatial_kernel < 1 || spatial_kernel % 2 == 0) throw ContractError("CBAM spatial kernel must be odd");
}

CbamWeights make_cbam(ParameterSet& params, const Initializer& init, const std::string& name, const CbamParams& p) {
  p.validate();
  CbamWeights w;
  w.mlp_in = make_linear(params, init, name + ".mlp_in", p.channels, p.hidden());
  w.mlp_out = make_linear(params, init, name + ".mlp_out", p.hidden(), p.channels);
  const auto k = p.spatial_kernel;
  w.spatial_weight = params.add(name + ".spatial.weight",
                                init.normal(name + ".spatial.weight", {1, 2, k, k}, std::sqrt(2.0 / (2.0 * k * k))));
  w.spatial_bias = params.add(name + ".spatial.bias", Initializer::zeros({1}));
  return w;
}

Tensor cbam_apply(const Tensor& x, const CbamParams& p, const CbamWeights& w, CbamGates gates) {
  if (x.rank() != 4 || x.dim(1) != p.channels) {
    throw ContractError("cbam_apply: expected [B, " + std::to_string(p.channels) + ", H, W], got " +
                        to_string(x.shape()));
  }
  if (gates == CbamGates::ForcedOpen) return x;

  const auto b = x.dim(0), c = x.dim(1);
  auto mlp = [&](const Tensor& v) { return w.mlp_out(relu(w.mlp_in(v))); };
  const Tensor avg = reshape(mean(x, {2, 3}), {b, c});
  const Tensor mx = reshape(amax(x, {2, 3}), {b, c});
  const Tensor channel_gate = reshape(sigmoid(add(mlp(avg), mlp(mx))), {b, c, 1, 1});
  const Tensor refined = mul(x, channel_gate);

  const Tensor pooled = concat({mean(refined, {1}), amax(refined, {1})}, 1);
  const Tensor spatial_gate = sigmoid(conv2d(pooled, w.spatial_weight, w.spatial_bias, 1, p.spatial_kernel / 2));
  return mul(refined, spatial_gate);
}

}  // namespace octbio::models
