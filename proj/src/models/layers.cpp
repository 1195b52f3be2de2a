#include "octbio/models/layers.hpp"

#include <cmath>

#include "octbio/core/error.hpp"
#include "octbio/core/rng.hpp"

namespace octbio::models {

Tensor ParameterSet::add(std::string name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name " + name);
  value.node()->requires_grad = true;
  items_.emplace_back(std::move(name), value);
  return value;
}

const Tensor& ParameterSet::get(std::string_view name) const {
  for (const auto& [n, t] : items_) {
    if (n == name) return t;
  }
  throw ContractError("no parameter named " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
  for (const auto& item : items_) {
    if (item.first == name) return true;
  }
  return false;
}

std::int64_t ParameterSet::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& item : items_) n += item.second.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& item : items_) item.second.zero_grad();
}

std::size_t ParameterSet::copy_matching(const ParameterSet& other) {
  std::size_t copied = 0;
  for (auto& [name, t] : items_) {
    if (!other.contains(name)) continue;
    const auto& src = other.get(name);
    if (src.shape() != t.shape()) continue;
    std::copy(src.values().begin(), src.values().end(), t.mutable_values().begin());
    ++copied;
  }
  return copied;
}

std::vector<std::vector<double>> ParameterSet::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(items_.size());
  for (const auto& item : items_) out.emplace_back(item.second.values().begin(), item.second.values().end());
  return out;
}

void ParameterSet::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != items_.size()) throw ContractError("parameter snapshot size mismatch");
  for (std::size_t i = 0; i < items_.size(); ++i) {
    auto dst = items_[i].second.mutable_values();
    if (values[i].size() != dst.size()) throw ContractError("parameter snapshot shape mismatch for " + items_[i].first);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

Tensor Initializer::normal(const std::string& name, Shape shape, double std) const {
  Rng rng(derive_seed(seed_, name));
  std::vector<double> v(static_cast<std::size_t>(tensor::numel(shape)));
  for (double& x : v) x = std * rng.normal();
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor Initializer::uniform(const std::string& name, Shape shape, double bound) const {
  Rng rng(derive_seed(seed_, name));
  std::vector<double> v(static_cast<std::size_t>(tensor::numel(shape)));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v));
}

Linear make_linear(ParameterSet& params, const Initializer& init, const std::string& name, std::int64_t in,
                   std::int64_t out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  Linear l;
  l.weight = params.add(name + ".weight", init.uniform(name + ".weight", {out, in}, bound));
  l.bias = params.add(name + ".bias", Initializer::zeros({out}));
  return l;
}

Conv2d make_conv(ParameterSet& params, const Initializer& init, const std::string& name, std::int64_t in,
                 std::int64_t out, std::int64_t kernel, std::int64_t stride, std::int64_t pad,
                 std::int64_t groups) {
  const double fan_in = static_cast<double>(in / groups * kernel * kernel);
  Conv2d c;
  c.weight = params.add(name + ".weight",
                        init.normal(name + ".weight", {out, in / groups, kernel, kernel}, std::sqrt(2.0 / fan_in)));
  c.bias = params.add(name + ".bias", Initializer::zeros({out}));
  c.stride = stride;
  c.pad = pad;
  c.groups = groups;
  return c;
}

LayerNorm make_layer_norm(ParameterSet& params, const std::string& name, std::int64_t dim) {
  return {params.add(name + ".gamma", Initializer::ones({dim})), params.add(name + ".beta", Initializer::zeros({dim}))};
}

Mlp make_mlp(ParameterSet& params, const Initializer& init, const std::string& name, std::int64_t dim,
             std::int64_t hidden) {
  return {make_linear(params, init, name + ".fc1", dim, hidden), make_linear(params, init, name + ".fc2", hidden, dim)};
}

}  // namespace octbio::models
