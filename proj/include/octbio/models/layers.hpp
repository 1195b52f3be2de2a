#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "octbio/tensor/ops.hpp"

namespace octbio::models {

using tensor::Shape;
using tensor::Tensor;

// Named trainable tensors in registration order. Names are canonical
// ("reduction_a.cbam.mlp_in.weight") and key checkpoints.
class ParameterSet {
 public:
  Tensor add(std::string name, Tensor value);

  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::int64_t scalar_count() const;

  void zero_grad();
  // Copies values of same-named, same-shaped parameters from `other`;
  // returns how many were copied.
  std::size_t copy_matching(const ParameterSet& other);

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

// Initialisation draws from a per-parameter stream keyed by name, so a
// parameter's initial value does not depend on which other parameters exist.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : seed_(seed) {}
  Tensor normal(const std::string& name, Shape shape, double std) const;
  Tensor uniform(const std::string& name, Shape shape, double bound) const;
  static Tensor zeros(Shape shape) { return Tensor::zeros(std::move(shape)); }
  static Tensor ones(Shape shape) { return Tensor::full(std::move(shape), 1.0); }

 private:
  std::uint64_t seed_;
};

struct Linear {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
  Tensor operator()(const Tensor& x) const { return tensor::linear(x, weight, bias); }
};

struct Conv2d {
  Tensor weight;  // [out, in / groups, k, k]
  Tensor bias;    // [out]
  std::int64_t stride = 1, pad = 0, groups = 1;
  Tensor operator()(const Tensor& x) const { return tensor::conv2d(x, weight, bias, stride, pad, groups); }
};

struct LayerNorm {
  Tensor gamma, beta;
  Tensor operator()(const Tensor& x) const { return tensor::layer_norm_last(x, gamma, beta); }
};

struct Mlp {
  Linear fc1, fc2;
  Tensor operator()(const Tensor& x) const { return fc2(tensor::gelu(fc1(x))); }
};

// Xavier-uniform weights, zero bias.
Linear make_linear(ParameterSet& params, const Initializer& init, const std::string& name, std::int64_t in,
                   std::int64_t out);
// He-normal weights (fan-in), zero bias.
Conv2d make_conv(ParameterSet& params, const Initializer& init, const std::string& name, std::int64_t in,
                 std::int64_t out, std::int64_t kernel, std::int64_t stride, std::int64_t pad,
                 std::int64_t groups = 1);
LayerNorm make_layer_norm(ParameterSet& params, const std::string& name, std::int64_t dim);
Mlp make_mlp(ParameterSet& params, const Initializer& init, const std::string& name, std::int64_t dim,
             std::int64_t hidden);

}  // namespace octbio::models
