#include "octbio/tensor/tensor.hpp"

#include <unordered_set>

#include "octbio/core/error.hpp"

namespace octbio::tensor {

namespace {
thread_local bool g_grad_enabled = true;
}

const std::vector<double> Tensor::kEmpty;

std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string to_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  const auto n = static_cast<std::size_t>(tensor::numel(shape));
  return from(std::move(shape), std::vector<double>(n, v), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) {
    if (d < 0) throw ContractError("negative dimension in shape " + to_string(shape));
  }
  if (static_cast<std::int64_t>(values.size()) != tensor::numel(shape)) {
    throw ContractError("value count " + std::to_string(values.size()) + " does not match shape " +
                        to_string(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) {
    static thread_local std::vector<double> zeros;
    zeros.assign(node_->value.size(), 0.0);
    return zeros;
  }
  return node_->grad;
}

double Tensor::item() const {
  if (node_->value.size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const { return from(node_->shape, node_->value, false); }

void Tensor::backward() const {
  if (node_->value.size() != 1) throw ContractError("backward() needs a scalar, got " + to_string(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || (p.defined() && p.requires_grad());
  }
  if (needs) {
    n->requires_grad = true;
    for (auto& p : parents) {
      if (p.defined()) n->parents.push_back(p.node());
    }
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

}  // namespace octbio::tensor
