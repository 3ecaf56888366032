#include "emog/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "emog/error.hpp"

namespace emog {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_string(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

const Shape& Tensor::shape() const {
  if (!node_) throw ArgumentError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::span<const double> Tensor::data() const {
  if (!node_) return {};
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) return {};
  if (!node_->parents.empty()) throw ArgumentError("cannot mutate the output of op " + std::string(node_->op));
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!node_) throw ArgumentError("use of undefined tensor");
  node_->requires_grad = flag;
}

bool Tensor::is_leaf() const { return node_ && node_->parents.empty(); }

const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw DimensionError("backward() without seed requires a scalar, got " + shape_string(shape()));
  }
  const double one = 1.0;
  backward(std::span<const double>(&one, 1));
}

void Tensor::backward(std::span<const double> seed) const {
  if (!node_) throw ArgumentError("backward on undefined tensor");
  if (seed.size() != node_->value.size()) {
    throw DimensionError("backward seed of " + std::to_string(seed.size()) + " values for tensor " +
                         shape_string(node_->shape));
  }

  // Iterative post-order DFS gives a topological order without recursion.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  auto& g = node_->ensure_grad();
  for (std::size_t i = 0; i < seed.size(); ++i) g[i] += seed[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

Tensor Tensor::detach() const {
  if (!node_) return {};
  return Tensor(node_->shape, node_->value, false);
}

Tensor Tensor::from_op(const char* op, Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                       std::function<void(detail::Node&)> backward) {
  Tensor out;
  out.node_ = std::make_shared<detail::Node>();
  out.node_->shape = std::move(shape);
  out.node_->value = std::move(value);
  out.node_->op = op;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& p) { return p.defined() && p.requires_grad(); });
  if (g_grad_enabled && any) {
    out.node_->requires_grad = true;
    for (auto& p : parents) {
      if (p.defined()) out.node_->parents.push_back(p.node_);
    }
    out.node_->backward = std::move(backward);
  }
  return out;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace emog
