#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace emog {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One record of the computation graph. Op results keep their operands alive
// through `parents`; `backward` reads `grad` and accumulates into parents.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense row-major tensor of doubles with reverse-mode autodiff.
///
/// Copies are shallow: two Tensor handles may refer to the same node. Values
/// written by an op are never modified afterwards; only leaves (parameters,
/// inputs) expose mutable data.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Mutable view of a leaf's values. Throws for op results.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  const char* op_name() const;

  /// Accumulated gradient; empty when nothing has flowed back yet.
  std::span<const double> grad() const;
  void zero_grad();

  /// Reverse pass from a scalar tensor (seed 1).
  void backward() const;
  /// Reverse pass seeded with an explicit output cotangent.
  void backward(std::span<const double> seed) const;

  /// Value copy cut from the graph.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  /// Builds an op result. Parents are recorded only when gradient recording
  /// is enabled and at least one of them requires a gradient.
  static Tensor from_op(const char* op, Shape shape, std::vector<double> value,
                        std::vector<Tensor> parents, std::function<void(detail::Node&)> backward);

 private:
  std::shared_ptr<detail::Node> node_;
};

bool grad_enabled();

/// Disables graph recording for its lifetime (inference, sampling).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace emog
