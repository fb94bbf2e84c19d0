// Dense double-precision tensor with reverse-mode differentiation.
//
// A Tensor is a cheap handle onto a shared node of the computation graph.
// Ops (see ops.hpp) create new nodes that remember their inputs and a
// backward closure; Tensor::backward() walks the recorded graph in reverse
// topological order and accumulates gradients into every node that
// requires them.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcfm {

/// Raised when tensor extents do not satisfy an op's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace dcfm

namespace dcfm::tl {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string to_string(const Shape& shape);

class Tensor;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  // Writable access; only meaningful for leaves (parameters, inputs).
  std::span<double> mutable_data() { return node_->value; }
  double item() const;
  double operator[](std::size_t flat) const { return node_->value[flat]; }

  bool requires_grad() const;
  // Gradient of the last backward pass; zeros if none reached this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Seeds d(self)/d(self) = 1 and propagates. Requires a one-element tensor.
  void backward() const;

  // Same values, cut from the graph.
  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const;

  // Internal: graph construction for ops.
  static Tensor make_result(Shape shape, std::vector<double> value,
                            std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

}  // namespace dcfm::tl
