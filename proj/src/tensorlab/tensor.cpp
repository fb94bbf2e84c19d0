#include "dcfm/tensorlab/tensor.hpp"

#include <unordered_set>
#include <utility>

namespace dcfm::tl {

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

namespace {

std::shared_ptr<detail::Node> new_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.size() > 4) throw ShapeError("tensor rank above 4: " + to_string(shape));
  if (numel_of(shape) != values.size()) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + to_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  const auto n = numel_of(shape);
  return Tensor(new_leaf(std::move(shape), std::vector<double>(n, fill), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(new_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(new_leaf({1}, {v}, requires_grad));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape()));
  }
  return shape()[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

std::span<const double> Tensor::grad() const { return node_->grad_buffer(); }
std::span<double> Tensor::mutable_grad() { return node_->grad_buffer(); }

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

void Tensor::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward() needs a one-element tensor, got shape " + to_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients restart from zero; leaves keep accumulating.
  for (auto* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  }
  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<detail::Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  return Tensor(std::move(node));
}

Tensor Tensor::clone(bool requires_grad) const {
  return Tensor(new_leaf(node_->shape, node_->value, requires_grad));
}

Tensor Tensor::make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward) {
  auto node = new_leaf(std::move(shape), std::move(value), false);
  for (const auto& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace dcfm::tl
