#include "dnas/autograd/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>
#include <utility>

#include "dnas/errors.hpp"

namespace dnas::ag {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
  std::string op = "leaf";
};

}  // namespace detail

using detail::Node;

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::span<const double> BackwardContext::out_value() const {
  return static_cast<const Node*>(node_)->value;
}

std::span<const double> BackwardContext::input_value(std::size_t i) const {
  return static_cast<const Node*>(node_)->inputs.at(i)->value;
}

std::span<double> BackwardContext::input_grad(std::size_t i) const {
  Node* in = static_cast<const Node*>(node_)->inputs.at(i).get();
  if (!in->requires_grad) return {};
  return in->grad;
}

std::size_t BackwardContext::num_inputs() const {
  return static_cast<const Node*>(node_)->inputs.size();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = numel(shape);
  return from_values(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  if (numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " holds " + std::to_string(numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_values({}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(node_->shape));
  }
  return node_->shape[axis];
}

std::size_t Tensor::size() const { return node_->value.size(); }

std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::mutable_values() { return node_->value; }

double Tensor::item() const {
  if (node_->value.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_string(node_->shape));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

bool Tensor::is_leaf() const { return node_->leaf; }

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() { return node_->grad; }

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

void Tensor::backward() const { Graph(*this).backward(); }

Tensor Tensor::detach() const { return from_values(node_->shape, node_->value, false); }

Tensor Tensor::clone(bool requires_grad) const {
  return from_values(node_->shape, node_->value, requires_grad);
}

const std::string& Tensor::op_name() const { return node_->op; }

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   BackwardFn backward, const char* op_name) {
  if (numel(shape) != values.size()) {
    throw DimensionError(std::string(op_name) + ": result shape " + shape_string(shape) +
                         " does not match " + std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->leaf = false;
  node->op = op_name;
  node->requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                    [](const Tensor& t) { return t.requires_grad(); });
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(std::move(t.node_));
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Graph::Graph(const Tensor& output) : output_(output) {
  // Iterative post-order DFS; each node is emitted once after its inputs.
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(output.node_.get(), 0);
  visited.insert(output.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

std::vector<std::string> Graph::op_names() const {
  std::vector<std::string> names;
  names.reserve(order_.size());
  for (const Node* n : order_) names.push_back(n->op);
  return names;
}

void Graph::backward(std::span<const double> seed) const {
  Node* out = output_.node_.get();
  if (!out->requires_grad) return;
  if (seed.empty() && out->value.size() != 1) {
    throw DimensionError("backward() without a seed needs a scalar output, got " +
                         shape_string(out->shape));
  }
  if (!seed.empty() && seed.size() != out->value.size()) {
    throw DimensionError("backward seed has " + std::to_string(seed.size()) +
                         " values for output " + shape_string(out->shape));
  }
  for (Node* n : order_) {
    if (!n->leaf && n->requires_grad) n->grad.assign(n->value.size(), 0.0);
  }
  for (std::size_t i = 0; i < out->grad.size(); ++i) out->grad[i] += seed.empty() ? 1.0 : seed[i];

  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* n = *it;
    if (n->leaf || !n->backward) continue;
    n->backward(BackwardContext(n, n->grad));
  }
}

}  // namespace dnas::ag
