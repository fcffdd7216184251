#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dnas::ag {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor;

/// View handed to an operator's backward function. Input gradient spans are
/// empty for inputs that do not require a gradient; writers must accumulate.
class BackwardContext {
 public:
  std::span<const double> out_grad() const { return out_grad_; }
  std::span<const double> out_value() const;
  std::span<const double> input_value(std::size_t i) const;
  std::span<double> input_grad(std::size_t i) const;
  std::size_t num_inputs() const;

 private:
  friend class Graph;
  BackwardContext(const void* node, std::span<const double> out_grad)
      : node_(node), out_grad_(out_grad) {}
  const void* node_;
  std::span<const double> out_grad_;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

namespace detail {
struct Node;
}

/// Dense fp64 array with an optional gradient accumulator. Copies share the
/// underlying storage; a Tensor is a handle onto one graph node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  bool is_leaf() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Seeds d(self)/d(self) = 1 (scalar outputs only) and accumulates into leaves.
  void backward() const;

  /// Same values, no history, no gradient.
  Tensor detach() const;

  /// Deep copy of values into a fresh leaf.
  Tensor clone(bool requires_grad = false) const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  const std::string& op_name() const;

 private:
  friend class Graph;
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>, BackwardFn,
                            const char*);
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Records an operator result. The result requires a gradient iff any input
/// does; otherwise the backward function and inputs are dropped.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   BackwardFn backward, const char* op_name);

/// Reverse topological walk over everything reachable from one output.
class Graph {
 public:
  explicit Graph(const Tensor& output);

  std::size_t num_nodes() const { return order_.size(); }
  /// Op names in topological order (inputs first).
  std::vector<std::string> op_names() const;

  /// Runs backward with the given seed gradient (defaults to ones for a scalar).
  void backward(std::span<const double> seed = {}) const;

 private:
  Tensor output_;
  std::vector<detail::Node*> order_;
};

}  // namespace dnas::ag
