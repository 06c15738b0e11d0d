#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hbm {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class OpKind {
  leaf,
  add,
  sub,
  mul,
  matmul,
  conv1d,
  conv2d,
  sigmoid,
  relu,
  softmax,
  mean,
  sum,
  max_pool1d,
  upsample1d,
  concat,
  slice,
  transpose,
  scalar_mul,
  add_scalar,
  log,
  sqrt,
  pow,
  clamp,
  weighted_sum,
  flip,
  reshape,
  bm_sample,
  bm_collapse,
};

std::string_view op_name(OpKind op);

// Thrown when operand shapes are incompatible; the message names the op and
// both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;
  OpKind op = OpKind::leaf;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

// Dense row-major f64 array. Copies share the underlying node; use clone()
// for a deep copy of the values.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node> node);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Only leaves may be written in place.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  OpKind op() const;
  Tensor detach() const;
  Tensor clone() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Topologically ordered view of the graph rooted at a tensor. Only nodes that
// require a gradient are recorded.
class Graph {
 public:
  static Graph trace(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  std::span<detail::Node* const> nodes() const { return order_; }

  // Seeds d(root)/d(root) = 1 and runs every recorded backward rule once, in
  // reverse topological order. Interior nodes release their inputs afterwards.
  void backward();

 private:
  std::shared_ptr<detail::Node> root_;
  std::vector<detail::Node*> order_;
};

// Runs reverse-mode accumulation from a scalar loss.
void backward(const Tensor& loss);

bool grad_enabled();

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace testing {

// Negative-control hook for gradient checks: while set, the backward rule of
// the given op scales its incoming gradient by 1.5.
void set_backward_fault(std::optional<OpKind> op);
std::optional<OpKind> backward_fault();

}  // namespace testing

}  // namespace hbm
