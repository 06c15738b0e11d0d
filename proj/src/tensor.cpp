#include "hbm/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

namespace hbm {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::matmul: return "matmul";
    case OpKind::conv1d: return "conv1d";
    case OpKind::conv2d: return "conv2d";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::relu: return "relu";
    case OpKind::softmax: return "softmax";
    case OpKind::mean: return "mean";
    case OpKind::sum: return "sum";
    case OpKind::max_pool1d: return "max_pool1d";
    case OpKind::upsample1d: return "upsample1d";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::transpose: return "transpose";
    case OpKind::scalar_mul: return "scalar_mul";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::log: return "log";
    case OpKind::sqrt: return "sqrt";
    case OpKind::pow: return "pow";
    case OpKind::clamp: return "clamp";
    case OpKind::weighted_sum: return "weighted_sum";
    case OpKind::flip: return "flip";
    case OpKind::reshape: return "reshape";
    case OpKind::bm_sample: return "bm_sample";
    case OpKind::bm_collapse: return "bm_collapse";
  }
  return "unknown";
}

namespace detail {

std::vector<double>& Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace detail

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  auto n = hbm::numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value),
                   requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  if (hbm::numel(shape) != data.size()) {
    throw ShapeError("from_data: shape " + shape_str(shape) + " holds " +
                     std::to_string(hbm::numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_data({}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("dim: axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(shape()));
  }
  return shape()[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }

std::span<double> Tensor::mutable_data() {
  if (node_->op != OpKind::leaf) {
    throw std::logic_error("mutable_data: tensor produced by " +
                           std::string(op_name(node_->op)) +
                           " is not a leaf");
  }
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item: expected a single value, shape is " +
                     shape_str(shape()));
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

OpKind Tensor::op() const { return node_->op; }

Tensor Tensor::detach() const {
  return from_data(shape(), node_->data, false);
}

Tensor Tensor::clone() const {
  return from_data(shape(), node_->data, requires_grad());
}

Graph Graph::trace(const Tensor& root) {
  Graph g;
  g.root_ = root.node();
  if (!root.defined() || !root.requires_grad()) return g;

  // Iterative post-order DFS: a node is emitted after all of its inputs.
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* in = node->inputs[next++].get();
      if (in->requires_grad && seen.insert(in).second) {
        stack.emplace_back(in, 0);
      }
    } else {
      g.order_.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

void Graph::backward() {
  if (!root_) throw std::logic_error("backward: empty graph");
  if (root_->data.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_str(root_->shape));
  }
  if (order_.empty()) return;
  root_->ensure_grad()[0] += 1.0;
  const auto fault = testing::backward_fault();
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->backward) continue;
    node->ensure_grad();
    if (fault && node->op == *fault) {
      for (auto& g : node->grad) g *= 1.5;
    }
    node->backward(*node);
  }
  for (detail::Node* node : order_) {
    if (node->op != OpKind::leaf) {
      node->backward = nullptr;
      node->inputs.clear();
    }
  }
}

void backward(const Tensor& loss) {
  if (loss.defined() && loss.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_str(loss.shape()));
  }
  Graph::trace(loss).backward();
}

namespace {
thread_local bool g_grad_enabled = true;
std::atomic<int> g_fault{-1};
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace testing {

void set_backward_fault(std::optional<OpKind> op) {
  g_fault = op ? static_cast<int>(*op) : -1;
}

std::optional<OpKind> backward_fault() {
  int v = g_fault.load();
  if (v < 0) return std::nullopt;
  return static_cast<OpKind>(v);
}

}  // namespace testing

}  // namespace hbm
