#pragma once

// Define-by-run reverse-mode differentiation.
//
// A Tensor is a shared handle to a Node holding a row-major float64 buffer.
// While a TapeScope is active on the current thread, every op whose inputs
// require gradients appends its output node to that tape together with a
// backward rule. backward(loss) replays the tape in reverse order. Without an
// active tape, ops only compute values (inference mode).

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rgk/core/error.hpp"

namespace rgk {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream oss;
  oss << '[';
  for (std::size_t i = 0; i < s.size(); ++i) oss << (i ? "," : "") << s[i];
  oss << ']';
  return oss.str();
}

class Tape;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until touched by backward
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  Tape* tape = nullptr;
  std::size_t tape_index = 0;

  // Gradient buffer of this node, allocated on first use.
  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false) {
    if (shape.empty()) shape = {1};
    for (auto d : shape)
      if (d == 0) throw std::invalid_argument("tensor: zero-sized dimension in " + shape_str(shape));
    if (shape_numel(shape) != data.size())
      throw std::invalid_argument(detail::concat("tensor: data length ", data.size(),
                                                 " does not match shape ", shape_str(shape)));
    node_ = std::make_shared<Node>();
    node_->shape = std::move(shape);
    node_->value = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }
  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
  }
  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor({1}, {v}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  const std::vector<double>& values() const { return node_->value; }
  std::vector<double>& mutable_values() { return node_->value; }
  const double* data() const { return node_->value.data(); }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double item() const {
    if (numel() != 1) throw std::invalid_argument("item: tensor is not scalar " + shape_str(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient values; zeros when nothing has been accumulated yet.
  std::vector<double> grad() const {
    return node_->grad.empty() ? std::vector<double>(numel(), 0.0) : node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  // New leaf sharing no state with this tensor.
  Tensor detach() const { return Tensor(shape(), values(), false); }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Ordered record of ops. Nodes are appended after their inputs, so the record
// is a topological order by construction.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape() { clear(); }

  void record(const std::shared_ptr<Node>& node) {
    node->tape = this;
    node->tape_index = nodes_.size();
    nodes_.push_back(node);
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::shared_ptr<Node>>& nodes() const { return nodes_; }

  void clear() {
    for (auto& n : nodes_) n->tape = nullptr;
    nodes_.clear();
  }

  static Tape*& active() {
    thread_local Tape* current = nullptr;
    return current;
  }

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
};

// Makes `tape` the active tape of this thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : previous_(Tape::active()) { Tape::active() = &tape; }
  ~TapeScope() { Tape::active() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording (inference inside a training scope).
class NoGradScope {
 public:
  NoGradScope() : previous_(Tape::active()) { Tape::active() = nullptr; }
  ~NoGradScope() { Tape::active() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

namespace detail {

inline bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

// Gradient buffer of input `i` of `self`, or nullptr if it needs no gradient.
inline double* input_grad(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  return in.grad_buffer().data();
}

// Builds the output tensor of an op and records it when required.
template <typename Backward>
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::initializer_list<const Tensor*> inputs, Backward&& backward) {
  Tensor out(std::move(shape), std::move(value));
  if (should_record(inputs)) {
    Node& n = out.node();
    n.requires_grad = true;
    n.leaf = false;
    n.op = op;
    n.inputs.reserve(inputs.size());
    for (const Tensor* t : inputs) n.inputs.push_back(t->node_ptr());
    n.backward_fn = std::forward<Backward>(backward);
    Tape::active()->record(out.node_ptr());
  }
  return out;
}

// Variant for ops with a runtime-sized input list.
template <typename Backward>
Tensor make_result_n(const char* op, Shape shape, std::vector<double> value,
                     const std::vector<Tensor>& inputs, Backward&& backward) {
  Tensor out(std::move(shape), std::move(value));
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (Tape::active() && any) {
    Node& n = out.node();
    n.requires_grad = true;
    n.leaf = false;
    n.op = op;
    for (const auto& t : inputs) n.inputs.push_back(t.node_ptr());
    n.backward_fn = std::forward<Backward>(backward);
    Tape::active()->record(out.node_ptr());
  }
  return out;
}

}  // namespace detail

// Reverse sweep from a scalar loss. Intermediate gradients are reset on every
// call; leaf gradients accumulate until zero_grad().
inline void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  Node& root = loss.node();
  if (root.tape == nullptr) throw std::invalid_argument("backward: loss is not recorded on a tape");
  const auto& nodes = root.tape->nodes();
  std::size_t last = root.tape_index;
  for (std::size_t i = 0; i <= last; ++i) nodes[i]->grad.clear();
  root.grad_buffer()[0] = 1.0;
  for (std::size_t i = last + 1; i-- > 0;) {
    Node& n = *nodes[i];
    if (n.grad.empty() || !n.backward_fn) continue;
    n.backward_fn(n);
  }
}

}  // namespace rgk
