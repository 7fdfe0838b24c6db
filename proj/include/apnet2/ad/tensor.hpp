#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace apnet2::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  const char* op = "leaf";
  // Propagates this node's grad into its inputs (accumulating).
  std::function<void(Node&)> backward_fn;

  bool grad_live = false;  // received a contribution during the current reverse pass

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T{0});
  }
  // Gradient buffer for accumulation from a downstream node.
  T* accum() {
    ensure_grad();
    grad_live = true;
    return grad.data();
  }
};

// Shared handle to a node. Copies alias the same storage.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape) { return full(std::move(shape), T{0}); }
  static Tensor full(Shape shape, T v);
  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> values() const& { return node_->value; }
  // A temporary's storage may die with it, so rvalues hand out a copy.
  std::vector<T> values() const&& { return node_->value; }
  // In-place access for leaves (parameter updates, perturbation in grad checks).
  std::span<T> mutable_values() { return node_->value; }
  std::span<const T> grad() const& { return node_->grad; }
  std::vector<T> grad() const&& { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  // New leaf holding a copy of the values, cut from the graph.
  Tensor detach() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

// Ordered record of the operations applied since the tape became active.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::shared_ptr<Node<T>> node) { records_.push_back(std::move(node)); }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  // Index of node on the tape, or size() if absent.
  std::size_t find(const Node<T>* node) const;
  const std::vector<std::shared_ptr<Node<T>>>& records() const { return records_; }

  static Tape* active();
  static void set_active(Tape* tape);

 private:
  std::vector<std::shared_ptr<Node<T>>> records_;
};

// Makes `tape` the recording target of this thread for the scope's lifetime.
// A null tape disables recording (inference mode).
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>* tape) : previous_(Tape<T>::active()) { Tape<T>::set_active(tape); }
  explicit TapeScope(Tape<T>& tape) : TapeScope(&tape) {}
  ~TapeScope() { Tape<T>::set_active(previous_); }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

template <typename T>
class NoGradScope : public TapeScope<T> {
 public:
  NoGradScope() : TapeScope<T>(nullptr) {}
};

// Reverse pass from a scalar loss recorded on `tape`. Gradients of
// intermediate nodes are reset first; leaf gradients accumulate.
template <typename T>
void backward(Tape<T>& tape, const Tensor<T>& loss);

// A trainable leaf with a stable name.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;

  Parameter(std::string n, Shape shape, std::vector<T> values);
  void zero_grad();
  // Frozen parameters act as constants: nothing downstream is recorded for them.
  void set_frozen(bool frozen) { tensor.set_requires_grad(!frozen); }
};

template <typename T>
using ParameterList = std::vector<Parameter<T>*>;

}  // namespace apnet2::ad
