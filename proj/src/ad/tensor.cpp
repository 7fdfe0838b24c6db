#include "apnet2/ad/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace apnet2::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : node_(std::make_shared<Node<T>>()) {
  if (ad::numel(shape) != values.size())
    throw std::invalid_argument("Tensor: shape " + to_string(shape) + " needs " +
                                std::to_string(ad::numel(shape)) + " values, got " +
                                std::to_string(values.size()));
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T v) {
  const std::size_t n = ad::numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, v));
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1)
    throw std::invalid_argument("Tensor::item: tensor of shape " + to_string(shape()) +
                                " is not a scalar");
  return node_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->value, false);
}

template <typename T>
std::size_t Tape<T>::find(const Node<T>* node) const {
  for (std::size_t i = records_.size(); i-- > 0;)
    if (records_[i].get() == node) return i;
  return records_.size();
}

namespace {
template <typename T>
Tape<T>*& active_slot() {
  thread_local Tape<T>* slot = nullptr;
  return slot;
}
}  // namespace

template <typename T>
Tape<T>* Tape<T>::active() {
  return active_slot<T>();
}

template <typename T>
void Tape<T>::set_active(Tape* tape) {
  active_slot<T>() = tape;
}

template <typename T>
void backward(Tape<T>& tape, const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar tensor, got shape " +
                                (loss.defined() ? to_string(loss.shape()) : std::string("<none>")));
  const std::size_t end = tape.find(loss.node().get());
  if (end == tape.size()) throw std::invalid_argument("backward: loss was not recorded on this tape");
  const auto& recs = tape.records();
  for (std::size_t i = 0; i <= end; ++i) {
    recs[i]->grad.assign(recs[i]->value.size(), T{0});
    recs[i]->grad_live = false;
  }
  recs[end]->grad[0] = T{1};
  recs[end]->grad_live = true;
  for (std::size_t i = end + 1; i-- > 0;) {
    Node<T>& n = *recs[i];
    if (n.grad_live && n.backward_fn) n.backward_fn(n);
  }
}

template <typename T>
Parameter<T>::Parameter(std::string n, Shape shape, std::vector<T> values)
    : name(std::move(n)), tensor(std::move(shape), std::move(values), true) {
  tensor.mutable_grad();
}

template <typename T>
void Parameter<T>::zero_grad() {
  auto g = tensor.mutable_grad();
  std::fill(g.begin(), g.end(), T{0});
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template void backward(Tape<float>&, const Tensor<float>&);
template void backward(Tape<double>&, const Tensor<double>&);
template struct Parameter<float>;
template struct Parameter<double>;

}  // namespace apnet2::ad
