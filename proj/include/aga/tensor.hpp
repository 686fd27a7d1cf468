#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aga {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

template <typename T>
class Tape;

// Dense row-major tensor with an optional gradient buffer. Copies share
// storage; use clone() for a deep copy.
template <typename T>
class BasicTensor {
 public:
  using Scalar = T;

  BasicTensor() = default;

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->values.size(); }

  std::span<const T> values() const { return impl_->values; }
  std::span<T> mutable_values() { return impl_->values; }
  T item() const;
  T at(std::size_t i) const { return impl_->values.at(i); }
  T at(std::size_t row, std::size_t col) const;

  bool requires_grad() const noexcept { return impl_ && impl_->requires_grad; }
  // Enabling allocates a zeroed gradient; only meaningful for leaves.
  void set_requires_grad(bool on);
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() { return impl_->grad; }
  void zero_grad();

  // Index of the producing tape node, or -1 for leaves.
  int node_id() const noexcept { return impl_ ? impl_->node_id : -1; }

  BasicTensor clone() const;
  bool same_storage(const BasicTensor& other) const noexcept { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
    int node_id = -1;
  };

  explicit BasicTensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<Impl> impl_;

  friend class Tape<T>;
};

// Records every operation applied through it, in creation order, and replays
// them in reverse to accumulate gradients. One tape per forward pass.
template <typename T>
class Tape {
 public:
  using Tensor = BasicTensor<T>;

  struct Node {
    std::string_view op;
    std::vector<int> inputs;  // producing node ids, -1 for leaves
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // [p x q] * [q x r] -> [p x r]; a rank-1 right operand is a column vector.
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& x, T factor);
  // [d x m] + [d] broadcast over columns.
  Tensor add_column_bias(const Tensor& x, const Tensor& bias);

  Tensor sigmoid(const Tensor& x);
  Tensor relu(const Tensor& x);
  Tensor tanh(const Tensor& x);

  // Passes entries inside the closed band [0.5 - eps, 0.5 + eps], zero
  // elsewhere. The band indicator carries no gradient.
  Tensor valve(const Tensor& x, double eps);

  // Row-wise softmax along the column (position) axis of a [d x m] tensor.
  Tensor softmax_over_positions(const Tensor& h);
  // Negative log-likelihood of `label` under softmax(logits); scalar.
  Tensor cross_entropy(const Tensor& logits, std::size_t label);

  Tensor sum(const Tensor& x);
  // [d x m] -> [d]
  Tensor sum_positions(const Tensor& x);
  Tensor mean(std::span<const Tensor> scalars);

  // Row lookup: table [V x k], ids of length m -> [k x m] (column j = row ids[j]).
  Tensor gather_columns(const Tensor& table, std::span<const int> ids);
  // Same-length 1-D convolution with zero padding floor(h/2) left and
  // h-1-floor(h/2) right. x: [k x m]; filters: [F x h x k] with bias [F]
  // gives [F x m], or a single [h x k] filter with bias [1] gives [m].
  Tensor conv1d_same(const Tensor& x, const Tensor& filters, const Tensor& bias);

  Tensor column(const Tensor& x, std::size_t j);
  Tensor stack_columns(std::span<const Tensor> columns);
  Tensor concat_rows(std::span<const Tensor> parts);
  Tensor slice(const Tensor& x, std::size_t offset, std::size_t length);

  // Seeds d(loss)/d(loss) = 1 and runs every node's backward in reverse
  // creation order. Gradients accumulate into leaves.
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }

  // When enabled, relu and valve fold their on/off patterns into a running
  // hash so callers can detect when a perturbation crosses a kink.
  void track_branches(bool on) noexcept { track_branches_ = on; }
  std::uint64_t branch_signature() const noexcept { return branch_signature_; }

 private:
  Tensor make_output(Shape shape, std::initializer_list<const Tensor*> inputs);
  Tensor make_output(Shape shape, std::span<const Tensor> inputs);
  void record(std::string_view op, Tensor& out, std::vector<int> inputs, std::function<void()> backward);
  void fold_branch(bool bit);

  std::vector<Node> nodes_;
  bool track_branches_ = false;
  std::uint64_t branch_signature_ = 1469598103934665603ull;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace aga
