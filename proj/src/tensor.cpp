#include "aga/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aga/errors.hpp"

namespace aga {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// BasicTensor

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  check_shape(shape);
  auto impl = std::make_shared<Impl>();
  impl->values.assign(shape_numel(shape), value);
  impl->shape = std::move(shape);
  BasicTensor t(std::move(impl));
  t.set_requires_grad(requires_grad);
  return t;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  BasicTensor t(std::move(impl));
  t.set_requires_grad(requires_grad);
  return t;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return impl_->values[0];
}

template <typename T>
T BasicTensor<T>::at(std::size_t row, std::size_t col) const {
  if (rank() != 2 || row >= dim(0) || col >= dim(1)) {
    throw IndexError("index (" + std::to_string(row) + "," + std::to_string(col) + ") outside " +
                     shape_string(shape()));
  }
  return impl_->values[row * dim(1) + col];
}

template <typename T>
void BasicTensor<T>::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  if (on) {
    impl_->grad.assign(impl_->values.size(), T(0));
  } else {
    impl_->grad.clear();
  }
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  auto impl = std::make_shared<Impl>(*impl_);
  impl->node_id = -1;
  return BasicTensor(std::move(impl));
}

// ---------------------------------------------------------------------------
// Tape plumbing

template <typename T>
BasicTensor<T> Tape<T>::make_output(Shape shape, std::initializer_list<const Tensor*> inputs) {
  bool needs_grad = false;
  for (const Tensor* in : inputs) needs_grad = needs_grad || in->requires_grad();
  auto impl = std::make_shared<typename Tensor::Impl>();
  impl->values.assign(shape_numel(shape), T(0));
  impl->shape = std::move(shape);
  impl->requires_grad = needs_grad;
  if (needs_grad) impl->grad.assign(impl->values.size(), T(0));
  return Tensor(std::move(impl));
}

template <typename T>
BasicTensor<T> Tape<T>::make_output(Shape shape, std::span<const Tensor> inputs) {
  bool needs_grad = false;
  for (const Tensor& in : inputs) needs_grad = needs_grad || in.requires_grad();
  auto impl = std::make_shared<typename Tensor::Impl>();
  impl->values.assign(shape_numel(shape), T(0));
  impl->shape = std::move(shape);
  impl->requires_grad = needs_grad;
  if (needs_grad) impl->grad.assign(impl->values.size(), T(0));
  return Tensor(std::move(impl));
}

template <typename T>
void Tape<T>::record(std::string_view op, Tensor& out, std::vector<int> inputs,
                     std::function<void()> backward) {
  out.impl_->node_id = static_cast<int>(nodes_.size());
  if (!out.requires_grad()) backward = nullptr;
  nodes_.push_back(Node{op, std::move(inputs), std::move(backward)});
}

template <typename T>
void Tape<T>::fold_branch(bool bit) {
  branch_signature_ ^= bit ? 0x9eu : 0x3bu;
  branch_signature_ *= 1099511628211ull;
}

template <typename T>
void Tape<T>::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;
  loss.impl_->grad[0] += T(1);
  const int start = loss.node_id();
  if (start < 0) return;
  if (static_cast<std::size_t>(start) >= nodes_.size()) {
    throw ContractError("loss was not recorded on this tape");
  }
  for (int i = start; i >= 0; --i) {
    if (nodes_[i].backward) nodes_[i].backward();
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
BasicTensor<T> Tape<T>::matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  }
  const std::size_t p = a.dim(0), q = a.dim(1), r = b.rank() == 2 ? b.dim(1) : 1;
  Shape out_shape = b.rank() == 2 ? Shape{p, r} : Shape{p};
  Tensor out = make_output(std::move(out_shape), {&a, &b});
  {
    const T* av = a.impl_->values.data();
    const T* bv = b.impl_->values.data();
    T* ov = out.impl_->values.data();
    for (std::size_t i = 0; i < p; ++i) {
      T* orow = ov + i * r;
      for (std::size_t k = 0; k < q; ++k) {
        const T aik = av[i * q + k];
        const T* brow = bv + k * r;
        for (std::size_t j = 0; j < r; ++j) orow[j] += aik * brow[j];
      }
    }
  }
  auto ai = a.impl_, bi = b.impl_, oi = out.impl_;
  record("matmul", out, {a.node_id(), b.node_id()}, [ai, bi, oi, p, q, r] {
    const T* g = oi->grad.data();
    if (ai->requires_grad) {
      T* ga = ai->grad.data();
      const T* bv = bi->values.data();
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < q; ++k) {
          T acc = T(0);
          for (std::size_t j = 0; j < r; ++j) acc += g[i * r + j] * bv[k * r + j];
          ga[i * q + k] += acc;
        }
      }
    }
    if (bi->requires_grad) {
      T* gb = bi->grad.data();
      const T* av = ai->values.data();
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < q; ++k) {
          const T aik = av[i * q + k];
          for (std::size_t j = 0; j < r; ++j) gb[k * r + j] += aik * g[i * r + j];
        }
      }
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Tensor out = make_output(a.shape(), {&a, &b});
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.impl_->values[i] = a.impl_->values[i] + b.impl_->values[i];
  auto ai = a.impl_, bi = b.impl_, oi = out.impl_;
  record("add", out, {a.node_id(), b.node_id()}, [ai, bi, oi, n] {
    for (std::size_t i = 0; i < n; ++i) {
      if (ai->requires_grad) ai->grad[i] += oi->grad[i];
      if (bi->requires_grad) bi->grad[i] += oi->grad[i];
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Tensor out = make_output(a.shape(), {&a, &b});
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.impl_->values[i] = a.impl_->values[i] * b.impl_->values[i];
  auto ai = a.impl_, bi = b.impl_, oi = out.impl_;
  record("mul", out, {a.node_id(), b.node_id()}, [ai, bi, oi, n] {
    for (std::size_t i = 0; i < n; ++i) {
      if (ai->requires_grad) ai->grad[i] += oi->grad[i] * bi->values[i];
      if (bi->requires_grad) bi->grad[i] += oi->grad[i] * ai->values[i];
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::scale(const Tensor& x, T factor) {
  Tensor out = make_output(x.shape(), {&x});
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.impl_->values[i] = x.impl_->values[i] * factor;
  auto xi = x.impl_, oi = out.impl_;
  record("scale", out, {x.node_id()}, [xi, oi, n, factor] {
    for (std::size_t i = 0; i < n; ++i) xi->grad[i] += oi->grad[i] * factor;
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::add_column_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.numel() != x.dim(0)) {
    throw DimensionError("add_column_bias: bias " + shape_string(bias.shape()) + " does not fit " +
                         shape_string(x.shape()));
  }
  const std::size_t d = x.dim(0), m = x.dim(1);
  Tensor out = make_output(x.shape(), {&x, &bias});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      out.impl_->values[i * m + j] = x.impl_->values[i * m + j] + bias.impl_->values[i];
    }
  }
  auto xi = x.impl_, bi = bias.impl_, oi = out.impl_;
  record("add_column_bias", out, {x.node_id(), bias.node_id()}, [xi, bi, oi, d, m] {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const T g = oi->grad[i * m + j];
        if (xi->requires_grad) xi->grad[i * m + j] += g;
        if (bi->requires_grad) bi->grad[i] += g;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

template <typename T>
BasicTensor<T> Tape<T>::sigmoid(const Tensor& x) {
  Tensor out = make_output(x.shape(), {&x});
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.impl_->values[i] = stable_sigmoid(x.impl_->values[i]);
  auto xi = x.impl_, oi = out.impl_;
  record("sigmoid", out, {x.node_id()}, [xi, oi, n] {
    for (std::size_t i = 0; i < n; ++i) {
      const T s = oi->values[i];
      xi->grad[i] += oi->grad[i] * s * (T(1) - s);
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::relu(const Tensor& x) {
  Tensor out = make_output(x.shape(), {&x});
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const T v = x.impl_->values[i];
    out.impl_->values[i] = v > T(0) ? v : T(0);
    if (track_branches_) fold_branch(v > T(0));
  }
  auto xi = x.impl_, oi = out.impl_;
  record("relu", out, {x.node_id()}, [xi, oi, n] {
    for (std::size_t i = 0; i < n; ++i) {
      if (xi->values[i] > T(0)) xi->grad[i] += oi->grad[i];
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::tanh(const Tensor& x) {
  Tensor out = make_output(x.shape(), {&x});
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.impl_->values[i] = std::tanh(x.impl_->values[i]);
  auto xi = x.impl_, oi = out.impl_;
  record("tanh", out, {x.node_id()}, [xi, oi, n] {
    for (std::size_t i = 0; i < n; ++i) {
      const T t = oi->values[i];
      xi->grad[i] += oi->grad[i] * (T(1) - t * t);
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::valve(const Tensor& x, double eps) {
  if (!(eps >= 0.0 && eps <= 0.5)) {
    throw ContractError("valve half-width must lie in [0, 0.5], got " + std::to_string(eps));
  }
  const T lo = T(0.5) - static_cast<T>(eps);
  const T hi = T(0.5) + static_cast<T>(eps);
  Tensor out = make_output(x.shape(), {&x});
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const T v = x.impl_->values[i];
    const bool open = lo <= v && v <= hi;
    out.impl_->values[i] = open ? v : T(0);
    if (track_branches_) fold_branch(open);
  }
  auto xi = x.impl_, oi = out.impl_;
  record("valve", out, {x.node_id()}, [xi, oi, n, lo, hi] {
    for (std::size_t i = 0; i < n; ++i) {
      const T v = xi->values[i];
      if (lo <= v && v <= hi) xi->grad[i] += oi->grad[i];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Normalization, losses, reductions

template <typename T>
BasicTensor<T> Tape<T>::softmax_over_positions(const Tensor& h) {
  if (h.rank() > 2) throw DimensionError("softmax_over_positions expects [d x m], got " + shape_string(h.shape()));
  const std::size_t d = h.rank() == 2 ? h.dim(0) : 1;
  const std::size_t m = h.rank() == 2 ? h.dim(1) : h.dim(0);
  Tensor out = make_output(h.shape(), {&h});
  for (std::size_t i = 0; i < d; ++i) {
    const T* row = h.impl_->values.data() + i * m;
    T* orow = out.impl_->values.data() + i * m;
    const T peak = *std::max_element(row, row + m);
    T total = T(0);
    for (std::size_t j = 0; j < m; ++j) {
      orow[j] = std::exp(row[j] - peak);
      total += orow[j];
    }
    for (std::size_t j = 0; j < m; ++j) orow[j] /= total;
  }
  auto hi = h.impl_, oi = out.impl_;
  record("softmax_over_positions", out, {h.node_id()}, [hi, oi, d, m] {
    for (std::size_t i = 0; i < d; ++i) {
      const T* y = oi->values.data() + i * m;
      const T* g = oi->grad.data() + i * m;
      T dot = T(0);
      for (std::size_t j = 0; j < m; ++j) dot += g[j] * y[j];
      T* gh = hi->grad.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) gh[j] += y[j] * (g[j] - dot);
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::cross_entropy(const Tensor& logits, std::size_t label) {
  const std::size_t c = logits.numel();
  if (label >= c) {
    throw IndexError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                     std::to_string(c) + ")");
  }
  const T* z = logits.impl_->values.data();
  const T peak = *std::max_element(z, z + c);
  T total = T(0);
  for (std::size_t j = 0; j < c; ++j) total += std::exp(z[j] - peak);
  const T log_norm = peak + std::log(total);
  Tensor out = make_output({1}, {&logits});
  out.impl_->values[0] = log_norm - z[label];
  auto li = logits.impl_, oi = out.impl_;
  record("cross_entropy", out, {logits.node_id()}, [li, oi, c, label, log_norm] {
    const T g = oi->grad[0];
    for (std::size_t j = 0; j < c; ++j) {
      const T p = std::exp(li->values[j] - log_norm);
      li->grad[j] += g * (p - (j == label ? T(1) : T(0)));
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::sum(const Tensor& x) {
  Tensor out = make_output({1}, {&x});
  T total = T(0);
  for (T v : x.impl_->values) total += v;
  out.impl_->values[0] = total;
  auto xi = x.impl_, oi = out.impl_;
  record("sum", out, {x.node_id()}, [xi, oi] {
    const T g = oi->grad[0];
    for (T& gx : xi->grad) gx += g;
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::sum_positions(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("sum_positions expects [d x m], got " + shape_string(x.shape()));
  const std::size_t d = x.dim(0), m = x.dim(1);
  Tensor out = make_output({d}, {&x});
  for (std::size_t i = 0; i < d; ++i) {
    T total = T(0);
    for (std::size_t j = 0; j < m; ++j) total += x.impl_->values[i * m + j];
    out.impl_->values[i] = total;
  }
  auto xi = x.impl_, oi = out.impl_;
  record("sum_positions", out, {x.node_id()}, [xi, oi, d, m] {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < m; ++j) xi->grad[i * m + j] += oi->grad[i];
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::mean(std::span<const Tensor> scalars) {
  if (scalars.empty()) throw ContractError("mean of zero tensors");
  std::vector<int> ids;
  std::vector<std::shared_ptr<typename Tensor::Impl>> impls;
  T total = T(0);
  for (const Tensor& s : scalars) {
    if (s.numel() != 1) throw DimensionError("mean expects scalars, got " + shape_string(s.shape()));
    total += s.impl_->values[0];
    ids.push_back(s.node_id());
    impls.push_back(s.impl_);
  }
  const T inv = T(1) / static_cast<T>(scalars.size());
  Tensor out = make_output({1}, scalars);
  out.impl_->values[0] = total * inv;
  auto oi = out.impl_;
  record("mean", out, std::move(ids), [impls = std::move(impls), oi, inv] {
    for (const auto& si : impls) {
      if (si->requires_grad) si->grad[0] += oi->grad[0] * inv;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Structural ops

template <typename T>
BasicTensor<T> Tape<T>::gather_columns(const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2) throw DimensionError("gather_columns expects a [V x k] table");
  if (ids.empty()) throw DimensionError("gather_columns needs at least one id");
  const std::size_t vocab = table.dim(0), k = table.dim(1), m = ids.size();
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(vocab));
    }
  }
  Tensor out = make_output({k, m}, {&table});
  for (std::size_t j = 0; j < m; ++j) {
    const T* row = table.impl_->values.data() + static_cast<std::size_t>(ids[j]) * k;
    for (std::size_t r = 0; r < k; ++r) out.impl_->values[r * m + j] = row[r];
  }
  auto ti = table.impl_, oi = out.impl_;
  std::vector<int> saved(ids.begin(), ids.end());
  record("gather_columns", out, {table.node_id()}, [ti, oi, saved = std::move(saved), k, m] {
    for (std::size_t j = 0; j < m; ++j) {
      T* grow = ti->grad.data() + static_cast<std::size_t>(saved[j]) * k;
      for (std::size_t r = 0; r < k; ++r) grow[r] += oi->grad[r * m + j];
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::conv1d_same(const Tensor& x, const Tensor& filters, const Tensor& bias) {
  if (x.rank() != 2) throw DimensionError("conv1d_same expects x as [k x m], got " + shape_string(x.shape()));
  const bool bank = filters.rank() == 3;
  if (!bank && filters.rank() != 2) {
    throw DimensionError("conv1d_same expects filters [F x h x k] or [h x k], got " +
                         shape_string(filters.shape()));
  }
  const std::size_t k = x.dim(0), m = x.dim(1);
  const std::size_t nf = bank ? filters.dim(0) : 1;
  const std::size_t h = bank ? filters.dim(1) : filters.dim(0);
  const std::size_t fk = bank ? filters.dim(2) : filters.dim(1);
  if (fk != k) {
    throw DimensionError("conv1d_same: filter width " + std::to_string(fk) + " != embedding dim " +
                         std::to_string(k));
  }
  const std::size_t left = h / 2;
  const std::size_t right = h - 1 - left;
  if (h > m + left + right) {
    throw DimensionError("conv1d_same: window " + std::to_string(h) + " exceeds padded length");
  }
  if (bias.numel() != nf) {
    throw DimensionError("conv1d_same: expected " + std::to_string(nf) + " biases, got " +
                         std::to_string(bias.numel()));
  }

  // Position-major copy of x so each window row is contiguous.
  std::vector<T> xt(m * k);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t pos = 0; pos < m; ++pos) xt[pos * k + j] = x.impl_->values[j * m + pos];
  }

  Tensor out = make_output(bank ? Shape{nf, m} : Shape{m}, {&x, &filters, &bias});
  const T* fv = filters.impl_->values.data();
  T* ov = out.impl_->values.data();
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t i = 0; i < m; ++i) {
      T acc = bias.impl_->values[f];
      for (std::size_t r = 0; r < h; ++r) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(i + r) - static_cast<std::ptrdiff_t>(left);
        if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(m)) continue;
        const T* w = fv + (f * h + r) * k;
        const T* xv = xt.data() + static_cast<std::size_t>(pos) * k;
        for (std::size_t j = 0; j < k; ++j) acc += w[j] * xv[j];
      }
      ov[f * m + i] = acc;
    }
  }

  auto xi = x.impl_, fi = filters.impl_, bi = bias.impl_, oi = out.impl_;
  record("conv1d_same", out, {x.node_id(), filters.node_id(), bias.node_id()},
         [xi, fi, bi, oi, xt = std::move(xt), nf, h, k, m, left] {
           const T* g = oi->grad.data();
           std::vector<T> gxt(xi->requires_grad ? m * k : 0, T(0));
           for (std::size_t f = 0; f < nf; ++f) {
             for (std::size_t i = 0; i < m; ++i) {
               const T go = g[f * m + i];
               if (bi->requires_grad) bi->grad[f] += go;
               for (std::size_t r = 0; r < h; ++r) {
                 const std::ptrdiff_t pos =
                     static_cast<std::ptrdiff_t>(i + r) - static_cast<std::ptrdiff_t>(left);
                 if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(m)) continue;
                 const std::size_t wofs = (f * h + r) * k;
                 const std::size_t xofs = static_cast<std::size_t>(pos) * k;
                 if (fi->requires_grad) {
                   T* gw = fi->grad.data() + wofs;
                   for (std::size_t j = 0; j < k; ++j) gw[j] += go * xt[xofs + j];
                 }
                 if (xi->requires_grad) {
                   const T* w = fi->values.data() + wofs;
                   for (std::size_t j = 0; j < k; ++j) gxt[xofs + j] += go * w[j];
                 }
               }
             }
           }
           if (xi->requires_grad) {
             for (std::size_t j = 0; j < k; ++j) {
               for (std::size_t pos = 0; pos < m; ++pos) xi->grad[j * m + pos] += gxt[pos * k + j];
             }
           }
         });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::column(const Tensor& x, std::size_t j) {
  if (x.rank() != 2) throw DimensionError("column expects a matrix, got " + shape_string(x.shape()));
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (j >= cols) throw IndexError("column " + std::to_string(j) + " outside " + shape_string(x.shape()));
  Tensor out = make_output({rows}, {&x});
  for (std::size_t i = 0; i < rows; ++i) out.impl_->values[i] = x.impl_->values[i * cols + j];
  auto xi = x.impl_, oi = out.impl_;
  record("column", out, {x.node_id()}, [xi, oi, rows, cols, j] {
    for (std::size_t i = 0; i < rows; ++i) xi->grad[i * cols + j] += oi->grad[i];
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::stack_columns(std::span<const Tensor> columns) {
  if (columns.empty()) throw DimensionError("stack_columns needs at least one column");
  const std::size_t rows = columns[0].numel(), cols = columns.size();
  std::vector<int> ids;
  std::vector<std::shared_ptr<typename Tensor::Impl>> impls;
  for (const Tensor& c : columns) {
    if (c.numel() != rows) throw DimensionError("stack_columns: columns differ in length");
    ids.push_back(c.node_id());
    impls.push_back(c.impl_);
  }
  Tensor out = make_output({rows, cols}, columns);
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t i = 0; i < rows; ++i) out.impl_->values[i * cols + j] = impls[j]->values[i];
  }
  auto oi = out.impl_;
  record("stack_columns", out, std::move(ids), [impls = std::move(impls), oi, rows, cols] {
    for (std::size_t j = 0; j < cols; ++j) {
      if (!impls[j]->requires_grad) continue;
      for (std::size_t i = 0; i < rows; ++i) impls[j]->grad[i] += oi->grad[i * cols + j];
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows needs at least one part");
  const std::size_t cols = parts[0].rank() == 2 ? parts[0].dim(1) : parts[0].dim(0);
  std::size_t rows = 0;
  std::vector<int> ids;
  std::vector<std::shared_ptr<typename Tensor::Impl>> impls;
  for (const Tensor& p : parts) {
    const std::size_t pc = p.rank() == 2 ? p.dim(1) : p.dim(0);
    if (p.rank() > 2 || pc != cols) {
      throw DimensionError("concat_rows: part " + shape_string(p.shape()) + " has wrong width");
    }
    rows += p.numel() / cols;
    ids.push_back(p.node_id());
    impls.push_back(p.impl_);
  }
  Tensor out = make_output({rows, cols}, parts);
  std::size_t offset = 0;
  for (const auto& pi : impls) {
    std::copy(pi->values.begin(), pi->values.end(), out.impl_->values.begin() + offset);
    offset += pi->values.size();
  }
  auto oi = out.impl_;
  record("concat_rows", out, std::move(ids), [impls = std::move(impls), oi] {
    std::size_t ofs = 0;
    for (const auto& pi : impls) {
      if (pi->requires_grad) {
        for (std::size_t i = 0; i < pi->grad.size(); ++i) pi->grad[i] += oi->grad[ofs + i];
      }
      ofs += pi->values.size();
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> Tape<T>::slice(const Tensor& x, std::size_t offset, std::size_t length) {
  if (x.rank() != 1 || length == 0 || offset + length > x.numel()) {
    throw DimensionError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                         ") outside " + shape_string(x.shape()));
  }
  Tensor out = make_output({length}, {&x});
  std::copy_n(x.impl_->values.begin() + offset, length, out.impl_->values.begin());
  auto xi = x.impl_, oi = out.impl_;
  record("slice", out, {x.node_id()}, [xi, oi, offset, length] {
    for (std::size_t i = 0; i < length; ++i) xi->grad[offset + i] += oi->grad[i];
  });
  return out;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace aga
