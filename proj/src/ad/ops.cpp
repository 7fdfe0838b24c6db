#include "apnet2/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "apnet2/dsp/spectral.hpp"
#include "gemm.hpp"

namespace apnet2::ad {
namespace {

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::active() == nullptr) return false;
  for (const auto* t : inputs)
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  return false;
}

template <typename T, typename F>
void attach(Tensor<T>& out, const char* op, F&& fn) {
  auto& n = *out.node();
  n.requires_grad = true;
  n.op = op;
  n.backward_fn = std::forward<F>(fn);
  Tape<T>::active()->record(out.node());
}

// ---------------------------------------------------------------- broadcasting

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1)
      shape_error(op, "cannot broadcast " + to_string(a) + " with " + to_string(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Strides of `in` expressed in the index space of `out` (0 on broadcast axes).
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    const std::size_t oi = i + (out.size() - in.size());
    strides[oi] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  return strides;
}

// f(out_index, a_index, b_index) over every element of `out`.
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t rank = out.size();
  const std::size_t inner = out[rank - 1];
  const std::size_t total = numel(out);
  if (total == 0) return;
  const std::size_t ia_step = sa[rank - 1], ib_step = sb[rank - 1];
  std::vector<std::size_t> idx(rank, 0);
  std::size_t base_a = 0, base_b = 0;
  for (std::size_t io = 0; io < total; io += inner) {
    for (std::size_t j = 0; j < inner; ++j) f(io + j, base_a + j * ia_step, base_b + j * ib_step);
    // advance the odometer over the leading axes
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++idx[d];
      base_a += sa[d];
      base_b += sb[d];
      if (idx[d] < out[d]) break;
      base_a -= sa[d] * out[d];
      base_b -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

// df_da(a, b, y) and df_db(a, b, y) are the local partials.
template <typename T, typename F, typename Da, typename Db>
Tensor<T> binary(const char* op, const Tensor<T>& a, const Tensor<T>& b, F f, Da df_da, Db df_db) {
  const auto& av = a.values();
  const auto& bv = b.values();
  if (a.shape() == b.shape()) {
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
    Tensor<T> y(a.shape(), std::move(out));
    if (should_record({&a, &b})) {
      attach(y, op, [an = a.node(), bn = b.node(), df_da, df_db](Node<T>& self) {
        const T* g = self.grad.data();
        const std::size_t n = self.value.size();
        if (an->requires_grad) {
          T* ga = an->accum();
          for (std::size_t i = 0; i < n; ++i)
            ga[i] += g[i] * df_da(an->value[i], bn->value[i], self.value[i]);
        }
        if (bn->requires_grad) {
          T* gb = bn->accum();
          for (std::size_t i = 0; i < n; ++i)
            gb[i] += g[i] * df_db(an->value[i], bn->value[i], self.value[i]);
        }
      });
    }
    return y;
  }
  Shape shape = broadcast_shape(a.shape(), b.shape(), op);
  auto sa = broadcast_strides(a.shape(), shape);
  auto sb = broadcast_strides(b.shape(), shape);
  std::vector<T> out(numel(shape));
  for_each_broadcast(shape, sa, sb,
                     [&](std::size_t io, std::size_t ia, std::size_t ib) { out[io] = f(av[ia], bv[ib]); });
  Tensor<T> y(shape, std::move(out));
  if (should_record({&a, &b})) {
    attach(y, op, [an = a.node(), bn = b.node(), sa, sb, df_da, df_db](Node<T>& self) {
      const T* g = self.grad.data();
      const auto& avv = an->value;
      const auto& bvv = bn->value;
      if (an->requires_grad) {
        T* ga = an->accum();
        for_each_broadcast(self.shape, sa, sb, [&](std::size_t io, std::size_t ia, std::size_t ib) {
          ga[ia] += g[io] * df_da(avv[ia], bvv[ib], self.value[io]);
        });
      }
      if (bn->requires_grad) {
        T* gb = bn->accum();
        for_each_broadcast(self.shape, sa, sb, [&](std::size_t io, std::size_t ia, std::size_t ib) {
          gb[ib] += g[io] * df_db(avv[ia], bvv[ib], self.value[io]);
        });
      }
    });
  }
  return y;
}

// df(x, y) is the local derivative.
template <typename T, typename F, typename D>
Tensor<T> unary(const char* op, const Tensor<T>& x, F f, D df) {
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  Tensor<T> y(x.shape(), std::move(out));
  if (should_record({&x})) {
    attach(y, op, [xn = x.node(), df](Node<T>& self) {
      T* gx = xn->accum();
      const T* g = self.grad.data();
      for (std::size_t i = 0; i < self.value.size(); ++i) gx[i] += g[i] * df(xn->value[i], self.value[i]);
    });
  }
  return y;
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) shape_error(op, "axis " + std::to_string(axis) + " out of range for " + to_string(s));
  AxisSplit r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

// ------------------------------------------------------------------ arithmetic

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T{1}; },
      [](T, T, T) { return T{1}; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T{1}; },
      [](T, T, T) { return T{-1}; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; },
      [](T x, T, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T{1} / y; },
      [](T, T y, T out) { return -out / y; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return unary<T>(
      "add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T{1}; });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  return unary<T>(
      "mul_scalar", a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return unary<T>(
      "neg", x, [](T v) { return -v; }, [](T, T) { return T{-1}; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary<T>(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary<T>(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary<T>(
      "abs", x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T{0} ? T{1} : (v < T{0} ? T{-1} : T{0}); });
}

template <typename T>
Tensor<T> cos(const Tensor<T>& x) {
  return unary<T>(
      "cos", x, [](T v) { return std::cos(v); }, [](T v, T) { return -std::sin(v); });
}

template <typename T>
Tensor<T> sin(const Tensor<T>& x) {
  return unary<T>(
      "sin", x, [](T v) { return std::sin(v); }, [](T v, T) { return std::cos(v); });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  return unary<T>(
      "sqrt", x, [](T v) { return std::sqrt(v); },
      [](T, T y) { return y > T{0} ? T{0.5} / y : T{0}; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary<T>(
      "square", x, [](T v) { return v * v; }, [](T v, T) { return T{2} * v; });
}

template <typename T>
Tensor<T> pow(const Tensor<T>& x, T exponent) {
  return unary<T>(
      "pow", x, [exponent](T v) { return std::pow(v, exponent); },
      [exponent](T v, T) { return exponent * std::pow(v, exponent - T{1}); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary<T>(
      "relu", x, [](T v) { return v > T{0} || v != v ? v : T{0}; },  // NaN propagates
      [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return unary<T>(
      "leaky_relu", x, [slope](T v) { return v >= T{0} ? v : slope * v; },
      [slope](T v, T) { return v >= T{0} ? T{1} : slope; });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T k = T(0.044715);
  return unary<T>(
      "gelu", x,
      [](T v) { return T{0.5} * v * (T{1} + std::tanh(c * (v + k * v * v * v))); },
      [](T v, T) {
        const T t = std::tanh(c * (v + k * v * v * v));
        return T{0.5} * (T{1} + t) + T{0.5} * v * (T{1} - t * t) * c * (T{1} + T{3} * k * v * v);
      });
}

template <typename T>
Tensor<T> clamp_min(const Tensor<T>& x, T floor) {
  return unary<T>(
      "clamp_min", x, [floor](T v) { return v > floor || v != v ? v : floor; },
      [floor](T v, T) { return v > floor ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> phase(const Tensor<T>& re, const Tensor<T>& im) {
  if (re.shape() != im.shape())
    shape_error("phase", "real part " + to_string(re.shape()) + " vs imaginary part " + to_string(im.shape()));
  return binary<T>(
      "phase", re, im, [](T r, T i) { return dsp::phi(r, i); },
      [](T r, T i, T) {
        const T d = r * r + i * i;
        return d > T{0} ? -i / d : T{0};
      },
      [](T r, T i, T) {
        const T d = r * r + i * i;
        return d > T{0} ? r / d : T{0};
      });
}

template <typename T>
Tensor<T> anti_wrap(const Tensor<T>& x) {
  constexpr T two_pi = 2 * std::numbers::pi_v<T>;
  return unary<T>(
      "anti_wrap", x, [](T v) { return dsp::anti_wrap(v); },
      [](T v, T) {
        const T d = v - two_pi * std::round(v / two_pi);
        return d > T{0} ? T{1} : (d < T{0} ? T{-1} : T{0});
      });
}

// ------------------------------------------------------------------ reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc{0};
  for (T v : x.values()) acc += v;
  Tensor<T> y = Tensor<T>::scalar(acc);
  if (should_record({&x})) {
    attach(y, "sum", [xn = x.node()](Node<T>& self) {
      T* gx = xn->accum();
      const T g = self.grad[0];
      for (std::size_t i = 0; i < xn->value.size(); ++i) gx[i] += g;
    });
  }
  return y;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) shape_error("mean", "empty tensor");
  return mul_scalar(sum(x), T{1} / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::size_t axis) {
  const auto sp = split_axis(x.shape(), axis, "sum");
  Shape shape = x.shape();
  shape[axis] = 1;
  std::vector<T> out(sp.outer * sp.inner, T{0});
  const auto xv = x.values();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t j = 0; j < sp.n; ++j) {
      const T* src = xv.data() + (o * sp.n + j) * sp.inner;
      T* dst = out.data() + o * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
  Tensor<T> y(std::move(shape), std::move(out));
  if (should_record({&x})) {
    attach(y, "sum_axis", [xn = x.node(), sp](Node<T>& self) {
      T* gx = xn->accum();
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.n; ++j) {
          T* dst = gx + (o * sp.n + j) * sp.inner;
          const T* g = self.grad.data() + o * sp.inner;
          for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += g[i];
        }
    });
  }
  return y;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::size_t axis) {
  const auto sp = split_axis(x.shape(), axis, "mean");
  if (sp.n == 0) shape_error("mean", "empty axis");
  return mul_scalar(sum(x, axis), T{1} / static_cast<T>(sp.n));
}

// --------------------------------------------------------------------- matmul

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (b.rank() != 2 || a.rank() < 1 || a.shape().back() != b.dim(0))
    shape_error("matmul", "cannot multiply " + to_string(a.shape()) + " by " + to_string(b.shape()));
  const std::size_t K = b.dim(0), N = b.dim(1), M = a.numel() / K;
  Shape shape = a.shape();
  shape.back() = N;
  std::vector<T> out(M * N);
  detail::gemm(false, false, M, N, K, T{1}, a.values().data(), b.values().data(), T{0}, out.data());
  Tensor<T> y(std::move(shape), std::move(out));
  if (should_record({&a, &b})) {
    attach(y, "matmul", [an = a.node(), bn = b.node(), M, K, N](Node<T>& self) {
      const T* g = self.grad.data();
      if (an->requires_grad) detail::gemm(false, true, M, K, N, T{1}, g, bn->value.data(), T{1}, an->accum());
      if (bn->requires_grad) detail::gemm(true, false, K, N, M, T{1}, an->value.data(), g, T{1}, bn->accum());
    });
  }
  return y;
}

// ---------------------------------------------------------------- structural

template <typename T>
Tensor<T> pad(const Tensor<T>& x, std::size_t axis, std::size_t before, std::size_t after) {
  const auto sp = split_axis(x.shape(), axis, "pad");
  const std::size_t n_out = sp.n + before + after;
  Shape shape = x.shape();
  shape[axis] = n_out;
  std::vector<T> out(sp.outer * n_out * sp.inner, T{0});
  const auto xv = x.values();
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(xv.data() + o * sp.n * sp.inner, sp.n * sp.inner,
                out.data() + (o * n_out + before) * sp.inner);
  Tensor<T> y(std::move(shape), std::move(out));
  if (should_record({&x})) {
    attach(y, "pad", [xn = x.node(), sp, n_out, before](Node<T>& self) {
      T* gx = xn->accum();
      for (std::size_t o = 0; o < sp.outer; ++o) {
        const T* src = self.grad.data() + (o * n_out + before) * sp.inner;
        T* dst = gx + o * sp.n * sp.inner;
        for (std::size_t i = 0; i < sp.n * sp.inner; ++i) dst[i] += src[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t stop) {
  const auto sp = split_axis(x.shape(), axis, "slice");
  if (start > stop || stop > sp.n)
    shape_error("slice", "range [" + std::to_string(start) + ", " + std::to_string(stop) +
                             ") invalid for axis " + std::to_string(axis) + " of " + to_string(x.shape()));
  const std::size_t n_out = stop - start;
  Shape shape = x.shape();
  shape[axis] = n_out;
  std::vector<T> out(sp.outer * n_out * sp.inner);
  const auto xv = x.values();
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(xv.data() + (o * sp.n + start) * sp.inner, n_out * sp.inner,
                out.data() + o * n_out * sp.inner);
  Tensor<T> y(std::move(shape), std::move(out));
  if (should_record({&x})) {
    attach(y, "slice", [xn = x.node(), sp, n_out, start](Node<T>& self) {
      T* gx = xn->accum();
      for (std::size_t o = 0; o < sp.outer; ++o) {
        const T* src = self.grad.data() + o * n_out * sp.inner;
        T* dst = gx + (o * sp.n + start) * sp.inner;
        for (std::size_t i = 0; i < n_out * sp.inner; ++i) dst[i] += src[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
  if (xs.empty()) shape_error("concat", "no inputs");
  const Shape& ref = xs.front().shape();
  const auto sp0 = split_axis(ref, axis, "concat");
  std::size_t n_total = 0;
  std::vector<std::size_t> sizes;
  for (const auto& x : xs) {
    Shape a = x.shape(), b = ref;
    if (a.size() != b.size()) shape_error("concat", "rank mismatch " + to_string(a) + " vs " + to_string(b));
    a[axis] = b[axis] = 0;
    if (a != b) shape_error("concat", "shape mismatch " + to_string(x.shape()) + " vs " + to_string(ref));
    sizes.push_back(x.dim(axis));
    n_total += x.dim(axis);
  }
  Shape shape = ref;
  shape[axis] = n_total;
  std::vector<T> out(sp0.outer * n_total * sp0.inner);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto xv = xs[k].values();
    for (std::size_t o = 0; o < sp0.outer; ++o)
      std::copy_n(xv.data() + o * sizes[k] * sp0.inner, sizes[k] * sp0.inner,
                  out.data() + (o * n_total + offset) * sp0.inner);
    offset += sizes[k];
  }
  Tensor<T> y(std::move(shape), std::move(out));
  bool record = false;
  for (const auto& x : xs) record = record || should_record({&x});
  if (record) {
    std::vector<std::shared_ptr<Node<T>>> nodes;
    for (const auto& x : xs) nodes.push_back(x.node());
    attach(y, "concat", [nodes, sizes, n_total, outer = sp0.outer, inner = sp0.inner](Node<T>& self) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k]->requires_grad) {
          T* gx = nodes[k]->accum();
          for (std::size_t o = 0; o < outer; ++o) {
            const T* src = self.grad.data() + (o * n_total + off) * inner;
            T* dst = gx + o * sizes[k] * inner;
            for (std::size_t i = 0; i < sizes[k] * inner; ++i) dst[i] += src[i];
          }
        }
        off += sizes[k];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel())
    shape_error("reshape", "cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  const auto xv = x.values();
  Tensor<T> y(std::move(shape), std::vector<T>(xv.begin(), xv.end()));
  if (should_record({&x})) {
    attach(y, "reshape", [xn = x.node()](Node<T>& self) {
      T* gx = xn->accum();
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x, std::size_t axis_a, std::size_t axis_b) {
  const std::size_t rank = x.rank();
  if (axis_a >= rank || axis_b >= rank)
    shape_error("transpose", "axes out of range for " + to_string(x.shape()));
  Shape shape = x.shape();
  std::swap(shape[axis_a], shape[axis_b]);
  // input strides permuted into output index order
  std::vector<std::size_t> in_strides(rank);
  std::size_t s = 1;
  for (std::size_t i = rank; i-- > 0;) {
    in_strides[i] = s;
    s *= x.dim(i);
  }
  std::swap(in_strides[axis_a], in_strides[axis_b]);
  std::vector<std::size_t> zero(rank, 0);
  std::vector<std::size_t> src_index(x.numel());
  for_each_broadcast(shape, in_strides, zero,
                     [&](std::size_t io, std::size_t ia, std::size_t) { src_index[io] = ia; });
  const auto xv = x.values();
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[src_index[i]];
  Tensor<T> y(std::move(shape), std::move(out));
  if (should_record({&x})) {
    attach(y, "transpose", [xn = x.node(), src_index = std::move(src_index)](Node<T>& self) {
      T* gx = xn->accum();
      for (std::size_t i = 0; i < src_index.size(); ++i) gx[src_index[i]] += self.grad[i];
    });
  }
  return y;
}

// -------------------------------------------------------------- convolutions

namespace {

// Output positions t in [lo, hi) read input index t * stride + offset inside [0, len).
std::pair<std::size_t, std::size_t> valid_range(std::ptrdiff_t offset, std::size_t stride,
                                                std::size_t len, std::size_t n_out) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  std::ptrdiff_t lo = 0;
  if (offset < 0) lo = (-offset + s - 1) / s;
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(len) - 1 - offset;
  if (last < 0) return {0, 0};
  const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n_out), last / s + 1);
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Column layout for one sample: rows (channel, kh, kw), columns (oh, ow).
struct Im2Col {
  std::size_t channels, h, w, kh, kw, sh, sw, ph, pw, dh, dw, oh, ow;

  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return oh * ow; }

  // gather = true: col <- x; gather = false: x += col.
  template <typename T, bool Gather>
  void apply(T* x, T* col) const {
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < kh; ++i) {
        const auto offh = static_cast<std::ptrdiff_t>(i * dh) - static_cast<std::ptrdiff_t>(ph);
        const auto [h_lo, h_hi] = valid_range(offh, sh, h, oh);
        for (std::size_t j = 0; j < kw; ++j) {
          T* row = col + ((c * kh + i) * kw + j) * cols();
          const auto offw = static_cast<std::ptrdiff_t>(j * dw) - static_cast<std::ptrdiff_t>(pw);
          const auto [w_lo, w_hi] = valid_range(offw, sw, w, ow);
          if constexpr (Gather) std::fill(row, row + cols(), T{0});
          for (std::size_t y = h_lo; y < h_hi; ++y) {
            T* src = x + (c * h + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y * sh) + offh)) * w;
            T* dst = row + y * ow;
            for (std::size_t z = w_lo; z < w_hi; ++z) {
              T& xv = src[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(z * sw) + offw)];
              if constexpr (Gather)
                dst[z] = xv;
              else
                xv += dst[z];
            }
          }
        }
      }
  }
  // 1x1 kernel, unit stride, no padding: the input already is the column matrix.
  bool identity() const { return kh == 1 && kw == 1 && sh == 1 && sw == 1 && ph == 0 && pw == 0; }
};

// Grouped convolution over a [B, G * Cg, H, W] input as per-group GEMMs.
template <typename T>
struct GroupedConv {
  std::size_t B, G, Cg, cout_g;
  Im2Col geo;

  std::size_t in_plane() const { return geo.channels * geo.h * geo.w; }
  std::size_t out_plane() const { return cout_g * geo.cols(); }

  void forward(const T* x, const T* w, const T* bias, T* y) const {
    std::vector<T> col(geo.identity() ? 0 : geo.rows() * geo.cols());
    const std::size_t wsize = cout_g * geo.rows();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t g = 0; g < G; ++g) {
        const T* xg = x + (b * G + g) * in_plane();
        T* yg = y + (b * G + g) * out_plane();
        const T* cm = xg;
        if (!geo.identity()) {
          geo.apply<T, true>(const_cast<T*>(xg), col.data());
          cm = col.data();
        }
        if (bias)
          for (std::size_t o = 0; o < cout_g; ++o) std::fill_n(yg + o * geo.cols(), geo.cols(), bias[g * cout_g + o]);
        detail::gemm(false, false, cout_g, geo.cols(), geo.rows(), T{1}, w + g * wsize, cm, bias ? T{1} : T{0}, yg);
      }
  }

  void backward(const T* x, const T* w, const T* gy, T* gx, T* gw, T* gb) const {
    const bool id = geo.identity();
    std::vector<T> col(id || !gw ? 0 : geo.rows() * geo.cols());
    std::vector<T> gcol(id || !gx ? 0 : geo.rows() * geo.cols());
    const std::size_t wsize = cout_g * geo.rows();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t g = 0; g < G; ++g) {
        const T* xg = x + (b * G + g) * in_plane();
        const T* gyg = gy + (b * G + g) * out_plane();
        if (gb)
          for (std::size_t o = 0; o < cout_g; ++o) {
            const T* r = gyg + o * geo.cols();
            T acc{0};
            for (std::size_t i = 0; i < geo.cols(); ++i) acc += r[i];
            gb[g * cout_g + o] += acc;
          }
        if (gw) {
          const T* cm = xg;
          if (!id) {
            geo.apply<T, true>(const_cast<T*>(xg), col.data());
            cm = col.data();
          }
          detail::gemm(false, true, cout_g, geo.rows(), geo.cols(), T{1}, gyg, cm, T{1}, gw + g * wsize);
        }
        if (gx) {
          T* gxg = gx + (b * G + g) * in_plane();
          if (id) {
            detail::gemm(true, false, geo.rows(), geo.cols(), cout_g, T{1}, w + g * wsize, gyg, T{1}, gxg);
          } else {
            detail::gemm(true, false, geo.rows(), geo.cols(), cout_g, T{1}, w + g * wsize, gyg, T{0}, gcol.data());
            geo.apply<T, false>(gxg, gcol.data());
          }
        }
      }
  }
};

// Depthwise 1-D convolution (one input and one output channel per group).
template <typename T>
struct DepthwiseConv1d {
  std::size_t B, C, L, K, Lout;
  Conv1dOptions opt;

  template <typename F>
  void taps(F&& f) const {
    for (std::size_t k = 0; k < K; ++k) {
      const auto off = static_cast<std::ptrdiff_t>(k * opt.dilation) - static_cast<std::ptrdiff_t>(opt.padding);
      const auto [lo, hi] = valid_range(off, opt.stride, L, Lout);
      if (hi > lo) f(k, lo, hi, static_cast<std::size_t>(static_cast<std::ptrdiff_t>(lo * opt.stride) + off));
    }
  }

  void forward(const T* x, const T* w, const T* bias, T* y) const {
    const std::size_t s = opt.stride;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) {
        T* dst = y + (b * C + c) * Lout;
        const T* src = x + (b * C + c) * L;
        std::fill_n(dst, Lout, bias ? bias[c] : T{0});
        taps([&](std::size_t k, std::size_t lo, std::size_t hi, std::size_t first) {
          const T wk = w[c * K + k];
          for (std::size_t t = 0; t < hi - lo; ++t) dst[lo + t] += wk * src[first + t * s];
        });
      }
  }

  void backward(const T* x, const T* w, const T* gy, T* gx, T* gw, T* gb) const {
    const std::size_t s = opt.stride;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) {
        const T* g = gy + (b * C + c) * Lout;
        const T* src = x + (b * C + c) * L;
        if (gb) {
          T acc{0};
          for (std::size_t t = 0; t < Lout; ++t) acc += g[t];
          gb[c] += acc;
        }
        taps([&](std::size_t k, std::size_t lo, std::size_t hi, std::size_t first) {
          if (gw) {
            T acc{0};
            for (std::size_t t = 0; t < hi - lo; ++t) acc += g[lo + t] * src[first + t * s];
            gw[c * K + k] += acc;
          }
          if (gx) {
            T* dst = gx + (b * C + c) * L + first;
            const T wk = w[c * K + k];
            for (std::size_t t = 0; t < hi - lo; ++t) dst[t * s] += wk * g[lo + t];
          }
        });
      }
  }
};

template <typename T>
T* grad_or_null(const std::shared_ptr<Node<T>>& n) {
  return n && n->requires_grad ? n->accum() : nullptr;
}

}  // namespace

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv1dOptions& opt) {
  if (x.rank() != 3 || weight.rank() != 3)
    shape_error("conv1d", "expected input [B, C, L] and weight [Cout, Cin/groups, K], got " +
                              to_string(x.shape()) + " and " + to_string(weight.shape()));
  const std::size_t B = x.dim(0), Cin = x.dim(1), L = x.dim(2);
  const std::size_t Cout = weight.dim(0), Cg = weight.dim(1), K = weight.dim(2);
  const std::size_t G = opt.groups;
  if (G == 0 || opt.stride == 0 || opt.dilation == 0 || K == 0 || Cin % G != 0 || Cout % G != 0 || Cg != Cin / G)
    shape_error("conv1d", "input " + to_string(x.shape()) + " incompatible with weight " +
                              to_string(weight.shape()) + " at groups=" + std::to_string(G));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != Cout))
    shape_error("conv1d", "bias " + to_string(bias.shape()) + " does not match " + std::to_string(Cout) +
                              " output channels");
  const std::size_t span = opt.dilation * (K - 1) + 1;
  if (L + 2 * opt.padding < span)
    shape_error("conv1d", "input length " + std::to_string(L) + " too short for kernel span " +
                              std::to_string(span));
  const std::size_t Lout = (L + 2 * opt.padding - span) / opt.stride + 1;

  std::vector<T> out(B * Cout * Lout);
  const T* bptr = bias.defined() ? bias.values().data() : nullptr;
  Tensor<T> y;
  if (Cg == 1 && Cout == G) {
    const DepthwiseConv1d<T> k{B, G, L, K, Lout, opt};
    k.forward(x.values().data(), weight.values().data(), bptr, out.data());
    y = Tensor<T>(Shape{B, Cout, Lout}, std::move(out));
    if (should_record({&x, &weight, &bias}))
      attach(y, "conv1d", [xn = x.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr, k](Node<T>& self) {
        k.backward(xn->value.data(), wn->value.data(), self.grad.data(), grad_or_null(xn), grad_or_null(wn),
                   grad_or_null(bn));
      });
    return y;
  }
  const GroupedConv<T> k{B, G, Cg, Cout / G, Im2Col{Cg, 1, L, 1, K, 1, opt.stride, 0, opt.padding, 1, opt.dilation, 1, Lout}};
  k.forward(x.values().data(), weight.values().data(), bptr, out.data());
  y = Tensor<T>(Shape{B, Cout, Lout}, std::move(out));
  if (should_record({&x, &weight, &bias}))
    attach(y, "conv1d", [xn = x.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr, k](Node<T>& self) {
      k.backward(xn->value.data(), wn->value.data(), self.grad.data(), grad_or_null(xn), grad_or_null(wn),
                 grad_or_null(bn));
    });
  return y;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dOptions& opt) {
  if (x.rank() != 4 || weight.rank() != 4 || x.dim(1) != weight.dim(1))
    shape_error("conv2d", "expected input [B, C, H, W] and weight [Cout, C, KH, KW], got " +
                              to_string(x.shape()) + " and " + to_string(weight.shape()));
  const std::size_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Cout = weight.dim(0), KH = weight.dim(2), KW = weight.dim(3);
  if (opt.stride_h == 0 || opt.stride_w == 0 || KH == 0 || KW == 0)
    shape_error("conv2d", "stride and kernel must be >= 1");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != Cout))
    shape_error("conv2d", "bias " + to_string(bias.shape()) + " does not match " + std::to_string(Cout) +
                              " output channels");
  if (H + 2 * opt.pad_h < KH || W + 2 * opt.pad_w < KW)
    shape_error("conv2d", "input " + to_string(x.shape()) + " smaller than kernel " + to_string(weight.shape()));
  const std::size_t OH = (H + 2 * opt.pad_h - KH) / opt.stride_h + 1;
  const std::size_t OW = (W + 2 * opt.pad_w - KW) / opt.stride_w + 1;

  const GroupedConv<T> k{B, 1, Cin, Cout,
                         Im2Col{Cin, H, W, KH, KW, opt.stride_h, opt.stride_w, opt.pad_h, opt.pad_w, 1, 1, OH, OW}};
  std::vector<T> out(B * Cout * OH * OW);
  k.forward(x.values().data(), weight.values().data(), bias.defined() ? bias.values().data() : nullptr, out.data());
  Tensor<T> y(Shape{B, Cout, OH, OW}, std::move(out));
  if (should_record({&x, &weight, &bias}))
    attach(y, "conv2d", [xn = x.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr, k](Node<T>& self) {
      k.backward(xn->value.data(), wn->value.data(), self.grad.data(), grad_or_null(xn), grad_or_null(wn),
                 grad_or_null(bn));
    });
  return y;
}

// ------------------------------------------------------------------ spectral

template <typename T>
ComplexTensor<T> stft(const Tensor<T>& x, const dsp::StftConfig& cfg) {
  if (x.rank() != 2) shape_error("stft", "expected [B, N], got " + to_string(x.shape()));
  const auto engine = dsp::StftEngine<T>::get(cfg);
  const std::size_t B = x.dim(0), N = x.dim(1);
  const std::size_t F = cfg.frames_for(N), nb = cfg.bins();
  if (N == 0 || F == 0) shape_error("stft", "input of length " + std::to_string(N) + " yields no frames");
  const std::size_t plane = F * nb;
  std::vector<T> out(2 * B * plane);
  const auto xv = x.values();
  for (std::size_t b = 0; b < B; ++b)
    engine->analyze(xv.subspan(b * N, N), std::span<T>(out.data() + b * plane, plane),
                    std::span<T>(out.data() + (B + b) * plane, plane));
  Tensor<T> both(Shape{2, B, F, nb}, std::move(out));
  if (should_record({&x})) {
    attach(both, "stft", [xn = x.node(), engine, B, N, plane](Node<T>& self) {
      T* gx = xn->accum();
      for (std::size_t b = 0; b < B; ++b)
        engine->analyze_adjoint(std::span<const T>(self.grad.data() + b * plane, plane),
                                std::span<const T>(self.grad.data() + (B + b) * plane, plane),
                                std::span<T>(gx + b * N, N));
    });
  }
  return {reshape(slice(both, 0, 0, 1), Shape{B, F, nb}), reshape(slice(both, 0, 1, 2), Shape{B, F, nb})};
}

template <typename T>
Tensor<T> istft(const Tensor<T>& re, const Tensor<T>& im, const dsp::StftConfig& cfg) {
  if (re.rank() != 3 || re.shape() != im.shape() || re.dim(2) != cfg.bins())
    shape_error("istft", "expected matching [B, frames, " + std::to_string(cfg.bins()) + "] parts, got " +
                             to_string(re.shape()) + " and " + to_string(im.shape()));
  const auto engine = dsp::StftEngine<T>::get(cfg);
  const std::size_t B = re.dim(0), F = re.dim(1), nb = re.dim(2);
  if (F == 0) shape_error("istft", "need at least one frame");
  const std::size_t S = cfg.samples_for(F), plane = F * nb;
  std::vector<T> out(B * S);
  for (std::size_t b = 0; b < B; ++b)
    engine->synthesize(re.values().subspan(b * plane, plane), im.values().subspan(b * plane, plane), F,
                       std::span<T>(out.data() + b * S, S));
  Tensor<T> y(Shape{B, S}, std::move(out));
  if (should_record({&re, &im})) {
    attach(y, "istft", [rn = re.node(), in = im.node(), engine, B, F, S, plane](Node<T>& self) {
      std::vector<T> gr(plane), gi(plane);
      for (std::size_t b = 0; b < B; ++b) {
        std::fill(gr.begin(), gr.end(), T{0});
        std::fill(gi.begin(), gi.end(), T{0});
        engine->synthesize_adjoint(std::span<const T>(self.grad.data() + b * S, S), F, gr, gi);
        if (rn->requires_grad) {
          T* g = rn->accum() + b * plane;
          for (std::size_t i = 0; i < plane; ++i) g[i] += gr[i];
        }
        if (in->requires_grad) {
          T* g = in->accum() + b * plane;
          for (std::size_t i = 0; i < plane; ++i) g[i] += gi[i];
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> magnitude(const ComplexTensor<T>& z, T eps) {
  return sqrt(add_scalar(add(square(z.re), square(z.im)), eps));
}

#define APNET2_INSTANTIATE_OPS(T)                                                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                             \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                             \
  template Tensor<T> neg(const Tensor<T>&);                                                       \
  template Tensor<T> exp(const Tensor<T>&);                                                       \
  template Tensor<T> log(const Tensor<T>&);                                                       \
  template Tensor<T> abs(const Tensor<T>&);                                                       \
  template Tensor<T> cos(const Tensor<T>&);                                                       \
  template Tensor<T> sin(const Tensor<T>&);                                                       \
  template Tensor<T> sqrt(const Tensor<T>&);                                                      \
  template Tensor<T> square(const Tensor<T>&);                                                    \
  template Tensor<T> pow(const Tensor<T>&, T);                                                    \
  template Tensor<T> relu(const Tensor<T>&);                                                      \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                             \
  template Tensor<T> gelu(const Tensor<T>&);                                                      \
  template Tensor<T> clamp_min(const Tensor<T>&, T);                                              \
  template Tensor<T> phase(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> anti_wrap(const Tensor<T>&);                                                 \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> mean(const Tensor<T>&);                                                      \
  template Tensor<T> sum(const Tensor<T>&, std::size_t);                                          \
  template Tensor<T> mean(const Tensor<T>&, std::size_t);                                         \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> pad(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);              \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                          \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                            \
  template Tensor<T> transpose(const Tensor<T>&, std::size_t, std::size_t);                       \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                 \
                            const Conv1dOptions&);                                                \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                 \
                            const Conv2dOptions&);                                                \
  template ComplexTensor<T> stft(const Tensor<T>&, const dsp::StftConfig&);                       \
  template Tensor<T> istft(const Tensor<T>&, const Tensor<T>&, const dsp::StftConfig&);           \
  template Tensor<T> magnitude(const ComplexTensor<T>&, T);

APNET2_INSTANTIATE_OPS(float)
APNET2_INSTANTIATE_OPS(double)

}  // namespace apnet2::ad
