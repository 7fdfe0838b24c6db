#pragma once

#include <cstddef>
#include <vector>

#include "apnet2/ad/tensor.hpp"
#include "apnet2/dsp/stft.hpp"

// Differentiable primitives. Each op records itself on the active tape when
// an input requires a gradient; shape errors throw std::invalid_argument
// naming the op and the offending shapes.
namespace apnet2::ad {

// Element-wise binary ops with numpy-style broadcasting.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, T s);

template <typename T> Tensor<T> neg(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);
template <typename T> Tensor<T> abs(const Tensor<T>& x);
template <typename T> Tensor<T> cos(const Tensor<T>& x);
template <typename T> Tensor<T> sin(const Tensor<T>& x);
// Gradient at 0 is taken as 0.
template <typename T> Tensor<T> sqrt(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
template <typename T> Tensor<T> pow(const Tensor<T>& x, T exponent);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
// tanh approximation.
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
// max(x, floor); gradient passes only where x > floor.
template <typename T> Tensor<T> clamp_min(const Tensor<T>& x, T floor);

// Wrapped phase of re + i*im (see dsp::phi). Broadcast-free: shapes must match.
template <typename T> Tensor<T> phase(const Tensor<T>& re, const Tensor<T>& im);
// |x - 2*pi*round(x / 2*pi)|.
template <typename T> Tensor<T> anti_wrap(const Tensor<T>& x);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
// Reductions over one axis; the axis is kept with size 1.
template <typename T> Tensor<T> sum(const Tensor<T>& x, std::size_t axis);
template <typename T> Tensor<T> mean(const Tensor<T>& x, std::size_t axis);

// a: [..., K] x b: [K, N] -> [..., N]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Constant-zero padding along one axis.
template <typename T>
Tensor<T> pad(const Tensor<T>& x, std::size_t axis, std::size_t before, std::size_t after);
// Elements [start, stop) along one axis.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t stop);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> transpose(const Tensor<T>& x, std::size_t axis_a, std::size_t axis_b);

struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
  std::size_t groups = 1;
};

// x: [B, Cin, L], weight: [Cout, Cin/groups, K], bias: [Cout] or undefined.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv1dOptions& opt = {});

struct Conv2dOptions {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

// x: [B, Cin, H, W], weight: [Cout, Cin, KH, KW], bias: [Cout] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dOptions& opt = {});

template <typename T>
struct ComplexTensor {
  Tensor<T> re;  // [B, frames, bins]
  Tensor<T> im;
};

// x: [B, N] -> [B, frames, bins] under the framing convention of dsp::StftEngine.
template <typename T> ComplexTensor<T> stft(const Tensor<T>& x, const dsp::StftConfig& cfg);
// [B, frames, bins] -> [B, samples_for(frames)].
template <typename T>
Tensor<T> istft(const Tensor<T>& re, const Tensor<T>& im, const dsp::StftConfig& cfg);

// sqrt(re^2 + im^2 + eps); eps keeps the gradient bounded at the origin.
template <typename T> Tensor<T> magnitude(const ComplexTensor<T>& z, T eps = T(1e-12));

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a) { return neg(a); }

}  // namespace apnet2::ad
