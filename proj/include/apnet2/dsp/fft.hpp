#pragma once

#include <cstddef>
#include <memory>
#include <span>

namespace apnet2::dsp {

// Real-input FFT of a fixed length n backed by FFTW.
//
// forward():  re[k] + i*im[k] = sum_j x[j] exp(-2*pi*i*j*k/n), k = 0..n/2
// inverse():  x[j] = sum over the full Hermitian spectrum (unnormalized), so
//             inverse(forward(x)) == n * x.
//
// Plans are created once per length and cached; execute calls are safe from
// any thread.
template <typename T>
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  void forward(std::span<const T> x, std::span<T> re, std::span<T> im) const;
  void inverse(std::span<const T> re, std::span<const T> im, std::span<T> x) const;

 private:
  struct Impl;
  std::size_t n_ = 0;
  std::unique_ptr<Impl> impl_;
};

}  // namespace apnet2::dsp
