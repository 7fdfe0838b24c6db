#include "apnet2/dsp/fft.hpp"

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace apnet2::dsp {
namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <typename T>
struct FftwTraits;

template <>
struct FftwTraits<double> {
  using Plan = fftw_plan;
  using Complex = fftw_complex;
  static Plan plan_r2c(int n, double* in, Complex* out) {
    return fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static Plan plan_c2r(int n, Complex* in, double* out) {
    return fftw_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static void exec_r2c(Plan p, double* in, Complex* out) { fftw_execute_dft_r2c(p, in, out); }
  static void exec_c2r(Plan p, Complex* in, double* out) { fftw_execute_dft_c2r(p, in, out); }
  static void destroy(Plan p) { fftw_destroy_plan(p); }
};

template <>
struct FftwTraits<float> {
  using Plan = fftwf_plan;
  using Complex = fftwf_complex;
  static Plan plan_r2c(int n, float* in, Complex* out) {
    return fftwf_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static Plan plan_c2r(int n, Complex* in, float* out) {
    return fftwf_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static void exec_r2c(Plan p, float* in, Complex* out) { fftwf_execute_dft_r2c(p, in, out); }
  static void exec_c2r(Plan p, Complex* in, float* out) { fftwf_execute_dft_c2r(p, in, out); }
  static void destroy(Plan p) { fftwf_destroy_plan(p); }
};

}  // namespace

template <typename T>
struct RealFft<T>::Impl {
  using Tr = FftwTraits<T>;
  typename Tr::Plan r2c = nullptr;
  typename Tr::Plan c2r = nullptr;
};

template <typename T>
RealFft<T>::RealFft(std::size_t n) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n < 2) throw std::invalid_argument("RealFft: length must be >= 2, got " + std::to_string(n));
  using Tr = FftwTraits<T>;
  std::vector<T> real(n);
  std::vector<std::complex<T>> spec(n / 2 + 1);
  auto* c = reinterpret_cast<typename Tr::Complex*>(spec.data());
  std::lock_guard lock(planner_mutex());
  impl_->r2c = Tr::plan_r2c(static_cast<int>(n), real.data(), c);
  impl_->c2r = Tr::plan_c2r(static_cast<int>(n), c, real.data());
  if (!impl_->r2c || !impl_->c2r) throw std::runtime_error("RealFft: FFTW planning failed");
}

template <typename T>
RealFft<T>::~RealFft() {
  if (!impl_) return;
  using Tr = FftwTraits<T>;
  std::lock_guard lock(planner_mutex());
  if (impl_->r2c) Tr::destroy(impl_->r2c);
  if (impl_->c2r) Tr::destroy(impl_->c2r);
}

template <typename T>
RealFft<T>::RealFft(RealFft&&) noexcept = default;
template <typename T>
RealFft<T>& RealFft<T>::operator=(RealFft&&) noexcept = default;

template <typename T>
void RealFft<T>::forward(std::span<const T> x, std::span<T> re, std::span<T> im) const {
  using Tr = FftwTraits<T>;
  const std::size_t nb = bins();
  if (x.size() != n_ || re.size() != nb || im.size() != nb)
    throw std::invalid_argument("RealFft::forward: buffer size mismatch");
  std::vector<T> in(x.begin(), x.end());
  std::vector<std::complex<T>> out(nb);
  Tr::exec_r2c(impl_->r2c, in.data(), reinterpret_cast<typename Tr::Complex*>(out.data()));
  for (std::size_t k = 0; k < nb; ++k) {
    re[k] = out[k].real();
    im[k] = out[k].imag();
  }
}

template <typename T>
void RealFft<T>::inverse(std::span<const T> re, std::span<const T> im, std::span<T> x) const {
  using Tr = FftwTraits<T>;
  const std::size_t nb = bins();
  if (x.size() != n_ || re.size() != nb || im.size() != nb)
    throw std::invalid_argument("RealFft::inverse: buffer size mismatch");
  // c2r destroys its input.
  std::vector<std::complex<T>> in(nb);
  for (std::size_t k = 0; k < nb; ++k) in[k] = {re[k], im[k]};
  Tr::exec_c2r(impl_->c2r, reinterpret_cast<typename Tr::Complex*>(in.data()), x.data());
}

template class RealFft<float>;
template class RealFft<double>;

}  // namespace apnet2::dsp
