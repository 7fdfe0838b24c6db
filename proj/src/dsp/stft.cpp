#include "apnet2/dsp/stft.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>

namespace apnet2::dsp {
namespace {

// Reflection about the first/last sample without repeating the edge.
std::size_t mirror_index(std::ptrdiff_t m, std::size_t len) {
  if (len == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (len - 1));
  m %= period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(len)) m = period - m;
  return static_cast<std::size_t>(m);
}

// Overlap-add normalizer is treated as zero below this window-square sum.
constexpr double kNolaFloor = 1e-11;

}  // namespace

void StftConfig::validate() const {
  if (n_fft < 2) throw std::invalid_argument("StftConfig: n_fft must be >= 2");
  if (hop == 0) throw std::invalid_argument("StftConfig: hop must be >= 1");
  if (hop > win_length || win_length > n_fft)
    throw std::invalid_argument("StftConfig: require hop <= win_length <= n_fft (hop=" +
                                std::to_string(hop) + ", win_length=" + std::to_string(win_length) +
                                ", n_fft=" + std::to_string(n_fft) + ")");
  const auto w = make_window<double>(*this);
  std::vector<double> sums(hop, 0.0);
  for (std::size_t j = 0; j < n_fft; ++j) sums[j % hop] += w[j];
  const auto [lo, hi] = std::minmax_element(sums.begin(), sums.end());
  if (*lo <= 0.0 || (*hi - *lo) > 1e-9 * *hi)
    throw std::invalid_argument("StftConfig: window is not constant-overlap-add at hop " +
                                std::to_string(hop));
}

std::size_t StftConfig::frames_for(std::size_t n_samples) const {
  if (centered) return (n_samples + hop - 1) / hop;
  if (n_samples < n_fft) return 0;
  return 1 + (n_samples - n_fft) / hop;
}

std::size_t StftConfig::samples_for(std::size_t frames) const {
  if (frames == 0) return 0;
  return centered ? frames * hop : (frames - 1) * hop + n_fft;
}

template <typename T>
std::vector<T> make_window(const StftConfig& cfg) {
  std::vector<T> w(cfg.n_fft, T{0});
  const std::size_t offset = (cfg.n_fft - cfg.win_length) / 2;
  for (std::size_t j = 0; j < cfg.win_length; ++j) {
    double v = 1.0;
    if (cfg.window == WindowKind::kHann)
      v = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j) /
                               static_cast<double>(cfg.win_length));
    w[offset + j] = static_cast<T>(v);
  }
  return w;
}

template <typename T>
void Waveform<T>::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("Waveform: sample_rate must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (!std::isfinite(samples[i]))
      throw std::invalid_argument("Waveform: non-finite sample at index " + std::to_string(i));
}

template <typename T>
StftEngine<T>::StftEngine(const StftConfig& cfg)
    : cfg_(cfg), window_(make_window<T>(cfg)), fft_(cfg.n_fft) {
  cfg_.validate();
}

template <typename T>
std::shared_ptr<const StftEngine<T>> StftEngine<T>::get(const StftConfig& cfg) {
  using Key = std::tuple<std::size_t, std::size_t, std::size_t, int, bool>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const StftEngine<T>>> cache;
  const Key key{cfg.n_fft, cfg.hop, cfg.win_length, static_cast<int>(cfg.window), cfg.centered};
  std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto engine = std::make_shared<const StftEngine<T>>(cfg);
  cache.emplace(key, engine);
  return engine;
}

template <typename T>
void StftEngine<T>::analyze(std::span<const T> x, std::span<T> re, std::span<T> im) const {
  const std::size_t n = x.size();
  const std::size_t frames = frames_for(n);
  const std::size_t nb = cfg_.bins();
  if (n == 0 || frames == 0) throw std::invalid_argument("stft: input too short");
  if (re.size() != frames * nb || im.size() != frames * nb)
    throw std::invalid_argument("stft: output buffer size mismatch");
  const auto left = static_cast<std::ptrdiff_t>(left_pad());
  std::vector<T> seg(cfg_.n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * cfg_.hop) - left;
    for (std::size_t j = 0; j < cfg_.n_fft; ++j)
      seg[j] = x[mirror_index(start + static_cast<std::ptrdiff_t>(j), n)] * window_[j];
    fft_.forward(seg, re.subspan(t * nb, nb), im.subspan(t * nb, nb));
  }
}

template <typename T>
void StftEngine<T>::analyze_adjoint(std::span<const T> g_re, std::span<const T> g_im,
                                    std::span<T> gx) const {
  const std::size_t n = gx.size();
  const std::size_t frames = frames_for(n);
  const std::size_t nb = cfg_.bins();
  if (g_re.size() != frames * nb || g_im.size() != frames * nb)
    throw std::invalid_argument("stft adjoint: gradient size mismatch");
  const auto left = static_cast<std::ptrdiff_t>(left_pad());
  const bool even = cfg_.n_fft % 2 == 0;
  std::vector<T> hr(nb), hi(nb), seg(cfg_.n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    // d/dseg_j = sum_k gre_k cos(theta) - gim_k sin(theta): an unnormalized
    // Hermitian inverse with the interior bins halved.
    for (std::size_t k = 0; k < nb; ++k) {
      const bool edge = k == 0 || (even && k == nb - 1);
      const T scale = edge ? T{1} : T{0.5};
      hr[k] = g_re[t * nb + k] * scale;
      hi[k] = g_im[t * nb + k] * scale;
    }
    fft_.inverse(hr, hi, seg);
    const auto start = static_cast<std::ptrdiff_t>(t * cfg_.hop) - left;
    for (std::size_t j = 0; j < cfg_.n_fft; ++j)
      gx[mirror_index(start + static_cast<std::ptrdiff_t>(j), n)] += seg[j] * window_[j];
  }
}

template <typename T>
std::vector<T> StftEngine<T>::overlap_norm(std::size_t frames) const {
  std::vector<T> wsum(padded_length(frames), T{0});
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t j = 0; j < cfg_.n_fft; ++j) wsum[t * cfg_.hop + j] += window_[j] * window_[j];
  for (auto& v : wsum) v = (static_cast<double>(v) > kNolaFloor) ? T{1} / v : T{0};
  return wsum;
}

template <typename T>
void StftEngine<T>::synthesize(std::span<const T> re, std::span<const T> im, std::size_t frames,
                               std::span<T> y) const {
  const std::size_t nb = cfg_.bins();
  if (frames == 0) throw std::invalid_argument("istft: need at least one frame");
  if (re.size() != frames * nb || im.size() != frames * nb)
    throw std::invalid_argument("istft: spectrogram size mismatch");
  if (y.size() != samples_for(frames)) throw std::invalid_argument("istft: output size mismatch");
  const std::size_t plen = padded_length(frames);
  std::vector<T> acc(plen, T{0});
  std::vector<T> seg(cfg_.n_fft);
  const T inv_n = T{1} / static_cast<T>(cfg_.n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    fft_.inverse(re.subspan(t * nb, nb), im.subspan(t * nb, nb), seg);
    T* dst = acc.data() + t * cfg_.hop;
    for (std::size_t j = 0; j < cfg_.n_fft; ++j) dst[j] += seg[j] * inv_n * window_[j];
  }
  const auto norm = overlap_norm(frames);
  const std::size_t left = left_pad();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = acc[left + i] * norm[left + i];
}

template <typename T>
void StftEngine<T>::synthesize_adjoint(std::span<const T> gy, std::size_t frames, std::span<T> g_re,
                                       std::span<T> g_im) const {
  const std::size_t nb = cfg_.bins();
  if (gy.size() != samples_for(frames) || g_re.size() != frames * nb || g_im.size() != frames * nb)
    throw std::invalid_argument("istft adjoint: gradient size mismatch");
  const std::size_t plen = padded_length(frames);
  const auto norm = overlap_norm(frames);
  const std::size_t left = left_pad();
  std::vector<T> gacc(plen, T{0});
  for (std::size_t i = 0; i < gy.size(); ++i) gacc[left + i] = gy[i] * norm[left + i];
  const bool even = cfg_.n_fft % 2 == 0;
  const T inv_n = T{1} / static_cast<T>(cfg_.n_fft);
  std::vector<T> seg(cfg_.n_fft), fr(nb), fi(nb);
  for (std::size_t t = 0; t < frames; ++t) {
    const T* src = gacc.data() + t * cfg_.hop;
    for (std::size_t j = 0; j < cfg_.n_fft; ++j) seg[j] = src[j] * window_[j] * inv_n;
    fft_.forward(seg, fr, fi);
    for (std::size_t k = 0; k < nb; ++k) {
      const bool edge = k == 0 || (even && k == nb - 1);
      const T c = edge ? T{1} : T{2};
      g_re[t * nb + k] += c * fr[k];
      // The Hermitian inverse ignores the imaginary part of the edge bins.
      g_im[t * nb + k] += edge ? T{0} : c * fi[k];
    }
  }
}

template <typename T>
ComplexSpectrogram<T> stft(const Waveform<T>& w, const StftConfig& cfg) {
  if (w.samples.empty()) throw std::invalid_argument("stft: empty waveform");
  w.validate();
  const auto engine = StftEngine<T>::get(cfg);
  const std::size_t frames = cfg.frames_for(w.samples.size());
  if (frames == 0)
    throw std::invalid_argument("stft: waveform shorter than n_fft in non-centered mode");
  ComplexSpectrogram<T> s(frames, cfg.bins());
  engine->analyze(w.samples, s.real.data, s.imag.data);
  return s;
}

template <typename T>
Waveform<T> istft(const ComplexSpectrogram<T>& s, const StftConfig& cfg, int sample_rate) {
  if (s.bins() != cfg.bins())
    throw std::invalid_argument("istft: spectrogram has " + std::to_string(s.bins()) +
                                " bins, config expects " + std::to_string(cfg.bins()));
  if (!s.real.same_shape(s.imag)) throw std::invalid_argument("istft: real/imag shape mismatch");
  if (s.frames() == 0) throw std::invalid_argument("istft: need at least one frame");
  const auto engine = StftEngine<T>::get(cfg);
  Waveform<T> out;
  out.sample_rate = sample_rate;
  out.samples.resize(cfg.samples_for(s.frames()));
  engine->synthesize(s.real.data, s.imag.data, s.frames(), out.samples);
  return out;
}

template std::vector<float> make_window<float>(const StftConfig&);
template std::vector<double> make_window<double>(const StftConfig&);
template struct Waveform<float>;
template struct Waveform<double>;
template class StftEngine<float>;
template class StftEngine<double>;
template ComplexSpectrogram<float> stft(const Waveform<float>&, const StftConfig&);
template ComplexSpectrogram<double> stft(const Waveform<double>&, const StftConfig&);
template Waveform<float> istft(const ComplexSpectrogram<float>&, const StftConfig&, int);
template Waveform<double> istft(const ComplexSpectrogram<double>&, const StftConfig&, int);

}  // namespace apnet2::dsp
