#include "apnet2/dsp/mel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace apnet2::dsp {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

template <typename T>
MelFilterbank<T> MelFilterbank<T>::build(const MelConfig& mel, const StftConfig& stft) {
  if (mel.n_mels == 0) throw std::invalid_argument("MelFilterbank: n_mels must be >= 1");
  if (!(mel.f_min >= 0.0) || !(mel.f_max > mel.f_min) || mel.f_max > mel.sample_rate / 2.0)
    throw std::invalid_argument("MelFilterbank: require 0 <= f_min < f_max <= sample_rate/2");
  const std::size_t nb = stft.bins();
  MelFilterbank fb;
  fb.f_min = mel.f_min;
  fb.f_max = mel.f_max;
  fb.weights = Matrix<T>(mel.n_mels, nb);

  const double mel_lo = hz_to_mel(mel.f_min);
  const double mel_hi = hz_to_mel(mel.f_max);
  std::vector<double> edges(mel.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(mel.n_mels + 1));
  const double bin_hz = static_cast<double>(mel.sample_rate) / static_cast<double>(stft.n_fft);
  for (std::size_t m = 0; m < mel.n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    bool any = false;
    for (std::size_t k = 0; k < nb; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      const double w = std::max(0.0, std::min((f - lo) / (center - lo), (hi - f) / (hi - center)));
      fb.weights(m, k) = static_cast<T>(w);
      any = any || w > 0.0;
    }
    if (!any)
      throw std::invalid_argument("MelFilterbank: filter " + std::to_string(m) +
                                  " covers no FFT bin; use fewer mels or a larger n_fft");
  }
  return fb;
}

template <typename T>
MelSpectrogram<T> mel_from_magnitude(const Matrix<T>& magnitude, const MelFilterbank<T>& fb,
                                     T amp_floor) {
  if (magnitude.cols != fb.weights.cols)
    throw std::invalid_argument("mel_spectrogram: filterbank expects " +
                                std::to_string(fb.weights.cols) + " bins, got " +
                                std::to_string(magnitude.cols));
  const std::size_t n_mels = fb.weights.rows;
  MelSpectrogram<T> out{Matrix<T>(magnitude.rows, n_mels)};
  for (std::size_t t = 0; t < magnitude.rows; ++t) {
    const auto mag = magnitude.row(t);
    for (std::size_t m = 0; m < n_mels; ++m) {
      const auto w = fb.weights.row(m);
      T acc{0};
      for (std::size_t k = 0; k < mag.size(); ++k) acc += w[k] * mag[k];
      out.values(t, m) = std::log(std::max(acc, amp_floor));
    }
  }
  return out;
}

template <typename T>
MelSpectrogram<T> mel_spectrogram(const Waveform<T>& w, const MelFilterbank<T>& fb,
                                  const StftConfig& cfg, T amp_floor) {
  const auto s = stft(w, cfg);
  Matrix<T> mag(s.frames(), s.bins());
  for (std::size_t i = 0; i < mag.data.size(); ++i)
    mag.data[i] = std::hypot(s.real.data[i], s.imag.data[i]);
  return mel_from_magnitude(mag, fb, amp_floor);
}

template struct MelFilterbank<float>;
template struct MelFilterbank<double>;
template MelSpectrogram<float> mel_spectrogram(const Waveform<float>&, const MelFilterbank<float>&,
                                               const StftConfig&, float);
template MelSpectrogram<double> mel_spectrogram(const Waveform<double>&,
                                                const MelFilterbank<double>&, const StftConfig&,
                                                double);
template MelSpectrogram<float> mel_from_magnitude(const Matrix<float>&, const MelFilterbank<float>&,
                                                  float);
template MelSpectrogram<double> mel_from_magnitude(const Matrix<double>&,
                                                   const MelFilterbank<double>&, double);

}  // namespace apnet2::dsp
