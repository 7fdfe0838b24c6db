#pragma once

#include <cstddef>

#include "apnet2/dsp/matrix.hpp"
#include "apnet2/dsp/spectral.hpp"
#include "apnet2/dsp/stft.hpp"

namespace apnet2::dsp {

struct MelConfig {
  std::size_t n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  int sample_rate = 22050;
  double amp_floor = kAmpFloor;

  bool operator==(const MelConfig&) const = default;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular HTK-mel filters over the one-sided FFT bins. Rows are not
// area-normalized; each triangle peaks at 1.
template <typename T>
struct MelFilterbank {
  Matrix<T> weights;  // n_mels x bins
  double f_min = 0.0;
  double f_max = 8000.0;

  static MelFilterbank build(const MelConfig& mel, const StftConfig& stft);
};

template <typename T>
struct MelSpectrogram {
  Matrix<T> values;  // frames x n_mels, natural log
};

// log(max(weights * |stft(w)|, amp_floor)) per frame.
template <typename T>
MelSpectrogram<T> mel_spectrogram(const Waveform<T>& w, const MelFilterbank<T>& fb,
                                  const StftConfig& cfg, T amp_floor = T(kAmpFloor));

// Same projection applied to a precomputed magnitude (frames x bins).
template <typename T>
MelSpectrogram<T> mel_from_magnitude(const Matrix<T>& magnitude, const MelFilterbank<T>& fb,
                                     T amp_floor = T(kAmpFloor));

}  // namespace apnet2::dsp
