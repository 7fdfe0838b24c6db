#pragma once

#include <cmath>
#include <numbers>

#include "apnet2/dsp/matrix.hpp"
#include "apnet2/dsp/stft.hpp"

namespace apnet2::dsp {

// Default floor applied to magnitudes before every log.
inline constexpr double kAmpFloor = 1e-5;

template <typename T>
struct LogAmplitudeSpectrogram {
  Matrix<T> values;  // frames x bins, natural log
};

template <typename T>
struct PhaseSpectrogram {
  Matrix<T> values;  // frames x bins, radians in (-pi, pi]
};

// Sgn*(x): +1 for x >= 0, -1 otherwise.
template <typename T>
constexpr T sgn_star(T x) {
  return x >= T{0} ? T{1} : T{-1};
}

// Wrapped phase of the pseudo complex value R + iI:
//   arctan(I/R) - pi/2 * Sgn*(I) * (Sgn*(R) - 1)
// The origin maps to 0. For R == 0 the arctangent term is +-pi/2.
template <typename T>
T phi(T re, T im) {
  constexpr T half_pi = std::numbers::pi_v<T> / 2;
  if (re == T{0}) {
    if (im == T{0}) return T{0};
    return im > T{0} ? half_pi : -half_pi;
  }
  return std::atan(im / re) - half_pi * sgn_star(im) * (sgn_star(re) - T{1});
}

// |x - 2*pi*round(x / 2*pi)|, round half away from zero. Result in [0, pi].
template <typename T>
T anti_wrap(T x) {
  constexpr T two_pi = 2 * std::numbers::pi_v<T>;
  return std::abs(x - two_pi * std::round(x / two_pi));
}

template <typename T>
LogAmplitudeSpectrogram<T> log_amplitude(const ComplexSpectrogram<T>& s, T amp_floor = T(kAmpFloor));

template <typename T>
PhaseSpectrogram<T> phase_of(const ComplexSpectrogram<T>& s);

template <typename T>
ComplexSpectrogram<T> reconstruct_complex(const LogAmplitudeSpectrogram<T>& a,
                                          const PhaseSpectrogram<T>& p);

}  // namespace apnet2::dsp
