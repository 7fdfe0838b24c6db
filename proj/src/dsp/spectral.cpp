#include "apnet2/dsp/spectral.hpp"

#include <algorithm>
#include <stdexcept>

namespace apnet2::dsp {

template <typename T>
LogAmplitudeSpectrogram<T> log_amplitude(const ComplexSpectrogram<T>& s, T amp_floor) {
  if (!(amp_floor > T{0})) throw std::invalid_argument("log_amplitude: amp_floor must be > 0");
  require_same_shape(s.real, s.imag, "log_amplitude");
  LogAmplitudeSpectrogram<T> out{Matrix<T>(s.frames(), s.bins())};
  for (std::size_t i = 0; i < s.real.data.size(); ++i) {
    const T mag = std::hypot(s.real.data[i], s.imag.data[i]);
    out.values.data[i] = std::log(std::max(mag, amp_floor));
  }
  return out;
}

template <typename T>
PhaseSpectrogram<T> phase_of(const ComplexSpectrogram<T>& s) {
  require_same_shape(s.real, s.imag, "phase_of");
  PhaseSpectrogram<T> out{Matrix<T>(s.frames(), s.bins())};
  for (std::size_t i = 0; i < s.real.data.size(); ++i)
    out.values.data[i] = phi(s.real.data[i], s.imag.data[i]);
  return out;
}

template <typename T>
ComplexSpectrogram<T> reconstruct_complex(const LogAmplitudeSpectrogram<T>& a,
                                          const PhaseSpectrogram<T>& p) {
  require_same_shape(a.values, p.values, "reconstruct_complex");
  ComplexSpectrogram<T> out(a.values.rows, a.values.cols);
  for (std::size_t i = 0; i < a.values.data.size(); ++i) {
    const T mag = std::exp(a.values.data[i]);
    out.real.data[i] = mag * std::cos(p.values.data[i]);
    out.imag.data[i] = mag * std::sin(p.values.data[i]);
  }
  return out;
}

template LogAmplitudeSpectrogram<float> log_amplitude(const ComplexSpectrogram<float>&, float);
template LogAmplitudeSpectrogram<double> log_amplitude(const ComplexSpectrogram<double>&, double);
template PhaseSpectrogram<float> phase_of(const ComplexSpectrogram<float>&);
template PhaseSpectrogram<double> phase_of(const ComplexSpectrogram<double>&);
template ComplexSpectrogram<float> reconstruct_complex(const LogAmplitudeSpectrogram<float>&,
                                                       const PhaseSpectrogram<float>&);
template ComplexSpectrogram<double> reconstruct_complex(const LogAmplitudeSpectrogram<double>&,
                                                        const PhaseSpectrogram<double>&);

}  // namespace apnet2::dsp
