#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "apnet2/dsp/fft.hpp"
#include "apnet2/dsp/matrix.hpp"

namespace apnet2::dsp {

enum class WindowKind { kHann, kRectangular };

struct StftConfig {
  std::size_t n_fft = 1024;
  std::size_t hop = 256;
  std::size_t win_length = 1024;
  WindowKind window = WindowKind::kHann;
  // Centered framing: frame t is centered on sample t * hop, the signal is
  // reflection-padded, and frames = ceil(len / hop).
  bool centered = true;

  std::size_t bins() const { return n_fft / 2 + 1; }

  // Throws std::invalid_argument unless hop <= win_length <= n_fft and the
  // window overlap-adds to a constant at this hop.
  void validate() const;

  std::size_t frames_for(std::size_t n_samples) const;
  // Length of istft output for the given frame count.
  std::size_t samples_for(std::size_t frames) const;

  bool operator==(const StftConfig&) const = default;
};

// Analysis window of length n_fft (periodic, win_length support centered).
template <typename T>
std::vector<T> make_window(const StftConfig& cfg);

template <typename T>
struct Waveform {
  std::vector<T> samples;
  int sample_rate = 22050;

  // Throws if the sample rate is not positive or any sample is non-finite.
  void validate() const;
};

template <typename T>
struct ComplexSpectrogram {
  Matrix<T> real;  // frames x bins
  Matrix<T> imag;

  ComplexSpectrogram() = default;
  ComplexSpectrogram(std::size_t frames, std::size_t bins) : real(frames, bins), imag(frames, bins) {}

  std::size_t frames() const { return real.rows; }
  std::size_t bins() const { return real.cols; }
};

// Frame-level analysis/synthesis kernels shared by the plain DSP functions
// and the differentiable tensor ops. Buffers are row-major frames x bins.
template <typename T>
class StftEngine {
 public:
  explicit StftEngine(const StftConfig& cfg);

  // Cached engine for cfg; engines are immutable and shareable.
  static std::shared_ptr<const StftEngine> get(const StftConfig& cfg);

  const StftConfig& config() const { return cfg_; }
  std::size_t frames_for(std::size_t n_samples) const { return cfg_.frames_for(n_samples); }
  std::size_t samples_for(std::size_t frames) const { return cfg_.samples_for(frames); }

  // x (n samples) -> re, im (frames_for(n) x bins).
  void analyze(std::span<const T> x, std::span<T> re, std::span<T> im) const;
  // Accumulates the adjoint of analyze() into gx.
  void analyze_adjoint(std::span<const T> g_re, std::span<const T> g_im, std::span<T> gx) const;

  // re, im (frames x bins) -> y (samples_for(frames)). Overlap-add with
  // window-square normalization.
  void synthesize(std::span<const T> re, std::span<const T> im, std::size_t frames,
                  std::span<T> y) const;
  // Accumulates the adjoint of synthesize() into g_re, g_im.
  void synthesize_adjoint(std::span<const T> gy, std::size_t frames, std::span<T> g_re,
                          std::span<T> g_im) const;

 private:
  std::size_t left_pad() const { return cfg_.centered ? cfg_.n_fft / 2 : 0; }
  std::size_t padded_length(std::size_t frames) const {
    const std::size_t span = (frames - 1) * cfg_.hop + cfg_.n_fft;
    const std::size_t trimmed = left_pad() + samples_for(frames);
    return span > trimmed ? span : trimmed;
  }
  std::vector<T> overlap_norm(std::size_t frames) const;

  StftConfig cfg_;
  std::vector<T> window_;
  RealFft<T> fft_;
};

template <typename T>
ComplexSpectrogram<T> stft(const Waveform<T>& w, const StftConfig& cfg);

template <typename T>
Waveform<T> istft(const ComplexSpectrogram<T>& s, const StftConfig& cfg, int sample_rate = 22050);

}  // namespace apnet2::dsp
