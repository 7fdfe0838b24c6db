#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "apnet2/dsp/stft.hpp"

namespace apnet2::io {

// Unreadable, malformed or incompatible input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 16-bit PCM mono RIFF/WAVE only; samples are int16 / 32768. A file whose
// rate differs from `expected_rate` is an error, never resampled.
dsp::Waveform<double> read_wav(const std::string& path, std::optional<int> expected_rate = std::nullopt);
dsp::Waveform<double> parse_wav(const std::string& bytes, const std::string& name = "<memory>",
                                std::optional<int> expected_rate = std::nullopt);

// Inverse of read_wav: round to nearest, clamp to [-32768, 32767].
void write_wav(const std::string& path, const dsp::Waveform<double>& w);
std::string encode_wav(const dsp::Waveform<double>& w);

short quantize_sample(double x);

}  // namespace apnet2::io
