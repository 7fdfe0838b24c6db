#pragma once

#include <memory>
#include <vector>

#include "apnet2/io/config.hpp"
#include "apnet2/loss/losses.hpp"
#include "apnet2/model/generator.hpp"

namespace apnet2::io {

// Mel analysis plus generator inference, no gradient recording.
class Vocoder {
 public:
  Vocoder(const RunConfig& cfg, std::unique_ptr<model::Apnet2Generator<float>> gen);

  // [1, frames, n_mels] log-mel of a clip.
  ad::Tensor<float> mel_of(const dsp::Waveform<double>& w) const;
  // frames * hop samples.
  dsp::Waveform<double> generate(const ad::Tensor<float>& mel) const;
  // generate(mel_of(w)) trimmed to the input length.
  dsp::Waveform<double> resynthesize(const dsp::Waveform<double>& w) const;

  const RunConfig& config() const { return cfg_; }
  model::Apnet2Generator<float>& generator() { return *gen_; }

 private:
  RunConfig cfg_;
  std::unique_ptr<model::Apnet2Generator<float>> gen_;
  loss::MelAnalyzer<float> mel_;
};

struct BenchResult {
  double gen_seconds = 0;    // mel -> waveform time, summed over clips
  double audio_seconds = 0;  // summed clip duration
  std::size_t clips = 0;
};

// Times generate() on each clip's precomputed mel with a monotonic clock.
// One untimed warm-up pass on the first clip precedes the measurement.
BenchResult bench(const Vocoder& vocoder, const std::vector<dsp::Waveform<double>>& clips);

}  // namespace apnet2::io
