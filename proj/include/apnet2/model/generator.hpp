#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "apnet2/dsp/stft.hpp"
#include "apnet2/nn/layers.hpp"

namespace apnet2::model {

struct GeneratorConfig {
  std::size_t n_mels = 80;
  std::size_t channels = 512;
  std::size_t expansion = 1536;
  std::size_t blocks = 8;
  std::size_t block_kernel = 7;
  std::size_t io_kernel = 7;  // input conv and output heads
  dsp::StftConfig stft;

  static GeneratorConfig full() { return {}; }
  // Same topology at desk scale.
  static GeneratorConfig desk() {
    GeneratorConfig c;
    c.channels = 64;
    c.expansion = 192;
    c.blocks = 4;
    return c;
  }
  void validate() const;
  bool operator==(const GeneratorConfig&) const = default;
};

template <typename T>
struct GeneratorOutput {
  ad::Tensor<T> log_amp;  // [B, frames, bins]
  ad::Tensor<T> phase;    // [B, frames, bins], wrapped
  ad::Tensor<T> re;       // reconstructed spectrum
  ad::Tensor<T> im;
  ad::Tensor<T> audio;    // [B, frames * hop]
};

// Input conv, ConvNeXt v2 stack and final LayerNorm shared by both towers.
template <typename T>
class Backbone {
 public:
  Backbone(const std::string& name, const GeneratorConfig& cfg, nn::Rng& rng);
  ad::Tensor<T> operator()(const ad::Tensor<T>& mel_t, const nn::Observer* observe) const;
  void collect(ad::ParameterList<T>& out);

 private:
  std::string name_;
  nn::Conv1d<T> conv_in_;
  std::vector<std::unique_ptr<nn::ConvNeXtV2Block<T>>> blocks_;
  nn::LayerNorm<T> norm_;
};

// Mel [B, frames, n_mels] -> amplitude and phase towers -> ISTFT waveform.
template <typename T>
class Apnet2Generator {
 public:
  Apnet2Generator(const GeneratorConfig& cfg, std::uint64_t seed);

  const GeneratorConfig& config() const { return cfg_; }

  ad::Tensor<T> asp_forward(const ad::Tensor<T>& mel) const;
  // Pseudo real and imaginary head outputs, [B, frames, bins] each.
  ad::ComplexTensor<T> psp_heads(const ad::Tensor<T>& mel) const;
  ad::Tensor<T> psp_forward(const ad::Tensor<T>& mel) const;
  GeneratorOutput<T> forward(const ad::Tensor<T>& mel) const;

  // Invoked with every intermediate activation during subsequent forwards.
  void set_observer(nn::Observer observer) { observer_ = std::move(observer); }

  ad::ParameterList<T> parameters();
  std::size_t parameter_count();

  nn::Conv1d<T>& asp_out() { return asp_out_; }
  nn::Conv1d<T>& psp_real() { return psp_real_; }
  nn::Conv1d<T>& psp_imag() { return psp_imag_; }

 private:
  ad::Tensor<T> to_channels(const ad::Tensor<T>& mel) const;
  const nn::Observer* observer() const { return observer_ ? &observer_ : nullptr; }

  GeneratorConfig cfg_;
  nn::Rng rng_;
  Backbone<T> asp_;
  nn::Conv1d<T> asp_out_;
  Backbone<T> psp_;
  nn::Conv1d<T> psp_real_;
  nn::Conv1d<T> psp_imag_;
  nn::Observer observer_;
};

// Waveform from log-amplitude and phase, [B, frames, bins] each.
template <typename T>
ad::Tensor<T> synthesize(const ad::Tensor<T>& log_amp, const ad::Tensor<T>& phase, const dsp::StftConfig& cfg,
                         ad::Tensor<T>* re = nullptr, ad::Tensor<T>* im = nullptr);

}  // namespace apnet2::model
