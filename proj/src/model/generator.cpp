#include "apnet2/model/generator.hpp"

#include <stdexcept>

namespace apnet2::model {

void GeneratorConfig::validate() const {
  if (n_mels == 0 || channels == 0 || expansion == 0 || blocks == 0)
    throw std::invalid_argument("generator: n_mels, channels, expansion and blocks must be positive");
  if (block_kernel % 2 == 0 || io_kernel % 2 == 0)
    throw std::invalid_argument("generator: kernel sizes must be odd to preserve the frame count");
  stft.validate();
}

template <typename T>
Backbone<T>::Backbone(const std::string& name, const GeneratorConfig& cfg, nn::Rng& rng)
    : name_(name),
      conv_in_(name + ".conv_in", cfg.n_mels, cfg.channels, cfg.io_kernel, rng, {.padding = cfg.io_kernel / 2}),
      norm_(name + ".norm", cfg.channels) {
  for (std::size_t i = 0; i < cfg.blocks; ++i)
    blocks_.push_back(std::make_unique<nn::ConvNeXtV2Block<T>>(
        name + ".blocks." + std::to_string(i),
        nn::BlockConfig{.channels = cfg.channels, .expansion = cfg.expansion, .kernel = cfg.block_kernel}, rng));
}

template <typename T>
ad::Tensor<T> Backbone<T>::operator()(const ad::Tensor<T>& mel_t, const nn::Observer* observe) const {
  ad::Tensor<T> h = conv_in_(mel_t);
  if (observe) (*observe)(name_ + ".conv_in", h.shape());
  for (const auto& block : blocks_) h = (*block)(h, observe);
  h = norm_(h);
  if (observe) (*observe)(name_ + ".norm", h.shape());
  return h;
}

template <typename T>
void Backbone<T>::collect(ad::ParameterList<T>& out) {
  conv_in_.collect(out);
  for (auto& block : blocks_) block->collect(out);
  norm_.collect(out);
}

template <typename T>
Apnet2Generator<T>::Apnet2Generator(const GeneratorConfig& cfg, std::uint64_t seed)
    : cfg_((cfg.validate(), cfg)),
      rng_(seed),
      asp_("asp", cfg, rng_),
      asp_out_("asp.conv_out", cfg.channels, cfg.stft.bins(), cfg.io_kernel, rng_, {.padding = cfg.io_kernel / 2}),
      psp_("psp", cfg, rng_),
      psp_real_("psp.conv_real", cfg.channels, cfg.stft.bins(), cfg.io_kernel, rng_, {.padding = cfg.io_kernel / 2}),
      psp_imag_("psp.conv_imag", cfg.channels, cfg.stft.bins(), cfg.io_kernel, rng_, {.padding = cfg.io_kernel / 2}) {}

template <typename T>
ad::Tensor<T> Apnet2Generator<T>::to_channels(const ad::Tensor<T>& mel) const {
  if (mel.rank() != 3 || mel.dim(2) != cfg_.n_mels || mel.dim(1) == 0)
    throw std::invalid_argument("generator: expected mel [B, frames >= 1, " + std::to_string(cfg_.n_mels) +
                                "], got " + ad::to_string(mel.shape()));
  return ad::transpose(mel, 1, 2);
}

template <typename T>
ad::Tensor<T> Apnet2Generator<T>::asp_forward(const ad::Tensor<T>& mel) const {
  ad::Tensor<T> out = asp_out_(asp_(to_channels(mel), observer()));
  if (observer()) observer_("asp.conv_out", out.shape());
  return ad::transpose(out, 1, 2);
}

template <typename T>
ad::ComplexTensor<T> Apnet2Generator<T>::psp_heads(const ad::Tensor<T>& mel) const {
  const ad::Tensor<T> h = psp_(to_channels(mel), observer());
  ad::Tensor<T> r = psp_real_(h);
  ad::Tensor<T> i = psp_imag_(h);
  if (observer()) {
    observer_("psp.conv_real", r.shape());
    observer_("psp.conv_imag", i.shape());
  }
  return {ad::transpose(r, 1, 2), ad::transpose(i, 1, 2)};
}

template <typename T>
ad::Tensor<T> Apnet2Generator<T>::psp_forward(const ad::Tensor<T>& mel) const {
  const auto heads = psp_heads(mel);
  return ad::phase(heads.re, heads.im);
}

template <typename T>
ad::Tensor<T> synthesize(const ad::Tensor<T>& log_amp, const ad::Tensor<T>& phase, const dsp::StftConfig& cfg,
                         ad::Tensor<T>* re, ad::Tensor<T>* im) {
  const ad::Tensor<T> amp = ad::exp(log_amp);
  ad::Tensor<T> r = ad::mul(amp, ad::cos(phase));
  ad::Tensor<T> i = ad::mul(amp, ad::sin(phase));
  ad::Tensor<T> audio = ad::istft(r, i, cfg);
  if (re) *re = r;
  if (im) *im = i;
  return audio;
}

template <typename T>
GeneratorOutput<T> Apnet2Generator<T>::forward(const ad::Tensor<T>& mel) const {
  GeneratorOutput<T> out;
  out.log_amp = asp_forward(mel);
  out.phase = psp_forward(mel);
  out.audio = synthesize(out.log_amp, out.phase, cfg_.stft, &out.re, &out.im);
  return out;
}

template <typename T>
ad::ParameterList<T> Apnet2Generator<T>::parameters() {
  ad::ParameterList<T> out;
  asp_.collect(out);
  asp_out_.collect(out);
  psp_.collect(out);
  psp_real_.collect(out);
  psp_imag_.collect(out);
  return out;
}

template <typename T>
std::size_t Apnet2Generator<T>::parameter_count() {
  return nn::parameter_count(parameters());
}

template class Backbone<float>;
template class Backbone<double>;
template class Apnet2Generator<float>;
template class Apnet2Generator<double>;
template ad::Tensor<float> synthesize(const ad::Tensor<float>&, const ad::Tensor<float>&, const dsp::StftConfig&,
                                      ad::Tensor<float>*, ad::Tensor<float>*);
template ad::Tensor<double> synthesize(const ad::Tensor<double>&, const ad::Tensor<double>&, const dsp::StftConfig&,
                                       ad::Tensor<double>*, ad::Tensor<double>*);

}  // namespace apnet2::model
