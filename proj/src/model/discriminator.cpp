#include "apnet2/model/discriminator.hpp"

#include <algorithm>
#include <stdexcept>

namespace apnet2::model {

std::size_t DiscriminatorConfig::min_length() const {
  std::size_t n = 1;
  for (const auto& r : resolutions) n = std::max(n, r.win);
  return n;
}

void DiscriminatorConfig::validate() const {
  if (periods.empty() && resolutions.empty()) throw std::invalid_argument("discriminator: no sub-discriminators");
  if (mpd_channels.size() < 2 || mrd_channels.size() < 2)
    throw std::invalid_argument("discriminator: channel stacks need at least two layers");
  for (auto p : periods)
    if (p == 0) throw std::invalid_argument("discriminator: period must be positive");
  for (auto c : mpd_channels)
    if (c == 0) throw std::invalid_argument("discriminator: MPD channel count must be positive");
  for (auto c : mrd_channels)
    if (c == 0) throw std::invalid_argument("discriminator: MRD channel count must be positive");
  for (const auto& r : resolutions)
    dsp::StftConfig{.n_fft = r.n_fft, .hop = r.hop, .win_length = r.win}.validate();
  if (!(slope >= 0.0)) throw std::invalid_argument("discriminator: leaky slope must be >= 0");
}

template <typename T>
MpdSub<T>::MpdSub(std::size_t period, const std::vector<std::size_t>& channels, double slope, nn::Rng& rng)
    : period_(period), name_("mpd." + std::to_string(period)), slope_(static_cast<T>(slope)) {
  std::size_t in = 1;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const bool last = i + 1 == channels.size();
    convs_.push_back(std::make_unique<nn::Conv2d<T>>(name_ + ".convs." + std::to_string(i), in, channels[i], 5, 1, rng,
                                                     ad::Conv2dOptions{last ? 1u : 3u, 1, 2, 0}));
    in = channels[i];
  }
  post_ = std::make_unique<nn::Conv2d<T>>(name_ + ".conv_post", in, 1, 3, 1, rng, ad::Conv2dOptions{1, 1, 1, 0});
}

template <typename T>
ad::Tensor<T> MpdSub<T>::fold(const ad::Tensor<T>& x) const {
  const std::size_t B = x.dim(0), N = x.dim(1);
  const std::size_t padded = (N + period_ - 1) / period_ * period_;
  const ad::Tensor<T> xp = padded == N ? x : ad::pad(x, 1, 0, padded - N);
  return ad::reshape(xp, {B, 1, padded / period_, period_});
}

template <typename T>
SubOutput<T> MpdSub<T>::operator()(const ad::Tensor<T>& x) const {
  SubOutput<T> out;
  ad::Tensor<T> h = fold(x);
  for (const auto& conv : convs_) {
    h = ad::leaky_relu((*conv)(h), slope_);
    out.features.push_back(h);
  }
  out.score = (*post_)(h);
  out.features.push_back(out.score);
  return out;
}

template <typename T>
void MpdSub<T>::collect(ad::ParameterList<T>& out) {
  for (auto& conv : convs_) conv->collect(out);
  post_->collect(out);
}

template <typename T>
MrdSub<T>::MrdSub(const MrdResolution& res, const std::vector<std::size_t>& channels, double slope, nn::Rng& rng)
    : stft_{.n_fft = res.n_fft, .hop = res.hop, .win_length = res.win},
      name_("mrd." + std::to_string(res.n_fft)),
      slope_(static_cast<T>(slope)) {
  std::size_t in = 1;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const bool first = i == 0, last = i + 1 == channels.size();
    const std::string n = name_ + ".convs." + std::to_string(i);
    if (last)
      convs_.push_back(std::make_unique<nn::Conv2d<T>>(n, in, channels[i], 3, 3, rng, ad::Conv2dOptions{1, 1, 1, 1}));
    else
      convs_.push_back(std::make_unique<nn::Conv2d<T>>(n, in, channels[i], 3, 9, rng,
                                                       ad::Conv2dOptions{1, first ? 1u : 2u, 1, 4}));
    in = channels[i];
  }
  post_ = std::make_unique<nn::Conv2d<T>>(name_ + ".conv_post", in, 1, 3, 3, rng, ad::Conv2dOptions{1, 1, 1, 1});
}

template <typename T>
ad::Tensor<T> MrdSub<T>::spectrogram(const ad::Tensor<T>& x) const {
  const ad::Tensor<T> mag = ad::magnitude(ad::stft(x, stft_));
  return ad::reshape(mag, {mag.dim(0), 1, mag.dim(1), mag.dim(2)});
}

template <typename T>
SubOutput<T> MrdSub<T>::operator()(const ad::Tensor<T>& x) const {
  SubOutput<T> out;
  ad::Tensor<T> h = spectrogram(x);
  for (const auto& conv : convs_) {
    h = ad::leaky_relu((*conv)(h), slope_);
    out.features.push_back(h);
  }
  out.score = (*post_)(h);
  out.features.push_back(out.score);
  return out;
}

template <typename T>
void MrdSub<T>::collect(ad::ParameterList<T>& out) {
  for (auto& conv : convs_) conv->collect(out);
  post_->collect(out);
}

template <typename T>
DiscriminatorEnsemble<T>::DiscriminatorEnsemble(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  nn::Rng rng(seed);
  for (auto p : cfg.periods) subs_.push_back(std::make_unique<MpdSub<T>>(p, cfg.mpd_channels, cfg.slope, rng));
  for (const auto& r : cfg.resolutions)
    subs_.push_back(std::make_unique<MrdSub<T>>(r, cfg.mrd_channels, cfg.slope, rng));
}

template <typename T>
std::vector<SubOutput<T>> DiscriminatorEnsemble<T>::operator()(const ad::Tensor<T>& x) const {
  if (x.rank() != 2) throw std::invalid_argument("discriminate: expected [B, N], got " + ad::to_string(x.shape()));
  if (x.dim(1) < cfg_.min_length())
    throw std::invalid_argument("discriminate: waveform of " + std::to_string(x.dim(1)) +
                                " samples is shorter than the minimum of " + std::to_string(cfg_.min_length()));
  std::vector<SubOutput<T>> out;
  out.reserve(subs_.size());
  for (const auto& sub : subs_) out.push_back((*sub)(x));
  return out;
}

template <typename T>
ad::ParameterList<T> DiscriminatorEnsemble<T>::parameters() {
  ad::ParameterList<T> out;
  for (auto& sub : subs_) sub->collect(out);
  return out;
}

template class MpdSub<float>;
template class MpdSub<double>;
template class MrdSub<float>;
template class MrdSub<double>;
template class DiscriminatorEnsemble<float>;
template class DiscriminatorEnsemble<double>;

}  // namespace apnet2::model
