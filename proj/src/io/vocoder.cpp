#include "apnet2/io/vocoder.hpp"

#include <chrono>
#include <stdexcept>

namespace apnet2::io {

Vocoder::Vocoder(const RunConfig& cfg, std::unique_ptr<model::Apnet2Generator<float>> gen)
    : cfg_(cfg), gen_(std::move(gen)), mel_(cfg.mel, cfg.stft()) {
  if (!gen_) throw std::invalid_argument("vocoder: no generator");
  if (!(gen_->config() == cfg_.generator))
    throw std::invalid_argument("vocoder: generator configuration differs from the run configuration");
}

ad::Tensor<float> Vocoder::mel_of(const dsp::Waveform<double>& w) const {
  if (w.sample_rate != cfg_.sample_rate)
    throw std::invalid_argument("vocoder: sample rate " + std::to_string(w.sample_rate) + ", expected " +
                                std::to_string(cfg_.sample_rate));
  if (w.samples.empty()) throw std::invalid_argument("vocoder: empty waveform");
  ad::NoGradScope<float> no_grad;
  const ad::Tensor<float> audio({1, w.samples.size()}, std::vector<float>(w.samples.begin(), w.samples.end()));
  return mel_(audio);
}

dsp::Waveform<double> Vocoder::generate(const ad::Tensor<float>& mel) const {
  ad::NoGradScope<float> no_grad;
  const auto audio = gen_->forward(mel).audio;
  const auto v = audio.values();
  return {std::vector<double>(v.begin(), v.end()), cfg_.sample_rate};
}

dsp::Waveform<double> Vocoder::resynthesize(const dsp::Waveform<double>& w) const {
  auto out = generate(mel_of(w));
  out.samples.resize(w.samples.size());
  return out;
}

BenchResult bench(const Vocoder& vocoder, const std::vector<dsp::Waveform<double>>& clips) {
  if (clips.empty()) throw std::invalid_argument("bench: no clips");
  std::vector<ad::Tensor<float>> mels;
  mels.reserve(clips.size());
  for (const auto& c : clips) mels.push_back(vocoder.mel_of(c));
  vocoder.generate(mels.front());  // warm-up

  BenchResult r;
  r.clips = clips.size();
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    vocoder.generate(mels[i]);
    r.gen_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.audio_seconds += static_cast<double>(clips[i].samples.size()) / clips[i].sample_rate;
  }
  return r;
}

}  // namespace apnet2::io
