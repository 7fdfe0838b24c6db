#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "apnet2/dsp/stft.hpp"
#include "apnet2/nn/layers.hpp"

namespace apnet2::model {

struct MrdResolution {
  std::size_t n_fft;
  std::size_t hop;
  std::size_t win;
  bool operator==(const MrdResolution&) const = default;
};

struct DiscriminatorConfig {
  std::vector<std::size_t> periods{2, 3, 5, 7, 11};
  std::vector<std::size_t> mpd_channels{32, 128, 512, 1024, 1024};
  std::vector<MrdResolution> resolutions{{512, 128, 512}, {1024, 256, 1024}, {2048, 512, 2048}};
  std::vector<std::size_t> mrd_channels{32, 64, 128, 256, 512};
  double slope = 0.1;

  static DiscriminatorConfig full() { return {}; }
  // Narrower stacks with the same layer structure.
  static DiscriminatorConfig desk() {
    DiscriminatorConfig c;
    c.mpd_channels = {8, 16, 32, 64, 64};
    c.mrd_channels = {4, 8, 8, 8, 16};
    return c;
  }
  // Shortest accepted waveform: the largest MRD window.
  std::size_t min_length() const;
  void validate() const;
  bool operator==(const DiscriminatorConfig&) const = default;
};

template <typename T>
struct SubOutput {
  ad::Tensor<T> score;                 // final conv output
  std::vector<ad::Tensor<T>> features;  // every conv activation in layer order, score last
};

template <typename T>
class SubDiscriminator {
 public:
  virtual ~SubDiscriminator() = default;
  // x: [B, N]
  virtual SubOutput<T> operator()(const ad::Tensor<T>& x) const = 0;
  virtual void collect(ad::ParameterList<T>& out) = 0;
  virtual const std::string& name() const = 0;
  virtual std::size_t conv_count() const = 0;
};

// Waveform folded to [B, 1, N/p, p] (zero-padded to a multiple of p).
template <typename T>
class MpdSub : public SubDiscriminator<T> {
 public:
  MpdSub(std::size_t period, const std::vector<std::size_t>& channels, double slope, nn::Rng& rng);
  SubOutput<T> operator()(const ad::Tensor<T>& x) const override;
  void collect(ad::ParameterList<T>& out) override;
  const std::string& name() const override { return name_; }
  std::size_t conv_count() const override { return convs_.size() + 1; }
  ad::Tensor<T> fold(const ad::Tensor<T>& x) const;

 private:
  std::size_t period_;
  std::string name_;
  T slope_;
  std::vector<std::unique_ptr<nn::Conv2d<T>>> convs_;
  std::unique_ptr<nn::Conv2d<T>> post_;
};

// Amplitude spectrogram at one resolution, as a [B, 1, frames, bins] image.
template <typename T>
class MrdSub : public SubDiscriminator<T> {
 public:
  MrdSub(const MrdResolution& res, const std::vector<std::size_t>& channels, double slope, nn::Rng& rng);
  SubOutput<T> operator()(const ad::Tensor<T>& x) const override;
  void collect(ad::ParameterList<T>& out) override;
  const std::string& name() const override { return name_; }
  std::size_t conv_count() const override { return convs_.size() + 1; }
  ad::Tensor<T> spectrogram(const ad::Tensor<T>& x) const;

 private:
  dsp::StftConfig stft_;
  std::string name_;
  T slope_;
  std::vector<std::unique_ptr<nn::Conv2d<T>>> convs_;
  std::unique_ptr<nn::Conv2d<T>> post_;
};

// MPD sub-discriminators followed by MRD sub-discriminators.
template <typename T>
class DiscriminatorEnsemble {
 public:
  DiscriminatorEnsemble(const DiscriminatorConfig& cfg, std::uint64_t seed);

  // x: [B, N] with N >= min_length().
  std::vector<SubOutput<T>> operator()(const ad::Tensor<T>& x) const;

  std::size_t size() const { return subs_.size(); }
  const SubDiscriminator<T>& sub(std::size_t i) const { return *subs_.at(i); }
  const DiscriminatorConfig& config() const { return cfg_; }
  ad::ParameterList<T> parameters();

 private:
  DiscriminatorConfig cfg_;
  std::vector<std::unique_ptr<SubDiscriminator<T>>> subs_;
};

}  // namespace apnet2::model
