#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "apnet2/dsp/stft.hpp"
#include "apnet2/io/config.hpp"
#include "apnet2/loss/losses.hpp"
#include "apnet2/model/discriminator.hpp"
#include "apnet2/model/generator.hpp"
#include "apnet2/train/checkpoint.hpp"
#include "apnet2/train/optim.hpp"

namespace apnet2::train {

// A loss term became NaN or infinite; term() names the first such term.
class NumericError : public std::runtime_error {
 public:
  // step < 0: outside training
  explicit NumericError(std::string term, long step = -1)
      : std::runtime_error("non-finite value in " + term + (step >= 0 ? " at step " + std::to_string(step) : "")),
        term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

struct Batch {
  ad::Tensor<float> audio;  // [B, crop]
  ad::Tensor<float> mel;    // [B, crop / hop, n_mels]
};

// Epoch-ordered clip sampler with hop-aligned random crops.
// Epoch = one pass over the clips in a seeded permutation.
class CropSampler {
 public:
  CropSampler(std::size_t clip_count, std::uint64_t seed);
  // Next clip index; advances the epoch when the permutation is exhausted.
  std::size_t next_clip();
  // Hop-aligned start for a crop of `crop` samples from a clip of `length`.
  std::size_t crop_start(std::size_t length, std::size_t crop, std::size_t hop);
  std::size_t epoch() const { return epoch_; }

  std::string save() const;
  void load(const std::string& state);

 private:
  void reshuffle();

  std::size_t count_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::size_t epoch_ = 0;
};

class Trainer {
 public:
  // All clips must match the configured sample rate.
  Trainer(const io::RunConfig& cfg, std::vector<dsp::Waveform<float>> clips);

  Batch next_batch();
  // L_D on real audio and a detached generated waveform; steps the
  // discriminator optimizer only. The generator is untouched.
  double discriminator_step(const Batch& batch, const ad::Tensor<float>& fake_audio, double lr);
  // Discriminator update then generator update, at the current schedule lr.
  loss::LossReport train_step();
  loss::LossReport train_step(const Batch& batch);

  // Runs until max_steps, writing one log line per log_every steps and a
  // checkpoint (ckpt_path) every checkpoint_every steps and at the end.
  void run(std::ostream& log, const std::string& ckpt_path = "");

  double current_lr() const;
  std::size_t step() const { return step_; }
  std::size_t epoch() const { return sampler_.epoch(); }
  const io::RunConfig& config() const { return cfg_; }
  model::Apnet2Generator<float>& generator() { return *gen_; }
  model::DiscriminatorEnsemble<float>& discriminator() { return *disc_; }
  const loss::MelAnalyzer<float>& mel_analyzer() const { return mel_; }

  Checkpoint checkpoint() const;
  // Restores parameters, optimizer moments, counters and data order. The
  // checkpoint's model configuration must equal this trainer's.
  void restore(const Checkpoint& ckpt);

 private:
  io::RunConfig cfg_;
  std::vector<dsp::Waveform<float>> clips_;
  std::unique_ptr<model::Apnet2Generator<float>> gen_;
  std::unique_ptr<model::DiscriminatorEnsemble<float>> disc_;
  std::unique_ptr<AdamW<float>> opt_g_, opt_d_;
  loss::MelAnalyzer<float> mel_;
  CropSampler sampler_;
  std::size_t step_ = 0;
};

// Generator rebuilt from a checkpoint's config and parameters.
std::unique_ptr<model::Apnet2Generator<float>> load_generator(const Checkpoint& ckpt);

}  // namespace apnet2::train
