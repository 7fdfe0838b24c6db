#include "apnet2/train/trainer.hpp"

#include <cmath>
#include <sstream>

#include "apnet2/train/objective.hpp"

namespace apnet2::train {

using ad::Tensor;

CropSampler::CropSampler(std::size_t clip_count, std::uint64_t seed) : count_(clip_count), rng_(seed) {
  if (clip_count == 0) throw std::invalid_argument("sampler: no training clips");
  reshuffle();
}

void CropSampler::reshuffle() {
  order_.resize(count_);
  for (std::size_t i = 0; i < count_; ++i) order_[i] = i;
  // Fisher-Yates on the raw engine: reproducible across standard libraries.
  for (std::size_t i = count_; i > 1; --i) std::swap(order_[i - 1], order_[rng_() % i]);
  pos_ = 0;
}

std::size_t CropSampler::next_clip() {
  const std::size_t clip = order_[pos_++];
  if (pos_ == count_) {
    ++epoch_;
    reshuffle();
  }
  return clip;
}

std::size_t CropSampler::crop_start(std::size_t length, std::size_t crop, std::size_t hop) {
  if (length <= crop) return 0;
  const std::size_t slots = (length - crop) / hop + 1;
  return hop * static_cast<std::size_t>(rng_() % slots);
}

std::string CropSampler::save() const {
  std::ostringstream out;
  out << count_ << ' ' << pos_ << ' ' << epoch_ << ' ';
  for (auto i : order_) out << i << ' ';
  out << rng_;
  return out.str();
}

void CropSampler::load(const std::string& state) {
  std::istringstream in(state);
  std::size_t count = 0;
  in >> count >> pos_ >> epoch_;
  if (!in || count != count_) throw std::runtime_error("sampler: state is for " + std::to_string(count) + " clips");
  order_.resize(count_);
  for (auto& i : order_) in >> i;
  in >> rng_;
  if (!in || pos_ >= count_) throw std::runtime_error("sampler: malformed state");
}

namespace {

// Freezes a parameter list for the lifetime of the guard.
class FreezeGuard {
 public:
  explicit FreezeGuard(ad::ParameterList<float> params) : params_(std::move(params)) {
    for (auto* p : params_) p->set_frozen(true);
  }
  ~FreezeGuard() {
    for (auto* p : params_) p->set_frozen(false);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ad::ParameterList<float> params_;
};

AdamWConfig adamw_config(const io::TrainConfig& t) { return {t.beta1, t.beta2, 1e-8, t.weight_decay}; }

}  // namespace

Trainer::Trainer(const io::RunConfig& cfg, std::vector<dsp::Waveform<float>> clips)
    : cfg_(cfg), clips_(std::move(clips)), mel_(cfg.mel, cfg.stft()), sampler_(clips_.size(), cfg.train.seed + 2) {
  cfg_.validate();
  for (std::size_t i = 0; i < clips_.size(); ++i) {
    clips_[i].validate();
    if (clips_[i].sample_rate != cfg_.sample_rate)
      throw std::invalid_argument("trainer: clip " + std::to_string(i) + " has sample rate " +
                                  std::to_string(clips_[i].sample_rate) + ", config expects " +
                                  std::to_string(cfg_.sample_rate));
  }
  gen_ = std::make_unique<model::Apnet2Generator<float>>(cfg_.generator, cfg_.train.seed);
  disc_ = std::make_unique<model::DiscriminatorEnsemble<float>>(cfg_.discriminator, cfg_.train.seed + 1);
  opt_g_ = std::make_unique<AdamW<float>>(gen_->parameters(), adamw_config(cfg_.train));
  opt_d_ = std::make_unique<AdamW<float>>(disc_->parameters(), adamw_config(cfg_.train));
}

double Trainer::current_lr() const { return lr_schedule(sampler_.epoch(), cfg_.train.lr, cfg_.train.lr_decay); }

Batch Trainer::next_batch() {
  const std::size_t B = cfg_.train.batch_size;
  const std::size_t crop = cfg_.train.crop_samples;
  const std::size_t hop = cfg_.stft().hop;
  std::vector<float> audio(B * crop, 0.0f);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& clip = clips_[sampler_.next_clip()].samples;
    const std::size_t start = sampler_.crop_start(clip.size(), crop, hop);
    const std::size_t n = std::min(crop, clip.size() - start);  // short clips are zero-padded
    std::copy_n(clip.begin() + static_cast<std::ptrdiff_t>(start), n, audio.begin() + static_cast<std::ptrdiff_t>(b * crop));
  }
  Batch batch;
  batch.audio = Tensor<float>({B, crop}, std::move(audio));
  ad::NoGradScope<float> no_grad;
  batch.mel = mel_(batch.audio);
  return batch;
}

double Trainer::discriminator_step(const Batch& batch, const Tensor<float>& fake_audio, double lr) {
  if (fake_audio.requires_grad()) throw std::logic_error("discriminator_step: generated audio must be detached");
  opt_d_->zero_grad();
  ad::Tape<float> tape;
  Tensor<float> L_D;
  {
    ad::TapeScope<float> scope(tape);
    const auto real = (*disc_)(batch.audio);
    const auto fake = (*disc_)(fake_audio);
    L_D = loss::gan_loss_discriminator(loss::scores_of(real), loss::scores_of(fake), cfg_.gan);
  }
  const double value = L_D.item();
  if (!std::isfinite(value)) throw NumericError("L_D", static_cast<long>(step_ + 1));
  ad::backward(tape, L_D);
  opt_d_->step(lr);
  return value;
}

loss::LossReport Trainer::train_step() { return train_step(next_batch()); }

loss::LossReport Trainer::train_step(const Batch& batch) {
  const double lr = current_lr();
  opt_g_->zero_grad();

  ad::Tape<float> tape;
  model::GeneratorOutput<float> out;
  {
    ad::TapeScope<float> scope(tape);
    out = gen_->forward(batch.mel);
  }

  loss::LossReport report;
  report.L_D = discriminator_step(batch, out.audio.detach(), lr);

  const auto targets =
      make_targets(batch.audio, batch.mel, mel_, *disc_, static_cast<float>(cfg_.mel.amp_floor));
  Tensor<float> total;
  {
    FreezeGuard frozen(disc_->parameters());
    ad::TapeScope<float> scope(tape);
    const auto parts = generator_loss_parts(out, targets, mel_, *disc_, cfg_.weights, cfg_.gan);
    total = loss::generator_total(parts, cfg_.weights, &report);
  }
  if (const auto bad = report.first_non_finite(); !bad.empty()) throw NumericError(bad, static_cast<long>(step_ + 1));

  ad::backward(tape, total);
  opt_g_->step(lr);
  ++step_;
  return report;
}

void Trainer::run(std::ostream& log, const std::string& ckpt_path) {
  const auto& t = cfg_.train;
  while (step_ < t.max_steps) {
    const double lr = current_lr();
    const auto report = train_step();
    if (t.log_every > 0 && step_ % t.log_every == 0) log << report.log_line(static_cast<long>(step_), lr) << '\n';
    if (!ckpt_path.empty() && t.checkpoint_every > 0 && step_ % t.checkpoint_every == 0)
      save_checkpoint(ckpt_path, checkpoint());
  }
  log.flush();
  if (!ckpt_path.empty()) save_checkpoint(ckpt_path, checkpoint());
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = cfg_;
  c.step = step_;
  c.epoch = sampler_.epoch();
  c.sampler_state = sampler_.save();
  c.generator = snapshot(opt_g_->parameters());
  c.discriminator = snapshot(opt_d_->parameters());
  c.opt_g = snapshot(opt_g_->state());
  c.opt_d = snapshot(opt_d_->state());
  return c;
}

void Trainer::restore(const Checkpoint& c) {
  if (!(c.config.generator == cfg_.generator) || !(c.config.discriminator == cfg_.discriminator))
    throw std::runtime_error("trainer: checkpoint model configuration differs from the run configuration");
  train::restore(opt_g_->parameters(), c.generator);
  train::restore(opt_d_->parameters(), c.discriminator);
  opt_g_->state() = train::restore(c.opt_g);
  opt_d_->state() = train::restore(c.opt_d);
  sampler_.load(c.sampler_state);
  if (sampler_.epoch() != c.epoch) throw std::runtime_error("trainer: checkpoint epoch disagrees with sampler state");
  step_ = c.step;
}

std::unique_ptr<model::Apnet2Generator<float>> load_generator(const Checkpoint& c) {
  auto gen = std::make_unique<model::Apnet2Generator<float>>(c.config.generator, c.config.train.seed);
  restore(gen->parameters(), c.generator);
  return gen;
}

}  // namespace apnet2::train
