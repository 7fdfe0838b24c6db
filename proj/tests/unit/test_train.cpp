#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

#include "apnet2/train/trainer.hpp"
#include "doctest.h"

using namespace apnet2;
using namespace apnet2::train;

namespace {

ad::Parameter<double> scalar_param(double theta, double grad) {
  ad::Parameter<double> p("theta", {1}, {theta});
  p.tensor.mutable_grad()[0] = grad;
  return p;
}

io::RunConfig small_config(std::uint64_t seed = 7) {
  auto cfg = io::RunConfig::for_preset("desk");
  cfg.train.batch_size = 1;
  cfg.train.crop_samples = 2048;
  cfg.train.seed = seed;
  return cfg;
}

std::vector<dsp::Waveform<float>> tone_clips(std::size_t count, std::size_t length = 4096) {
  std::vector<dsp::Waveform<float>> clips(count);
  for (std::size_t c = 0; c < count; ++c) {
    clips[c].samples.resize(length);
    for (std::size_t i = 0; i < length; ++i)
      clips[c].samples[i] = static_cast<float>(0.5 * std::sin(2 * std::numbers::pi * (150.0 + 70.0 * c) * i / 22050.0));
  }
  return clips;
}

std::vector<float> flat_values(const ad::ParameterList<float>& params) {
  std::vector<float> out;
  for (const auto* p : params) {
    const auto v = p->tensor.values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("apnet2_test_" + name)).string();
}

std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("adamw first step from closed form") {
  auto p = scalar_param(1.0, 1.0);
  AdamWState<double> state;
  adamw_update<double>({&p}, state, 0.1, {0.8, 0.99, 1e-8, 0.0});
  CHECK(p.tensor.values()[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(state.step == 1);
  CHECK(state.m[0][0] == doctest::Approx(0.2));
  CHECK(state.v[0][0] == doctest::Approx(0.01));
}

TEST_CASE("adamw decoupled weight decay") {
  auto p = scalar_param(1.0, 0.0);
  AdamWState<double> state;
  adamw_update<double>({&p}, state, 0.1, {0.8, 0.99, 1e-8, 0.01});
  CHECK(p.tensor.values()[0] == doctest::Approx(0.999).epsilon(1e-15));
}

TEST_CASE("adamw zero gradient without decay is a no-op") {
  ad::Parameter<double> p("w", {3}, {0.5, -2.0, 3.25});
  AdamWState<double> state;
  for (int i = 0; i < 5; ++i) adamw_update<double>({&p}, state, 0.1, {0.8, 0.99, 1e-8, 0.0});
  CHECK(p.tensor.values()[0] == 0.5);
  CHECK(p.tensor.values()[1] == -2.0);
  CHECK(p.tensor.values()[2] == 3.25);
}

TEST_CASE("adamw rejects mismatched state") {
  auto p = scalar_param(1.0, 1.0);
  AdamWState<double> state;
  state.m = {{0.0, 0.0}};
  state.v = {{0.0, 0.0}};
  CHECK_THROWS_AS(adamw_update<double>({&p}, state, 0.1, {}), std::invalid_argument);
  AdamWState<double> two;
  two.m = {{0.0}, {0.0}};
  two.v = {{0.0}, {0.0}};
  CHECK_THROWS_AS(adamw_update<double>({&p}, two, 0.1, {}), std::invalid_argument);
}

TEST_CASE("lr schedule") {
  CHECK(lr_schedule(0) == 2e-4);
  CHECK(lr_schedule(1) == doctest::Approx(1.998e-4).epsilon(1e-14));
  CHECK(lr_schedule(1000) == doctest::Approx(7.357e-5).epsilon(1e-3));
  CHECK(lr_schedule(1000) == doctest::Approx(2e-4 * std::pow(0.999, 1000)).epsilon(1e-14));
}

TEST_CASE("sampler visits every clip once per epoch") {
  CropSampler s(5, 11);
  for (std::size_t epoch = 0; epoch < 3; ++epoch) {
    CHECK(s.epoch() == epoch);
    std::set<std::size_t> seen;
    for (int i = 0; i < 5; ++i) seen.insert(s.next_clip());
    CHECK(seen.size() == 5);
  }
  CHECK(s.epoch() == 3);
}

TEST_CASE("crop starts are hop aligned and in range") {
  CropSampler s(1, 3);
  std::set<std::size_t> starts;
  for (int i = 0; i < 200; ++i) {
    const auto start = s.crop_start(22050, 8192, 256);
    CHECK(start % 256 == 0);
    CHECK(start + 8192 <= 22050);
    starts.insert(start);
  }
  CHECK(starts.size() > 20);
  CHECK(s.crop_start(8000, 8192, 256) == 0);
  CHECK(s.crop_start(8192, 8192, 256) == 0);
}

TEST_CASE("sampler state roundtrip") {
  CropSampler a(4, 5);
  for (int i = 0; i < 6; ++i) a.next_clip();
  CropSampler b(4, 999);
  b.load(a.save());
  for (int i = 0; i < 10; ++i) {
    CHECK(a.next_clip() == b.next_clip());
    CHECK(a.crop_start(10000, 2048, 256) == b.crop_start(10000, 2048, 256));
  }
  CHECK(a.epoch() == b.epoch());
  CropSampler c(3, 5);
  CHECK_THROWS(c.load(a.save()));
}

TEST_CASE("batches are aligned crops with matching mel") {
  auto cfg = small_config();
  cfg.train.batch_size = 3;
  Trainer t(cfg, tone_clips(2));
  const auto batch = t.next_batch();
  CHECK(batch.audio.shape() == ad::Shape{3, 2048});
  CHECK(batch.mel.shape() == ad::Shape{3, 8, 80});
  CHECK_FALSE(batch.mel.requires_grad());
  const auto mel = dsp::mel_spectrogram(
      dsp::Waveform<float>{std::vector<float>(batch.audio.values().begin(), batch.audio.values().begin() + 2048), 22050},
      dsp::MelFilterbank<float>::build(cfg.mel, cfg.stft()), cfg.stft()).values;
  for (std::size_t f = 0; f < 8; ++f)
    for (std::size_t m = 0; m < 80; ++m) CHECK(batch.mel.values()[f * 80 + m] == doctest::Approx(mel(f, m)).epsilon(1e-4));
}

TEST_CASE("trainer rejects clips at the wrong rate") {
  auto clips = tone_clips(1);
  clips[0].sample_rate = 16000;
  CHECK_THROWS_AS(Trainer(small_config(), clips), std::invalid_argument);
  CHECK_THROWS_AS(Trainer(small_config(), {}), std::invalid_argument);
}

TEST_CASE("discriminator step leaves the generator bit-identical") {
  Trainer t(small_config(), tone_clips(1));
  const auto batch = t.next_batch();
  const auto gen_before = flat_values(t.generator().parameters());
  const auto disc_before = flat_values(t.discriminator().parameters());
  ad::Tensor<float> fake;
  {
    ad::Tape<float> tape;
    ad::TapeScope<float> scope(tape);
    fake = t.generator().forward(batch.mel).audio;
  }
  CHECK_THROWS_AS(t.discriminator_step(batch, fake, 2e-4), std::logic_error);
  const double L_D = t.discriminator_step(batch, fake.detach(), 2e-4);
  CHECK(std::isfinite(L_D));
  CHECK(flat_values(t.generator().parameters()) == gen_before);
  CHECK(flat_values(t.discriminator().parameters()) != disc_before);
  for (const auto* p : t.generator().parameters())
    for (float g : p->tensor.grad()) REQUIRE(g == 0.0f);
}

TEST_CASE("train step updates both networks and reports finite terms") {
  Trainer t(small_config(), tone_clips(1));
  const auto gen_before = flat_values(t.generator().parameters());
  const auto disc_before = flat_values(t.discriminator().parameters());
  const auto r = t.train_step();
  CHECK(t.step() == 1);
  CHECK(r.first_non_finite().empty());
  CHECK(r.L_G == doctest::Approx(r.weighted_total(t.config().weights)));
  CHECK(r.L_W == doctest::Approx(45 * r.mel + r.feature_match + r.adversarial).epsilon(1e-5));
  CHECK(r.mel > 0);
  CHECK(r.L_D > 0);
  CHECK(flat_values(t.generator().parameters()) != gen_before);
  CHECK(flat_values(t.discriminator().parameters()) != disc_before);
  for (const auto* p : t.discriminator().parameters()) CHECK(p->tensor.requires_grad());
}

TEST_CASE("training is deterministic given a seed") {
  Trainer a(small_config(3), tone_clips(2));
  Trainer b(small_config(3), tone_clips(2));
  for (int i = 0; i < 3; ++i) CHECK(a.train_step() == b.train_step());
  Trainer c(small_config(4), tone_clips(2));
  Trainer d(small_config(3), tone_clips(2));
  CHECK_FALSE(c.train_step() == d.train_step());
}

TEST_CASE("lr follows the schedule at epoch boundaries") {
  auto cfg = small_config();
  cfg.train.lr_decay = 0.5;
  Trainer t(cfg, tone_clips(2));
  CHECK(t.current_lr() == 2e-4);
  t.train_step();
  CHECK(t.epoch() == 0);
  CHECK(t.current_lr() == 2e-4);
  t.train_step();
  CHECK(t.epoch() == 1);
  CHECK(t.current_lr() == 1e-4);
  t.train_step();
  t.train_step();
  CHECK(t.current_lr() == 5e-5);
}

TEST_CASE("non-finite loss aborts naming the term") {
  Trainer t(small_config(), tone_clips(1));
  t.generator().asp_out().bias()->tensor.mutable_values()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    t.train_step();
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.term() == "L_D");
    CHECK(std::string(e.what()).find("L_D") != std::string::npos);
  }
  CHECK(t.step() == 0);
}

TEST_CASE("run writes one log line per step") {
  auto cfg = small_config();
  cfg.train.max_steps = 2;
  Trainer t(cfg, tone_clips(1));
  std::ostringstream log;
  const auto path = temp_path("run.ckpt");
  t.run(log, path);
  std::istringstream lines(log.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    // one clip: every step closes an epoch
    char prefix[64];
    std::snprintf(prefix, sizeof prefix, "step=%d lr=%.6e L_G=", count + 1, lr_schedule(count));
    ++count;
    CHECK(line.rfind(prefix, 0) == 0);
    CHECK(line.find(" L_D=") != std::string::npos);
  }
  CHECK(count == 2);
  CHECK(load_checkpoint(path).step == 2);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint roundtrip is bit exact and resumes identically") {
  Trainer a(small_config(), tone_clips(2));
  a.train_step();
  a.train_step();
  const auto path = temp_path("roundtrip.ckpt");
  const auto saved = a.checkpoint();
  save_checkpoint(path, saved);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded == saved);

  Trainer b(small_config(), tone_clips(2));
  b.restore(loaded);
  CHECK(b.step() == 2);
  CHECK(b.epoch() == a.epoch());
  const auto batch = a.next_batch();
  CHECK(b.next_batch().audio.values().size() == batch.audio.values().size());
  const auto ya = a.generator().forward(batch.mel).audio;
  const auto yb = b.generator().forward(batch.mel).audio;
  CHECK(std::vector<float>(ya.values().begin(), ya.values().end()) ==
        std::vector<float>(yb.values().begin(), yb.values().end()));
  CHECK(a.train_step() == b.train_step());

  const auto gen = load_generator(loaded);
  Trainer fresh(small_config(), tone_clips(2));
  fresh.restore(loaded);
  const auto yg = gen->forward(batch.mel).audio;
  const auto yf = fresh.generator().forward(batch.mel).audio;
  CHECK(std::vector<float>(yg.values().begin(), yg.values().end()) ==
        std::vector<float>(yf.values().begin(), yf.values().end()));
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint corruption is detected") {
  Trainer t(small_config(), tone_clips(1));
  const auto path = temp_path("corrupt.ckpt");
  save_checkpoint(path, t.checkpoint());
  const auto good = read_bytes(path);
  auto expect_kind = [&](const std::vector<char>& bytes, CheckpointError::Kind kind) {
    write_bytes(path, bytes);
    try {
      load_checkpoint(path);
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(static_cast<int>(e.kind()) == static_cast<int>(kind));
    }
  };

  auto truncated = good;
  truncated.resize(good.size() / 2);
  expect_kind(truncated, CheckpointError::Kind::kChecksum);
  truncated.resize(10);
  expect_kind(truncated, CheckpointError::Kind::kChecksum);

  auto flipped = good;
  flipped[good.size() / 2] ^= 0x10;
  expect_kind(flipped, CheckpointError::Kind::kChecksum);

  auto version = good;
  version[8] = 9;
  expect_kind(version, CheckpointError::Kind::kVersion);

  auto magic = good;
  magic[0] = 'X';
  expect_kind(magic, CheckpointError::Kind::kMagic);

  CHECK_THROWS_AS(load_checkpoint(temp_path("missing.ckpt")), CheckpointError);
  std::filesystem::remove(path);
}

TEST_CASE("restore rejects a different model") {
  Trainer t(small_config(), tone_clips(1));
  auto ckpt = t.checkpoint();
  auto other = io::RunConfig::for_preset("desk");
  other.generator.blocks = 3;
  ckpt.config = other;
  CHECK_THROWS(t.restore(ckpt));
  auto missing = t.checkpoint();
  missing.generator.pop_back();
  CHECK_THROWS(t.restore(missing));
  auto reshaped = t.checkpoint();
  reshaped.generator[0].shape[0] += 1;
  CHECK_THROWS(t.restore(reshaped));
}
