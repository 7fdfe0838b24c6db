#include <chrono>
#include <cmath>

#include "apnet2/model/discriminator.hpp"
#include "apnet2/model/generator.hpp"
#include "doctest.h"

using namespace apnet2;
using namespace apnet2::model;

namespace {

template <typename T>
ad::Tensor<T> noise(std::size_t batch, std::size_t n, std::uint64_t seed, double amp = 0.5) {
  nn::Rng rng(seed);
  std::vector<T> v(batch * n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-amp, amp));
  return ad::Tensor<T>({batch, n}, std::move(v));
}

}  // namespace

TEST_CASE("ensemble structure on an 8192-sample input") {
  DiscriminatorEnsemble<float> d(DiscriminatorConfig::desk(), 1);
  const auto out = d(noise<float>(2, 8192, 1));
  REQUIRE(out.size() == 8);
  CHECK(d.size() == 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].features.size() == d.sub(i).conv_count());
    CHECK(out[i].features.size() == 6);
    CHECK(out[i].score.dim(0) == 2);
    for (float v : out[i].score.values()) REQUIRE(std::isfinite(v));
  }
  CHECK(d.sub(0).name() == "mpd.2");
  CHECK(d.sub(5).name() == "mrd.512");
  // period fold: 8192 / 3 rounds up to 2731 rows, 3 columns
  CHECK(out[1].features[0].dim(3) == 3);
}

TEST_CASE("ensemble is deterministic and seed-reproducible") {
  DiscriminatorEnsemble<float> a(DiscriminatorConfig::desk(), 5);
  DiscriminatorEnsemble<float> b(DiscriminatorConfig::desk(), 5);
  const auto x = noise<float>(1, 4096, 2);
  const auto r1 = a(x), r2 = a(x), r3 = b(x);
  for (std::size_t i = 0; i < r1.size(); ++i)
    for (std::size_t k = 0; k < r1[i].score.numel(); ++k) {
      REQUIRE(r1[i].score.values()[k] == r2[i].score.values()[k]);
      REQUIRE(r1[i].score.values()[k] == r3[i].score.values()[k]);
    }
}

TEST_CASE("too-short input names the minimum length") {
  DiscriminatorEnsemble<float> d(DiscriminatorConfig::desk(), 1);
  try {
    d(noise<float>(1, 2047, 1));
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("2048") != std::string::npos);
  }
  CHECK_NOTHROW(d(noise<float>(1, 2048, 1)));
}

TEST_CASE("period fold pads with zeros") {
  nn::Rng rng(1);
  MpdSub<double> sub(5, {2, 2}, 0.1, rng);
  ad::Tensor<double> x({1, 7}, {1, 2, 3, 4, 5, 6, 7});
  const auto f = sub.fold(x);
  CHECK(f.shape() == ad::Shape{1, 1, 2, 5});
  CHECK(f.values()[6] == 7.0);
  CHECK(f.values()[7] == 0.0);
  CHECK(f.values()[9] == 0.0);
}

TEST_CASE("MRD input discards sign") {
  nn::Rng rng(2);
  MrdSub<double> sub({1024, 256, 1024}, {2, 2}, 0.1, rng);
  const auto x = noise<double>(1, 4096, 3);
  const auto a = sub.spectrogram(x);
  const auto b = sub.spectrogram(ad::neg(x));
  CHECK(a.shape() == ad::Shape{1, 1, 16, 513});
  for (std::size_t i = 0; i < a.numel(); ++i) REQUIRE(a.values()[i] == b.values()[i]);
}

TEST_CASE("generator receives gradient through both MPD and MRD paths") {
  Apnet2Generator<float> g(GeneratorConfig::desk(), 1);
  DiscriminatorEnsemble<float> d(DiscriminatorConfig::desk(), 2);
  nn::Rng rng(4);
  std::vector<float> mel(1 * 16 * 80);
  for (auto& v : mel) v = static_cast<float>(rng.uniform(-8, 0));
  const ad::Tensor<float> m({1, 16, 80}, mel);

  for (bool mpd : {true, false}) {
    for (auto* p : g.parameters()) p->zero_grad();
    ad::Tape<float> tape;
    ad::Tensor<float> loss;
    {
      ad::TapeScope<float> scope(tape);
      const auto out = d(g.forward(m).audio);
      std::vector<ad::Tensor<float>> parts;
      for (std::size_t i = 0; i < out.size(); ++i)
        if ((i < 5) == mpd) parts.push_back(ad::mean(out[i].score));
      loss = parts[0];
      for (std::size_t i = 1; i < parts.size(); ++i) loss = ad::add(loss, parts[i]);
    }
    ad::backward(tape, loss);
    double total = 0;
    for (auto* p : g.parameters())
      for (float v : p->tensor.grad()) total += std::abs(v);
    CHECK(total > 0.0);
    CHECK(std::isfinite(total));
  }
}

TEST_CASE("desk discriminator timing on one crop") {
  DiscriminatorEnsemble<float> d(DiscriminatorConfig::desk(), 1);
  const auto x = noise<float>(1, 8192, 9);
  ad::Tensor<float> xs = x;
  xs.set_requires_grad(true);
  const auto t0 = std::chrono::steady_clock::now();
  ad::Tape<float> tape;
  ad::Tensor<float> loss;
  {
    ad::TapeScope<float> scope(tape);
    const auto out = d(xs);
    loss = ad::mean(out[0].score);
    for (std::size_t i = 1; i < out.size(); ++i) loss = ad::add(loss, ad::mean(out[i].score));
  }
  ad::backward(tape, loss);
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("desk discriminator forward+backward on 8192 samples: " << sec << " s");
  CHECK(sec < 5.0);
}
