#include <cmath>
#include <numbers>

#include "apnet2/ad/grad_check.hpp"
#include "apnet2/loss/losses.hpp"
#include "apnet2/nn/init.hpp"
#include "doctest.h"

using namespace apnet2;
using namespace apnet2::loss;
using Td = ad::Tensor<double>;
constexpr double kPi = std::numbers::pi;

namespace {

Td uniform(ad::Shape shape, std::uint64_t seed, double lo = -1, double hi = 1) {
  nn::Rng rng(seed);
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Td(std::move(shape), std::move(v));
}

model::SubOutput<double> sub_with(std::vector<Td> feats) {
  model::SubOutput<double> s;
  s.score = feats.back();
  s.features = std::move(feats);
  return s;
}

}  // namespace

TEST_CASE("amplitude loss examples") {
  Td t = uniform({2, 3, 5}, 1);
  CHECK(amplitude_loss(t, t).item() == 0.0);
  CHECK(amplitude_loss(ad::add_scalar(t, 1.0), t).item() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(amplitude_loss(Td({1}, {2.0}), Td({1}, {0.0})).item() == 4.0);
  CHECK_THROWS_AS(amplitude_loss(t, uniform({2, 3, 4}, 1)), std::invalid_argument);
}

TEST_CASE("phase loss examples") {
  Td t = uniform({1, 4, 6}, 2, -kPi, kPi);
  CHECK(phase_loss(t, t).total.item() == 0.0);
  CHECK(phase_loss(ad::add_scalar(t, 2 * kPi), t).total.item() < 1e-12);

  const auto p = phase_loss(Td({1, 1, 2}, {kPi / 2, kPi / 2}), Td({1, 1, 2}, {0.0, 0.0}));
  CHECK(p.ip.item() == doctest::Approx(kPi / 2).epsilon(1e-15));
  CHECK(p.gd.item() == 0.0);
  CHECK(p.ptd.item() == 0.0);
  CHECK(p.total.item() == doctest::Approx(kPi / 2).epsilon(1e-15));
  CHECK_THROWS_AS(phase_loss(t, uniform({1, 4, 5}, 2)), std::invalid_argument);
}

TEST_CASE("phase loss is invariant to integer multiples of 2 pi") {
  Td a = uniform({2, 8, 17}, 3, -kPi, kPi);
  Td b = uniform({2, 8, 17}, 4, -kPi, kPi);
  const double base = phase_loss(a, b).total.item();
  CHECK(base > 0.1);
  nn::Rng rng(5);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<double> k(a.numel());
    for (auto& v : k) v = 2 * kPi * (static_cast<double>(rng.below(21)) - 10.0);
    const Td shift(a.shape(), k);
    CHECK(std::abs(phase_loss(ad::add(a, shift), b).total.item() - base) < 1e-9);
    CHECK(std::abs(phase_loss(a, ad::add(b, shift)).total.item() - base) < 1e-9);
  }
}

TEST_CASE("stft spectrum loss: fixed point, zero L1, idempotence") {
  dsp::StftConfig cfg;
  Td w = uniform({1, 4096}, 6, -0.5, 0.5);
  const auto s = ad::stft(w, cfg);
  const auto l = stft_spectrum_loss(s, s, cfg);
  CHECK(l.consistency.item() < 1e-10);
  CHECK(l.real_l1.item() == 0.0);
  CHECK(l.imag_l1.item() == 0.0);

  const ad::ComplexTensor<double> z{uniform({1, 16, 513}, 7), uniform({1, 16, 513}, 8)};
  const auto lz = stft_spectrum_loss(z, s, cfg);
  CHECK(lz.consistency.item() > 1e-3);
  const auto p1 = consistent_projection(z, cfg);
  const auto p2 = consistent_projection(p1, cfg);
  double worst = 0;
  for (std::size_t i = 0; i < p1.re.numel(); ++i) {
    worst = std::max(worst, std::abs(p1.re.values()[i] - p2.re.values()[i]));
    worst = std::max(worst, std::abs(p1.im.values()[i] - p2.im.values()[i]));
  }
  CHECK(worst < 1e-8);
  CHECK(stft_spectrum_loss(p1, s, cfg).consistency.item() < 1e-8);
}

TEST_CASE("mel loss: identity, direction, symmetry") {
  MelAnalyzer<double> mel(dsp::MelConfig{}, dsp::StftConfig{});
  Td silence = Td::zeros({1, 4096});
  std::vector<double> tone(4096);
  for (std::size_t i = 0; i < tone.size(); ++i) tone[i] = 0.5 * std::sin(2 * kPi * 440.0 * static_cast<double>(i) / 22050);
  Td t({1, 4096}, tone);
  Td n = uniform({1, 4096}, 9, -0.3, 0.3);
  CHECK(mel_loss(t, t, mel).item() == 0.0);
  CHECK(mel_loss(silence, t, mel).item() > 1.0);
  CHECK(mel_loss(t, n, mel).item() == mel_loss(n, t, mel).item());
  CHECK(mel(t).shape() == ad::Shape{1, 16, 80});
  CHECK_THROWS_AS(mel_loss(t, Td::zeros({1, 4000}), mel), std::invalid_argument);

  // matches the plain DSP log-mel
  const auto fb = dsp::MelFilterbank<double>::build({}, {});
  const auto ref = dsp::mel_spectrogram(dsp::Waveform<double>{tone, 22050}, fb, dsp::StftConfig{});
  const Td m = mel(t);
  for (std::size_t i = 0; i < m.numel(); ++i) CHECK(m.values()[i] == doctest::Approx(ref.values.data[i]).epsilon(1e-9));
}

TEST_CASE("feature matching examples") {
  std::vector<model::SubOutput<double>> a{sub_with({uniform({1, 2, 3}, 1), uniform({1, 1, 4}, 2)}),
                                          sub_with({uniform({1, 5}, 3)})};
  CHECK(feature_matching_loss(a, a).item() == 0.0);
  auto b = a;
  b[0].features[1] = ad::add_scalar(b[0].features[1], 0.75);
  CHECK(feature_matching_loss(a, b).item() == doctest::Approx(0.75).epsilon(1e-14));
  CHECK_THROWS_AS(feature_matching_loss<double>({}, {}), std::invalid_argument);
  b.pop_back();
  CHECK_THROWS_AS(feature_matching_loss(a, b), std::invalid_argument);
}

TEST_CASE("hinge losses") {
  const std::vector<Td> zeros{Td::zeros({1, 3}), Td::zeros({2, 2})};
  CHECK(gan_loss_generator(zeros).item() == 1.0);
  CHECK(gan_loss_discriminator(zeros, zeros).item() == 2.0);
  CHECK(gan_loss_generator<double>({Td::full({4}, 1.0), Td::full({2}, 3.0)}).item() == 0.0);
  CHECK(gan_loss_generator<double>({Td::full({3}, 1.0), Td::full({3}, -1.0)}).item() == 1.0);
  CHECK(gan_loss_discriminator<double>({Td::full({3}, 1.0), Td::full({2}, 2.0)}, {Td::full({3}, -1.0), Td::full({2}, -4.0)})
            .item() == 0.0);
  CHECK(gan_loss_discriminator<double>({Td::full({1}, 0.5)}, {Td::full({1}, 0.5)}).item() == 2.0);
  CHECK_THROWS_AS(gan_loss_generator<double>({}), std::invalid_argument);
  CHECK_THROWS_AS(gan_loss_discriminator<double>({Td::zeros({1})}, {}), std::invalid_argument);
  // least-squares smoke
  CHECK(gan_loss_generator(zeros, GanKind::kLeastSquares).item() == 1.0);
  CHECK(gan_loss_discriminator(zeros, zeros, GanKind::kLeastSquares).item() == 1.0);
}

TEST_CASE("generator total") {
  GeneratorLossParts<double> p{Td::scalar(0), Td::scalar(0), Td::scalar(0), Td::scalar(0)};
  LossReport r;
  CHECK(generator_total(p, LossWeights{}, &r).item() == 0.0);
  CHECK(r.L_G == 0.0);
  p = {Td::scalar(1), Td::scalar(2), Td::scalar(3), Td::scalar(4)};
  CHECK(generator_total(p, LossWeights{1, 1, 1, 1}, &r).item() == 10.0);
  CHECK(r.L_G == 10.0);
  const double a = generator_total(p, LossWeights{45, 0, 20, 1}).item();
  p.L_P = Td::scalar(1234.5);
  CHECK(generator_total(p, LossWeights{45, 0, 20, 1}).item() == a);
  CHECK_THROWS_AS(generator_total(p, LossWeights{-1, 1, 1, 1}), std::invalid_argument);

  LossReport bad;
  bad.ptd = std::nan("");
  CHECK(bad.first_non_finite() == "PTD");
  CHECK(r.first_non_finite().empty());
  r.L_D = 2;
  CHECK(r.log_line(7, 2e-4).rfind("step=7 lr=2.000000e-04 L_G=10.000000 L_A=1.000000", 0) == 0);
}

TEST_CASE("losses are non-negative on random inputs") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Td a = uniform({1, 3, 9}, s, -4, 4), b = uniform({1, 3, 9}, s + 100, -4, 4);
    CHECK(amplitude_loss(a, b).item() >= 0);
    CHECK(phase_loss(a, b).total.item() >= 0);
    CHECK(gan_loss_generator<double>({a}).item() >= 0);
    CHECK(gan_loss_discriminator<double>({a}, {b}).item() >= 0);
  }
}

TEST_CASE("grad check: losses") {
  Td a = uniform({1, 4, 9}, 11, -2, 2), b = uniform({1, 4, 9}, 12, -2, 2);
  a.set_requires_grad(true);
  CHECK(ad::grad_check([&] { return amplitude_loss(a, b); }, {a}).max_rel_error < 1e-4);
  CHECK(ad::grad_check([&] { return phase_loss(a, b).total; }, {a}).max_rel_error < 1e-4);
  CHECK(ad::grad_check([&] { return gan_loss_generator<double>({a, b}); }, {a}).max_rel_error < 1e-4);
  CHECK(ad::grad_check([&] { return gan_loss_discriminator<double>({a}, {b}); }, {a}).max_rel_error < 1e-4);

  dsp::StftConfig cfg{.n_fft = 16, .hop = 4, .win_length = 16};
  ad::ComplexTensor<double> z{uniform({1, 5, 9}, 13), uniform({1, 5, 9}, 14)};
  ad::ComplexTensor<double> t{uniform({1, 5, 9}, 15), uniform({1, 5, 9}, 16)};
  z.re.set_requires_grad(true);
  z.im.set_requires_grad(true);
  CHECK(ad::grad_check([&] {
          const auto l = stft_spectrum_loss(z, t, cfg);
          return ad::add(l.real_l1, l.imag_l1);
        },
        {z.re, z.im})
            .max_rel_error < 1e-4);

  // The consistency term differentiates through stft(istft(z)) as well.
  CHECK(ad::grad_check([&] { return stft_spectrum_loss(z, t, cfg).consistency; }, {z.re, z.im}).max_rel_error < 1e-4);
  CHECK(ad::grad_check([&] { return stft_spectrum_loss(z, t, cfg).total; }, {z.re, z.im}).max_rel_error < 1e-4);

  dsp::StftConfig mcfg{.n_fft = 64, .hop = 16, .win_length = 64};
  MelAnalyzer<double> mel(dsp::MelConfig{.n_mels = 4, .f_min = 0, .f_max = 8000}, mcfg);
  Td x = uniform({1, 128}, 17), y = uniform({1, 128}, 18);
  x.set_requires_grad(true);
  CHECK(ad::grad_check([&] { return mel_loss(x, y, mel); }, {x}).max_rel_error < 1e-4);
}
