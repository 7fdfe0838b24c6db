#include <cmath>
#include <numbers>
#include <random>

#include "apnet2/metrics/metrics.hpp"
#include "doctest.h"

using namespace apnet2;
using namespace apnet2::metrics;

namespace {

Wave noise(std::size_t n, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  Wave w;
  w.samples.resize(n);
  for (auto& x : w.samples) x = dist(rng);
  return w;
}

Wave sine(double hz, std::size_t n, double amp = 0.5) {
  Wave w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * i / 22050.0);
  return w;
}

Wave scaled(Wave w, double g) {
  for (auto& x : w.samples) x *= g;
  return w;
}

F0Track track(std::vector<double> f0) {
  F0Track t;
  t.voiced.resize(f0.size());
  for (std::size_t i = 0; i < f0.size(); ++i) t.voiced[i] = f0[i] > 0;
  t.f0 = std::move(f0);
  return t;
}

}  // namespace

TEST_CASE("snr examples") {
  const auto ref = noise(4000, 1);
  CHECK(snr(ref, ref) == kSnrCeiling);
  CHECK(snr(ref, scaled(ref, 0.5)) == doctest::Approx(10 * std::log10(4.0)).epsilon(1e-12));
  CHECK(std::abs(snr(ref, scaled(ref, 0.5)) - 6.02) < 0.01);
  CHECK(snr(ref, scaled(ref, 0.0)) == doctest::Approx(0.0));
  CHECK(snr(ref, scaled(ref, 1.0 + 1e-9)) == kSnrCeiling);
  // not symmetric
  CHECK(snr(scaled(ref, 0.5), ref) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(snr(ref, noise(3999, 1)), std::invalid_argument);
  CHECK_THROWS_AS(snr(scaled(ref, 0.0), ref), std::invalid_argument);
}

TEST_CASE("las-rmse examples") {
  const auto ref = noise(8192, 2);
  CHECK(las_rmse(ref, ref) == 0.0);
  CHECK(las_rmse(ref, scaled(ref, 2.0)) == doctest::Approx(20 * std::log10(2.0)).epsilon(1e-9));
  const auto other = noise(8192, 3);
  CHECK(las_rmse(ref, other) == doctest::Approx(las_rmse(other, ref)).epsilon(1e-12));
  Wave silence;
  silence.samples.assign(8192, 0.0);
  CHECK(las_rmse(ref, silence) > 100.0);
  CHECK_THROWS_AS(las_rmse(ref, noise(100, 2)), std::invalid_argument);
}

TEST_CASE("mcd examples") {
  const auto ref = noise(8192, 4);
  CHECK(mcd(ref, ref) == 0.0);
  CHECK(mcd(ref, scaled(ref, 0.25)) < 1e-9);
  const auto other = noise(8192, 5);
  CHECK(mcd(ref, other) > 0.0);
  CHECK(mcd(ref, other) == doctest::Approx(mcd(other, ref)).epsilon(1e-12));

  auto c = mel_cepstrum(ref);
  CHECK(c.cols == 13);
  auto shifted = c;
  for (std::size_t t = 0; t < c.rows; ++t) shifted(t, 4) += 1.0;
  CHECK(mcd_from_cepstra(c, shifted) == doctest::Approx(10 / std::log(10.0) * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::abs(mcd_from_cepstra(c, shifted) - 6.142) < 1e-3);
}

TEST_CASE("f0 of a pure sine") {
  const auto t = f0_estimate(sine(220, 22050));
  CHECK(t.frames() == 87);
  for (std::size_t i = 0; i < t.frames(); ++i) {
    CHECK(t.voiced[i]);
    CHECK(std::abs(t.f0[i] - 220.0) <= 1.0);
  }
}

TEST_CASE("f0 of silence and of a voicing boundary") {
  Wave silence;
  silence.samples.assign(11025, 0.0);
  for (bool v : f0_estimate(silence).voiced) CHECK_FALSE(v);

  auto half = sine(220, 22050);
  std::fill(half.samples.begin() + 11025, half.samples.end(), 0.0);
  const auto t = f0_estimate(half);
  const double boundary = 11025.0 / 256.0;
  for (std::size_t i = 0; i < t.frames(); ++i) {
    const double d = static_cast<double>(i) - boundary;
    if (d < -2) CHECK(t.voiced[i]);
    if (d > 2) CHECK_FALSE(t.voiced[i]);
  }
}

TEST_CASE("f0 track is shift invariant by one hop") {
  auto x = noise(16384, 6, 0.05);
  const auto tone = sine(180, 16384);
  for (std::size_t i = 0; i < x.samples.size(); ++i) x.samples[i] += tone.samples[i];
  Wave delayed;
  delayed.samples.assign(256, 0.0);
  delayed.samples.insert(delayed.samples.end(), x.samples.begin(), x.samples.end());
  const auto a = f0_estimate(x);
  const auto b = f0_estimate(delayed);
  REQUIRE(b.frames() == a.frames() + 1);
  for (std::size_t i = 0; i < a.frames(); ++i) {
    CHECK(b.voiced[i + 1] == a.voiced[i]);
    CHECK(b.f0[i + 1] == a.f0[i]);
  }
}

TEST_CASE("f0 rmse and voicing error") {
  std::vector<double> f(100, 200.0);
  for (std::size_t i = 0; i < 100; i += 3) f[i] = 0.0;
  const auto ref = track(f);
  CHECK(*f0_rmse_cents(ref, ref) == 0.0);
  CHECK(vuv_error(ref, ref) == 0.0);

  auto up = f;
  for (auto& v : up) v *= std::pow(2.0, 1.0 / 12.0);
  CHECK(*f0_rmse_cents(ref, track(up)) == doctest::Approx(100.0).epsilon(1e-12));

  auto flip = f;
  flip[1] = 0.0;
  CHECK(vuv_error(ref, track(flip)) == doctest::Approx(1.0));

  CHECK_FALSE(f0_rmse_cents(track({0, 100, 0}), track({100, 0, 0})).has_value());
  CHECK_THROWS_AS(f0_rmse_cents(ref, track({1.0})), std::invalid_argument);
  CHECK_THROWS_AS(vuv_error(ref, track({1.0})), std::invalid_argument);
}

TEST_CASE("rtf values and formatting") {
  const auto r = rtf(1.0, 10.0);
  CHECK(r.value == doctest::Approx(0.1));
  CHECK(r.multiple == doctest::Approx(10.0));
  CHECK(format_rtf(r) == "0.100 (10.00×)");
  CHECK(format_rtf(rtf(1.0, 47.73)) == "0.021 (47.73×)");
  CHECK(format_rtf(rtf(2.5, 2.5)) == "1.000 (1.00×)");
  CHECK_THROWS_AS(rtf(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(rtf(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("identical inputs give perfect scores") {
  auto x = sine(150, 22050);
  const auto n = noise(22050, 7, 0.02);
  for (std::size_t i = 0; i < x.samples.size(); ++i) x.samples[i] += n.samples[i];
  const auto r = evaluate(x, x);
  CHECK(r.snr_db == kSnrCeiling);
  CHECK(r.snr_saturated);
  CHECK(r.las_rmse_db == 0.0);
  CHECK(r.mcd_db == 0.0);
  REQUIRE(r.f0_rmse_cents.has_value());
  CHECK(*r.f0_rmse_cents == 0.0);
  CHECK(r.vuv_error_pct == 0.0);
}

TEST_CASE("report serializations") {
  MetricReport r;
  r.snr_db = 6.5;
  r.las_rmse_db = 1.25;
  r.mcd_db = 2.0;
  r.vuv_error_pct = 3.0;
  const auto nv = r.name_values();
  CHECK(nv.find("snr_db=6.500000\n") != std::string::npos);
  CHECK(nv.find("f0_rmse_cents=undefined\n") != std::string::npos);
  CHECK(nv.find("rtf_value") == std::string::npos);
  r.rtf = rtf(1.0, 47.73);
  r.f0_rmse_cents = 12.0;
  const auto table = r.table();
  CHECK(table.find("RTF              0.021 (47.73×)") != std::string::npos);
  CHECK(table.find("F0-RMSE (cents)  12.0000") != std::string::npos);
  CHECK(r.name_values().find("rtf_multiple=47.73\n") != std::string::npos);

  const auto avg = average({r, MetricReport{}});
  CHECK(avg.snr_db == doctest::Approx(3.25));
  CHECK(*avg.f0_rmse_cents == 12.0);
}
