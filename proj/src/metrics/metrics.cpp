#include "apnet2/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace apnet2::metrics {

namespace {

void require_same_length(const Wave& ref, const Wave& est, const char* what) {
  if (ref.samples.size() != est.samples.size())
    throw std::invalid_argument(std::string(what) + ": length mismatch " + std::to_string(ref.samples.size()) +
                                " vs " + std::to_string(est.samples.size()));
}

dsp::Matrix<double> magnitude(const Wave& w, const dsp::StftConfig& cfg) {
  const auto s = dsp::stft(w, cfg);
  dsp::Matrix<double> m(s.frames(), s.bins());
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = std::hypot(s.real.data[i], s.imag.data[i]);
  return m;
}

constexpr double kMcdScale = 10.0 / std::numbers::ln10 * std::numbers::sqrt2;

}  // namespace

double snr(const Wave& ref, const Wave& est) {
  require_same_length(ref, est, "snr");
  double signal = 0, noise = 0;
  for (std::size_t i = 0; i < ref.samples.size(); ++i) {
    signal += ref.samples[i] * ref.samples[i];
    const double d = ref.samples[i] - est.samples[i];
    noise += d * d;
  }
  if (signal == 0) throw std::invalid_argument("snr: reference is all zero");
  if (noise == 0) return kSnrCeiling;
  return std::min(kSnrCeiling, 10.0 * std::log10(signal / noise));
}

double las_rmse(const Wave& ref, const Wave& est, const dsp::StftConfig& cfg) {
  require_same_length(ref, est, "las_rmse");
  const auto a = magnitude(ref, cfg);
  const auto b = magnitude(est, cfg);
  if (a.data.empty()) throw std::invalid_argument("las_rmse: empty input");
  double acc = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = 20.0 * (std::log10(std::max(a.data[i], kLasFloor)) - std::log10(std::max(b.data[i], kLasFloor)));
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.data.size()));
}

dsp::Matrix<double> mel_cepstrum(const Wave& w, const dsp::MelConfig& mel, const dsp::StftConfig& cfg,
                                 std::size_t order) {
  const auto fb = dsp::MelFilterbank<double>::build(mel, cfg);
  const auto logmel = dsp::mel_spectrogram(w, fb, cfg, mel.amp_floor).values;
  const std::size_t M = logmel.cols;
  if (order + 1 > M) throw std::invalid_argument("mel_cepstrum: order must be below n_mels");
  // Orthonormal DCT-II basis rows k = 1..order.
  dsp::Matrix<double> basis(order, M);
  const double scale = std::sqrt(2.0 / static_cast<double>(M));
  for (std::size_t k = 1; k <= order; ++k)
    for (std::size_t m = 0; m < M; ++m)
      basis(k - 1, m) = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (m + 0.5) / static_cast<double>(M));
  dsp::Matrix<double> c(logmel.rows, order);
  for (std::size_t t = 0; t < logmel.rows; ++t)
    for (std::size_t k = 0; k < order; ++k) {
      double acc = 0;
      for (std::size_t m = 0; m < M; ++m) acc += basis(k, m) * logmel(t, m);
      c(t, k) = acc;
    }
  return c;
}

double mcd_from_cepstra(const dsp::Matrix<double>& ref, const dsp::Matrix<double>& est) {
  dsp::require_same_shape(ref, est, "mcd");
  if (ref.rows == 0) throw std::invalid_argument("mcd: no frames");
  double total = 0;
  for (std::size_t t = 0; t < ref.rows; ++t) {
    double acc = 0;
    for (std::size_t k = 0; k < ref.cols; ++k) {
      const double d = ref(t, k) - est(t, k);
      acc += d * d;
    }
    total += std::sqrt(acc);
  }
  return kMcdScale * total / static_cast<double>(ref.rows);
}

double mcd(const Wave& ref, const Wave& est, const dsp::MelConfig& mel, const dsp::StftConfig& cfg) {
  require_same_length(ref, est, "mcd");
  return mcd_from_cepstra(mel_cepstrum(ref, mel, cfg), mel_cepstrum(est, mel, cfg));
}

F0Track f0_estimate(const Wave& w, const dsp::StftConfig& cfg, const YinConfig& yin) {
  if (w.sample_rate <= 0) throw std::invalid_argument("f0_estimate: sample rate must be positive");
  const double sr = w.sample_rate;
  const auto tau_min = static_cast<std::size_t>(std::floor(sr / yin.f_max));
  const auto tau_max = static_cast<std::size_t>(std::ceil(sr / yin.f_min));
  const std::size_t W = yin.window;
  const std::size_t span = W + tau_max + 1;
  const std::size_t frames = cfg.frames_for(w.samples.size());
  const auto& x = w.samples;
  const auto n = static_cast<long>(x.size());

  F0Track track;
  track.f0.assign(frames, 0.0);
  track.voiced.assign(frames, false);
  std::vector<double> seg(span), d(tau_max + 2), cmnd(tau_max + 2);
  for (std::size_t t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t * cfg.hop) - static_cast<long>(span / 2);
    double energy = 0;
    for (std::size_t j = 0; j < span; ++j) {
      const long i = start + static_cast<long>(j);
      seg[j] = (i >= 0 && i < n) ? x[static_cast<std::size_t>(i)] : 0.0;
      if (j < W) energy += seg[j] * seg[j];
    }
    if (energy < 1e-10) continue;

    for (std::size_t tau = 1; tau <= tau_max + 1; ++tau) {
      double acc = 0;
      for (std::size_t j = 0; j < W; ++j) {
        const double diff = seg[j] - seg[j + tau];
        acc += diff * diff;
      }
      d[tau] = acc;
    }
    double running = 0;
    cmnd[0] = 1.0;
    for (std::size_t tau = 1; tau <= tau_max + 1; ++tau) {
      running += d[tau];
      cmnd[tau] = running > 0 ? d[tau] * static_cast<double>(tau) / running : 1.0;
    }
    std::size_t best = 0;
    for (std::size_t tau = std::max<std::size_t>(tau_min, 2); tau <= tau_max; ++tau) {
      if (cmnd[tau] < yin.threshold) {
        while (tau + 1 <= tau_max && cmnd[tau + 1] < cmnd[tau]) ++tau;
        best = tau;
        break;
      }
    }
    if (best == 0) continue;
    // Parabolic refinement of the dip.
    const double a = cmnd[best - 1], b = cmnd[best], c = cmnd[best + 1];
    const double denom = a - 2 * b + c;
    const double shift = denom > 0 ? 0.5 * (a - c) / denom : 0.0;
    const double f0 = sr / (static_cast<double>(best) + std::clamp(shift, -0.5, 0.5));
    if (f0 < yin.f_min || f0 > yin.f_max) continue;
    track.f0[t] = f0;
    track.voiced[t] = true;
  }
  return track;
}

std::optional<double> f0_rmse_cents(const F0Track& ref, const F0Track& est) {
  if (ref.frames() != est.frames())
    throw std::invalid_argument("f0_rmse_cents: frame count mismatch " + std::to_string(ref.frames()) + " vs " +
                                std::to_string(est.frames()));
  double acc = 0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < ref.frames(); ++t) {
    if (!ref.voiced[t] || !est.voiced[t]) continue;
    const double cents = 1200.0 * std::log2(est.f0[t] / ref.f0[t]);
    acc += cents * cents;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return std::sqrt(acc / static_cast<double>(count));
}

double vuv_error(const F0Track& ref, const F0Track& est) {
  if (ref.frames() != est.frames())
    throw std::invalid_argument("vuv_error: frame count mismatch " + std::to_string(ref.frames()) + " vs " +
                                std::to_string(est.frames()));
  if (ref.frames() == 0) throw std::invalid_argument("vuv_error: no frames");
  std::size_t differ = 0;
  for (std::size_t t = 0; t < ref.frames(); ++t) differ += ref.voiced[t] != est.voiced[t];
  return 100.0 * static_cast<double>(differ) / static_cast<double>(ref.frames());
}

Rtf rtf(double gen_seconds, double audio_seconds) {
  if (!(gen_seconds > 0) || !(audio_seconds > 0))
    throw std::invalid_argument("rtf: generation time and audio duration must be positive");
  return {gen_seconds / audio_seconds, audio_seconds / gen_seconds};
}

std::string format_rtf(const Rtf& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f (%.2f×)", r.value, r.multiple);
  return buf;
}

namespace {

std::string number(double v, const char* fmt = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

std::string MetricReport::table() const {
  std::vector<std::pair<std::string, std::string>> lines = {
      {"SNR (dB)", number(snr_db) + (snr_saturated ? " (saturated)" : "")},
      {"LAS-RMSE (dB)", number(las_rmse_db)},
      {"MCD (dB)", number(mcd_db)},
      {"F0-RMSE (cents)", f0_rmse_cents ? number(*f0_rmse_cents) : "undefined"},
      {"V/UV error (%)", number(vuv_error_pct)},
  };
  if (rtf) lines.emplace_back("RTF", format_rtf(*rtf));
  std::size_t width = 6;
  for (const auto& line : lines) width = std::max(width, line.first.size());
  std::string out = "metric" + std::string(width - 6 + 2, ' ') + "value\n";
  out += std::string(width, '-') + "  " + std::string(12, '-') + "\n";
  for (const auto& [label, value] : lines) out += label + std::string(width - label.size() + 2, ' ') + value + "\n";
  return out;
}

std::string MetricReport::name_values() const {
  std::string out;
  out += "snr_db=" + number(snr_db, "%.6f") + "\n";
  out += std::string("snr_saturated=") + (snr_saturated ? "1" : "0") + "\n";
  out += "las_rmse_db=" + number(las_rmse_db, "%.6f") + "\n";
  out += "mcd_db=" + number(mcd_db, "%.6f") + "\n";
  out += "f0_rmse_cents=" + (f0_rmse_cents ? number(*f0_rmse_cents, "%.6f") : std::string("undefined")) + "\n";
  out += "vuv_error_pct=" + number(vuv_error_pct, "%.6f") + "\n";
  if (rtf) {
    out += "rtf_value=" + number(rtf->value, "%.6g") + "\n";
    out += "rtf_multiple=" + number(rtf->multiple, "%.6g") + "\n";
  }
  return out;
}

MetricReport evaluate(const Wave& ref, const Wave& est, const dsp::MelConfig& mel, const dsp::StftConfig& cfg) {
  MetricReport r;
  r.snr_db = snr(ref, est);
  r.snr_saturated = r.snr_db >= kSnrCeiling;
  r.las_rmse_db = las_rmse(ref, est, cfg);
  r.mcd_db = mcd(ref, est, mel, cfg);
  const auto f_ref = f0_estimate(ref, cfg);
  const auto f_est = f0_estimate(est, cfg);
  r.f0_rmse_cents = f0_rmse_cents(f_ref, f_est);
  r.vuv_error_pct = vuv_error(f_ref, f_est);
  return r;
}

MetricReport average(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("average: no reports");
  MetricReport m;
  m.snr_saturated = true;
  double f0_sum = 0;
  std::size_t f0_count = 0;
  for (const auto& r : reports) {
    m.snr_db += r.snr_db;
    m.snr_saturated = m.snr_saturated && r.snr_saturated;
    m.las_rmse_db += r.las_rmse_db;
    m.mcd_db += r.mcd_db;
    m.vuv_error_pct += r.vuv_error_pct;
    if (r.f0_rmse_cents) {
      f0_sum += *r.f0_rmse_cents;
      ++f0_count;
    }
  }
  const auto n = static_cast<double>(reports.size());
  m.snr_db /= n;
  m.las_rmse_db /= n;
  m.mcd_db /= n;
  m.vuv_error_pct /= n;
  if (f0_count) m.f0_rmse_cents = f0_sum / static_cast<double>(f0_count);
  return m;
}

}  // namespace apnet2::metrics
