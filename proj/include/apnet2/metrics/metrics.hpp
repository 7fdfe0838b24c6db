#pragma once

#include <optional>
#include <string>
#include <vector>

#include "apnet2/dsp/matrix.hpp"
#include "apnet2/dsp/mel.hpp"
#include "apnet2/dsp/stft.hpp"

// Objective quality metrics on paired reference / estimate waveforms.
namespace apnet2::metrics {

using Wave = dsp::Waveform<double>;

inline constexpr double kSnrCeiling = 100.0;

// 10 log10(sum ref^2 / sum (ref - est)^2), capped at kSnrCeiling.
// Throws on length mismatch or an all-zero reference.
double snr(const Wave& ref, const Wave& est);

// RMS over frames and bins of 20 log10 |S_ref| - 20 log10 |S_est|.
// Magnitudes are floored at kLasFloor.
inline constexpr double kLasFloor = 1e-8;
double las_rmse(const Wave& ref, const Wave& est, const dsp::StftConfig& cfg = {});

// Mel cepstra c_1..c_order (c_0 dropped) per frame: orthonormal DCT-II of the
// natural-log mel spectrogram.
dsp::Matrix<double> mel_cepstrum(const Wave& w, const dsp::MelConfig& mel = {}, const dsp::StftConfig& cfg = {},
                                 std::size_t order = 13);
// (10 / ln 10) sqrt(2) * mean over frames of || c_ref - c_est ||.
double mcd_from_cepstra(const dsp::Matrix<double>& ref, const dsp::Matrix<double>& est);
double mcd(const Wave& ref, const Wave& est, const dsp::MelConfig& mel = {}, const dsp::StftConfig& cfg = {});

struct F0Track {
  std::vector<double> f0;  // Hz, 0 when unvoiced
  std::vector<bool> voiced;
  std::size_t frames() const { return f0.size(); }
};

struct YinConfig {
  double threshold = 0.15;
  double f_min = 60.0;
  double f_max = 500.0;
  std::size_t window = 1024;  // integration length in samples
};

// YIN per frame; frame t is centered on sample t * hop as in the STFT, with
// zero signal outside the clip.
F0Track f0_estimate(const Wave& w, const dsp::StftConfig& cfg = {}, const YinConfig& yin = {});

// RMS of 1200 log2(f_est / f_ref) over frames voiced in both; nullopt when
// there is no such frame. Throws on frame-count mismatch.
std::optional<double> f0_rmse_cents(const F0Track& ref, const F0Track& est);
// Percentage of frames whose voicing differs.
double vuv_error(const F0Track& ref, const F0Track& est);

struct Rtf {
  double value = 0;     // generation time / audio duration
  double multiple = 0;  // audio duration / generation time
};
Rtf rtf(double gen_seconds, double audio_seconds);
// "0.021 (47.73×)"
std::string format_rtf(const Rtf& r);

struct MetricReport {
  double snr_db = 0;
  bool snr_saturated = false;
  double las_rmse_db = 0;
  double mcd_db = 0;
  std::optional<double> f0_rmse_cents;  // nullopt: undefined, no commonly voiced frame
  double vuv_error_pct = 0;
  std::optional<Rtf> rtf;

  // Aligned two-column table.
  std::string table() const;
  // name=value lines; undefined values print as "undefined".
  std::string name_values() const;
};

MetricReport evaluate(const Wave& ref, const Wave& est, const dsp::MelConfig& mel = {}, const dsp::StftConfig& cfg = {});
// Per-file reports averaged; F0-RMSE averages the defined entries only.
MetricReport average(const std::vector<MetricReport>& reports);

}  // namespace apnet2::metrics
