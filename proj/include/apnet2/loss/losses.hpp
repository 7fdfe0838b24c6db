#pragma once

#include <string>
#include <vector>

#include "apnet2/ad/ops.hpp"
#include "apnet2/dsp/mel.hpp"
#include "apnet2/model/discriminator.hpp"

// Training objectives. Spectral tensors are [B, frames, bins]; waveforms [B, N].
namespace apnet2::loss {

using ad::Tensor;

struct LossWeights {
  double lambda_A = 45.0;
  double lambda_P = 100.0;
  double lambda_S = 20.0;
  double lambda_W = 1.0;
  // Inside L_W = mel_weight * mel + fm_weight * feature_match + adversarial.
  double mel_weight = 45.0;
  double fm_weight = 1.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

enum class GanKind { kHinge, kLeastSquares };

// Named scalars of one training step.
struct LossReport {
  double L_A = 0, L_P = 0, L_S = 0, L_W = 0;
  double ip = 0, gd = 0, ptd = 0;
  double consistency = 0, real_l1 = 0, imag_l1 = 0;
  double mel = 0, feature_match = 0, adversarial = 0;
  double L_G = 0, L_D = 0;

  // lambda-weighted sum of L_A, L_P, L_S, L_W.
  double weighted_total(const LossWeights& w) const;
  // Name of the first non-finite term, or empty.
  std::string first_non_finite() const;
  // step=<n> lr=<v> L_G=<v> L_A=<v> L_P=<v> L_S=<v> L_W=<v> L_D=<v>
  std::string log_line(long step, double lr) const;
  bool operator==(const LossReport&) const = default;
};

// Mean squared error.
template <typename T> Tensor<T> amplitude_loss(const Tensor<T>& pred, const Tensor<T>& target);

template <typename T>
struct PhaseLoss {
  Tensor<T> ip, gd, ptd, total;
};
// Anti-wrapped instantaneous phase, group delay and phase time difference errors.
// The last axis is frequency, the one before it time.
template <typename T> PhaseLoss<T> phase_loss(const Tensor<T>& pred, const Tensor<T>& target);

template <typename T>
struct SpectrumLoss {
  Tensor<T> consistency, real_l1, imag_l1, total;
};
// Consistency: mean squared distance between pred and stft(istft(pred)),
// differentiated through both; plus L1 on the real and imaginary parts.
template <typename T>
SpectrumLoss<T> stft_spectrum_loss(const ad::ComplexTensor<T>& pred, const ad::ComplexTensor<T>& target,
                                   const dsp::StftConfig& cfg);
// stft(istft(z)), computed without recording.
template <typename T> ad::ComplexTensor<T> consistent_projection(const ad::ComplexTensor<T>& z, const dsp::StftConfig& cfg);

// Differentiable log-mel analysis: log(max(fb * |stft(x)|, floor)), [B, frames, n_mels].
template <typename T>
class MelAnalyzer {
 public:
  MelAnalyzer(const dsp::MelConfig& mel, const dsp::StftConfig& stft);
  Tensor<T> operator()(const Tensor<T>& audio) const;
  const dsp::StftConfig& stft() const { return stft_; }
  std::size_t n_mels() const { return fb_t_.dim(1); }

 private:
  dsp::StftConfig stft_;
  Tensor<T> fb_t_;  // [bins, n_mels]
  T floor_;
};

// Mean absolute log-mel difference.
template <typename T> Tensor<T> mel_loss(const Tensor<T>& pred, const Tensor<T>& target, const MelAnalyzer<T>& mel);

// Sum over sub-discriminators and layers of the mean absolute feature difference.
template <typename T>
Tensor<T> feature_matching_loss(const std::vector<model::SubOutput<T>>& real,
                                const std::vector<model::SubOutput<T>>& fake);

template <typename T>
Tensor<T> gan_loss_generator(const std::vector<Tensor<T>>& fake_scores, GanKind kind = GanKind::kHinge);
template <typename T>
Tensor<T> gan_loss_discriminator(const std::vector<Tensor<T>>& real_scores, const std::vector<Tensor<T>>& fake_scores,
                                 GanKind kind = GanKind::kHinge);

template <typename T> std::vector<Tensor<T>> scores_of(const std::vector<model::SubOutput<T>>& outs);

template <typename T>
struct GeneratorLossParts {
  Tensor<T> L_A, L_P, L_S, L_W;
  // optional sub-terms, copied into the report when defined
  Tensor<T> ip, gd, ptd, consistency, real_l1, imag_l1, mel, feature_match, adversarial;
};

// lambda_A L_A + lambda_P L_P + lambda_S L_S + lambda_W L_W; fills `report`
// when given (its L_G is the exact weighted sum of the reported parts).
template <typename T>
Tensor<T> generator_total(const GeneratorLossParts<T>& parts, const LossWeights& w, LossReport* report = nullptr);

}  // namespace apnet2::loss
