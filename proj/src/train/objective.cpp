#include "apnet2/train/objective.hpp"

namespace apnet2::train {

template <typename T>
Targets<T> make_targets(const ad::Tensor<T>& audio, const ad::Tensor<T>& mel, const loss::MelAnalyzer<T>& analyzer,
                        const model::DiscriminatorEnsemble<T>& disc, T amp_floor) {
  ad::NoGradScope<T> no_grad;
  Targets<T> t;
  t.spectrum = ad::stft(audio, analyzer.stft());
  t.log_amp = ad::log(ad::clamp_min(ad::magnitude(t.spectrum, T{0}), amp_floor));
  t.phase = ad::phase(t.spectrum.re, t.spectrum.im);
  t.mel = mel;
  t.real = disc(audio);
  return t;
}

template <typename T>
loss::GeneratorLossParts<T> generator_loss_parts(const model::GeneratorOutput<T>& out, const Targets<T>& targets,
                                                 const loss::MelAnalyzer<T>& analyzer,
                                                 const model::DiscriminatorEnsemble<T>& disc,
                                                 const loss::LossWeights& w, loss::GanKind gan) {
  loss::GeneratorLossParts<T> p;
  p.L_A = loss::amplitude_loss(out.log_amp, targets.log_amp);
  const auto phase = loss::phase_loss(out.phase, targets.phase);
  p.L_P = phase.total;
  p.ip = phase.ip;
  p.gd = phase.gd;
  p.ptd = phase.ptd;
  const auto spec = loss::stft_spectrum_loss<T>({out.re, out.im}, targets.spectrum, analyzer.stft());
  p.L_S = spec.total;
  p.consistency = spec.consistency;
  p.real_l1 = spec.real_l1;
  p.imag_l1 = spec.imag_l1;
  p.mel = ad::mean(ad::abs(ad::sub(analyzer(out.audio), targets.mel)));
  const auto fake = disc(out.audio);
  p.feature_match = loss::feature_matching_loss(targets.real, fake);
  p.adversarial = loss::gan_loss_generator(loss::scores_of(fake), gan);
  p.L_W = ad::add(ad::add(ad::mul_scalar(p.mel, static_cast<T>(w.mel_weight)),
                          ad::mul_scalar(p.feature_match, static_cast<T>(w.fm_weight))),
                  p.adversarial);
  return p;
}

#define APNET2_INSTANTIATE_OBJECTIVE(T)                                                                         \
  template Targets<T> make_targets(const ad::Tensor<T>&, const ad::Tensor<T>&, const loss::MelAnalyzer<T>&,      \
                                   const model::DiscriminatorEnsemble<T>&, T);                                  \
  template loss::GeneratorLossParts<T> generator_loss_parts(const model::GeneratorOutput<T>&, const Targets<T>&, \
                                                            const loss::MelAnalyzer<T>&,                        \
                                                            const model::DiscriminatorEnsemble<T>&,             \
                                                            const loss::LossWeights&, loss::GanKind);

APNET2_INSTANTIATE_OBJECTIVE(float)
APNET2_INSTANTIATE_OBJECTIVE(double)

}  // namespace apnet2::train
