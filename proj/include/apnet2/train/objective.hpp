#pragma once

#include <vector>

#include "apnet2/loss/losses.hpp"
#include "apnet2/model/discriminator.hpp"
#include "apnet2/model/generator.hpp"

// Generator objective shared by training (float) and gradient checking (double).
namespace apnet2::train {

template <typename T>
struct Targets {
  ad::ComplexTensor<T> spectrum;  // stft of the real audio
  ad::Tensor<T> log_amp, phase, mel;
  std::vector<model::SubOutput<T>> real;  // discriminator outputs on the real audio
};

// Computed without recording; `mel` is the generator input for this audio.
template <typename T>
Targets<T> make_targets(const ad::Tensor<T>& audio, const ad::Tensor<T>& mel, const loss::MelAnalyzer<T>& analyzer,
                        const model::DiscriminatorEnsemble<T>& disc, T amp_floor);

// L_A, L_P, L_S and L_W = mel_weight * mel + fm_weight * fm + adversarial.
// Records on the active tape; the discriminator should be frozen by the caller.
template <typename T>
loss::GeneratorLossParts<T> generator_loss_parts(const model::GeneratorOutput<T>& out, const Targets<T>& targets,
                                                 const loss::MelAnalyzer<T>& analyzer,
                                                 const model::DiscriminatorEnsemble<T>& disc,
                                                 const loss::LossWeights& w, loss::GanKind gan);

}  // namespace apnet2::train
