#include "apnet2/loss/losses.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace apnet2::loss {

void LossWeights::validate() const {
  for (double v : {lambda_A, lambda_P, lambda_S, lambda_W, mel_weight, fm_weight})
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("loss weights must be finite and non-negative");
}

double LossReport::weighted_total(const LossWeights& w) const {
  return w.lambda_A * L_A + w.lambda_P * L_P + w.lambda_S * L_S + w.lambda_W * L_W;
}

std::string LossReport::first_non_finite() const {
  const std::pair<const char*, double> terms[] = {
      {"L_A", L_A}, {"IP", ip}, {"GD", gd}, {"PTD", ptd}, {"L_P", L_P}, {"consistency", consistency},
      {"real_L1", real_l1}, {"imag_L1", imag_l1}, {"L_S", L_S}, {"mel", mel}, {"feature_match", feature_match},
      {"adversarial", adversarial}, {"L_W", L_W}, {"L_G", L_G}, {"L_D", L_D}};
  for (const auto& [name, v] : terms)
    if (!std::isfinite(v)) return name;
  return {};
}

std::string LossReport::log_line(long step, double lr) const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "step=%ld lr=%.6e L_G=%.6f L_A=%.6f L_P=%.6f L_S=%.6f L_W=%.6f L_D=%.6f", step, lr,
                L_G, L_A, L_P, L_S, L_W, L_D);
  return buf;
}

namespace {

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + ad::to_string(a.shape()) + " vs " +
                                ad::to_string(b.shape()));
}

// x[..., 1:] - x[..., :-1] along axis.
template <typename T>
Tensor<T> diff(const Tensor<T>& x, std::size_t axis) {
  const std::size_t n = x.dim(axis);
  return ad::sub(ad::slice(x, axis, 1, n), ad::slice(x, axis, 0, n - 1));
}

template <typename T>
Tensor<T> mean_anti_wrap_or_zero(const Tensor<T>& d) {
  if (d.numel() == 0) return Tensor<T>::scalar(T{0});
  return ad::mean(ad::anti_wrap(d));
}

double value_of(const Tensor<double>& t) { return t.item(); }
double value_of(const Tensor<float>& t) { return static_cast<double>(t.item()); }

}  // namespace

template <typename T>
Tensor<T> amplitude_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same(pred, target, "amplitude_loss");
  return ad::mean(ad::square(ad::sub(pred, target)));
}

template <typename T>
PhaseLoss<T> phase_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same(pred, target, "phase_loss");
  if (pred.rank() < 2) throw std::invalid_argument("phase_loss: need at least [frames, bins]");
  const std::size_t f_axis = pred.rank() - 1, t_axis = pred.rank() - 2;
  PhaseLoss<T> out;
  out.ip = ad::mean(ad::anti_wrap(ad::sub(pred, target)));
  out.gd = pred.dim(f_axis) > 1 ? mean_anti_wrap_or_zero(ad::sub(diff(pred, f_axis), diff(target, f_axis)))
                                : Tensor<T>::scalar(T{0});
  out.ptd = pred.dim(t_axis) > 1 ? mean_anti_wrap_or_zero(ad::sub(diff(pred, t_axis), diff(target, t_axis)))
                                 : Tensor<T>::scalar(T{0});
  out.total = ad::add(ad::add(out.ip, out.gd), out.ptd);
  return out;
}

template <typename T>
ad::ComplexTensor<T> consistent_projection(const ad::ComplexTensor<T>& z, const dsp::StftConfig& cfg) {
  ad::NoGradScope<T> no_grad;
  const Tensor<T> audio = ad::istft(z.re.detach(), z.im.detach(), cfg);
  auto p = ad::stft(audio, cfg);
  return {p.re.detach(), p.im.detach()};
}

template <typename T>
SpectrumLoss<T> stft_spectrum_loss(const ad::ComplexTensor<T>& pred, const ad::ComplexTensor<T>& target,
                                   const dsp::StftConfig& cfg) {
  require_same(pred.re, pred.im, "stft_spectrum_loss");
  require_same(pred.re, target.re, "stft_spectrum_loss");
  require_same(pred.im, target.im, "stft_spectrum_loss");
  // Recorded: the gradient also flows through the re-analysed spectrum.
  const auto c = ad::stft(ad::istft(pred.re, pred.im, cfg), cfg);
  require_same(pred.re, c.re, "stft_spectrum_loss (consistent projection)");
  SpectrumLoss<T> out;
  out.consistency = ad::mean(ad::add(ad::square(ad::sub(pred.re, c.re)), ad::square(ad::sub(pred.im, c.im))));
  out.real_l1 = ad::mean(ad::abs(ad::sub(pred.re, target.re)));
  out.imag_l1 = ad::mean(ad::abs(ad::sub(pred.im, target.im)));
  out.total = ad::add(ad::add(out.consistency, out.real_l1), out.imag_l1);
  return out;
}

template <typename T>
MelAnalyzer<T>::MelAnalyzer(const dsp::MelConfig& mel, const dsp::StftConfig& stft)
    : stft_(stft), floor_(static_cast<T>(mel.amp_floor)) {
  const auto fb = dsp::MelFilterbank<double>::build(mel, stft);
  std::vector<T> t(fb.weights.rows * fb.weights.cols);
  for (std::size_t m = 0; m < fb.weights.rows; ++m)
    for (std::size_t k = 0; k < fb.weights.cols; ++k) t[k * fb.weights.rows + m] = static_cast<T>(fb.weights(m, k));
  fb_t_ = Tensor<T>({fb.weights.cols, fb.weights.rows}, std::move(t));
}

template <typename T>
Tensor<T> MelAnalyzer<T>::operator()(const Tensor<T>& audio) const {
  // exact magnitude (no epsilon) so features match the plain DSP log-mel
  return ad::log(ad::clamp_min(ad::matmul(ad::magnitude(ad::stft(audio, stft_), T{0}), fb_t_), floor_));
}

template <typename T>
Tensor<T> mel_loss(const Tensor<T>& pred, const Tensor<T>& target, const MelAnalyzer<T>& mel) {
  require_same(pred, target, "mel_loss");
  return ad::mean(ad::abs(ad::sub(mel(pred), mel(target))));
}

template <typename T>
Tensor<T> feature_matching_loss(const std::vector<model::SubOutput<T>>& real,
                                const std::vector<model::SubOutput<T>>& fake) {
  if (real.empty() || fake.empty()) throw std::invalid_argument("feature_matching_loss: empty feature lists");
  if (real.size() != fake.size())
    throw std::invalid_argument("feature_matching_loss: " + std::to_string(real.size()) + " real vs " +
                                std::to_string(fake.size()) + " fake sub-discriminators");
  Tensor<T> total;
  for (std::size_t s = 0; s < real.size(); ++s) {
    const auto& fr = real[s].features;
    const auto& ff = fake[s].features;
    if (fr.empty() || fr.size() != ff.size())
      throw std::invalid_argument("feature_matching_loss: sub-discriminator " + std::to_string(s) +
                                  " has mismatched or empty feature lists");
    for (std::size_t l = 0; l < fr.size(); ++l) {
      require_same(fr[l], ff[l], "feature_matching_loss");
      const Tensor<T> term = ad::mean(ad::abs(ad::sub(fr[l], ff[l])));
      total = total.defined() ? ad::add(total, term) : term;
    }
  }
  return total;
}

template <typename T>
Tensor<T> gan_loss_generator(const std::vector<Tensor<T>>& fake_scores, GanKind kind) {
  if (fake_scores.empty()) throw std::invalid_argument("gan_loss_generator: no score maps");
  Tensor<T> total;
  for (const auto& d : fake_scores) {
    const Tensor<T> margin = ad::add_scalar(ad::neg(d), T{1});
    const Tensor<T> term = ad::mean(kind == GanKind::kHinge ? ad::relu(margin) : ad::square(margin));
    total = total.defined() ? ad::add(total, term) : term;
  }
  return ad::mul_scalar(total, T{1} / static_cast<T>(fake_scores.size()));
}

template <typename T>
Tensor<T> gan_loss_discriminator(const std::vector<Tensor<T>>& real_scores, const std::vector<Tensor<T>>& fake_scores,
                                 GanKind kind) {
  if (real_scores.empty() || real_scores.size() != fake_scores.size())
    throw std::invalid_argument("gan_loss_discriminator: need equal, non-zero counts of real (" +
                                std::to_string(real_scores.size()) + ") and fake (" +
                                std::to_string(fake_scores.size()) + ") score maps");
  Tensor<T> total;
  for (std::size_t l = 0; l < real_scores.size(); ++l) {
    Tensor<T> term;
    if (kind == GanKind::kHinge)
      term = ad::add(ad::mean(ad::relu(ad::add_scalar(ad::neg(real_scores[l]), T{1}))),
                     ad::mean(ad::relu(ad::add_scalar(fake_scores[l], T{1}))));
    else
      term = ad::add(ad::mean(ad::square(ad::add_scalar(ad::neg(real_scores[l]), T{1}))),
                     ad::mean(ad::square(fake_scores[l])));
    total = total.defined() ? ad::add(total, term) : term;
  }
  return ad::mul_scalar(total, T{1} / static_cast<T>(real_scores.size()));
}

template <typename T>
std::vector<Tensor<T>> scores_of(const std::vector<model::SubOutput<T>>& outs) {
  std::vector<Tensor<T>> s;
  for (const auto& o : outs) s.push_back(o.score);
  return s;
}

template <typename T>
Tensor<T> generator_total(const GeneratorLossParts<T>& p, const LossWeights& w, LossReport* report) {
  w.validate();
  const Tensor<T> total =
      ad::add(ad::add(ad::mul_scalar(p.L_A, static_cast<T>(w.lambda_A)), ad::mul_scalar(p.L_P, static_cast<T>(w.lambda_P))),
              ad::add(ad::mul_scalar(p.L_S, static_cast<T>(w.lambda_S)), ad::mul_scalar(p.L_W, static_cast<T>(w.lambda_W))));
  if (report) {
    auto opt = [](const Tensor<T>& t, double& dst) {
      if (t.defined()) dst = value_of(t);
    };
    report->L_A = value_of(p.L_A);
    report->L_P = value_of(p.L_P);
    report->L_S = value_of(p.L_S);
    report->L_W = value_of(p.L_W);
    opt(p.ip, report->ip);
    opt(p.gd, report->gd);
    opt(p.ptd, report->ptd);
    opt(p.consistency, report->consistency);
    opt(p.real_l1, report->real_l1);
    opt(p.imag_l1, report->imag_l1);
    opt(p.mel, report->mel);
    opt(p.feature_match, report->feature_match);
    opt(p.adversarial, report->adversarial);
    report->L_G = report->weighted_total(w);
  }
  return total;
}

#define APNET2_INSTANTIATE_LOSSES(T)                                                                        \
  template Tensor<T> amplitude_loss(const Tensor<T>&, const Tensor<T>&);                                     \
  template PhaseLoss<T> phase_loss(const Tensor<T>&, const Tensor<T>&);                                      \
  template ad::ComplexTensor<T> consistent_projection(const ad::ComplexTensor<T>&, const dsp::StftConfig&);  \
  template SpectrumLoss<T> stft_spectrum_loss(const ad::ComplexTensor<T>&, const ad::ComplexTensor<T>&,      \
                                              const dsp::StftConfig&);                                       \
  template class MelAnalyzer<T>;                                                                             \
  template Tensor<T> mel_loss(const Tensor<T>&, const Tensor<T>&, const MelAnalyzer<T>&);                    \
  template Tensor<T> feature_matching_loss(const std::vector<model::SubOutput<T>>&,                          \
                                           const std::vector<model::SubOutput<T>>&);                         \
  template Tensor<T> gan_loss_generator(const std::vector<Tensor<T>>&, GanKind);                             \
  template Tensor<T> gan_loss_discriminator(const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&,    \
                                            GanKind);                                                        \
  template std::vector<Tensor<T>> scores_of(const std::vector<model::SubOutput<T>>&);                        \
  template Tensor<T> generator_total(const GeneratorLossParts<T>&, const LossWeights&, LossReport*);

APNET2_INSTANTIATE_LOSSES(float)
APNET2_INSTANTIATE_LOSSES(double)

}  // namespace apnet2::loss
