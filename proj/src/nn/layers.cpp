#include "apnet2/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace apnet2::nn {

template <typename T>
std::vector<T> kaiming_uniform(std::size_t count, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<T> v(count);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return v;
}

template <typename T>
Conv1d<T>::Conv1d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel, Rng& rng,
                  ad::Conv1dOptions opt, bool bias)
    : weight_(name + ".weight", {out_ch, in_ch / opt.groups, kernel},
              kaiming_uniform<T>(out_ch * (in_ch / opt.groups) * kernel, (in_ch / opt.groups) * kernel, rng)),
      opt_(opt) {
  if (opt.groups == 0 || in_ch % opt.groups != 0 || out_ch % opt.groups != 0)
    throw std::invalid_argument(name + ": channels " + std::to_string(in_ch) + "->" + std::to_string(out_ch) +
                                " not divisible by groups " + std::to_string(opt.groups));
  if (bias) bias_ = std::make_unique<Parameter<T>>(name + ".bias", ad::Shape{out_ch}, std::vector<T>(out_ch, T{0}));
}

template <typename T>
Tensor<T> Conv1d<T>::operator()(const Tensor<T>& x) const {
  return ad::conv1d(x, weight_.tensor, bias_ ? bias_->tensor : Tensor<T>(), opt_);
}

template <typename T>
void Conv1d<T>::collect(ParameterList<T>& out) {
  out.push_back(&weight_);
  if (bias_) out.push_back(bias_.get());
}

template <typename T>
Conv2d<T>::Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw, Rng& rng,
                  ad::Conv2dOptions opt)
    : weight_(name + ".weight", {out_ch, in_ch, kh, kw}, kaiming_uniform<T>(out_ch * in_ch * kh * kw, in_ch * kh * kw, rng)),
      bias_(name + ".bias", {out_ch}, std::vector<T>(out_ch, T{0})),
      opt_(opt) {}

template <typename T>
Tensor<T> Conv2d<T>::operator()(const Tensor<T>& x) const {
  return ad::conv2d(x, weight_.tensor, bias_.tensor, opt_);
}

template <typename T>
void Conv2d<T>::collect(ParameterList<T>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
LayerNorm<T>::LayerNorm(std::string name, std::size_t channels, T eps)
    : gamma_(name + ".gamma", {channels, 1}, std::vector<T>(channels, T{1})),
      beta_(name + ".beta", {channels, 1}, std::vector<T>(channels, T{0})),
      eps_(eps) {}

template <typename T>
Tensor<T> LayerNorm<T>::operator()(const Tensor<T>& x) const {
  if (x.rank() != 3 || x.dim(1) != gamma_.tensor.dim(0))
    throw std::invalid_argument("layer_norm: expected [B, " + std::to_string(gamma_.tensor.dim(0)) + ", T], got " +
                                ad::to_string(x.shape()));
  const Tensor<T> centered = ad::sub(x, ad::mean(x, 1));
  const Tensor<T> var = ad::mean(ad::square(centered), 1);
  const Tensor<T> normed = ad::div(centered, ad::sqrt(ad::add_scalar(var, eps_)));
  return ad::add(ad::mul(normed, gamma_.tensor), beta_.tensor);
}

template <typename T>
void LayerNorm<T>::collect(ParameterList<T>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

template <typename T>
Grn<T>::Grn(std::string name, std::size_t channels, T eps)
    : gamma_(name + ".gamma", {channels, 1}, std::vector<T>(channels, T{0})),
      beta_(name + ".beta", {channels, 1}, std::vector<T>(channels, T{0})),
      eps_(eps) {}

template <typename T>
Tensor<T> Grn<T>::operator()(const Tensor<T>& x) const {
  if (x.rank() != 3 || x.dim(1) != gamma_.tensor.dim(0))
    throw std::invalid_argument("grn: expected [B, " + std::to_string(gamma_.tensor.dim(0)) + ", T], got " +
                                ad::to_string(x.shape()));
  const Tensor<T> g = ad::sqrt(ad::sum(ad::square(x), 2));            // [B, C, 1]
  const Tensor<T> n = ad::div(g, ad::add_scalar(ad::mean(g, 1), eps_));  // [B, C, 1]
  return ad::add(ad::add(ad::mul(ad::mul(x, n), gamma_.tensor), beta_.tensor), x);
}

template <typename T>
void Grn<T>::collect(ParameterList<T>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

template <typename T>
ConvNeXtV2Block<T>::ConvNeXtV2Block(std::string name, const BlockConfig& cfg, Rng& rng)
    : name_(name),
      cfg_(cfg),
      dw_(name + ".dwconv", cfg.channels, cfg.channels, cfg.kernel, rng,
          {.stride = 1, .padding = cfg.kernel / 2, .dilation = 1, .groups = cfg.channels}),
      ln_(name + ".norm", cfg.channels),
      up_(name + ".pwconv1", cfg.channels, cfg.expansion, 1, rng),
      grn_(name + ".grn", cfg.expansion),
      down_(name + ".pwconv2", cfg.expansion, cfg.channels, 1, rng) {
  if (cfg.kernel % 2 == 0) throw std::invalid_argument(name + ": depthwise kernel must be odd");
}

template <typename T>
Tensor<T> ConvNeXtV2Block<T>::operator()(const Tensor<T>& x, const Observer* observe) const {
  if (x.rank() != 3 || x.dim(1) != cfg_.channels)
    throw std::invalid_argument("convnext_v2_block: expected " + std::to_string(cfg_.channels) +
                                " channels, got " + ad::to_string(x.shape()));
  if (observe == nullptr) return ad::add(x, down_(grn_(ad::gelu(up_(ln_(dw_(x)))))));
  auto seen = [&](const char* site, Tensor<T> t) {
    (*observe)(name_ + "." + site, t.shape());
    return t;
  };
  Tensor<T> h = seen("dwconv", dw_(x));
  h = seen("norm", ln_(h));
  h = seen("pwconv1", up_(h));
  h = seen("gelu", ad::gelu(h));
  h = seen("grn", grn_(h));
  h = seen("pwconv2", down_(h));
  return seen("residual", ad::add(x, h));
}

template <typename T>
void ConvNeXtV2Block<T>::collect(ParameterList<T>& out) {
  dw_.collect(out);
  ln_.collect(out);
  up_.collect(out);
  grn_.collect(out);
  down_.collect(out);
}

template std::vector<float> kaiming_uniform(std::size_t, std::size_t, Rng&);
template std::vector<double> kaiming_uniform(std::size_t, std::size_t, Rng&);
template class Conv1d<float>;
template class Conv1d<double>;
template class Conv2d<float>;
template class Conv2d<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template class Grn<float>;
template class Grn<double>;
template class ConvNeXtV2Block<float>;
template class ConvNeXtV2Block<double>;

}  // namespace apnet2::nn
