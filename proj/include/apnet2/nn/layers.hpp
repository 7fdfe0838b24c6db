#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "apnet2/ad/ops.hpp"
#include "apnet2/nn/init.hpp"

// Learnable layers over [batch, channels, frames] tensors.
namespace apnet2::nn {

using ad::Parameter;
using ad::ParameterList;
using ad::Tensor;

// Receives (site name, activation shape) for every intermediate activation.
using Observer = std::function<void(const std::string&, const ad::Shape&)>;

template <typename T>
class Conv1d {
 public:
  Conv1d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel, Rng& rng,
         ad::Conv1dOptions opt = {}, bool bias = true);

  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(ParameterList<T>& out);

  Parameter<T>& weight() { return weight_; }
  Parameter<T>* bias() { return bias_.get(); }

 private:
  Parameter<T> weight_;
  std::unique_ptr<Parameter<T>> bias_;
  ad::Conv1dOptions opt_;
};

template <typename T>
class Conv2d {
 public:
  Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw, Rng& rng,
         ad::Conv2dOptions opt = {});

  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(ParameterList<T>& out);

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
  ad::Conv2dOptions opt_;
};

// Normalizes each frame across channels.
template <typename T>
class LayerNorm {
 public:
  LayerNorm(std::string name, std::size_t channels, T eps = T(1e-6));

  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(ParameterList<T>& out);

  Parameter<T>& gamma() { return gamma_; }
  Parameter<T>& beta() { return beta_; }

 private:
  Parameter<T> gamma_;  // [C, 1]
  Parameter<T> beta_;
  T eps_;
};

// Global response normalization; gamma = beta = 0 at init makes it the identity.
template <typename T>
class Grn {
 public:
  Grn(std::string name, std::size_t channels, T eps = T(1e-6));

  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(ParameterList<T>& out);

  Parameter<T>& gamma() { return gamma_; }
  Parameter<T>& beta() { return beta_; }

 private:
  Parameter<T> gamma_;  // [C, 1]
  Parameter<T> beta_;
  T eps_;
};

struct BlockConfig {
  std::size_t channels = 512;
  std::size_t expansion = 1536;
  std::size_t kernel = 7;
};

// x + down(grn(gelu(up(ln(dw(x)))))); shape preserving.
template <typename T>
class ConvNeXtV2Block {
 public:
  ConvNeXtV2Block(std::string name, const BlockConfig& cfg, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x, const Observer* observe = nullptr) const;
  void collect(ParameterList<T>& out);

  Conv1d<T>& depthwise() { return dw_; }
  Conv1d<T>& up() { return up_; }
  Conv1d<T>& down() { return down_; }
  LayerNorm<T>& norm() { return ln_; }
  Grn<T>& grn() { return grn_; }

 private:
  std::string name_;
  BlockConfig cfg_;
  Conv1d<T> dw_;
  LayerNorm<T> ln_;
  Conv1d<T> up_;
  Grn<T> grn_;
  Conv1d<T> down_;
};

template <typename T>
std::size_t parameter_count(const ParameterList<T>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->tensor.numel();
  return n;
}

}  // namespace apnet2::nn
