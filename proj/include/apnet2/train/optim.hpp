#pragma once

#include <cstdint>
#include <vector>

#include "apnet2/ad/tensor.hpp"

namespace apnet2::train {

struct AdamWConfig {
  double beta1 = 0.8;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Moment buffers parallel to a ParameterList. Empty buffers are created on
// the first update.
template <typename T>
struct AdamWState {
  std::vector<std::vector<T>> m, v;
  std::uint64_t step = 0;
};

// One decoupled-decay AdamW step with bias correction:
//   theta <- theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps).
// A parameter without an accumulated gradient is treated as having g = 0.
// Throws std::invalid_argument if the state does not match the parameters.
template <typename T>
void adamw_update(const ad::ParameterList<T>& params, AdamWState<T>& state, double lr, const AdamWConfig& cfg);

template <typename T>
class AdamW {
 public:
  AdamW(ad::ParameterList<T> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {}
  void step(double lr) { adamw_update(params_, state_, lr, cfg_); }
  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }
  const ad::ParameterList<T>& parameters() const { return params_; }
  AdamWState<T>& state() { return state_; }
  const AdamWState<T>& state() const { return state_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  ad::ParameterList<T> params_;
  AdamWConfig cfg_;
  AdamWState<T> state_;
};

// base * decay^epoch
double lr_schedule(std::size_t epoch, double base = 2e-4, double decay = 0.999);

}  // namespace apnet2::train
