#include "apnet2/train/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace apnet2::train {

template <typename T>
void adamw_update(const ad::ParameterList<T>& params, AdamWState<T>& state, double lr, const AdamWConfig& cfg) {
  if (state.m.empty() && state.v.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->tensor.numel(), T{0});
      state.v.emplace_back(p->tensor.numel(), T{0});
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw std::invalid_argument("adamw: state holds " + std::to_string(state.m.size()) + " buffers for " +
                                std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto n = params[i]->tensor.numel();
    const auto g = params[i]->tensor.grad();
    if (state.m[i].size() != n || state.v[i].size() != n || (!g.empty() && g.size() != n))
      throw std::invalid_argument("adamw: shape mismatch for parameter " + params[i]->name);
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - lr * cfg.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i]->tensor.mutable_values();
    const auto g = params[i]->tensor.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double gj = g.empty() ? 0.0 : static_cast<double>(g[j]);
      const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = (mj / c1) / (std::sqrt(vj / c2) + cfg.eps);
      theta[j] = static_cast<T>(static_cast<double>(theta[j]) * decay - lr * update);
    }
  }
}

double lr_schedule(std::size_t epoch, double base, double decay) {
  return base * std::pow(decay, static_cast<double>(epoch));
}

template void adamw_update(const ad::ParameterList<float>&, AdamWState<float>&, double, const AdamWConfig&);
template void adamw_update(const ad::ParameterList<double>&, AdamWState<double>&, double, const AdamWConfig&);

}  // namespace apnet2::train
