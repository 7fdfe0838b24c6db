#include "apnet2/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

namespace apnet2::ad {

GradCheckResult grad_check(const std::function<Tensor<double>()>& f,
                           const std::vector<Tensor<double>>& inputs, const GradCheckOptions& opt) {
  for (auto t : inputs) {
    auto g = t.mutable_grad();
    std::fill(g.begin(), g.end(), 0.0);
  }
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    const Tensor<double> loss = f();
    backward(tape, loss);
  }

  std::vector<std::pair<std::size_t, std::size_t>> sites;
  std::size_t total = 0;
  for (const auto& t : inputs) total += t.numel();
  auto locate = [&](std::size_t flat) {
    std::size_t k = 0;
    while (flat >= inputs[k].numel()) flat -= inputs[k++].numel();
    return std::pair{k, flat};
  };
  if (opt.samples == 0 || opt.samples >= total) {
    for (std::size_t i = 0; i < total; ++i) sites.push_back(locate(i));
  } else {
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (std::size_t i = 0; i < opt.samples; ++i) sites.push_back(locate(pick(rng)));
  }

  GradCheckResult result;
  NoGradScope<double> no_grad;
  for (const auto& [k, i] : sites) {
    Tensor<double> t = inputs[k];
    auto v = t.mutable_values();
    const double saved = v[i];
    v[i] = saved + opt.eps;
    const double up = f().item();
    v[i] = saved - opt.eps;
    const double down = f().item();
    v[i] = saved;
    const double numeric = (up - down) / (2 * opt.eps);
    const double analytic = t.grad()[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic - numeric) / denom);
    result.analytic.push_back(analytic);
    result.numeric.push_back(numeric);
    ++result.checked;
  }
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < result.checked; ++i) {
    diff += (result.analytic[i] - result.numeric[i]) * (result.analytic[i] - result.numeric[i]);
    na += result.analytic[i] * result.analytic[i];
    nn += result.numeric[i] * result.numeric[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  result.norm_rel_error = scale > 0 ? std::sqrt(diff) / scale : 0.0;
  return result;
}

}  // namespace apnet2::ad
