#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "apnet2/ad/tensor.hpp"

namespace apnet2::ad {

struct GradCheckOptions {
  double eps = 1e-5;
  // 0 checks every element; otherwise this many elements drawn uniformly.
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  // ||a - n|| / max(||a||, ||n||) over all checked elements together.
  double norm_rel_error = 0.0;
  std::size_t checked = 0;
  std::vector<double> analytic, numeric;  // per checked element
};

// Compares the taped gradient of the scalar f() with respect to each leaf in
// `inputs` against central differences. Relative error per element is
// |a - n| / max(|a|, |n|, 1e-8). Leaf gradients are overwritten.
GradCheckResult grad_check(const std::function<Tensor<double>()>& f,
                           const std::vector<Tensor<double>>& inputs,
                           const GradCheckOptions& opt = {});

}  // namespace apnet2::ad
