#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "apnet2/ad/tensor.hpp"

namespace apnet2::nn {

// Platform-independent uniform draws: the standard distributions are not
// bit-reproducible across library implementations, the raw engine is.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t next() { return engine_(); }
  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

// Kaiming-uniform (fan-in, ReLU gain): U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <typename T>
std::vector<T> kaiming_uniform(std::size_t count, std::size_t fan_in, Rng& rng);

}  // namespace apnet2::nn
