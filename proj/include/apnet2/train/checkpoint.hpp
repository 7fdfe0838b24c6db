#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "apnet2/ad/tensor.hpp"
#include "apnet2/io/config.hpp"
#include "apnet2/train/optim.hpp"

namespace apnet2::train {

// Errors while reading a checkpoint; kind() separates format problems.
class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kIo, kMagic, kVersion, kChecksum, kContent };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  ad::Shape shape;
  std::vector<float> values;
  bool operator==(const NamedArray&) const = default;
};

struct OptimizerSnapshot {
  std::uint64_t step = 0;
  std::vector<std::vector<float>> m, v;  // parallel to the parameter list
  bool operator==(const OptimizerSnapshot&) const = default;
};

struct Checkpoint {
  io::RunConfig config;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::string sampler_state;  // opaque trainer data-order state
  std::vector<NamedArray> generator, discriminator;
  OptimizerSnapshot opt_g, opt_d;
  bool operator==(const Checkpoint&) const = default;
};

std::vector<NamedArray> snapshot(const ad::ParameterList<float>& params);
// Copies values by name. Missing names, extra names or shape mismatches throw.
void restore(const ad::ParameterList<float>& params, const std::vector<NamedArray>& arrays);

OptimizerSnapshot snapshot(const AdamWState<float>& state);
AdamWState<float> restore(const OptimizerSnapshot& snap);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace apnet2::train
