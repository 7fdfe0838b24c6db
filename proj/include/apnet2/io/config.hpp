#pragma once

#include <cstdint>
#include <string>

#include "apnet2/dsp/mel.hpp"
#include "apnet2/dsp/stft.hpp"
#include "apnet2/loss/losses.hpp"
#include "apnet2/model/discriminator.hpp"
#include "apnet2/model/generator.hpp"

namespace apnet2::io {

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t crop_samples = 8192;
  double lr = 2e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double weight_decay = 0.01;
  double lr_decay = 0.999;  // per epoch
  std::size_t max_steps = 1000;
  std::uint64_t seed = 1234;
  std::size_t log_every = 1;
  std::size_t checkpoint_every = 0;  // 0: only at the end
  bool operator==(const TrainConfig&) const = default;
};

// Every tunable of a run. Stored as one flat JSON object.
struct RunConfig {
  std::string preset = "full";  // "full" or "desk"
  int sample_rate = 22050;
  dsp::MelConfig mel;
  model::GeneratorConfig generator;  // carries the analysis StftConfig
  model::DiscriminatorConfig discriminator;
  loss::LossWeights weights;
  loss::GanKind gan = loss::GanKind::kHinge;
  TrainConfig train;

  static RunConfig for_preset(const std::string& preset);
  const dsp::StftConfig& stft() const { return generator.stft; }

  // Throws std::invalid_argument naming the offending key.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Unknown keys and ill-typed values are rejected; absent keys take the
// preset's defaults ("preset" itself defaults to "full").
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string dump_config(const RunConfig& cfg);
void save_config(const std::string& path, const RunConfig& cfg);

}  // namespace apnet2::io
