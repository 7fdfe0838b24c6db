#include "apnet2/io/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace apnet2::io {

using nlohmann::json;

RunConfig RunConfig::for_preset(const std::string& preset) {
  RunConfig c;
  c.preset = preset;
  if (preset == "full") {
    c.generator = model::GeneratorConfig::full();
    c.discriminator = model::DiscriminatorConfig::full();
  } else if (preset == "desk") {
    c.generator = model::GeneratorConfig::desk();
    c.discriminator = model::DiscriminatorConfig::desk();
  } else {
    throw std::invalid_argument("config: preset must be \"full\" or \"desk\", got \"" + preset + "\"");
  }
  return c;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument("config: " + key + " " + why);
  };
  if (sample_rate <= 0) fail("sample_rate", "must be positive");
  if (mel.sample_rate != sample_rate) fail("sample_rate", "disagrees with the mel configuration");
  if (mel.n_mels == 0) fail("n_mels", "must be positive");
  if (!(mel.f_min >= 0 && mel.f_min < mel.f_max && mel.f_max <= sample_rate / 2.0))
    fail("f_max", "must satisfy 0 <= f_min < f_max <= sample_rate / 2");
  if (!(mel.amp_floor > 0)) fail("amp_floor", "must be positive");
  if (generator.n_mels != mel.n_mels) fail("n_mels", "disagrees with the generator input size");
  try {
    generator.validate();
  } catch (const std::invalid_argument& e) {
    fail("generator/stft", std::string("invalid: ") + e.what());
  }
  try {
    discriminator.validate();
  } catch (const std::invalid_argument& e) {
    fail("discriminator", std::string("invalid: ") + e.what());
  }
  try {
    weights.validate();
  } catch (const std::invalid_argument&) {
    fail("lambda_*", "must be finite and non-negative");
  }
  if (train.batch_size == 0) fail("batch_size", "must be positive");
  if (train.crop_samples == 0 || train.crop_samples % stft().hop != 0)
    fail("crop_samples", "must be a positive multiple of hop (" + std::to_string(stft().hop) + ")");
  if (train.crop_samples < discriminator.min_length())
    fail("crop_samples", "must be at least the largest MRD window (" + std::to_string(discriminator.min_length()) + ")");
  if (!(train.lr > 0)) fail("lr", "must be positive");
  if (!(train.beta1 >= 0 && train.beta1 < 1)) fail("beta1", "must be in [0, 1)");
  if (!(train.beta2 >= 0 && train.beta2 < 1)) fail("beta2", "must be in [0, 1)");
  if (!(train.weight_decay >= 0)) fail("weight_decay", "must be non-negative");
  if (!(train.lr_decay > 0 && train.lr_decay <= 1)) fail("lr_decay", "must be in (0, 1]");
}

namespace {

const char* window_name(dsp::WindowKind w) { return w == dsp::WindowKind::kHann ? "hann" : "rectangular"; }

json to_json(const RunConfig& c) {
  const auto& g = c.generator;
  const auto& d = c.discriminator;
  const auto& t = c.train;
  json res = json::array();
  for (const auto& r : d.resolutions) res.push_back({r.n_fft, r.hop, r.win});
  return json{
      {"preset", c.preset},
      {"sample_rate", c.sample_rate},
      {"n_fft", g.stft.n_fft},
      {"hop", g.stft.hop},
      {"win_length", g.stft.win_length},
      {"window", window_name(g.stft.window)},
      {"centered", g.stft.centered},
      {"n_mels", c.mel.n_mels},
      {"f_min", c.mel.f_min},
      {"f_max", c.mel.f_max},
      {"amp_floor", c.mel.amp_floor},
      {"channels", g.channels},
      {"expansion", g.expansion},
      {"blocks", g.blocks},
      {"block_kernel", g.block_kernel},
      {"io_kernel", g.io_kernel},
      {"mpd_periods", d.periods},
      {"mpd_channels", d.mpd_channels},
      {"mrd_resolutions", res},
      {"mrd_channels", d.mrd_channels},
      {"leaky_slope", d.slope},
      {"lambda_A", c.weights.lambda_A},
      {"lambda_P", c.weights.lambda_P},
      {"lambda_S", c.weights.lambda_S},
      {"lambda_W", c.weights.lambda_W},
      {"mel_weight", c.weights.mel_weight},
      {"fm_weight", c.weights.fm_weight},
      {"gan", c.gan == loss::GanKind::kHinge ? "hinge" : "lsgan"},
      {"batch_size", t.batch_size},
      {"crop_samples", t.crop_samples},
      {"lr", t.lr},
      {"beta1", t.beta1},
      {"beta2", t.beta2},
      {"weight_decay", t.weight_decay},
      {"lr_decay", t.lr_decay},
      {"max_steps", t.max_steps},
      {"seed", t.seed},
      {"log_every", t.log_every},
      {"checkpoint_every", t.checkpoint_every},
  };
}

template <typename V>
void read(const json& j, const char* key, V& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config: key \"") + key + "\" has the wrong type");
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");

  std::string preset = "full";
  read(j, "preset", preset);
  RunConfig c = RunConfig::for_preset(preset);
  const json known = to_json(c);
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw std::invalid_argument("config: unknown key \"" + key + "\"");

  auto& g = c.generator;
  auto& d = c.discriminator;
  auto& t = c.train;
  read(j, "sample_rate", c.sample_rate);
  c.mel.sample_rate = c.sample_rate;
  read(j, "n_fft", g.stft.n_fft);
  read(j, "hop", g.stft.hop);
  read(j, "win_length", g.stft.win_length);
  std::string window = "hann";
  read(j, "window", window);
  if (window == "hann")
    g.stft.window = dsp::WindowKind::kHann;
  else if (window == "rectangular")
    g.stft.window = dsp::WindowKind::kRectangular;
  else
    throw std::invalid_argument("config: window must be \"hann\" or \"rectangular\"");
  read(j, "centered", g.stft.centered);
  read(j, "n_mels", c.mel.n_mels);
  g.n_mels = c.mel.n_mels;
  read(j, "f_min", c.mel.f_min);
  read(j, "f_max", c.mel.f_max);
  read(j, "amp_floor", c.mel.amp_floor);
  read(j, "channels", g.channels);
  read(j, "expansion", g.expansion);
  read(j, "blocks", g.blocks);
  read(j, "block_kernel", g.block_kernel);
  read(j, "io_kernel", g.io_kernel);
  read(j, "mpd_periods", d.periods);
  read(j, "mpd_channels", d.mpd_channels);
  if (j.contains("mrd_resolutions")) {
    std::vector<std::vector<std::size_t>> res;
    read(j, "mrd_resolutions", res);
    d.resolutions.clear();
    for (const auto& r : res) {
      if (r.size() != 3) throw std::invalid_argument("config: mrd_resolutions entries are [n_fft, hop, win]");
      d.resolutions.push_back({r[0], r[1], r[2]});
    }
  }
  read(j, "mrd_channels", d.mrd_channels);
  read(j, "leaky_slope", d.slope);
  read(j, "lambda_A", c.weights.lambda_A);
  read(j, "lambda_P", c.weights.lambda_P);
  read(j, "lambda_S", c.weights.lambda_S);
  read(j, "lambda_W", c.weights.lambda_W);
  read(j, "mel_weight", c.weights.mel_weight);
  read(j, "fm_weight", c.weights.fm_weight);
  std::string gan = "hinge";
  read(j, "gan", gan);
  if (gan == "hinge")
    c.gan = loss::GanKind::kHinge;
  else if (gan == "lsgan")
    c.gan = loss::GanKind::kLeastSquares;
  else
    throw std::invalid_argument("config: gan must be \"hinge\" or \"lsgan\"");
  read(j, "batch_size", t.batch_size);
  read(j, "crop_samples", t.crop_samples);
  read(j, "lr", t.lr);
  read(j, "beta1", t.beta1);
  read(j, "beta2", t.beta2);
  read(j, "weight_decay", t.weight_decay);
  read(j, "lr_decay", t.lr_decay);
  read(j, "max_steps", t.max_steps);
  read(j, "seed", t.seed);
  read(j, "log_every", t.log_every);
  read(j, "checkpoint_every", t.checkpoint_every);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << dump_config(cfg);
}

}  // namespace apnet2::io
