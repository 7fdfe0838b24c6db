// apnet2: feature extraction, training, synthesis, evaluation and benchmarking.
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric abort.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "apnet2/dsp/mel.hpp"
#include "apnet2/dsp/spectral.hpp"
#include "apnet2/io/array.hpp"
#include "apnet2/io/config.hpp"
#include "apnet2/io/manifest.hpp"
#include "apnet2/io/vocoder.hpp"
#include "apnet2/io/wav.hpp"
#include "apnet2/metrics/metrics.hpp"
#include "apnet2/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace apnet2;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kNumeric = 4 };

io::RunConfig read_config(const std::string& path) {
  try {
    return io::load_config(path);
  } catch (const std::runtime_error& e) {
    throw io::DataError(e.what());
  }
}

io::Array matrix_array(const dsp::Matrix<double>& m) { return {{m.rows, m.cols}, m.data, true}; }

io::Vocoder load_vocoder(const io::RunConfig& cfg, const std::string& ckpt_path) {
  const auto ckpt = train::load_checkpoint(ckpt_path);
  if (!(ckpt.config.generator == cfg.generator))
    throw io::DataError("checkpoint " + ckpt_path + " holds a different generator configuration than the config");
  return io::Vocoder(cfg, train::load_generator(ckpt));
}

std::vector<dsp::Waveform<double>> read_clips(const std::vector<std::string>& paths, int rate) {
  std::vector<dsp::Waveform<double>> clips;
  clips.reserve(paths.size());
  for (const auto& p : paths) clips.push_back(io::read_wav(p, rate));
  return clips;
}

int cmd_features(const std::string& config, const std::vector<std::string>& wavs, const std::string& out_dir) {
  const auto cfg = read_config(config);
  const auto fb = dsp::MelFilterbank<double>::build(cfg.mel, cfg.stft());
  fs::create_directories(out_dir);
  for (const auto& path : wavs) {
    const auto w = io::read_wav(path, cfg.sample_rate);
    const auto spec = dsp::stft(w, cfg.stft());
    const std::string stem = (fs::path(out_dir) / fs::path(path).stem()).string();
    io::write_array(stem + ".mel.apna", matrix_array(dsp::mel_spectrogram(w, fb, cfg.stft(), cfg.mel.amp_floor).values));
    io::write_array(stem + ".logamp.apna", matrix_array(dsp::log_amplitude(spec, cfg.mel.amp_floor).values));
    io::write_array(stem + ".phase.apna", matrix_array(dsp::phase_of(spec).values));
    std::cout << path << " -> " << stem << ".{mel,logamp,phase}.apna (" << spec.frames() << " frames)\n";
  }
  return kOk;
}

int cmd_train(const std::string& config, const std::string& manifest_path, const std::string& out_dir,
              const std::string& resume, long max_steps) {
  auto cfg = read_config(config);
  if (max_steps >= 0) cfg.train.max_steps = static_cast<std::size_t>(max_steps);
  const auto manifest = io::load_manifest(manifest_path);
  const auto paths = manifest.paths(io::Split::kTrain);
  if (paths.empty()) throw io::DataError("manifest " + manifest_path + " has no train entries");
  std::vector<dsp::Waveform<float>> clips;
  for (const auto& w : read_clips(paths, cfg.sample_rate))
    clips.push_back({std::vector<float>(w.samples.begin(), w.samples.end()), w.sample_rate});
  for (std::size_t i = 0; i < clips.size(); ++i)
    if (clips[i].samples.size() < cfg.discriminator.min_length())
      std::cerr << "warning: " << paths[i] << " is shorter than " << cfg.discriminator.min_length()
                << " samples and will be zero-padded\n";

  train::Trainer trainer(cfg, std::move(clips));
  if (!resume.empty()) trainer.restore(train::load_checkpoint(resume));
  fs::create_directories(out_dir);
  io::save_config((fs::path(out_dir) / "config.json").string(), cfg);
  std::ofstream log_file((fs::path(out_dir) / "train.log").string(), resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log_file) throw io::DataError("cannot write log in " + out_dir);

  // Log to the file and echo to standard output.
  struct Tee : std::streambuf {
    std::streambuf *a, *b;
    int overflow(int c) override {
      if (c == EOF) return !EOF;
      return a->sputc(static_cast<char>(c)) == EOF || b->sputc(static_cast<char>(c)) == EOF ? EOF : c;
    }
    int sync() override { return a->pubsync() | b->pubsync(); }
  } tee;
  tee.a = log_file.rdbuf();
  tee.b = std::cout.rdbuf();
  std::ostream log(&tee);
  const std::string ckpt = (fs::path(out_dir) / "checkpoint.apn2").string();
  try {
    trainer.run(log, ckpt);
  } catch (const train::NumericError&) {
    log.flush();
    throw;
  }
  std::cout << "checkpoint: " << ckpt << "\n";
  return kOk;
}

int cmd_synth(const std::string& config, const std::string& ckpt, const std::string& input, const std::string& output) {
  const auto cfg = read_config(config);
  const auto vocoder = load_vocoder(cfg, ckpt);
  dsp::Waveform<double> out;
  if (fs::path(input).extension() == ".wav") {
    out = vocoder.generate(vocoder.mel_of(io::read_wav(input, cfg.sample_rate)));
  } else {
    const auto a = io::read_array(input);
    const auto& s = a.shape;
    const bool ok = (s.size() == 2 || (s.size() == 3 && s[0] == 1)) && s.back() == cfg.mel.n_mels && s[s.size() - 2] > 0;
    if (!ok) throw io::DataError("mel input " + input + " must have shape [frames, " + std::to_string(cfg.mel.n_mels) + "]");
    const ad::Tensor<float> mel({1, s[s.size() - 2], s.back()}, std::vector<float>(a.values.begin(), a.values.end()));
    out = vocoder.generate(mel);
  }
  for (double x : out.samples)
    if (!std::isfinite(x)) throw train::NumericError("audio");
  io::write_wav(output, out);
  std::cout << output << ": " << out.samples.size() << " samples\n";
  return kOk;
}

int cmd_eval(const std::string& config, const std::string& ref_dir, const std::string& est_dir, bool per_file,
             bool kv) {
  const auto cfg = read_config(config);
  std::vector<fs::path> refs;
  if (!fs::is_directory(ref_dir)) throw io::DataError("not a directory: " + ref_dir);
  if (!fs::is_directory(est_dir)) throw io::DataError("not a directory: " + est_dir);
  for (const auto& e : fs::directory_iterator(ref_dir))
    if (e.is_regular_file() && e.path().extension() == ".wav") refs.push_back(e.path());
  std::sort(refs.begin(), refs.end());
  if (refs.empty()) throw io::DataError("no .wav files in " + ref_dir);

  std::vector<metrics::MetricReport> reports;
  for (const auto& ref_path : refs) {
    const auto est_path = fs::path(est_dir) / ref_path.filename();
    if (!fs::exists(est_path)) throw io::DataError("missing estimate " + est_path.string());
    auto ref = io::read_wav(ref_path.string(), cfg.sample_rate);
    auto est = io::read_wav(est_path.string(), cfg.sample_rate);
    // Generated audio is frame aligned: allow it to overhang by less than a hop.
    const auto a = ref.samples.size(), b = est.samples.size();
    if ((a > b ? a - b : b - a) >= cfg.stft().hop)
      throw io::DataError("length mismatch for " + ref_path.filename().string() + ": " + std::to_string(a) + " vs " +
                          std::to_string(b) + " samples");
    ref.samples.resize(std::min(a, b));
    est.samples.resize(std::min(a, b));
    reports.push_back(metrics::evaluate(ref, est, cfg.mel, cfg.stft()));
    if (per_file) std::cout << "# " << ref_path.filename().string() << "\n" << (kv ? reports.back().name_values() : reports.back().table());
  }
  const auto avg = metrics::average(reports);
  if (per_file) std::cout << "# mean over " << reports.size() << " files\n";
  std::cout << (kv ? avg.name_values() : avg.table());
  return kOk;
}

int cmd_bench(const std::string& config, const std::string& ckpt, const std::string& manifest_path, bool kv) {
  const auto cfg = read_config(config);
  const auto vocoder = load_vocoder(cfg, ckpt);
  const auto manifest = io::load_manifest(manifest_path);
  std::vector<std::string> paths;
  for (const auto& e : manifest.entries) paths.push_back(e.path);
  if (paths.empty()) throw io::DataError("manifest " + manifest_path + " is empty");
  const auto r = io::bench(vocoder, read_clips(paths, cfg.sample_rate));
  const auto rtf = metrics::rtf(r.gen_seconds, r.audio_seconds);
  if (kv) {
    std::printf("clips=%zu\ngen_seconds=%.6f\naudio_seconds=%.6f\nrtf_value=%.6g\nrtf_multiple=%.6g\n", r.clips,
                r.gen_seconds, r.audio_seconds, rtf.value, rtf.multiple);
  } else {
    std::printf("clips          %zu\ngeneration (s) %.3f\naudio (s)      %.3f\nRTF            %s\n", r.clips,
                r.gen_seconds, r.audio_seconds, metrics::format_rtf(rtf).c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"APNet2 vocoder: features, train, synth, eval, bench"};
  app.require_subcommand(1);
  std::string config, manifest, ckpt, input, output, out_dir = ".", resume, ref_dir, est_dir;
  std::vector<std::string> wavs;
  long max_steps = -1;
  bool per_file = false, kv = false;

  auto* features = app.add_subcommand("features", "write mel, log-amplitude and phase arrays for each wav");
  features->add_option("config", config, "run config (JSON)")->required();
  features->add_option("wav", wavs, "input wav files")->required();
  features->add_option("-o,--out-dir", out_dir, "output directory");

  auto* train_cmd = app.add_subcommand("train", "train on the manifest's train split");
  train_cmd->add_option("config", config, "run config (JSON)")->required();
  train_cmd->add_option("manifest", manifest, "dataset manifest")->required();
  train_cmd->add_option("-o,--out-dir", out_dir, "directory for checkpoint.apn2, train.log and config.json");
  train_cmd->add_option("--resume", resume, "checkpoint to resume from");
  train_cmd->add_option("--max-steps", max_steps, "override max_steps")->check(CLI::NonNegativeNumber);

  auto* synth = app.add_subcommand("synth", "generate a waveform from a wav (analysis-synthesis) or a mel array");
  synth->add_option("config", config, "run config (JSON)")->required();
  synth->add_option("checkpoint", ckpt, "checkpoint")->required();
  synth->add_option("input", input, ".wav, or .apna mel array [frames, n_mels]")->required();
  synth->add_option("output", output, "output wav")->required();

  auto* eval = app.add_subcommand("eval", "paired objective metrics between two directories of wavs");
  eval->add_option("config", config, "run config (JSON)")->required();
  eval->add_option("ref_dir", ref_dir, "reference wavs")->required();
  eval->add_option("est_dir", est_dir, "estimated wavs with the same file names")->required();
  eval->add_flag("--per-file", per_file, "also report every file");
  eval->add_flag("--kv", kv, "name=value lines instead of a table");

  auto* bench_cmd = app.add_subcommand("bench", "real-time factor of generation over a manifest");
  bench_cmd->add_option("config", config, "run config (JSON)")->required();
  bench_cmd->add_option("checkpoint", ckpt, "checkpoint")->required();
  bench_cmd->add_option("manifest", manifest, "clips to generate (all splits)")->required();
  bench_cmd->add_flag("--kv", kv, "name=value lines instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*features) return cmd_features(config, wavs, out_dir);
    if (*train_cmd) return cmd_train(config, manifest, out_dir, resume, max_steps);
    if (*synth) return cmd_synth(config, ckpt, input, output);
    if (*eval) return cmd_eval(config, ref_dir, est_dir, per_file, kv);
    if (*bench_cmd) return cmd_bench(config, ckpt, manifest, kv);
  } catch (const train::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kNumeric;
  } catch (const io::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const train::CheckpointError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
