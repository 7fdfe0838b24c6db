#include "apnet2/io/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "apnet2/io/wav.hpp"

namespace apnet2::io {

namespace fs = std::filesystem;

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::vector<std::string> Manifest::paths(Split split) const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(e.path);
  return out;
}

Manifest parse_manifest(const std::string& text, const std::string& base_dir, bool check_files) {
  Manifest m;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string head;
    if (!(fields >> head)) continue;
    auto fail = [&](const std::string& why) { return DataError("manifest line " + std::to_string(lineno) + ": " + why); };
    std::string rest;
    std::getline(fields >> std::ws, rest);
    while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.back()))) rest.pop_back();
    if (head == "seed") {
      try {
        std::size_t used = 0;
        m.seed = std::stoull(rest, &used);
        if (used != rest.size()) throw std::invalid_argument(rest);
      } catch (const std::exception&) {
        throw fail("bad seed \"" + rest + "\"");
      }
      continue;
    }
    ManifestEntry e;
    if (head == "train")
      e.split = Split::kTrain;
    else if (head == "val")
      e.split = Split::kVal;
    else if (head == "test")
      e.split = Split::kTest;
    else
      throw fail("unknown split \"" + head + "\" (train, val or test)");
    if (rest.empty()) throw fail("missing path");
    fs::path p(rest);
    if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
    e.path = p.lexically_normal().string();
    if (!seen.insert(e.path).second) throw fail("duplicate path " + e.path);
    if (check_files && !fs::is_regular_file(e.path)) throw fail("file not found: " + e.path);
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest " + path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), fs::path(path).parent_path().string());
}

std::string dump_manifest(const Manifest& m) {
  std::ostringstream out;
  if (m.seed) out << "seed " << *m.seed << '\n';
  for (const auto& e : m.entries) out << split_name(e.split) << ' ' << e.path << '\n';
  return out.str();
}

Manifest make_split(std::vector<std::string> paths, std::size_t val, std::size_t test, std::uint64_t seed) {
  if (val + test > paths.size()) throw std::invalid_argument("make_split: more held-out clips than paths");
  std::mt19937_64 rng(seed);
  for (std::size_t i = paths.size(); i > 1; --i) std::swap(paths[i - 1], paths[rng() % i]);
  Manifest m;
  m.seed = seed;
  for (std::size_t i = 0; i < paths.size(); ++i)
    m.entries.push_back({i < val ? Split::kVal : i < val + test ? Split::kTest : Split::kTrain, paths[i]});
  return m;
}

}  // namespace apnet2::io
