#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Text manifest, one entry per line:  <split> <path>
// split is train, val or test; relative paths resolve against the manifest's
// directory; '#' starts a comment; an optional "seed <n>" line records the
// seed of a generated split.
namespace apnet2::io {

enum class Split { kTrain, kVal, kTest };

struct ManifestEntry {
  Split split = Split::kTrain;
  std::string path;
  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::optional<std::uint64_t> seed;

  std::vector<std::string> paths(Split split) const;
};

// Rejects unknown splits, duplicate paths and (when check_files) missing files.
Manifest parse_manifest(const std::string& text, const std::string& base_dir = "", bool check_files = true);
Manifest load_manifest(const std::string& path);
std::string dump_manifest(const Manifest& m);

// Seeded random split of `paths` into val/test/train counts.
Manifest make_split(std::vector<std::string> paths, std::size_t val, std::size_t test, std::uint64_t seed);

const char* split_name(Split s);

}  // namespace apnet2::io
