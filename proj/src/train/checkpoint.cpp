#include "apnet2/train/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "apnet2/io/binary.hpp"

namespace apnet2::train {

namespace {

constexpr char kMagic[8] = {'A', 'P', 'N', '2', 'C', 'K', 'P', 'T'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8;

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void put_arrays(io::ByteWriter& w, const std::vector<NamedArray>& arrays) {
  w.put(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    w.put_string(a.name);
    w.put(static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) w.put(static_cast<std::uint64_t>(d));
    w.put_array(a.values.data(), a.values.size());
  }
}

std::vector<NamedArray> get_arrays(io::ByteReader& r) {
  std::vector<NamedArray> arrays(r.get<std::uint32_t>());
  for (auto& a : arrays) {
    a.name = r.get_string();
    a.shape.resize(r.get<std::uint32_t>());
    for (auto& d : a.shape) d = r.get<std::uint64_t>();
    const auto n = ad::numel(a.shape);
    if (n > r.remaining() / sizeof(float)) throw std::runtime_error("checkpoint: array larger than payload");
    a.values.resize(n);
    r.get_array(a.values.data(), n);
  }
  return arrays;
}

void put_optimizer(io::ByteWriter& w, const OptimizerSnapshot& s) {
  w.put(s.step);
  w.put(static_cast<std::uint32_t>(s.m.size()));
  for (std::size_t i = 0; i < s.m.size(); ++i) {
    w.put(static_cast<std::uint64_t>(s.m[i].size()));
    w.put_array(s.m[i].data(), s.m[i].size());
    w.put_array(s.v[i].data(), s.v[i].size());
  }
}

OptimizerSnapshot get_optimizer(io::ByteReader& r) {
  OptimizerSnapshot s;
  s.step = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  s.m.resize(count);
  s.v.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto n = r.get<std::uint64_t>();
    if (n > r.remaining() / (2 * sizeof(float))) throw std::runtime_error("checkpoint: buffer larger than payload");
    s.m[i].resize(n);
    s.v[i].resize(n);
    r.get_array(s.m[i].data(), n);
    r.get_array(s.v[i].data(), n);
  }
  return s;
}

}  // namespace

std::vector<NamedArray> snapshot(const ad::ParameterList<float>& params) {
  std::vector<NamedArray> out;
  out.reserve(params.size());
  for (const auto* p : params) {
    const auto v = p->tensor.values();
    out.push_back({p->name, p->tensor.shape(), std::vector<float>(v.begin(), v.end())});
  }
  return out;
}

void restore(const ad::ParameterList<float>& params, const std::vector<NamedArray>& arrays) {
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : arrays)
    if (!by_name.emplace(a.name, &a).second) throw std::runtime_error("checkpoint: duplicate parameter " + a.name);
  if (by_name.size() != params.size())
    throw std::runtime_error("checkpoint: holds " + std::to_string(by_name.size()) + " parameters, model has " +
                             std::to_string(params.size()));
  for (auto* p : params) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: missing parameter " + p->name);
    if (it->second->shape != p->tensor.shape())
      throw std::runtime_error("checkpoint: parameter " + p->name + " has shape " + ad::to_string(it->second->shape) +
                               ", model expects " + ad::to_string(p->tensor.shape()));
    auto dst = p->tensor.mutable_values();
    std::copy(it->second->values.begin(), it->second->values.end(), dst.begin());
  }
}

OptimizerSnapshot snapshot(const AdamWState<float>& state) { return {state.step, state.m, state.v}; }

AdamWState<float> restore(const OptimizerSnapshot& snap) { return {snap.m, snap.v, snap.step}; }

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  io::ByteWriter payload;
  payload.put(c.step);
  payload.put(c.epoch);
  payload.put_string(io::dump_config(c.config));
  payload.put_string(c.sampler_state);
  put_arrays(payload, c.generator);
  put_arrays(payload, c.discriminator);
  put_optimizer(payload, c.opt_g);
  put_optimizer(payload, c.opt_d);
  const auto& body = payload.bytes();

  io::ByteWriter file;
  file.put_bytes(kMagic, sizeof kMagic);
  file.put(kCheckpointVersion);
  file.put(static_cast<std::uint64_t>(body.size()));
  file.put_bytes(body.data(), body.size());
  file.put(crc_of(body.data(), body.size()));

  // Write then rename so an interrupted save never clobbers a good file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "checkpoint: cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(file.bytes().data()), static_cast<std::streamsize>(file.bytes().size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "checkpoint: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw CheckpointError(CheckpointError::Kind::kIo, "checkpoint: cannot rename " + tmp + " to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  using Kind = CheckpointError::Kind;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::kIo, "checkpoint: cannot open " + path);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError(Kind::kMagic, "checkpoint: " + path + " is not a checkpoint (bad magic)");
  if (bytes.size() < kHeaderSize)
    throw CheckpointError(Kind::kChecksum, "checkpoint: checksum error, " + path + " is truncated");
  io::ByteReader header(bytes.data() + sizeof kMagic, kHeaderSize - sizeof kMagic, "checkpoint header");
  const auto version = header.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError(Kind::kVersion, "checkpoint: unsupported version " + std::to_string(version) +
                                              " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  const auto size = header.get<std::uint64_t>();
  if (bytes.size() - kHeaderSize < 4 || size != bytes.size() - kHeaderSize - 4)
    throw CheckpointError(Kind::kChecksum, "checkpoint: checksum error, " + path + " is truncated or has trailing data");
  const std::uint8_t* body = bytes.data() + kHeaderSize;
  std::uint32_t stored;
  std::memcpy(&stored, body + size, 4);
  if (stored != crc_of(body, size))
    throw CheckpointError(Kind::kChecksum, "checkpoint: checksum error, " + path + " is corrupt");

  try {
    io::ByteReader r(body, size, "checkpoint payload");
    Checkpoint c;
    c.step = r.get<std::uint64_t>();
    c.epoch = r.get<std::uint64_t>();
    c.config = io::parse_config(r.get_string());
    c.sampler_state = r.get_string();
    c.generator = get_arrays(r);
    c.discriminator = get_arrays(r);
    c.opt_g = get_optimizer(r);
    c.opt_d = get_optimizer(r);
    if (r.remaining() != 0) throw std::runtime_error("trailing payload bytes");
    return c;
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::kContent, std::string("checkpoint: malformed payload: ") + e.what());
  }
}

}  // namespace apnet2::train
