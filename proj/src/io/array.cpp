#include "apnet2/io/array.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "apnet2/io/binary.hpp"
#include "apnet2/io/wav.hpp"

namespace apnet2::io {

namespace {
constexpr char kMagic[4] = {'A', 'P', 'N', 'A'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kF32 = 1, kF64 = 2;

std::uint64_t count(const std::vector<std::uint64_t>& shape) {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}
}  // namespace

std::string encode_array(const Array& a) {
  if (count(a.shape) != a.values.size()) throw std::invalid_argument("array: shape does not match value count");
  if (a.shape.size() > 255) throw std::invalid_argument("array: rank above 255");
  ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put(kVersion);
  w.put(a.is_double ? kF64 : kF32);
  w.put(static_cast<std::uint8_t>(a.shape.size()));
  for (auto d : a.shape) w.put(d);
  for (double v : a.values) {
    if (a.is_double)
      w.put(v);
    else
      w.put(static_cast<float>(v));
  }
  return std::string(w.bytes().begin(), w.bytes().end());
}

Array decode_array(const std::string& bytes, const std::string& name) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data());
  if (bytes.size() < 8 || std::memcmp(p, kMagic, 4) != 0) throw DataError("array " + name + ": bad magic");
  ByteReader r(p + 4, bytes.size() - 4, "array " + name);
  Array a;
  try {
    if (const auto v = r.get<std::uint16_t>(); v != kVersion)
      throw DataError("array " + name + ": unsupported version " + std::to_string(v));
    const auto dtype = r.get<std::uint8_t>();
    if (dtype != kF32 && dtype != kF64) throw DataError("array " + name + ": unknown dtype " + std::to_string(dtype));
    a.is_double = dtype == kF64;
    a.shape.resize(r.get<std::uint8_t>());
    for (auto& d : a.shape) d = r.get<std::uint64_t>();
    const auto n = count(a.shape);
    const std::size_t width = a.is_double ? 8 : 4;
    if (n != r.remaining() / width || r.remaining() % width != 0)
      throw DataError("array " + name + ": payload size does not match shape");
    a.values.resize(n);
    for (auto& v : a.values) v = a.is_double ? r.get<double>() : static_cast<double>(r.get<float>());
  } catch (const DataError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw DataError(e.what());
  }
  return a;
}

void write_array(const std::string& path, const Array& a) {
  const auto bytes = encode_array(a);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("array " + path + ": cannot write");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Array read_array(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("array " + path + ": cannot open");
  return decode_array(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()), path);
}

}  // namespace apnet2::io
