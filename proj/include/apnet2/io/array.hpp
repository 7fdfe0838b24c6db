#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Little-endian array container:
//   "APNA" | u16 version (1) | u8 dtype (1 = f32, 2 = f64) | u8 rank |
//   u64 dims[rank] | row-major values.
namespace apnet2::io {

struct Array {
  std::vector<std::uint64_t> shape;
  std::vector<double> values;  // widened on read; narrowed per dtype on write
  bool is_double = true;
};

std::string encode_array(const Array& a);
Array decode_array(const std::string& bytes, const std::string& name = "<memory>");
void write_array(const std::string& path, const Array& a);
Array read_array(const std::string& path);

}  // namespace apnet2::io
