#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

// Little-endian byte streams for the on-disk containers.
namespace apnet2::io {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

class ByteWriter {
 public:
  template <typename V>
    requires std::is_arithmetic_v<V>
  void put(V v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(V));
  }
  template <typename V>
  void put_array(const V* data, std::size_t n) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n * sizeof(V));
  }
  void put_bytes(const void* data, std::size_t n) { put_array(static_cast<const std::uint8_t*>(data), n); }
  // u32 length + bytes
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked reader; every overrun throws std::runtime_error(context).
class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size, std::string context)
      : data_(data), size_(size), context_(std::move(context)) {}

  template <typename V>
    requires std::is_arithmetic_v<V>
  V get() {
    V v;
    std::memcpy(&v, take(sizeof(V)), sizeof(V));
    return v;
  }
  template <typename V>
  void get_array(V* out, std::size_t n) {
    if (n > (size_ - pos_) / sizeof(V)) fail();
    std::memcpy(out, take(n * sizeof(V)), n * sizeof(V));
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  std::size_t remaining() const { return size_ - pos_; }
  std::size_t position() const { return pos_; }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (n > size_ - pos_) fail();
    const auto* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  [[noreturn]] void fail() const { throw std::runtime_error(context_ + ": unexpected end of data"); }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string context_;
};

}  // namespace apnet2::io
