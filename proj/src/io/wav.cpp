#include "apnet2/io/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "apnet2/io/binary.hpp"

namespace apnet2::io {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::string fourcc(const std::uint8_t* p) { return std::string(reinterpret_cast<const char*>(p), 4); }

}  // namespace

short quantize_sample(double x) {
  const double s = std::nearbyint(x * 32768.0);
  return static_cast<short>(std::clamp(s, -32768.0, 32767.0));
}

dsp::Waveform<double> parse_wav(const std::string& bytes, const std::string& name, std::optional<int> expected_rate) {
  auto fail = [&](const std::string& why) -> DataError { return DataError("wav " + name + ": " + why); };
  const auto* data = reinterpret_cast<const std::uint8_t*>(bytes.data());
  if (bytes.size() < 12 || fourcc(data) != "RIFF" || fourcc(data + 8) != "WAVE")
    throw fail("malformed header (not a RIFF/WAVE file)");

  ByteReader r(data + 12, bytes.size() - 12, "wav " + name);
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  try {
    while (r.remaining() >= 8) {
      std::uint8_t id[4];
      r.get_array(id, 4);
      const auto size = r.get<std::uint32_t>();
      const std::string chunk = fourcc(id);
      if (chunk == "fmt ") {
        if (size < 16) throw fail("malformed fmt chunk");
        std::string fmt(size, '\0');
        r.get_array(fmt.data(), size);
        ByteReader f(reinterpret_cast<const std::uint8_t*>(fmt.data()), size, "wav fmt");
        std::uint16_t format = f.get<std::uint16_t>();
        channels = f.get<std::uint16_t>();
        rate = f.get<std::uint32_t>();
        f.get<std::uint32_t>();  // byte rate
        f.get<std::uint16_t>();  // block align
        bits = f.get<std::uint16_t>();
        if (format == kFormatExtensible) {
          if (size < 40) throw fail("malformed extensible fmt chunk");
          f.get<std::uint16_t>();  // cbSize
          f.get<std::uint16_t>();  // valid bits
          f.get<std::uint32_t>();  // channel mask
          format = f.get<std::uint16_t>();  // first two bytes of the subformat GUID
        }
        if (format != kFormatPcm) throw fail("unsupported codec (format tag " + std::to_string(format) + "), need PCM");
        if (bits != 16) throw fail("unsupported codec (" + std::to_string(bits) + "-bit PCM), need 16-bit");
        if (channels != 1) throw fail(std::to_string(channels) + " channels, need mono");
        if (rate == 0) throw fail("sample rate 0");
        have_fmt = true;
        if (size % 2) r.get<std::uint8_t>();
      } else if (chunk == "data") {
        if (!have_fmt) throw fail("data chunk before fmt chunk");
        if (size > r.remaining()) throw fail("truncated data chunk");
        if (size % 2) throw fail("data chunk is not a whole number of 16-bit samples");
        if (expected_rate && static_cast<int>(rate) != *expected_rate)
          throw fail("sample rate " + std::to_string(rate) + " Hz, expected " + std::to_string(*expected_rate) +
                     " Hz (no resampling)");
        dsp::Waveform<double> w;
        w.sample_rate = static_cast<int>(rate);
        w.samples.resize(size / 2);
        for (auto& s : w.samples) s = r.get<std::int16_t>() / 32768.0;
        return w;
      } else {
        if (size > r.remaining()) throw fail("truncated " + chunk + " chunk");
        std::string skip(size + (size % 2 && r.remaining() > size ? 1 : 0), '\0');
        r.get_array(skip.data(), skip.size());
      }
    }
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const DataError*>(&e)) throw;
    throw fail("malformed header (" + std::string(e.what()) + ")");
  }
  throw fail(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

dsp::Waveform<double> read_wav(const std::string& path, std::optional<int> expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("wav " + path + ": cannot open");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_wav(bytes, path, expected_rate);
}

std::string encode_wav(const dsp::Waveform<double>& w) {
  if (w.sample_rate <= 0) throw std::invalid_argument("write_wav: sample rate must be positive");
  const std::size_t data_bytes = w.samples.size() * 2;
  if (data_bytes > std::numeric_limits<std::uint32_t>::max() - 36)
    throw std::invalid_argument("write_wav: too long for a RIFF file");
  ByteWriter out;
  out.put_bytes("RIFF", 4);
  out.put(static_cast<std::uint32_t>(36 + data_bytes));
  out.put_bytes("WAVEfmt ", 8);
  out.put(std::uint32_t{16});
  out.put(kFormatPcm);
  out.put(std::uint16_t{1});
  out.put(static_cast<std::uint32_t>(w.sample_rate));
  out.put(static_cast<std::uint32_t>(w.sample_rate * 2));
  out.put(std::uint16_t{2});
  out.put(std::uint16_t{16});
  out.put_bytes("data", 4);
  out.put(static_cast<std::uint32_t>(data_bytes));
  for (double s : w.samples) out.put(quantize_sample(s));
  return std::string(out.bytes().begin(), out.bytes().end());
}

void write_wav(const std::string& path, const dsp::Waveform<double>& w) {
  const auto bytes = encode_wav(w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("wav " + path + ": cannot write");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("wav " + path + ": write failed");
}

}  // namespace apnet2::io
