#include "lesionlab/fingerprint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "lesionlab/errors.hpp"

namespace lesionlab {

Fingerprint& Fingerprint::bytes(const void* data, std::size_t size) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state_ ^= p[i];
    state_ *= 0x100000001b3ULL;
  }
  return *this;
}

Fingerprint& Fingerprint::text(std::string_view s) noexcept {
  u64(s.size());
  return bytes(s.data(), s.size());
}

Fingerprint& Fingerprint::u64(std::uint64_t v) noexcept {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  return bytes(buf, 8);
}

Fingerprint& Fingerprint::f64(double v) noexcept { return u64(std::bit_cast<std::uint64_t>(v)); }

Fingerprint& Fingerprint::f64s(std::span<const double> values) noexcept {
  for (double v : values) f64(v);
  return *this;
}

std::string Fingerprint::hex() const { return to_hex(state_); }

std::string to_hex(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

std::string file_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<char> buf(1 << 16);
  Fingerprint fp;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    fp.bytes(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return fp.hex();
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage, std::string_view entity) {
  std::uint64_t z = Fingerprint().u64(global_seed).text(stage).text(entity).value();
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace lesionlab
