#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace lesionlab {

/// Incremental 64-bit FNV-1a hasher. Stable across platforms and versions.
class Fingerprint {
 public:
  Fingerprint& bytes(const void* data, std::size_t size) noexcept;
  Fingerprint& text(std::string_view s) noexcept;
  Fingerprint& u64(std::uint64_t v) noexcept;
  Fingerprint& f64(double v) noexcept;
  Fingerprint& f64s(std::span<const double> values) noexcept;

  std::uint64_t value() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t v);

/// Fingerprint of a file's bytes; throws DataError when unreadable.
std::string file_fingerprint(const std::filesystem::path& path);

/// Child seed = splitmix64 finalizer of FNV-1a(global seed, stage, entity).
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage, std::string_view entity);

}  // namespace lesionlab
