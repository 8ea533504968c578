#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace lesionlab {

/// Seeded generator with platform-independent derived distributions.
/// std::mt19937_64 itself is fully specified by the standard; the standard
/// distributions are not, so the samplers below are written out.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform in (lo, hi) excluding both endpoints.
  double uniform_open(double lo, double hi);
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  template <typename Container>
  const auto& pick(const Container& c) {
    return c[below(c.size())];
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lesionlab
