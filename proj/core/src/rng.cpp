#include "lesionlab/rng.hpp"

namespace lesionlab {

double Rng::uniform_open(double lo, double hi) {
  for (;;) {
    const double x = lo + (hi - lo) * uniform();
    if (x > lo && x < hi) return x;
  }
}

std::size_t Rng::below(std::size_t n) {
  if (n <= 1) return 0;
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  for (;;) {
    const std::uint64_t x = engine_();
    if (x < limit) return static_cast<std::size_t>(x % bound);
  }
}

}  // namespace lesionlab
