#include "mfrl/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace mfrl {

double Rng::normal() {
  // 1 - uniform() lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const int shift = std::countl_zero(n - 1);
  for (;;) {
    const std::uint64_t candidate = shift == 64 ? 0 : (engine_() >> shift);
    if (candidate < n) return candidate;
  }
}

}  // namespace mfrl
