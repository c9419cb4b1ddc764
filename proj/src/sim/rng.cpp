#include "ajtwin/sim/rng.hpp"

#include <cmath>
#include <numbers>

namespace ajtwin {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double CounterNormal::uniform(std::uint64_t step, std::uint32_t stream, std::uint32_t index) const {
  std::uint64_t h = mix64(seed_);
  h = mix64(h ^ step);
  h = mix64(h ^ ((static_cast<std::uint64_t>(stream) << 32) | index));
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

double CounterNormal::normal(std::uint64_t step, std::uint32_t stream) const {
  const double u1 = uniform(step, stream, 0);
  const double u2 = uniform(step, stream, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ajtwin
