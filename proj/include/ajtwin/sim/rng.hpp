#pragma once

#include <cstdint>

namespace ajtwin {

// Stateless noise source: every draw is a pure function of its counter, so
// toggling one stream never shifts another.
class CounterNormal {
 public:
  explicit CounterNormal(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Uniform on (0, 1).
  double uniform(std::uint64_t step, std::uint32_t stream, std::uint32_t index) const;
  // Standard normal by Box–Muller over indices 0 and 1 of the counter.
  double normal(std::uint64_t step, std::uint32_t stream) const;

 private:
  std::uint64_t seed_;
};

std::uint64_t mix64(std::uint64_t z);

inline constexpr std::uint32_t kProcessStream = 0;
inline constexpr std::uint32_t kOutputStream = 10;

}  // namespace ajtwin
