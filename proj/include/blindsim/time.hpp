#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace blindsim {

/// Simulation time in integer picoseconds.
using TimePs = std::int64_t;

inline constexpr TimePs kPsPerSecond = 1'000'000'000'000;

inline constexpr TimePs kNever = std::numeric_limits<TimePs>::max();

/// Rounds a duration in seconds to the nearest picosecond.
inline TimePs to_ps(double seconds) {
  return static_cast<TimePs>(std::llround(seconds * static_cast<double>(kPsPerSecond)));
}

inline double to_seconds(TimePs t) {
  return static_cast<double>(t) / static_cast<double>(kPsPerSecond);
}

} // namespace blindsim
