#pragma once

#include <string>
#include <string_view>

namespace ajtwin {

// The fixed set of display units accepted at external interfaces.
enum class Unit {
  micrometre,
  millilitre,
  sccm,
  milliamp,
  pascal,
  metre,
  cubic_metre,
  cubic_metre_per_second,
  ampere,
};

namespace units {
inline constexpr double um = 1e-6;
inline constexpr double mL = 1e-6;
inline constexpr double sccm = 1e-6 / 60.0;
inline constexpr double mA = 1e-3;
inline constexpr double um3_per_s = 1e-18;
}  // namespace units

// Throws Error(invalid_input) for tags outside the fixed set.
Unit parse_unit(std::string_view tag);
std::string_view unit_tag(Unit unit);
double unit_factor(Unit unit);

inline double to_si(double value, Unit unit) { return value * unit_factor(unit); }
inline double from_si(double value, Unit unit) { return value / unit_factor(unit); }
double to_si(double value, std::string_view tag);
double from_si(double value, std::string_view tag);

}  // namespace ajtwin
