#include "ajtwin/core/units.hpp"

#include "ajtwin/core/error.hpp"

namespace ajtwin {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::undefined_transport: return "undefined_transport";
    case ErrorKind::blocked_tube: return "blocked_tube";
    case ErrorKind::clogged_nozzle: return "clogged_nozzle";
    case ErrorKind::degenerate_headspace: return "degenerate_headspace";
    case ErrorKind::numerical_differentiation: return "numerical_differentiation";
    case ErrorKind::conditioning: return "conditioning";
    case ErrorKind::initialization_failure: return "initialization_failure";
    case ErrorKind::calibration: return "calibration";
    case ErrorKind::not_ready: return "not_ready";
    case ErrorKind::request: return "request";
  }
  return "unknown";
}

Unit parse_unit(std::string_view tag) {
  if (tag == "um" || tag == "µm") return Unit::micrometre;
  if (tag == "mL") return Unit::millilitre;
  if (tag == "sccm") return Unit::sccm;
  if (tag == "mA") return Unit::milliamp;
  if (tag == "Pa") return Unit::pascal;
  if (tag == "m") return Unit::metre;
  if (tag == "m3" || tag == "m³") return Unit::cubic_metre;
  if (tag == "m3/s" || tag == "m³/s") return Unit::cubic_metre_per_second;
  if (tag == "A") return Unit::ampere;
  throw Error(ErrorKind::invalid_input, "unknown unit tag '" + std::string(tag) + "'");
}

std::string_view unit_tag(Unit unit) {
  switch (unit) {
    case Unit::micrometre: return "um";
    case Unit::millilitre: return "mL";
    case Unit::sccm: return "sccm";
    case Unit::milliamp: return "mA";
    case Unit::pascal: return "Pa";
    case Unit::metre: return "m";
    case Unit::cubic_metre: return "m3";
    case Unit::cubic_metre_per_second: return "m3/s";
    case Unit::ampere: return "A";
  }
  return "";
}

double unit_factor(Unit unit) {
  switch (unit) {
    case Unit::micrometre: return units::um;
    case Unit::millilitre: return units::mL;
    case Unit::sccm: return units::sccm;
    case Unit::milliamp: return units::mA;
    case Unit::pascal:
    case Unit::metre:
    case Unit::cubic_metre:
    case Unit::cubic_metre_per_second:
    case Unit::ampere: return 1.0;
  }
  return 1.0;
}

double to_si(double value, std::string_view tag) { return to_si(value, parse_unit(tag)); }
double from_si(double value, std::string_view tag) { return from_si(value, parse_unit(tag)); }

}  // namespace ajtwin
