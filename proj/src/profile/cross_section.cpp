#include "ajtwin/profile/cross_section.hpp"

#include <cmath>
#include <sstream>

#include "ajtwin/core/config.hpp"
#include "ajtwin/core/error.hpp"

namespace ajtwin {

const char* profile_kind_name(ProfileKind kind) { return kind == ProfileKind::grayscale ? "grayscale" : "height"; }

CrossSection make_cross_section(ProfileKind kind, double origin, double pitch, std::vector<double> values) {
  CrossSection cs;
  cs.kind = kind;
  cs.pitch = pitch;
  cs.position.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) cs.position[i] = origin + static_cast<double>(i) * pitch;
  cs.value = std::move(values);
  return cs;
}

void validate_cross_section(const CrossSection& cs) {
  if (cs.position.size() != cs.value.size()) throw Error(ErrorKind::invalid_input, "position/value length mismatch");
  if (!(cs.pitch > 0.0)) throw Error(ErrorKind::invalid_input, "pitch must be positive");
  for (std::size_t i = 1; i < cs.size(); ++i) {
    const double step = cs.position[i] - cs.position[i - 1];
    if (!(step > 0.0)) throw Error(ErrorKind::invalid_input, "positions must increase strictly");
    if (std::abs(step - cs.pitch) > 1e-9 * cs.pitch * static_cast<double>(i + 1) + 1e-9 * std::abs(cs.position[i]))
      throw Error(ErrorKind::invalid_input, "non-uniform pitch at sample " + std::to_string(i));
  }
}

CrossSection parse_cross_section(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header) || header.rfind("#", 0) != 0)
    throw Error(ErrorKind::invalid_input, "missing '# kind=... pitch=...' header");
  CrossSection cs;
  bool have_kind = false;
  bool have_pitch = false;
  std::istringstream fields(header.substr(1));
  std::string token;
  while (fields >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = token.substr(0, eq);
    const std::string val = token.substr(eq + 1);
    if (key == "kind") {
      if (val == "grayscale") cs.kind = ProfileKind::grayscale;
      else if (val == "height") cs.kind = ProfileKind::height;
      else throw Error(ErrorKind::invalid_input, "unknown profile kind '" + val + "'");
      have_kind = true;
    } else if (key == "pitch") {
      cs.pitch = parse_double(val);
      have_pitch = true;
    }
  }
  if (!have_kind || !have_pitch) throw Error(ErrorKind::invalid_input, "header must name kind and pitch");
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error(ErrorKind::invalid_input, "line " + std::to_string(line_no) + ": expected 'position,value'");
    cs.position.push_back(parse_double(std::string_view(line).substr(0, comma)));
    cs.value.push_back(parse_double(std::string_view(line).substr(comma + 1)));
  }
  validate_cross_section(cs);
  return cs;
}

std::string format_cross_section(const CrossSection& cs) {
  std::string out = "# kind=" + std::string(profile_kind_name(cs.kind)) + " pitch=" + format_double(cs.pitch) + "\n";
  for (std::size_t i = 0; i < cs.size(); ++i)
    out += format_double(cs.position[i]) + "," + format_double(cs.value[i]) + "\n";
  return out;
}

}  // namespace ajtwin
