#pragma once

#include <string>
#include <vector>

namespace ajtwin {

enum class ProfileKind { grayscale, height };

const char* profile_kind_name(ProfileKind kind);

// Uniformly sampled 1-D cut across a printed line. Positions in m; values are
// grayscale levels (0–255) or heights (m).
struct CrossSection {
  ProfileKind kind = ProfileKind::height;
  double pitch = 0.0;
  std::vector<double> position;
  std::vector<double> value;

  std::size_t size() const { return value.size(); }
};

// Uniform grid of n samples starting at `origin`.
CrossSection make_cross_section(ProfileKind kind, double origin, double pitch, std::vector<double> values);

// Throws Error(invalid_input) if positions are not strictly increasing with
// uniform pitch (relative 1e-9).
void validate_cross_section(const CrossSection& cs);

// Header `# kind=<grayscale|height> pitch=<m>`, then `position,value` rows.
CrossSection parse_cross_section(const std::string& text);
std::string format_cross_section(const CrossSection& cs);

}  // namespace ajtwin
