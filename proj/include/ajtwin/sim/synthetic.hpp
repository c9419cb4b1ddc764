#pragma once

#include "ajtwin/core/types.hpp"
#include "ajtwin/profile/cross_section.hpp"

namespace ajtwin {

// Half-width landmarks of the two-lobe height template (m), plus peak height.
struct ProfileTemplate {
  double plateau = 0.0;    // flat top ends
  double shoulder = 0.0;   // main lobe ends, = L_w / 2
  double tail = 0.0;       // overspray lobe ends
  double lobe_ratio = 0.0; // fraction of the peak height carried by the overspray lobe
  double peak = 0.0;

  double height(double r) const;
};

inline constexpr double kMinOversprayRatio = 1.15;
inline constexpr double kMaxOversprayRatio = 3.5;

// Template whose 80%/1% metrics give (L_w, L_o) and whose area is Q_m/ν.
// Throws Error(invalid_input) outside L_o/L_w ∈ [1.15, 3.5] or for Q_m ≤ 0.
ProfileTemplate design_profile(const Output& y, double platen_speed);

CrossSection synth_profile(const Output& y, double pitch, double platen_speed);

CrossSection render_grayscale(const CrossSection& height, double background, double contrast = 0.8);

}  // namespace ajtwin
