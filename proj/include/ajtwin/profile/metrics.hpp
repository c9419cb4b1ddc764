#pragma once

#include <span>
#include <vector>

#include "ajtwin/profile/cross_section.hpp"

namespace ajtwin {

inline constexpr double kShoulderRatio = 2.1;
inline constexpr double kShoulderRatioSpread = 0.32;

struct LineMetrics {
  bool found = false;
  double linewidth = 0.0;
  double overspray = 0.0;
  double center = 0.0;
  bool flanks_found = false;       // landmarks (ii)
  bool shoulders_found = false;    // landmarks (iii)
  bool variance_fallback = false;  // (iii) taken from the column-variance peak
  bool overspray_partial = false;  // an outer edge ran into the section boundary
  double linewidth_spread = 0.0;   // 1σ from the b/a spread, cfd metrics only
};

struct GrayscaleOptions {
  int smoothing = 3;
  double prominence = 2.0;
  double background_fraction = 0.95;
};

// Landmark extraction from one grayscale section.
LineMetrics extract_grayscale_metrics(const CrossSection& cs, double background, const GrayscaleOptions& options = {});

// A stack of columns (same grid) averaged in batches of `batch`; one metric per
// batch. Missing shoulders fall back to the per-batch variance profile.
std::vector<LineMetrics> extract_grayscale_metrics(std::span<const CrossSection> columns, double background,
                                                   int batch = 50, const GrayscaleOptions& options = {});

LineMetrics cfd_profile_metrics(const CrossSection& cs);

// ν·∫h dr by the trapezoid rule.
double material_flow(const CrossSection& cs, double platen_speed);

// Centered mean over `length` samples, truncated at the edges.
std::vector<double> moving_average(std::span<const double> series, int length);

}  // namespace ajtwin
