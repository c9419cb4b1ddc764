#include "ajtwin/profile/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "ajtwin/core/error.hpp"

namespace ajtwin {

std::vector<double> moving_average(std::span<const double> series, int length) {
  if (length < 1) throw Error(ErrorKind::invalid_input, "moving average length must be >= 1");
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  const std::ptrdiff_t back = (length - 1) / 2;
  const std::ptrdiff_t ahead = length / 2;
  std::vector<double> out(series.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - back);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + ahead);
    double sum = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

double material_flow(const CrossSection& cs, double platen_speed) {
  double area = 0.0;
  for (std::size_t i = 1; i < cs.size(); ++i)
    area += 0.5 * (cs.value[i] + cs.value[i - 1]) * (cs.position[i] - cs.position[i - 1]);
  return platen_speed * area;
}

namespace {

// Linear crossing of `level` between samples j-1 and j along a walk.
double crossing(const CrossSection& cs, const std::vector<double>& v, std::ptrdiff_t prev, std::ptrdiff_t j,
                double level) {
  const double dv = v[j] - v[prev];
  if (dv == 0.0) return cs.position[j];
  const double w = std::clamp((level - v[prev]) / dv, 0.0, 1.0);
  return cs.position[prev] + w * (cs.position[j] - cs.position[prev]);
}

struct Side {
  std::ptrdiff_t flank = -1;
  std::ptrdiff_t shoulder = -1;
  bool shoulder_found = false;
  bool fallback = false;
  double outer = 0.0;
  bool partial = false;
};

// Raw maximum within the smoothing window around k; smoothing a kink between
// unequal slopes moves its peak toward the gentler side.
std::ptrdiff_t refine_peak(std::span<const double> raw, std::ptrdiff_t k, int length) {
  const auto n = static_cast<std::ptrdiff_t>(raw.size());
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, k - (length - 1) / 2);
  const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, k + length / 2);
  std::ptrdiff_t best = k;
  for (std::ptrdiff_t j = lo; j <= hi; ++j)
    if (raw[j] > raw[best] || (raw[j] == raw[best] && std::abs(j - k) < std::abs(best - k))) best = j;
  return best;
}

Side walk_side(const CrossSection& cs, std::span<const double> raw, const std::vector<double>& s,
               const std::vector<double>* spread, std::ptrdiff_t center, int dir, double background,
               const GrayscaleOptions& opt) {
  const auto n = static_cast<std::ptrdiff_t>(s.size());
  auto inside = [n](std::ptrdiff_t j) { return j >= 0 && j < n; };
  Side side;

  double low = s[center];
  std::ptrdiff_t low_at = center;
  std::ptrdiff_t j = center + dir;
  for (; inside(j); j += dir) {
    if (s[j] < low) {
      low = s[j];
      low_at = j;
    } else if (s[j] > low + opt.prominence) {
      break;
    }
  }
  if (!inside(j) || s[center] - low <= opt.prominence) return side;
  side.flank = low_at;

  double high = s[low_at];
  std::ptrdiff_t high_at = low_at;
  for (j = low_at + dir; inside(j); j += dir) {
    if (s[j] > high) {
      high = s[j];
      high_at = j;
    } else if (s[j] < high - opt.prominence) {
      break;
    }
  }
  if (inside(j)) {
    side.shoulder = refine_peak(raw, high_at, opt.smoothing);
    side.shoulder_found = true;
  } else if (spread != nullptr) {
    // First spread peak beyond the flank, with the same prominence rule.
    const auto& sd = *spread;
    double peak = sd[low_at];
    std::ptrdiff_t peak_at = low_at;
    for (std::ptrdiff_t k = low_at + dir; inside(k); k += dir) {
      if (sd[k] > peak) {
        peak = sd[k];
        peak_at = k;
      } else if (sd[k] < peak - opt.prominence) {
        side.shoulder = peak_at;
        side.fallback = true;
        break;
      }
    }
  }
  if (side.shoulder < 0) side.shoulder = high_at;

  const double threshold = opt.background_fraction * background;
  side.outer = cs.position[side.shoulder];
  std::ptrdiff_t k = side.shoulder;
  while (inside(k) && s[k] >= threshold) k += dir;
  if (!inside(k)) return side;
  while (inside(k) && s[k] < threshold) k += dir;
  if (!inside(k)) {
    side.outer = cs.position[k - dir];
    side.partial = true;
  } else {
    side.outer = crossing(cs, s, k - dir, k, threshold);
  }
  return side;
}

LineMetrics extract_impl(const CrossSection& cs, std::span<const double> raw, const std::vector<double>& s,
                         const std::vector<double>* spread, double background, const GrayscaleOptions& opt) {
  LineMetrics m;
  const auto n = static_cast<std::ptrdiff_t>(s.size());
  if (n < 5) return m;
  const std::ptrdiff_t lo = n / 3;
  const std::ptrdiff_t hi = std::max(lo + 1, 2 * n / 3);
  const double middle = 0.5 * static_cast<double>(n - 1);
  std::ptrdiff_t center = lo;
  for (std::ptrdiff_t i = lo; i < hi; ++i) {
    if (s[i] > s[center] ||
        (s[i] == s[center] && std::abs(static_cast<double>(i) - middle) < std::abs(static_cast<double>(center) - middle)))
      center = i;
  }
  const Side left = walk_side(cs, raw, s, spread, center, -1, background, opt);
  const Side right = walk_side(cs, raw, s, spread, center, +1, background, opt);
  if (left.flank < 0 || right.flank < 0) return m;

  m.found = true;
  m.flanks_found = true;
  m.shoulders_found = left.shoulder_found && right.shoulder_found;
  m.variance_fallback = left.fallback || right.fallback;
  m.overspray_partial = left.partial || right.partial;
  const double a = cs.position[left.shoulder];
  const double b = cs.position[right.shoulder];
  m.linewidth = b - a;
  m.center = 0.5 * (a + b);
  m.overspray = std::max(right.outer, b) - std::min(left.outer, a);
  return m;
}

void require_grayscale(const CrossSection& cs) {
  if (cs.kind != ProfileKind::grayscale) throw Error(ErrorKind::invalid_input, "expected a grayscale cross-section");
  validate_cross_section(cs);
}

}  // namespace

LineMetrics extract_grayscale_metrics(const CrossSection& cs, double background, const GrayscaleOptions& options) {
  require_grayscale(cs);
  const auto smooth = moving_average(cs.value, options.smoothing);
  return extract_impl(cs, cs.value, smooth, nullptr, background, options);
}

std::vector<LineMetrics> extract_grayscale_metrics(std::span<const CrossSection> columns, double background, int batch,
                                                   const GrayscaleOptions& options) {
  if (batch < 1) throw Error(ErrorKind::invalid_input, "batch must be >= 1");
  std::vector<LineMetrics> out;
  if (columns.empty()) return out;
  const CrossSection& grid = columns.front();
  require_grayscale(grid);
  const std::size_t n = grid.size();
  for (const auto& c : columns) {
    if (c.size() != n || c.kind != grid.kind) throw Error(ErrorKind::invalid_input, "columns must share one grid");
  }
  for (std::size_t begin = 0; begin < columns.size(); begin += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(columns.size(), begin + static_cast<std::size_t>(batch));
    const double count = static_cast<double>(end - begin);
    std::vector<double> mean(n, 0.0);
    std::vector<double> spread(n, 0.0);
    for (std::size_t c = begin; c < end; ++c)
      for (std::size_t i = 0; i < n; ++i) mean[i] += columns[c].value[i] / count;
    for (std::size_t c = begin; c < end; ++c)
      for (std::size_t i = 0; i < n; ++i) spread[i] += std::pow(columns[c].value[i] - mean[i], 2) / count;
    for (double& v : spread) v = std::sqrt(v);
    const auto smooth = moving_average(mean, options.smoothing);
    const auto smooth_spread = moving_average(spread, options.smoothing);
    out.push_back(extract_impl(grid, mean, smooth, &smooth_spread, background, options));
  }
  return out;
}

LineMetrics cfd_profile_metrics(const CrossSection& cs) {
  if (cs.kind != ProfileKind::height) throw Error(ErrorKind::invalid_input, "expected a height cross-section");
  validate_cross_section(cs);
  LineMetrics m;
  if (cs.size() == 0) return m;
  const double peak = *std::max_element(cs.value.begin(), cs.value.end());
  if (!(peak > 0.0)) return m;

  const double level = 0.8 * peak;
  std::size_t best_first = 0;
  std::size_t best_last = 0;
  double best_width = -1.0;
  for (std::size_t i = 0; i < cs.size();) {
    if (!(cs.value[i] > level)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < cs.size() && cs.value[j + 1] > level) ++j;
    const double width = cs.position[j] - cs.position[i];
    if (width > best_width) {
      best_width = width;
      best_first = i;
      best_last = j;
    }
    i = j + 1;
  }
  const double b = best_width;
  m.found = true;
  m.flanks_found = true;
  m.shoulders_found = true;
  m.center = 0.5 * (cs.position[best_first] + cs.position[best_last]);
  m.linewidth = kShoulderRatio * b;
  m.linewidth_spread = kShoulderRatioSpread * b;

  const double floor = 0.01 * peak;
  const double half = 0.5 * m.linewidth;
  const auto n = static_cast<std::ptrdiff_t>(cs.size());
  auto outer_edge = [&](double edge, int dir) {
    const double origin = cs.position.front();
    auto start = static_cast<std::ptrdiff_t>(std::llround((edge - origin) / cs.pitch));
    if (start < 0 || start >= n) {
      m.overspray_partial = true;
      return edge;
    }
    std::ptrdiff_t k = start;
    while (k >= 0 && k < n && cs.value[k] > floor) k += dir;
    if (k < 0 || k >= n) {
      m.overspray_partial = true;
      return cs.position[k - dir];
    }
    if (k == start) return edge;
    const double x = crossing(cs, cs.value, k - dir, k, floor);
    return dir > 0 ? std::max(x, edge) : std::min(x, edge);
  };
  const double left = outer_edge(m.center - half, -1);
  const double right = outer_edge(m.center + half, +1);
  m.overspray = right - left;
  return m;
}

}  // namespace ajtwin
