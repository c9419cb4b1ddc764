#include "ajtwin/sim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/tools/roots.hpp>

#include "ajtwin/core/error.hpp"
#include "ajtwin/profile/metrics.hpp"

namespace ajtwin {

namespace {

constexpr double kPi = std::numbers::pi;

// Normalized drop across one sin² slope lobe; D(0) = 0, D(1) = 1.
double lobe_drop(double u) { return u - std::sin(2.0 * kPi * u) / (2.0 * kPi); }

double solve_unit(double target) {
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t iterations = 200;
  const auto [lo, hi] =
      boost::math::tools::bisect([target](double u) { return lobe_drop(u) - target; }, 0.0, 1.0, tol, iterations);
  return 0.5 * (lo + hi);
}

// Landmarks for a given overspray-lobe share ρ with the shoulder at 1.
struct Shape {
  double plateau;
  double tail;
  double half_overspray;
};

// Grayscale contrast threshold 1 − 0.95 over the 0.8 render contrast.
constexpr double kGraySlopeShare = 0.05 / 0.8;

Shape shape_for(double rho) {
  const double u80 = solve_unit(0.2 / (1.0 - rho));
  const double plateau = (1.0 / kShoulderRatio - u80) / (1.0 - u80);
  const double e01 = solve_unit(0.01 / rho);
  const double slope_ratio = std::pow(std::sin(kPi * e01), 2) / kGraySlopeShare;
  const double tail = 1.0 + slope_ratio * rho / (1.0 - rho) * (1.0 - plateau);
  return {plateau, tail, 1.0 + (1.0 - e01) * (tail - 1.0)};
}

constexpr double kRhoLow = 0.0101;
constexpr double kRhoHigh = 0.52;

}  // namespace

double ProfileTemplate::height(double r) const {
  r = std::abs(r);
  if (r <= plateau) return peak;
  if (r <= shoulder) return peak - (1.0 - lobe_ratio) * peak * lobe_drop((r - plateau) / (shoulder - plateau));
  if (r < tail) return lobe_ratio * peak * (1.0 - lobe_drop((r - shoulder) / (tail - shoulder)));
  return 0.0;
}

ProfileTemplate design_profile(const Output& y, double platen_speed) {
  if (!(y.L_w() > 0.0) || !std::isfinite(y.L_w())) throw Error(ErrorKind::invalid_input, "linewidth must be positive");
  if (!(y.Q_m() > 0.0) || !(platen_speed > 0.0))
    throw Error(ErrorKind::invalid_input, "material flow and platen speed must be positive");
  const double ratio = y.L_o() / y.L_w();
  if (!(ratio >= kMinOversprayRatio && ratio <= kMaxOversprayRatio))
    throw Error(ErrorKind::invalid_input, "overspray/linewidth ratio outside the template range");

  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iterations = 200;
  const auto [lo, hi] = boost::math::tools::bisect(
      [ratio](double rho) { return shape_for(rho).half_overspray - ratio; }, kRhoLow, kRhoHigh, tol, iterations);
  const double rho = 0.5 * (lo + hi);
  const Shape shape = shape_for(rho);

  ProfileTemplate p;
  const double a1 = 0.5 * y.L_w();
  p.plateau = shape.plateau * a1;
  p.shoulder = a1;
  p.tail = shape.tail * a1;
  p.lobe_ratio = rho;
  const double unit_area =
      2.0 * (p.plateau + (p.shoulder - p.plateau) * (1.0 + rho) / 2.0 + rho * (p.tail - p.shoulder) / 2.0);
  p.peak = y.Q_m() / platen_speed / unit_area;
  return p;
}

CrossSection synth_profile(const Output& y, double pitch, double platen_speed) {
  if (!(pitch > 0.0)) throw Error(ErrorKind::invalid_input, "pitch must be positive");
  const ProfileTemplate p = design_profile(y, platen_speed);
  const auto half = static_cast<std::ptrdiff_t>(std::ceil((1.25 * p.tail) / pitch)) + 5;
  std::vector<double> values(static_cast<std::size_t>(2 * half + 1));
  for (std::ptrdiff_t i = -half; i <= half; ++i)
    values[static_cast<std::size_t>(i + half)] = p.height(static_cast<double>(i) * pitch);
  return make_cross_section(ProfileKind::height, -static_cast<double>(half) * pitch, pitch, std::move(values));
}

CrossSection render_grayscale(const CrossSection& height, double background, double contrast) {
  validate_cross_section(height);
  const std::size_t n = height.size();
  std::vector<double> slope(n, 0.0);
  for (std::size_t i = 0; i < n && n > 1; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
    slope[i] = std::abs((height.value[hi] - height.value[lo]) / (height.position[hi] - height.position[lo]));
  }
  const double steepest = n == 0 ? 0.0 : *std::max_element(slope.begin(), slope.end());
  CrossSection gray = height;
  gray.kind = ProfileKind::grayscale;
  for (std::size_t i = 0; i < n; ++i) {
    const double share = steepest > 0.0 ? slope[i] / steepest : 0.0;
    gray.value[i] = std::clamp(background * (1.0 - contrast * share), 0.0, 255.0);
  }
  return gray;
}

}  // namespace ajtwin
