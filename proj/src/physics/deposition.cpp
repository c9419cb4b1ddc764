#include "ajtwin/physics/deposition.hpp"

namespace ajtwin {

Eigen::VectorXd nozzle_capture_profile(double Q_total, const GeometryConstants& g, const QuadratureRule& rule) {
  Eigen::VectorXd capture(rule.size());
  for (Eigen::Index j = 0; j < rule.size(); ++j)
    capture(j) = survival_diffusion(rule.diameters(j), Q_total, g.nozzle_length, g).capture;
  return capture;
}

double tube_capture_fraction(const State& x, const Input& u, const GeometryConstants& g, const QuadratureRule& rule) {
  const auto dist = DropletDistribution::from_median(x.d_a());
  const Eigen::VectorXd mass = distribution_mass(dist, rule);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < rule.size(); ++j)
    sum += mass(j) * gravitational_capture(rule.diameters(j), u.Q_c(), x.dr_tube(), g);
  return sum;
}

double nozzle_capture_fraction(const State& x, const QuadratureRule& rule,
                               const Eigen::VectorXd& capture_profile) {
  const auto dist = DropletDistribution::from_median(x.d_a());
  return distribution_mass(dist, rule).dot(capture_profile);
}

double tube_deposition_rate(const State& x, const Input& u, const GeometryConstants& g, const QuadratureRule& rule) {
  if (!(x.dr_tube() < g.tube_radius)) throw Error(ErrorKind::blocked_tube, "tube deposit reaches tube radius");
  if (x.phi_A() == 0.0) return 0.0;
  const double aerosol_flow = x.phi_A() * u.Q_c();
  const double wall = 2.0 * std::numbers::pi * (g.tube_radius - x.dr_tube()) * g.tube_length;
  return aerosol_flow / wall * tube_capture_fraction(x, u, g, rule);
}

double nozzle_deposition_rate(const State& x, const Input& u, const GeometryConstants& g, const QuadratureRule& rule,
                              const Eigen::VectorXd& capture_profile) {
  if (!(x.dr_nozzle() < g.nozzle_radius)) throw Error(ErrorKind::clogged_nozzle, "nozzle deposit reaches nozzle radius");
  if (!(u.Q_total() > 0.0)) throw Error(ErrorKind::undefined_transport, "total flow must be positive");
  if (x.phi_A() == 0.0) return 0.0;
  const double aerosol_flow = x.phi_A() * u.Q_c();
  const double wall = 2.0 * std::numbers::pi * (g.nozzle_radius - x.dr_nozzle()) * g.nozzle_length;
  return aerosol_flow / wall * nozzle_capture_fraction(x, rule, capture_profile);
}

double nozzle_deposition_rate(const State& x, const Input& u, const GeometryConstants& g, const QuadratureRule& rule) {
  if (!(u.Q_total() > 0.0)) throw Error(ErrorKind::undefined_transport, "total flow must be positive");
  return nozzle_deposition_rate(x, u, g, rule, nozzle_capture_profile(u.Q_total(), g, rule));
}

}  // namespace ajtwin
