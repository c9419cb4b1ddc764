#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <Eigen/Dense>

#include "ajtwin/core/error.hpp"
#include "ajtwin/core/params.hpp"
#include "ajtwin/core/types.hpp"
#include "ajtwin/physics/distribution.hpp"

namespace ajtwin {

// asin α − α√(1−α²) without cancellation for small α. The integrand of its
// derivative, 2t²/√(1−t²), expands into positive terms.
template <typename Scalar>
Scalar settling_arc_excess(Scalar alpha) {
  using std::asin;
  using std::sqrt;
  if (alpha > Scalar(0.5)) return asin(alpha) - alpha * sqrt(Scalar(1) - alpha * alpha);
  const Scalar a2 = alpha * alpha;
  Scalar coefficient = 1;
  Scalar power = alpha * a2;
  Scalar sum = power / Scalar(3);
  for (int n = 1; n < 200; ++n) {
    coefficient *= Scalar(2 * n - 1) / Scalar(2 * n);
    power *= a2;
    const Scalar term = coefficient * power / Scalar(2 * n + 3);
    sum += term;
    if (term <= std::numeric_limits<Scalar>::epsilon() * sum * Scalar(0.01)) break;
  }
  return Scalar(2) * sum;
}

// Dimensionless settling parameter α for a droplet of diameter d.
template <typename Scalar>
Scalar settling_alpha(Scalar d, Scalar Q_c, Scalar dr_T, const GeometryConstants& g) {
  using std::cbrt;
  const Scalar radius = Scalar(g.tube_radius) - dr_T;
  const Scalar terminal = Scalar(g.droplet_density) * d * d * Scalar(g.gravity) * Scalar(g.slip_correction) /
                          (Scalar(18) * Scalar(g.gas_viscosity));
  const Scalar mean_speed = Q_c / (std::numbers::pi_v<Scalar> * radius * radius);
  return cbrt(Scalar(3) * Scalar(g.tube_length) * terminal / (Scalar(8) * mean_speed * radius));
}

// Probability that a droplet settles onto the tube wall, 1 − P_grav.
template <typename Scalar>
Scalar gravitational_capture(Scalar d, Scalar Q_c, Scalar dr_T, const GeometryConstants& g) {
  using std::sqrt;
  if (!(Q_c > Scalar(0))) throw Error(ErrorKind::undefined_transport, "carrier flow must be positive");
  if (!(dr_T < Scalar(g.tube_radius))) throw Error(ErrorKind::blocked_tube, "tube deposit reaches tube radius");
  const Scalar alpha = settling_alpha(d, Q_c, dr_T, g);
  if (alpha >= Scalar(1)) return Scalar(1);
  const Scalar beta = sqrt(Scalar(1) - alpha * alpha);
  // asin β = π/2 − asin α turns 1 − P_grav into a sum of non-negative terms.
  const Scalar capture = Scalar(2) / std::numbers::pi_v<Scalar> *
                         (settling_arc_excess(alpha) + Scalar(2) * alpha * alpha * alpha * beta);
  return capture > Scalar(1) ? Scalar(1) : capture;
}

template <typename Scalar>
Scalar survival_gravitational(Scalar d, Scalar Q_c, Scalar dr_T, const GeometryConstants& g) {
  return Scalar(1) - gravitational_capture(d, Q_c, dr_T, g);
}

template <typename Scalar>
Scalar stokes_einstein_D(Scalar d, const GeometryConstants& g) {
  if (!(d > Scalar(0))) throw Error(ErrorKind::invalid_input, "droplet diameter must be positive");
  return Scalar(g.boltzmann) * Scalar(g.temperature) * Scalar(g.slip_correction) /
         (Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(g.gas_viscosity) * d);
}

template <typename Scalar>
struct DiffusionSurvivalT {
  Scalar critical_radius;  // x_c
  Scalar survival;         // P_diff
  Scalar capture;          // 1 − P_diff, computed without cancellation
};

// Solves (1−x)²(1−x²) = π L D / Q by bisection. Working in y = 1 − x the
// equation is y³(2−y) = rhs and the capture probability is (y(2−y))².
template <typename Scalar>
DiffusionSurvivalT<Scalar> survival_diffusion(Scalar d, Scalar Q_total, Scalar length, const GeometryConstants& g) {
  if (!(Q_total > Scalar(0))) throw Error(ErrorKind::undefined_transport, "total flow must be positive");
  const Scalar rhs = std::numbers::pi_v<Scalar> * length * stokes_einstein_D(d, g) / Q_total;
  if (rhs >= Scalar(1)) return {Scalar(0), Scalar(0), Scalar(1)};
  if (rhs <= Scalar(0)) return {Scalar(1), Scalar(1), Scalar(0)};
  Scalar lo = 0;
  Scalar hi = 1;
  for (int it = 0; it < 4000; ++it) {
    const Scalar mid = (lo + hi) / Scalar(2);
    if (mid <= lo || mid >= hi) break;
    if (mid * mid * mid * (Scalar(2) - mid) < rhs)
      lo = mid;
    else
      hi = mid;
  }
  const Scalar y = (lo + hi) / Scalar(2);
  const Scalar open = y * (Scalar(2) - y);
  const Scalar x = Scalar(1) - y;
  return {x, x * x * (Scalar(2) - x * x), open * open};
}

using DiffusionSurvival = DiffusionSurvivalT<double>;

// Per-node nozzle capture probability at a given total flow. Depends only on
// the flow, so callers may reuse it across states.
Eigen::VectorXd nozzle_capture_profile(double Q_total, const GeometryConstants& g, const QuadratureRule& rule);

// Deposit growth rates (m/s) without the θ term.
double tube_deposition_rate(const State& x, const Input& u, const GeometryConstants& g, const QuadratureRule& rule);
double nozzle_deposition_rate(const State& x, const Input& u, const GeometryConstants& g, const QuadratureRule& rule);
double nozzle_deposition_rate(const State& x, const Input& u, const GeometryConstants& g, const QuadratureRule& rule,
                              const Eigen::VectorXd& capture_profile);

// Fraction of aerosol volume captured, ∫ P_dep p dd.
double tube_capture_fraction(const State& x, const Input& u, const GeometryConstants& g, const QuadratureRule& rule);
double nozzle_capture_fraction(const State& x, const QuadratureRule& rule,
                               const Eigen::VectorXd& capture_profile);

}  // namespace ajtwin
