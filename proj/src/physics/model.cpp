#include "ajtwin/physics/model.hpp"

#include <cmath>

#include "ajtwin/core/error.hpp"
#include "ajtwin/physics/deposition.hpp"
#include "ajtwin/physics/network.hpp"

namespace ajtwin {

Vec5 transition_f(const State& x, const Input& u, const Theta& theta, const PrinterModel& model,
                  const Disturbance& disturbance, const Eigen::VectorXd* nozzle_capture) {
  const auto& p = model.params;
  const auto& g = p.geometry;
  const double headspace = g.vial_volume - x.V_l();
  if (!(headspace > 0.0)) throw Error(ErrorKind::degenerate_headspace, "ink volume reaches vial volume");

  const double generation = disturbance.generation_scale * net_generation_H(u.Q_c(), x.V_l(), u.I_A(), p.generation).value;
  const double ink_rate = -x.phi_A() * u.Q_c() + theta(kInkVolume) * x.V_l();

  Vec5 dx;
  dx(kDropletMedian) = theta(kDropletMedian) * x.d_a();
  dx(kInkVolume) = ink_rate;
  dx(kTubeDeposit) = tube_deposition_rate(x, u, g, model.quadrature) + theta(kTubeDeposit) * x.dr_tube();
  const double nozzle = nozzle_capture != nullptr
                            ? nozzle_deposition_rate(x, u, g, model.quadrature, *nozzle_capture)
                            : nozzle_deposition_rate(x, u, g, model.quadrature);
  dx(kNozzleDeposit) = nozzle + disturbance.extra_nozzle_rate + theta(kNozzleDeposit) * x.dr_nozzle();
  dx(kAerosolFraction) = (generation - x.phi_A() * u.Q_c() + x.phi_A() * ink_rate) / headspace +
                         theta(kAerosolFraction) * x.phi_A();
  return dx;
}

Mat5 theta_sensitivity(const State& x, const ModelParameters& params) {
  Mat5 b = x.vector().asDiagonal();
  b(kAerosolFraction, kInkVolume) = x.phi_A() * x.V_l() / (params.geometry.vial_volume - x.V_l());
  return b;
}

StateBox physical_box(const ModelParameters& params) {
  const auto& g = params.geometry;
  StateBox box;
  box.lower << params.estimation.d_a_min, 0.0, 0.0, 0.0, 0.0;
  box.upper << params.estimation.d_a_max, g.vial_volume * (1.0 - 1e-6), g.tube_radius * (1.0 - 1e-6),
      g.nozzle_radius * (1.0 - 1e-6), 1.0;
  return box;
}

StateBox estimation_box(const ModelParameters& params) {
  StateBox box = physical_box(params);
  box.lower(kTubeDeposit) = -params.estimation.tube_relaxation * params.geometry.tube_radius;
  return box;
}

ClampEvents clamp_to_box(Vec5& x, const StateBox& box) {
  ClampEvents events;
  for (int i = 0; i < kStateCount; ++i) {
    if (x(i) < box.lower(i)) {
      x(i) = box.lower(i);
      events.set(static_cast<std::size_t>(i));
    } else if (x(i) > box.upper(i)) {
      x(i) = box.upper(i);
      events.set(static_cast<std::size_t>(kStateCount + i));
    }
  }
  return events;
}

StepResult step_euler(const State& x, const Input& u, const Theta& theta, double dt, const PrinterModel& model,
                      const StateBox& box, const Disturbance& disturbance, const Eigen::VectorXd* nozzle_capture) {
  if (!(dt >= 0.0)) throw Error(ErrorKind::invalid_input, "time step must be non-negative");
  StepResult result;
  if (dt == 0.0) {
    result.next = x;
    result.unclamped = x;
    return result;
  }
  Vec5 next = x.vector() + dt * transition_f(x, u, theta, model, disturbance, nozzle_capture);
  result.unclamped = State(next);
  result.events = clamp_to_box(next, box);
  result.next = State(next);
  return result;
}

StepResult step_euler(const State& x, const Input& u, const Theta& theta, double dt, const PrinterModel& model) {
  return step_euler(x, u, theta, dt, model, physical_box(model.params));
}

Output output_g(const State& x, const Input& u, const ModelParameters& params) {
  auto line = [&x, &u](const LineCoefficients& c) {
    const double n = x.dr_nozzle();
    return c.alpha_da * x.d_a() + c.alpha_phiA * x.phi_A() + c.alpha_drN[0] * n + c.alpha_drN[1] * n * n +
           c.alpha_drN[2] * n * n * n + c.beta_c * u.Q_c() + c.beta_s * u.Q_s() + c.gamma;
  };
  const Pressures p = pressures(x, u, params.geometry);
  return Output(line(params.output.linewidth), line(params.output.overspray), p.carrier, p.sheath,
                params.output.phi_m * x.phi_A() * u.Q_c());
}

double jacobian_step(double x_i) { return std::max(1e-7 * std::abs(x_i), 1e-12); }

namespace {

template <typename Fn>
Mat5 central_difference(const State& x, Fn&& fn) {
  Mat5 jac;
  for (int i = 0; i < kStateCount; ++i) {
    const double h = jacobian_step(x.vector()(i));
    State plus = x;
    State minus = x;
    plus.vector()(i) += h;
    minus.vector()(i) -= h;
    jac.col(i) = (fn(plus) - fn(minus)) / (2.0 * h);
  }
  if (!jac.allFinite()) throw Error(ErrorKind::numerical_differentiation, "non-finite Jacobian entry");
  return jac;
}

}  // namespace

Mat5 jacobian_F(const State& x, const Input& u, const Theta& theta, const PrinterModel& model,
                const Eigen::VectorXd* nozzle_capture) {
  Eigen::VectorXd local;
  if (nozzle_capture == nullptr) {
    local = nozzle_capture_profile(u.Q_total(), model.params.geometry, model.quadrature);
    nozzle_capture = &local;
  }
  return central_difference(x, [&](const State& s) { return transition_f(s, u, theta, model, {}, nozzle_capture); });
}

Mat5 jacobian_H(const State& x, const Input& u, const ModelParameters& params) {
  return central_difference(x, [&](const State& s) { return output_g(s, u, params).vector(); });
}

}  // namespace ajtwin
