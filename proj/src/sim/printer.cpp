#include "ajtwin/sim/printer.hpp"

#include <cmath>

#include "ajtwin/physics/deposition.hpp"

namespace ajtwin {

VirtualPrinter::VirtualPrinter(const Scenario& scenario, const ModelParameters& params)
    : scenario_(scenario),
      params_(&params),
      model_(params),
      box_(physical_box(params)),
      rng_(scenario.seed),
      x_(scenario.initial) {
  validate_scenario(scenario_);
  if (scenario_.equilibrium_aerosol)
    x_.phi_A() = equilibrium_aerosol_fraction(x_, scenario_.input_at(0.0), scenario_.theta, params);
}

PrinterSample VirtualPrinter::observe(const Input& u) const {
  const double t = time();
  PrinterSample s;
  s.t = t;
  s.state = x_;
  s.input = u;
  s.clean = output_g(x_, u, *params_);
  Vec5 noisy = s.clean.vector();
  const Vec5 sigma = scenario_.output_noise_scale * params_->noise.sigma_w;
  for (int i = 0; i < kOutputCount; ++i)
    noisy(i) += sigma(i) * rng_.normal(step_, kOutputStream + static_cast<std::uint32_t>(i));
  for (std::size_t i = 0; i < scenario_.faults.size(); ++i) {
    const auto& f = scenario_.faults[i];
    if (t < f.onset) continue;
    s.faults_active |= 1u << i;
    if (f.kind == FaultKind::mfc_pressure_drift) noisy(kCarrierPressure) += f.magnitude * (t - f.onset);
  }
  for (const auto& probe : scenario_.probes)
    if (t >= probe.t) noisy += probe.offset.vector();
  s.noisy = Output(noisy);
  return s;
}

bool VirtualPrinter::advance(const Input& u) {
  if (terminated_) return false;
  const double t = time();
  const double dt = scenario_.dt;
  Disturbance disturbance;
  for (const auto& f : scenario_.faults) {
    if (t < f.onset) continue;
    if (f.kind == FaultKind::nozzle_clog_acceleration) disturbance.extra_nozzle_rate += f.magnitude;
    if (f.kind == FaultKind::atomizer_dropout) disturbance.generation_scale *= 1.0 - f.magnitude;
  }
  if (u.Q_total() != capture_flow_) {
    capture_ = nozzle_capture_profile(u.Q_total(), params_->geometry, model_.quadrature);
    capture_flow_ = u.Q_total();
  }
  Vec5 next = x_.vector() + dt * transition_f(x_, u, scenario_.theta, model_, disturbance, &capture_);
  const Vec5 sigma = scenario_.process_noise_scale * params_->noise.sigma_xi;
  const double root_dt = std::sqrt(dt);
  for (int i = 0; i < kStateCount; ++i)
    next(i) += root_dt * sigma(i) * rng_.normal(step_, kProcessStream + static_cast<std::uint32_t>(i));
  if (next(kNozzleDeposit) >= params_->geometry.nozzle_radius) {
    terminated_ = true;
    terminal_event_ = "nozzle clogged at t = " + std::to_string(t + dt) + " s";
    return false;
  }
  clamp_to_box(next, box_);
  x_ = State(next);
  ++step_;
  return true;
}

}  // namespace ajtwin
