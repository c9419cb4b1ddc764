#pragma once

#include <bitset>
#include <optional>

#include "ajtwin/core/params.hpp"
#include "ajtwin/core/types.hpp"
#include "ajtwin/physics/distribution.hpp"

namespace ajtwin {

// Parameters plus the quadrature rule built from them. Immutable once built.
struct PrinterModel {
  ModelParameters params;
  QuadratureRule quadrature;

  explicit PrinterModel(const ModelParameters& p)
      : params(p), quadrature(make_quadrature(p.quadrature_nodes)) {}
};

// Perturbations applied by the simulator's fault injection.
struct Disturbance {
  double generation_scale = 1.0;
  double extra_nozzle_rate = 0.0;
};

// Pure drift field ẋ = f(x, u; θ). `nozzle_capture` may carry a precomputed
// nozzle_capture_profile for u.Q_total().
Vec5 transition_f(const State& x, const Input& u, const Theta& theta, const PrinterModel& model,
                  const Disturbance& disturbance = {}, const Eigen::VectorXd* nozzle_capture = nullptr);

// ∂f/∂θ. f is affine in θ, so f(x,u;θ) = f(x,u;0) + B(x)θ.
Mat5 theta_sensitivity(const State& x, const ModelParameters& params);

// Axis-aligned bounds applied after each Euler step.
struct StateBox {
  Vec5 lower;
  Vec5 upper;
};

StateBox physical_box(const ModelParameters& params);
// Like physical_box but lets the tube deposit go negative by tube_relaxation·r_T0.
StateBox estimation_box(const ModelParameters& params);

// Bit i: state i was raised to its lower bound; bit 5+i: lowered to its upper.
using ClampEvents = std::bitset<10>;

ClampEvents clamp_to_box(Vec5& x, const StateBox& box);

struct StepResult {
  State next;
  State unclamped;
  ClampEvents events;
};

StepResult step_euler(const State& x, const Input& u, const Theta& theta, double dt, const PrinterModel& model,
                      const StateBox& box, const Disturbance& disturbance = {},
                      const Eigen::VectorXd* nozzle_capture = nullptr);
StepResult step_euler(const State& x, const Input& u, const Theta& theta, double dt, const PrinterModel& model);

Output output_g(const State& x, const Input& u, const ModelParameters& params);

// Central differences with h_i = max(1e-7·|x_i|, 1e-12).
Mat5 jacobian_F(const State& x, const Input& u, const Theta& theta, const PrinterModel& model,
                const Eigen::VectorXd* nozzle_capture = nullptr);
Mat5 jacobian_H(const State& x, const Input& u, const ModelParameters& params);

double jacobian_step(double x_i);

}  // namespace ajtwin
