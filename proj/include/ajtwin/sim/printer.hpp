#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "ajtwin/core/params.hpp"
#include "ajtwin/core/types.hpp"
#include "ajtwin/physics/model.hpp"
#include "ajtwin/sim/rng.hpp"
#include "ajtwin/sim/scenario.hpp"

namespace ajtwin {

struct PrinterSample {
  double t = 0.0;
  State state;
  Output clean;
  Output noisy;
  Input input;
  std::uint32_t faults_active = 0;
};

// The ground-truth machine advanced one step at a time under whatever input
// the caller applies. Faults, probes, noise and drift rates come from the
// scenario; its input schedule is left to the caller.
class VirtualPrinter {
 public:
  VirtualPrinter(const Scenario& scenario, const ModelParameters& params);

  std::size_t step() const { return step_; }
  double time() const { return static_cast<double>(step_) * scenario_.dt; }
  const State& state() const { return x_; }
  bool terminated() const { return terminated_; }
  const std::string& terminal_event() const { return terminal_event_; }

  // Sensor readings at the current step under input u.
  PrinterSample observe(const Input& u) const;
  // Integrates one step under u. Returns false once the nozzle has clogged;
  // the state then stays at its last value.
  bool advance(const Input& u);

 private:
  Scenario scenario_;
  const ModelParameters* params_;
  PrinterModel model_;
  StateBox box_;
  CounterNormal rng_;
  State x_;
  std::size_t step_ = 0;
  bool terminated_ = false;
  std::string terminal_event_;
  double capture_flow_ = -1.0;
  Eigen::VectorXd capture_;
};

}  // namespace ajtwin
