#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ajtwin/core/params.hpp"
#include "ajtwin/core/types.hpp"
#include "ajtwin/sim/scenario.hpp"

namespace ajtwin {

struct SimulationTrace {
  std::vector<double> t;
  std::vector<State> state;
  std::vector<Output> clean;
  std::vector<Output> noisy;
  std::vector<Input> input;
  std::vector<std::uint32_t> faults_active;  // bit i: scenario fault i is past onset
  bool terminated = false;
  std::string terminal_event;

  std::size_t size() const { return t.size(); }
  std::vector<TimeSeriesRecord> records() const;
};

SimulationTrace simulate(const Scenario& scenario, const ModelParameters& params);

// True state at the step nearest t.
State probe_latent(const SimulationTrace& trace, double t);

}  // namespace ajtwin
