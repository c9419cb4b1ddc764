#include "ajtwin/sim/simulator.hpp"

#include <cmath>

#include "ajtwin/core/error.hpp"
#include "ajtwin/sim/printer.hpp"

namespace ajtwin {

std::vector<TimeSeriesRecord> SimulationTrace::records() const {
  std::vector<TimeSeriesRecord> out(size());
  for (std::size_t k = 0; k < size(); ++k) {
    out[k].t = t[k];
    out[k].u = input[k];
    out[k].y = noisy[k];
  }
  return out;
}

SimulationTrace simulate(const Scenario& scenario, const ModelParameters& params) {
  VirtualPrinter printer(scenario, params);
  SimulationTrace trace;
  const std::size_t steps = scenario.step_count();
  trace.t.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const Input u = scenario.input_at(printer.time());
    const PrinterSample s = printer.observe(u);
    trace.t.push_back(s.t);
    trace.state.push_back(s.state);
    trace.clean.push_back(s.clean);
    trace.noisy.push_back(s.noisy);
    trace.input.push_back(s.input);
    trace.faults_active.push_back(s.faults_active);
    if (k + 1 == steps) break;
    if (!printer.advance(u)) {
      trace.terminated = true;
      trace.terminal_event = printer.terminal_event();
      break;
    }
  }
  return trace;
}

State probe_latent(const SimulationTrace& trace, double t) {
  if (trace.size() == 0 || !(t >= trace.t.front()) || !(t <= trace.t.back()))
    throw Error(ErrorKind::invalid_input, "probe time outside the trace");
  std::size_t best = 0;
  for (std::size_t k = 1; k < trace.size(); ++k)
    if (std::abs(trace.t[k] - t) < std::abs(trace.t[best] - t)) best = k;
  return trace.state[best];
}

}  // namespace ajtwin
