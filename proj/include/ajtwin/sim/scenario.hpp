#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ajtwin/core/params.hpp"
#include "ajtwin/core/types.hpp"

namespace ajtwin {

enum class FaultKind { mfc_pressure_drift, nozzle_clog_acceleration, atomizer_dropout };

const char* fault_kind_name(FaultKind kind);
FaultKind parse_fault_kind(const std::string& name);

// Magnitude units: Pa/s for pressure drift, m/s of extra nozzle deposit for
// clog acceleration, and a fraction of lost generation for dropout.
struct FaultSpec {
  FaultKind kind = FaultKind::mfc_pressure_drift;
  double onset = 0.0;
  double magnitude = 0.0;
};

struct InputChange {
  double t = 0.0;
  Input u;
};

// Invasive latent-state measurement; `offset` is added to every output from t on.
struct ProbeSpec {
  double t = 0.0;
  Output offset;
};

struct Scenario {
  std::string name = "scenario";
  double duration = 0.0;
  double dt = 1.0;
  std::uint64_t seed = 0;
  State initial;
  bool equilibrium_aerosol = false;  // initial φ_A solved from φ̇ = 0
  Theta theta = Theta::Zero();
  std::vector<InputChange> schedule;
  std::vector<FaultSpec> faults;
  std::vector<ProbeSpec> probes;
  double process_noise_scale = 1.0;
  double output_noise_scale = 1.0;

  std::size_t step_count() const;
  Input input_at(double t) const;
};

void validate_scenario(const Scenario& scenario);

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string format_scenario(const Scenario& scenario);

// Positive root of the aerosol-fraction balance at fixed x, u and θ.
double equilibrium_aerosol_fraction(const State& x, const Input& u, const Theta& theta, const ModelParameters& params);

}  // namespace ajtwin
