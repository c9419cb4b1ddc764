#pragma once

#include <array>
#include <string>
#include <vector>

#include "ajtwin/core/types.hpp"
#include "ajtwin/core/units.hpp"

namespace ajtwin {

// Fixed fluidic resistances of the flow path (Pa·s/m³).
struct Resistances {
  double carrier_1 = 1.1972e4;
  double carrier_2 = 5.6305e4;
  double carrier_3 = 6.9590e5;
  double sheath_1 = 2.185e5;
  double sheath_2 = 175.66;
  double sheath_3 = 1.28e6;
  double nozzle_1 = 5.36e6;
  double nozzle_2 = 6.07e7;
};

struct GeometryConstants {
  double tube_length = 0.4572;
  double tube_radius = 7.89e-4;
  double nozzle_length = 6.32e-3;
  double nozzle_radius = 35e-6;
  double vial_volume = 5e-6;
  double droplet_density = 5804.0;
  // Settling and diffusion use gas_viscosity. The N₂ value is kept for
  // sensitivity studies.
  double gas_viscosity = 72e-3;
  double nitrogen_viscosity = 1.8e-5;
  double ink_viscosity = 17.5;
  double gravity = 9.8;
  double boltzmann = 1.380649e-23;
  double temperature = 293.0;
  double slip_correction = 1.0;
  Resistances resistances;
  // Nozzle-tip resistance polynomial, argument in µm, result in Pa·s/m³.
  std::array<double, 8> nozzle_tip = {4.57e9, 2.75e9, -7.96e8, 9.73e7,
                                      -5.81e6, 1.83e5, -2.92e3, 18.67};
};

// Net droplet generation fit. Inputs are sccm, mL and mA; the result is µm³/s.
struct GenerationCoefficients {
  double carrier_sq = 3.3e2;
  double volume_carrier = 2.7e4;
  double carrier_current = 66.0;
  double current_volume = 2.1e2;
  double volume = -5.2e5;
  double carrier = -4.8e4;
  double current = -1.1e3;
  double constant = 7.7e5;
};

// One line-geometry output, linear in state and input plus a cubic in the
// nozzle deposit. SI throughout.
struct LineCoefficients {
  double alpha_da = 0.0;
  double alpha_phiA = 0.0;
  std::array<double, 3> alpha_drN = {0.0, 0.0, 0.0};
  double beta_c = 0.0;
  double beta_s = 0.0;
  double gamma = 0.0;
};

struct OutputCoefficients {
  LineCoefficients linewidth;
  LineCoefficients overspray;
  double phi_m = 0.087;
};

struct NoiseSpec {
  // Per-state transition std per √s and per-output measurement std, SI.
  Vec5 sigma_xi;
  Vec5 sigma_w;

  Mat5 process_covariance() const { return sigma_xi.array().square().matrix().asDiagonal(); }
  Mat5 output_covariance() const { return sigma_w.array().square().matrix().asDiagonal(); }
};

struct EstimationSettings {
  // Nominal magnitudes used to normalize the filter state.
  Vec5 state_scale;
  double initial_covariance_scale = 100.0;
  int init_window = 10;
  double initial_fill = 1e-6;
  double initial_fill_sigma = 0.5e-6;
  double tube_relaxation = 0.2;
  double d_a_min = 0.1e-6;
  double d_a_max = 20e-6;
  int em_max_iterations = 50;
  double em_tolerance = 1e-8;
};

struct OperatingBounds {
  double Q_c_min = 10.0 * units::sccm;
  double Q_c_max = 40.0 * units::sccm;
  double Q_s_min = 30.0 * units::sccm;
  double Q_s_max = 80.0 * units::sccm;
  double I_A_min = 250.0 * units::mA;
  double I_A_max = 500.0 * units::mA;
};

struct ModelParameters {
  GeometryConstants geometry;
  GenerationCoefficients generation;
  OutputCoefficients output;
  NoiseSpec noise;
  EstimationSettings estimation;
  OperatingBounds bounds;
  double dt = 1.0;
  double platen_speed = 2e-3;
  int quadrature_nodes = 64;
};

ModelParameters default_parameters();

// Empty iff every invariant holds.
std::vector<std::string> validate_parameters(const ModelParameters& params);

// Flat `key = value unit` file. Keys not present keep their defaults.
ModelParameters load_parameters(const std::string& path);
ModelParameters parse_parameters(const std::string& text);
std::string format_parameters(const ModelParameters& params);

// Explicit path, then the AJTWIN_PARAMS file, then built-in defaults.
ModelParameters resolve_parameters(const std::string& explicit_path);

}  // namespace ajtwin
