#pragma once

#include "ajtwin/core/params.hpp"
#include "ajtwin/core/types.hpp"

namespace ajtwin {

// A value evaluated outside the range its fit was made on.
struct FlaggedValue {
  double value = 0.0;
  bool extrapolated = false;
};

// Net aerosol generation (m³/s). Flags inputs outside the fitted box
// Q_c 15–35 sccm, V_l 0.5–1.5 mL, I_A 300–440 mA.
FlaggedValue net_generation_H(double Q_c, double V_l, double I_A, const GenerationCoefficients& c);

// Hagen–Poiseuille resistance of the ink-lined tube (Pa·s/m³).
double resistance_tube(double dr_T, const GeometryConstants& g);

// Fitted nozzle-tip resistance; flags deposits outside 0–20 µm.
FlaggedValue resistance_nozzle_tip(double dr_N, const GeometryConstants& g);

struct Pressures {
  double carrier = 0.0;
  double sheath = 0.0;
  bool extrapolated = false;
};

Pressures pressures(const State& x, const Input& u, const GeometryConstants& g);

}  // namespace ajtwin
