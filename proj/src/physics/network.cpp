#include "ajtwin/physics/network.hpp"

#include <cmath>
#include <numbers>

#include "ajtwin/core/error.hpp"
#include "ajtwin/core/units.hpp"

namespace ajtwin {

FlaggedValue net_generation_H(double Q_c, double V_l, double I_A, const GenerationCoefficients& c) {
  if (std::isnan(Q_c) || std::isnan(V_l) || std::isnan(I_A))
    throw Error(ErrorKind::invalid_input, "generation inputs must not be NaN");
  const double q = Q_c / units::sccm;
  const double v = V_l / units::mL;
  const double i = I_A / units::mA;
  const double h = c.carrier_sq * q * q + c.volume_carrier * v * q + c.carrier_current * q * i +
                   c.current_volume * i * v + c.volume * v + c.carrier * q + c.current * i + c.constant;
  const bool outside = q < 15.0 || q > 35.0 || v < 0.5 || v > 1.5 || i < 300.0 || i > 440.0;
  return {h * units::um3_per_s, outside};
}

double resistance_tube(double dr_T, const GeometryConstants& g) {
  if (!(dr_T < g.tube_radius)) throw Error(ErrorKind::blocked_tube, "tube deposit reaches tube radius");
  const double r = g.tube_radius - dr_T;
  return 8.0 * g.ink_viscosity * g.tube_length / (std::numbers::pi * r * r * r * r);
}

FlaggedValue resistance_nozzle_tip(double dr_N, const GeometryConstants& g) {
  const double s = dr_N / units::um;
  double value = 0.0;
  double power = 1.0;
  for (double a : g.nozzle_tip) {
    value += a * power;
    power *= s;
  }
  return {value, s < 0.0 || s > 20.0};
}

Pressures pressures(const State& x, const Input& u, const GeometryConstants& g) {
  const auto& r = g.resistances;
  const FlaggedValue tip = resistance_nozzle_tip(x.dr_nozzle(), g);
  const double nozzle = r.nozzle_1 + r.nozzle_2 + tip.value;
  const double carrier = resistance_tube(x.dr_tube(), g) + r.carrier_1 + r.carrier_2 + r.carrier_3 + nozzle;
  const double sheath = (r.sheath_1 + r.sheath_2 + r.sheath_3) / 2.0 + nozzle;
  return {u.Q_c() * carrier + u.Q_s() * nozzle, u.Q_s() * sheath + u.Q_c() * nozzle, tip.extrapolated};
}

}  // namespace ajtwin
