#include "ajtwin/core/params.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>

#include "ajtwin/core/config.hpp"
#include "ajtwin/core/error.hpp"
#include "ajtwin/core/units.hpp"

namespace ajtwin {

namespace {

// Unit tags accepted in configuration files. Each maps to its SI factor and a
// dimension label; a key only accepts tags of its own dimension.
struct TagInfo {
  double factor;
  const char* dimension;
};

const std::map<std::string, TagInfo, std::less<>>& tag_table() {
  static const std::map<std::string, TagInfo, std::less<>> table = {
      {"1", {1.0, "count"}},
      {"m", {1.0, "length"}},
      {"mm", {1e-3, "length"}},
      {"um", {units::um, "length"}},
      {"m3", {1.0, "volume"}},
      {"mL", {units::mL, "volume"}},
      {"m3/s", {1.0, "flow"}},
      {"sccm", {units::sccm, "flow"}},
      {"A", {1.0, "current"}},
      {"mA", {units::mA, "current"}},
      {"Pa", {1.0, "pressure"}},
      {"s", {1.0, "time"}},
      {"1/s", {1.0, "rate"}},
      {"um/s", {units::um, "length-rate"}},
      {"m/s", {1.0, "speed"}},
      {"mm/s", {1e-3, "speed"}},
      {"mL/s", {units::mL, "volume-rate"}},
      {"kg/m3", {1.0, "density"}},
      {"m/s2", {1.0, "acceleration"}},
      {"Pa.s", {1.0, "viscosity"}},
      {"K", {1.0, "temperature"}},
      {"J/K", {1.0, "entropy"}},
      {"Pa.s/m3", {1.0, "resistance"}},
      {"um/um", {1.0, "ratio"}},
      {"um/um2", {1e6, "per-length"}},
      {"um/um3", {1e12, "per-area"}},
      {"um/sccm", {units::um / units::sccm, "length-per-flow"}},
      {"um3/s", {1.0, "fit"}},
  };
  return table;
}

struct Field {
  std::string key;
  std::string unit;
  std::function<double&(ModelParameters&)> ref;
  bool integer = false;
};

// Every configurable value, in file order. `unit` is the tag written on save.
const std::vector<Field>& fields() {
  static const std::vector<Field> list = [] {
    std::vector<Field> f;
    auto add = [&f](std::string key, std::string unit, std::function<double&(ModelParameters&)> ref) {
      f.push_back({std::move(key), std::move(unit), std::move(ref), false});
    };
    add("geometry.tube_length", "m", [](ModelParameters& p) -> double& { return p.geometry.tube_length; });
    add("geometry.tube_radius", "m", [](ModelParameters& p) -> double& { return p.geometry.tube_radius; });
    add("geometry.nozzle_length", "m", [](ModelParameters& p) -> double& { return p.geometry.nozzle_length; });
    add("geometry.nozzle_radius", "um", [](ModelParameters& p) -> double& { return p.geometry.nozzle_radius; });
    add("geometry.vial_volume", "mL", [](ModelParameters& p) -> double& { return p.geometry.vial_volume; });
    add("geometry.droplet_density", "kg/m3", [](ModelParameters& p) -> double& { return p.geometry.droplet_density; });
    add("geometry.gas_viscosity", "Pa.s", [](ModelParameters& p) -> double& { return p.geometry.gas_viscosity; });
    add("geometry.nitrogen_viscosity", "Pa.s", [](ModelParameters& p) -> double& { return p.geometry.nitrogen_viscosity; });
    add("geometry.ink_viscosity", "Pa.s", [](ModelParameters& p) -> double& { return p.geometry.ink_viscosity; });
    add("geometry.gravity", "m/s2", [](ModelParameters& p) -> double& { return p.geometry.gravity; });
    add("geometry.boltzmann", "J/K", [](ModelParameters& p) -> double& { return p.geometry.boltzmann; });
    add("geometry.temperature", "K", [](ModelParameters& p) -> double& { return p.geometry.temperature; });
    add("geometry.slip_correction", "1", [](ModelParameters& p) -> double& { return p.geometry.slip_correction; });
    add("resistance.carrier_1", "Pa.s/m3", [](ModelParameters& p) -> double& { return p.geometry.resistances.carrier_1; });
    add("resistance.carrier_2", "Pa.s/m3", [](ModelParameters& p) -> double& { return p.geometry.resistances.carrier_2; });
    add("resistance.carrier_3", "Pa.s/m3", [](ModelParameters& p) -> double& { return p.geometry.resistances.carrier_3; });
    add("resistance.sheath_1", "Pa.s/m3", [](ModelParameters& p) -> double& { return p.geometry.resistances.sheath_1; });
    add("resistance.sheath_2", "Pa.s/m3", [](ModelParameters& p) -> double& { return p.geometry.resistances.sheath_2; });
    add("resistance.sheath_3", "Pa.s/m3", [](ModelParameters& p) -> double& { return p.geometry.resistances.sheath_3; });
    add("resistance.nozzle_1", "Pa.s/m3", [](ModelParameters& p) -> double& { return p.geometry.resistances.nozzle_1; });
    add("resistance.nozzle_2", "Pa.s/m3", [](ModelParameters& p) -> double& { return p.geometry.resistances.nozzle_2; });
    for (int i = 0; i < 8; ++i)
      add("resistance.nozzle_tip_" + std::to_string(i), "Pa.s/m3",
          [i](ModelParameters& p) -> double& { return p.geometry.nozzle_tip[static_cast<std::size_t>(i)]; });

    add("generation.carrier_sq", "um3/s", [](ModelParameters& p) -> double& { return p.generation.carrier_sq; });
    add("generation.volume_carrier", "um3/s", [](ModelParameters& p) -> double& { return p.generation.volume_carrier; });
    add("generation.carrier_current", "um3/s", [](ModelParameters& p) -> double& { return p.generation.carrier_current; });
    add("generation.current_volume", "um3/s", [](ModelParameters& p) -> double& { return p.generation.current_volume; });
    add("generation.volume", "um3/s", [](ModelParameters& p) -> double& { return p.generation.volume; });
    add("generation.carrier", "um3/s", [](ModelParameters& p) -> double& { return p.generation.carrier; });
    add("generation.current", "um3/s", [](ModelParameters& p) -> double& { return p.generation.current; });
    add("generation.constant", "um3/s", [](ModelParameters& p) -> double& { return p.generation.constant; });

    for (const auto& [name, pick] :
         std::vector<std::pair<std::string, std::function<LineCoefficients&(ModelParameters&)>>>{
             {"linewidth", [](ModelParameters& p) -> LineCoefficients& { return p.output.linewidth; }},
             {"overspray", [](ModelParameters& p) -> LineCoefficients& { return p.output.overspray; }}}) {
      const std::string base = "output." + name + ".";
      auto line = pick;
      add(base + "alpha_da", "um/um", [line](ModelParameters& p) -> double& { return line(p).alpha_da; });
      add(base + "alpha_phiA", "um", [line](ModelParameters& p) -> double& { return line(p).alpha_phiA; });
      add(base + "alpha_drN_1", "um/um", [line](ModelParameters& p) -> double& { return line(p).alpha_drN[0]; });
      add(base + "alpha_drN_2", "um/um2", [line](ModelParameters& p) -> double& { return line(p).alpha_drN[1]; });
      add(base + "alpha_drN_3", "um/um3", [line](ModelParameters& p) -> double& { return line(p).alpha_drN[2]; });
      add(base + "beta_c", "um/sccm", [line](ModelParameters& p) -> double& { return line(p).beta_c; });
      add(base + "beta_s", "um/sccm", [line](ModelParameters& p) -> double& { return line(p).beta_s; });
      add(base + "gamma", "um", [line](ModelParameters& p) -> double& { return line(p).gamma; });
    }
    add("output.phi_m", "1", [](ModelParameters& p) -> double& { return p.output.phi_m; });

    const char* state_names[] = {"d_a", "V_l", "dr_tube", "dr_nozzle", "phi_A"};
    const char* state_rate_units[] = {"um/s", "mL/s", "um/s", "um/s", "1/s"};
    const char* state_units[] = {"um", "mL", "um", "um", "1"};
    for (int i = 0; i < 5; ++i)
      add(std::string("noise.process.") + state_names[i], state_rate_units[i],
          [i](ModelParameters& p) -> double& { return p.noise.sigma_xi(i); });
    const char* output_names[] = {"L_w", "L_o", "P_c", "P_s", "Q_m"};
    const char* output_units[] = {"um", "um", "Pa", "Pa", "sccm"};
    for (int i = 0; i < 5; ++i)
      add(std::string("noise.output.") + output_names[i], output_units[i],
          [i](ModelParameters& p) -> double& { return p.noise.sigma_w(i); });

    for (int i = 0; i < 5; ++i)
      add(std::string("estimation.scale.") + state_names[i], state_units[i],
          [i](ModelParameters& p) -> double& { return p.estimation.state_scale(i); });
    add("estimation.initial_covariance_scale", "1",
        [](ModelParameters& p) -> double& { return p.estimation.initial_covariance_scale; });
    add("estimation.initial_fill", "mL", [](ModelParameters& p) -> double& { return p.estimation.initial_fill; });
    add("estimation.initial_fill_sigma", "mL",
        [](ModelParameters& p) -> double& { return p.estimation.initial_fill_sigma; });
    add("estimation.tube_relaxation", "1", [](ModelParameters& p) -> double& { return p.estimation.tube_relaxation; });
    add("estimation.d_a_min", "um", [](ModelParameters& p) -> double& { return p.estimation.d_a_min; });
    add("estimation.d_a_max", "um", [](ModelParameters& p) -> double& { return p.estimation.d_a_max; });
    add("estimation.em_tolerance", "1/s", [](ModelParameters& p) -> double& { return p.estimation.em_tolerance; });

    add("bounds.Q_c_min", "sccm", [](ModelParameters& p) -> double& { return p.bounds.Q_c_min; });
    add("bounds.Q_c_max", "sccm", [](ModelParameters& p) -> double& { return p.bounds.Q_c_max; });
    add("bounds.Q_s_min", "sccm", [](ModelParameters& p) -> double& { return p.bounds.Q_s_min; });
    add("bounds.Q_s_max", "sccm", [](ModelParameters& p) -> double& { return p.bounds.Q_s_max; });
    add("bounds.I_A_min", "mA", [](ModelParameters& p) -> double& { return p.bounds.I_A_min; });
    add("bounds.I_A_max", "mA", [](ModelParameters& p) -> double& { return p.bounds.I_A_max; });

    add("process.dt", "s", [](ModelParameters& p) -> double& { return p.dt; });
    add("process.platen_speed", "mm/s", [](ModelParameters& p) -> double& { return p.platen_speed; });
    return f;
  }();
  return list;
}

// Integer settings share the file format but are stored as int.
struct IntField {
  std::string key;
  std::function<int&(ModelParameters&)> ref;
};

const std::vector<IntField>& int_fields() {
  static const std::vector<IntField> list = {
      {"estimation.init_window", [](ModelParameters& p) -> int& { return p.estimation.init_window; }},
      {"estimation.em_max_iterations", [](ModelParameters& p) -> int& { return p.estimation.em_max_iterations; }},
      {"physics.quadrature_nodes", [](ModelParameters& p) -> int& { return p.quadrature_nodes; }},
  };
  return list;
}

// Shortest decimal d with d * factor == value, so files reload bit-exactly.
std::string display_number(double value, double factor) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value / factor);
    if (parse_double(buf) * factor == value) return format_double(parse_double(buf));
  }
  return format_double(value / factor);
}

}  // namespace

ModelParameters default_parameters() {
  ModelParameters p;
  p.geometry.nozzle_radius = 35.0 * units::um;
  p.geometry.vial_volume = 5.0 * units::mL;
  p.estimation.initial_fill = 1.0 * units::mL;
  p.estimation.initial_fill_sigma = 0.5 * units::mL;
  p.estimation.d_a_min = 0.1 * units::um;
  p.estimation.d_a_max = 20.0 * units::um;
  p.bounds.Q_c_min = 10.0 * units::sccm;
  p.bounds.Q_c_max = 40.0 * units::sccm;
  p.bounds.Q_s_min = 30.0 * units::sccm;
  p.bounds.Q_s_max = 80.0 * units::sccm;
  p.bounds.I_A_min = 250.0 * units::mA;
  p.bounds.I_A_max = 500.0 * units::mA;
  p.platen_speed = 2.0 * 1e-3;
  p.noise.sigma_xi << 0.1 * units::um, 1e-3 * units::mL, 1e-3 * units::um, 3.35e-3 * units::um, 1e-8;
  p.noise.sigma_w << 3.0 * units::um, 5.0 * units::um, 10.0, 10.0, 1e-5 * units::sccm;
  p.estimation.state_scale << 1.0 * units::um, 1.0 * units::mL, 1.0 * units::um, 1.0 * units::um, 1e-7;

  const double per_sccm = units::um / units::sccm;
  auto& lw = p.output.linewidth;
  lw.alpha_da = -10.0;
  lw.alpha_phiA = 2e6 * units::um;
  lw.alpha_drN = {0.5, 0.2 * 1e6, 0.05 * 1e12};
  lw.beta_c = 1.0 * per_sccm;
  lw.beta_s = -0.4 * per_sccm;
  lw.gamma = 64.0 * units::um;
  auto& lo = p.output.overspray;
  lo.alpha_da = -8.0;
  lo.alpha_phiA = 4e7 * units::um;
  lo.alpha_drN = {1.0, 0.4 * 1e6, 0.1 * 1e12};
  lo.beta_c = 2.0 * per_sccm;
  lo.beta_s = -0.5 * per_sccm;
  lo.gamma = 49.0 * units::um;
  return p;
}

std::vector<std::string> validate_parameters(const ModelParameters& p) {
  std::vector<std::string> out;
  auto positive = [&out](double v, const std::string& what) {
    if (!(v > 0.0) || !std::isfinite(v)) out.push_back(what + " must be positive");
  };
  const auto& g = p.geometry;
  positive(g.tube_length, "tube length");
  positive(g.tube_radius, "tube radius");
  positive(g.nozzle_length, "nozzle length");
  positive(g.nozzle_radius, "nozzle radius");
  positive(g.vial_volume, "vial volume");
  positive(g.droplet_density, "droplet density");
  positive(g.gas_viscosity, "gas viscosity");
  positive(g.nitrogen_viscosity, "nitrogen viscosity");
  positive(g.ink_viscosity, "ink viscosity");
  positive(g.gravity, "gravity");
  positive(g.boltzmann, "Boltzmann constant");
  positive(g.temperature, "temperature");
  positive(g.slip_correction, "slip correction");
  const auto& r = g.resistances;
  for (double v : {r.carrier_1, r.carrier_2, r.carrier_3, r.sheath_1, r.sheath_2, r.sheath_3, r.nozzle_1, r.nozzle_2})
    positive(v, "fixed resistance");
  for (double a : g.nozzle_tip)
    if (!std::isfinite(a)) out.push_back("nozzle-tip coefficient not finite");
  if (!(p.output.phi_m > 0.0 && p.output.phi_m < 1.0)) out.push_back("phi_m out of range (0,1)");
  for (int i = 0; i < 5; ++i) {
    if (!(p.noise.sigma_xi(i) > 0.0) || !std::isfinite(p.noise.sigma_xi(i)))
      out.push_back("non-positive noise: process std " + std::to_string(i));
    if (!(p.noise.sigma_w(i) > 0.0) || !std::isfinite(p.noise.sigma_w(i)))
      out.push_back("non-positive noise: output std " + std::to_string(i));
    positive(p.estimation.state_scale(i), "state scale " + std::to_string(i));
  }
  positive(p.estimation.initial_covariance_scale, "initial covariance scale");
  positive(p.estimation.initial_fill_sigma, "initial fill sigma");
  if (p.estimation.initial_fill < 0.0 || p.estimation.initial_fill >= g.vial_volume)
    out.push_back("initial fill outside [0, V_v)");
  if (p.estimation.init_window < 2) out.push_back("initial-fit window must be >= 2");
  if (p.estimation.em_max_iterations < 1) out.push_back("EM iteration limit must be >= 1");
  positive(p.estimation.em_tolerance, "EM tolerance");
  if (!(p.estimation.tube_relaxation >= 0.0 && p.estimation.tube_relaxation < 1.0))
    out.push_back("tube relaxation outside [0,1)");
  if (!(p.estimation.d_a_min > 0.0 && p.estimation.d_a_max > p.estimation.d_a_min))
    out.push_back("droplet bounds invalid");
  const auto& b = p.bounds;
  if (!(b.Q_c_min >= 0.0 && b.Q_c_max > b.Q_c_min)) out.push_back("carrier bounds invalid");
  if (!(b.Q_s_min >= 0.0 && b.Q_s_max > b.Q_s_min)) out.push_back("sheath bounds invalid");
  if (!(b.I_A_min >= 0.0 && b.I_A_max > b.I_A_min)) out.push_back("current bounds invalid");
  positive(p.dt, "time step");
  positive(p.platen_speed, "platen speed");
  if (p.quadrature_nodes < 8 || p.quadrature_nodes > 1024) out.push_back("quadrature nodes outside [8, 1024]");
  return out;
}

ModelParameters parse_parameters(const std::string& text) {
  ModelParameters p = default_parameters();
  const auto& table = tag_table();
  for (const auto& entry : parse_config(text)) {
    const std::string where = "line " + std::to_string(entry.line) + " (" + entry.key + "): ";
    bool matched = false;
    for (const auto& field : fields()) {
      if (field.key != entry.key) continue;
      const auto want = table.find(field.unit);
      const auto got = table.find(entry.unit);
      if (got == table.end())
        throw Error(ErrorKind::invalid_input, where + "unknown unit '" + entry.unit + "'");
      if (std::string_view(got->second.dimension) != want->second.dimension)
        throw Error(ErrorKind::invalid_input, where + "unit '" + entry.unit + "' does not match '" + field.unit + "'");
      field.ref(p) = parse_double(entry.value) * got->second.factor;
      matched = true;
      break;
    }
    for (const auto& field : int_fields()) {
      if (matched || field.key != entry.key) continue;
      if (!entry.unit.empty() && entry.unit != "1")
        throw Error(ErrorKind::invalid_input, where + "count takes unit '1'");
      const double v = parse_double(entry.value);
      if (v != std::floor(v)) throw Error(ErrorKind::invalid_input, where + "expected an integer");
      field.ref(p) = static_cast<int>(v);
      matched = true;
    }
    if (!matched) throw Error(ErrorKind::invalid_input, where + "unknown key");
  }
  const auto problems = validate_parameters(p);
  if (!problems.empty()) throw Error(ErrorKind::invalid_input, "invalid parameters: " + problems.front());
  return p;
}

ModelParameters load_parameters(const std::string& path) { return parse_parameters(read_text_file(path)); }

std::string format_parameters(const ModelParameters& params) {
  ModelParameters p = params;
  const auto& table = tag_table();
  std::string out;
  std::string section;
  for (const auto& field : fields()) {
    const std::string head = field.key.substr(0, field.key.find('.'));
    if (head != section) {
      if (!section.empty()) out += '\n';
      section = head;
    }
    const double factor = table.at(field.unit).factor;
    out += field.key + " = " + display_number(field.ref(p), factor) + ' ' + field.unit + '\n';
  }
  out += '\n';
  for (const auto& field : int_fields()) out += field.key + " = " + std::to_string(field.ref(p)) + " 1\n";
  return out;
}

ModelParameters resolve_parameters(const std::string& explicit_path) {
  if (!explicit_path.empty()) return load_parameters(explicit_path);
  if (const char* env = std::getenv("AJTWIN_PARAMS"); env != nullptr && *env != '\0') return load_parameters(env);
  return default_parameters();
}

}  // namespace ajtwin
