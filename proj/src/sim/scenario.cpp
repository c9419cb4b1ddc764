#include "ajtwin/sim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "ajtwin/core/config.hpp"
#include "ajtwin/core/error.hpp"
#include "ajtwin/core/units.hpp"
#include "ajtwin/physics/network.hpp"

namespace ajtwin {

const char* fault_kind_name(FaultKind kind) {
  switch (kind) {
    case FaultKind::mfc_pressure_drift: return "mfc-pressure-drift";
    case FaultKind::nozzle_clog_acceleration: return "nozzle-clog-acceleration";
    case FaultKind::atomizer_dropout: return "atomizer-dropout";
  }
  return "?";
}

FaultKind parse_fault_kind(const std::string& name) {
  for (auto kind : {FaultKind::mfc_pressure_drift, FaultKind::nozzle_clog_acceleration, FaultKind::atomizer_dropout})
    if (name == fault_kind_name(kind)) return kind;
  throw Error(ErrorKind::invalid_input, "unknown fault kind '" + name + "'");
}

std::size_t Scenario::step_count() const {
  return static_cast<std::size_t>(std::llround(duration / dt));
}

Input Scenario::input_at(double t) const {
  Input u = schedule.empty() ? Input() : schedule.front().u;
  for (const auto& change : schedule) {
    if (change.t <= t) u = change.u;
  }
  return u;
}

void validate_scenario(const Scenario& s) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::invalid_input, "scenario: " + what); };
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) fail("dt must be positive");
  if (!(s.duration >= 0.0) || !std::isfinite(s.duration)) fail("duration must be non-negative");
  if (s.schedule.empty() || s.schedule.front().t != 0.0) fail("input schedule must start at t = 0");
  for (std::size_t i = 0; i < s.schedule.size(); ++i) {
    const auto& c = s.schedule[i];
    if (c.t < 0.0 || c.t > s.duration) fail("input change outside [0, duration]");
    if (i > 0 && !(c.t > s.schedule[i - 1].t)) fail("input changes must be in increasing time order");
    if (!(c.u.Q_c() > 0.0) || !(c.u.Q_s() >= 0.0) || !(c.u.I_A() >= 0.0)) fail("non-physical input");
  }
  for (const auto& f : s.faults)
    if (f.onset < 0.0 || f.onset > s.duration) fail("fault onset outside the scenario");
  for (const auto& p : s.probes)
    if (p.t < 0.0 || p.t > s.duration) fail("probe time outside the scenario");
  if (!s.initial.vector().allFinite() || !s.theta.allFinite()) fail("non-finite state or drift rates");
  if (s.process_noise_scale < 0.0 || s.output_noise_scale < 0.0) fail("noise scales must be non-negative");
}

namespace {

struct Tag {
  const char* name;
  double factor;
};

const std::map<std::string, std::vector<Tag>, std::less<>>& unit_table() {
  static const std::map<std::string, std::vector<Tag>, std::less<>> table = {
      {"time", {{"s", 1.0}, {"min", 60.0}}},
      {"length", {{"um", units::um}, {"m", 1.0}}},
      {"volume", {{"mL", units::mL}, {"m3", 1.0}}},
      {"flow", {{"sccm", units::sccm}, {"m3/s", 1.0}}},
      {"current", {{"mA", units::mA}, {"A", 1.0}}},
      {"pressure", {{"Pa", 1.0}}},
      {"rate", {{"1/s", 1.0}}},
      {"pressure_rate", {{"Pa/s", 1.0}}},
      {"speed", {{"um/s", units::um}, {"m/s", 1.0}}},
      {"fraction", {{"1", 1.0}, {"", 1.0}}},
  };
  return table;
}

double value_in(const ConfigEntry& e, const std::string& dimension) {
  for (const auto& tag : unit_table().at(dimension))
    if (e.unit == tag.name) return parse_double(e.value) * tag.factor;
  throw Error(ErrorKind::invalid_input, "line " + std::to_string(e.line) + ": unit '" + e.unit + "' is not a " +
                                            dimension + " unit for '" + e.key + "'");
}

const char* fault_dimension(FaultKind kind) {
  switch (kind) {
    case FaultKind::mfc_pressure_drift: return "pressure_rate";
    case FaultKind::nozzle_clog_acceleration: return "speed";
    case FaultKind::atomizer_dropout: return "fraction";
  }
  return "fraction";
}

constexpr const char* kStateKeys[] = {"d_a", "V_l", "dr_tube", "dr_nozzle", "phi_A"};
constexpr const char* kStateDims[] = {"length", "volume", "length", "length", "fraction"};
constexpr const char* kOutputKeys[] = {"L_w", "L_o", "P_c", "P_s", "Q_m"};
constexpr const char* kOutputDims[] = {"length", "length", "pressure", "pressure", "flow"};

// Splits "group.N.field" into (N, field).
bool indexed(const std::string& key, const std::string& group, std::size_t& index, std::string& field) {
  if (key.rfind(group + ".", 0) != 0) return false;
  const auto rest = key.substr(group.size() + 1);
  const auto dot = rest.find('.');
  if (dot == std::string::npos) return false;
  const auto digits = rest.substr(0, dot);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (ec != std::errc() || ptr != digits.data() + digits.size())
    throw Error(ErrorKind::invalid_input, "bad index in '" + key + "'");
  field = rest.substr(dot + 1);
  return true;
}

template <typename T>
T& slot(std::map<std::size_t, T>& m, std::size_t i) {
  return m[i];
}

}  // namespace

double equilibrium_aerosol_fraction(const State& x, const Input& u, const Theta& theta, const ModelParameters& params) {
  const double headspace = params.geometry.vial_volume - x.V_l();
  const double generation = net_generation_H(u.Q_c(), x.V_l(), u.I_A(), params.generation).value;
  if (!(headspace > 0.0) || !(u.Q_c() > 0.0))
    throw Error(ErrorKind::invalid_input, "aerosol equilibrium needs headspace and carrier flow");
  // -Q_c φ² + bφ + H = 0
  const double b = theta(kInkVolume) * x.V_l() - u.Q_c() + theta(kAerosolFraction) * headspace;
  const double disc = std::sqrt(b * b + 4.0 * u.Q_c() * generation);
  if (!std::isfinite(disc)) throw Error(ErrorKind::invalid_input, "no real aerosol equilibrium");
  const double root = b < 0.0 ? 2.0 * generation / (disc - b) : (b + disc) / (2.0 * u.Q_c());
  if (!(root >= 0.0)) throw Error(ErrorKind::invalid_input, "aerosol equilibrium is negative");
  return root;
}

Scenario parse_scenario(const std::string& text) {
  Scenario s;
  struct PartialInput {
    std::optional<double> t, Q_c, Q_s, I_A;
  };
  struct PartialFault {
    std::optional<FaultKind> kind;
    std::optional<double> onset;
    std::optional<ConfigEntry> magnitude;
  };
  std::map<std::size_t, PartialInput> inputs;
  std::map<std::size_t, PartialFault> faults;
  std::map<std::size_t, ProbeSpec> probes;
  std::map<std::size_t, bool> probe_has_t;
  bool have_duration = false;

  for (const auto& e : parse_config(text)) {
    std::size_t index = 0;
    std::string field;
    auto unknown = [&e] {
      throw Error(ErrorKind::invalid_input, "line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    };
    if (e.key == "name") {
      s.name = e.value;
    } else if (e.key == "duration") {
      s.duration = value_in(e, "time");
      have_duration = true;
    } else if (e.key == "dt") {
      s.dt = value_in(e, "time");
    } else if (e.key == "seed") {
      const auto [ptr, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), s.seed);
      if (ec != std::errc() || ptr != e.value.data() + e.value.size())
        throw Error(ErrorKind::invalid_input, "line " + std::to_string(e.line) + ": bad seed");
    } else if (e.key == "process_noise_scale") {
      s.process_noise_scale = value_in(e, "fraction");
    } else if (e.key == "output_noise_scale") {
      s.output_noise_scale = value_in(e, "fraction");
    } else if (e.key.rfind("initial.", 0) == 0 || e.key.rfind("theta.", 0) == 0) {
      const bool initial = e.key[0] == 'i';
      const std::string name = e.key.substr(e.key.find('.') + 1);
      const auto it = std::find_if(std::begin(kStateKeys), std::end(kStateKeys), [&](const char* k) { return name == k; });
      if (it == std::end(kStateKeys)) unknown();
      const auto i = static_cast<int>(it - std::begin(kStateKeys));
      if (!initial) {
        s.theta(i) = value_in(e, "rate");
      } else if (i == kAerosolFraction && e.value == "equilibrium") {
        s.equilibrium_aerosol = true;
      } else {
        s.initial.vector()(i) = value_in(e, kStateDims[i]);
      }
    } else if (indexed(e.key, "input", index, field)) {
      auto& in = slot(inputs, index);
      if (field == "t") in.t = value_in(e, "time");
      else if (field == "Q_c") in.Q_c = value_in(e, "flow");
      else if (field == "Q_s") in.Q_s = value_in(e, "flow");
      else if (field == "I_A") in.I_A = value_in(e, "current");
      else unknown();
    } else if (indexed(e.key, "fault", index, field)) {
      auto& f = slot(faults, index);
      if (field == "kind") f.kind = parse_fault_kind(e.value);
      else if (field == "onset") f.onset = value_in(e, "time");
      else if (field == "magnitude") f.magnitude = e;
      else unknown();
    } else if (indexed(e.key, "probe", index, field)) {
      auto& p = slot(probes, index);
      if (field == "t") {
        p.t = value_in(e, "time");
        probe_has_t[index] = true;
      } else {
        const auto it =
            std::find_if(std::begin(kOutputKeys), std::end(kOutputKeys), [&](const char* k) { return field == k; });
        if (it == std::end(kOutputKeys)) unknown();
        const auto i = static_cast<int>(it - std::begin(kOutputKeys));
        p.offset.vector()(i) = value_in(e, kOutputDims[i]);
      }
    } else {
      unknown();
    }
  }
  if (!have_duration) throw Error(ErrorKind::invalid_input, "scenario: missing duration");

  Input carry;
  bool first = true;
  for (const auto& [i, in] : inputs) {
    if (!in.t) throw Error(ErrorKind::invalid_input, "scenario: input." + std::to_string(i) + ".t missing");
    if (first && (!in.Q_c || !in.Q_s || !in.I_A))
      throw Error(ErrorKind::invalid_input, "scenario: the first input entry must set Q_c, Q_s and I_A");
    first = false;
    if (in.Q_c) carry.Q_c() = *in.Q_c;
    if (in.Q_s) carry.Q_s() = *in.Q_s;
    if (in.I_A) carry.I_A() = *in.I_A;
    s.schedule.push_back({*in.t, carry});
  }
  for (const auto& [i, f] : faults) {
    if (!f.kind || !f.onset || !f.magnitude)
      throw Error(ErrorKind::invalid_input, "scenario: fault." + std::to_string(i) + " needs kind, onset, magnitude");
    s.faults.push_back({*f.kind, *f.onset, value_in(*f.magnitude, fault_dimension(*f.kind))});
  }
  for (const auto& [i, p] : probes) {
    if (!probe_has_t[i]) throw Error(ErrorKind::invalid_input, "scenario: probe." + std::to_string(i) + ".t missing");
    s.probes.push_back(p);
  }
  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_text_file(path)); }

std::string format_scenario(const Scenario& s) {
  std::string out;
  auto line = [&out](const std::string& key, double value, const char* unit) {
    out += key + " = " + format_double(value);
    if (*unit != '\0') out += std::string(" ") + unit;
    out += "\n";
  };
  out += "name = " + s.name + "\n";
  line("duration", s.duration, "s");
  line("dt", s.dt, "s");
  out += "seed = " + std::to_string(s.seed) + "\n";
  line("process_noise_scale", s.process_noise_scale, "1");
  line("output_noise_scale", s.output_noise_scale, "1");
  const double state_factor[] = {units::um, units::mL, units::um, units::um, 1.0};
  const char* state_unit[] = {"um", "mL", "um", "um", "1"};
  for (int i = 0; i < kStateCount; ++i) {
    if (i == kAerosolFraction && s.equilibrium_aerosol) {
      out += "initial.phi_A = equilibrium\n";
      continue;
    }
    line(std::string("initial.") + kStateKeys[i], s.initial.vector()(i) / state_factor[i], state_unit[i]);
  }
  for (int i = 0; i < kStateCount; ++i) line(std::string("theta.") + kStateKeys[i], s.theta(i), "1/s");
  for (std::size_t i = 0; i < s.schedule.size(); ++i) {
    const auto p = "input." + std::to_string(i) + ".";
    line(p + "t", s.schedule[i].t, "s");
    line(p + "Q_c", s.schedule[i].u.Q_c() / units::sccm, "sccm");
    line(p + "Q_s", s.schedule[i].u.Q_s() / units::sccm, "sccm");
    line(p + "I_A", s.schedule[i].u.I_A() / units::mA, "mA");
  }
  for (std::size_t i = 0; i < s.faults.size(); ++i) {
    const auto& f = s.faults[i];
    const auto p = "fault." + std::to_string(i) + ".";
    out += p + "kind = " + fault_kind_name(f.kind) + "\n";
    line(p + "onset", f.onset, "s");
    if (f.kind == FaultKind::nozzle_clog_acceleration) line(p + "magnitude", f.magnitude / units::um, "um/s");
    else if (f.kind == FaultKind::mfc_pressure_drift) line(p + "magnitude", f.magnitude, "Pa/s");
    else line(p + "magnitude", f.magnitude, "1");
  }
  const double output_factor[] = {units::um, units::um, 1.0, 1.0, units::sccm};
  const char* output_unit[] = {"um", "um", "Pa", "Pa", "sccm"};
  for (std::size_t i = 0; i < s.probes.size(); ++i) {
    const auto p = "probe." + std::to_string(i) + ".";
    line(p + "t", s.probes[i].t, "s");
    for (int k = 0; k < kOutputCount; ++k)
      if (s.probes[i].offset.vector()(k) != 0.0)
        line(p + kOutputKeys[k], s.probes[i].offset.vector()(k) / output_factor[k], output_unit[k]);
  }
  return out;
}

}  // namespace ajtwin
