#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ajtwin/core/config.hpp"
#include "ajtwin/core/error.hpp"
#include "ajtwin/core/params.hpp"
#include "ajtwin/core/units.hpp"
#include "ajtwin/estimation/estimator.hpp"
#include "ajtwin/io/table.hpp"
#include "ajtwin/profile/cross_section.hpp"
#include "ajtwin/profile/metrics.hpp"
#include "ajtwin/service/server.hpp"
#include "ajtwin/service/session.hpp"
#include "ajtwin/sim/scenario.hpp"
#include "ajtwin/sim/simulator.hpp"

using namespace ajtwin;

namespace {

enum ExitCode { kOk = 0, kInvalid = 2, kDegenerate = 3, kNumerical = 4 };

struct Degenerate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write '" + path + "'");
  out << text;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input:
    case ErrorKind::request: return kInvalid;
    case ErrorKind::not_ready: return kDegenerate;
    default: return kNumerical;
  }
}

struct Common {
  std::string params_path;
  double dt = 0.0;
  int window = 0;
  std::string theta;
  std::string out;

  ModelParameters parameters() const {
    ModelParameters p = resolve_parameters(params_path);
    if (dt > 0.0) p.dt = dt;
    if (window > 0) p.estimation.init_window = window;
    if (const auto problems = validate_parameters(p); !problems.empty())
      throw Error(ErrorKind::invalid_input, "parameters: " + problems.front());
    return p;
  }

  // Either five comma-separated rates in 1/s or a calibration report file.
  Theta drift(const Theta& fallback = Theta::Zero()) const {
    if (theta.empty()) return fallback;
    if (theta.find(',') != std::string::npos) {
      Theta t;
      std::stringstream in(theta);
      std::string cell;
      int i = 0;
      while (std::getline(in, cell, ',')) {
        if (i == kStateCount) break;
        t(i++) = parse_double(cell);
      }
      if (i != kStateCount || std::getline(in, cell))
        throw Error(ErrorKind::invalid_input, "--theta needs five comma-separated rates");
      return t;
    }
    std::string detail;
    std::stringstream in(read_file(theta));
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("theta_", 0) != 0) continue;
      std::stringstream fields(line);
      std::string key, eq, value;
      fields >> key >> eq >> value;
      detail += key + "=" + value + ";";
    }
    return parse_theta(detail);
  }
};

void add_common(CLI::App* cmd, Common& c, bool with_theta, bool with_window) {
  cmd->add_option("--params", c.params_path, "Parameter file (overrides AJTWIN_PARAMS)");
  cmd->add_option("--dt", c.dt, "Step length in s")->check(CLI::PositiveNumber);
  if (with_window) cmd->add_option("--window", c.window, "Records in the initial-state fit")->check(CLI::PositiveNumber);
  if (with_theta) cmd->add_option("--theta", c.theta, "Drift rates: five comma-separated values in 1/s, or a calibrate report");
  cmd->add_option("--out", c.out, "Output path (stdout if omitted)");
}

std::vector<TimeSeriesRecord> load_records(const std::string& path) {
  auto records = records_from_table(parse_table(read_file(path)));
  if (records.size() < 2) throw Degenerate("table has fewer than two records");
  return records;
}

FilterResult filter_records(const std::vector<TimeSeriesRecord>& records, const Theta& theta,
                            const PrinterModel& model) {
  const auto n = std::min(records.size(), static_cast<std::size_t>(model.params.estimation.init_window));
  const GaussianBelief prior{estimate_initial_state(std::span(records).first(n), model),
                             initial_covariance(model.params)};
  return ekf_run(records, prior, theta, model);
}

int cmd_simulate(const std::string& path, const Common& c, std::optional<std::uint64_t> seed) {
  if (c.out.empty()) throw Error(ErrorKind::invalid_input, "simulate needs --out PREFIX");
  Scenario scenario = load_scenario(path);
  ModelParameters params = c.parameters();
  if (seed) scenario.seed = *seed;
  if (c.dt > 0.0) scenario.dt = c.dt;
  validate_scenario(scenario);
  const SimulationTrace trace = simulate(scenario, params);
  write_output(c.out + "_trace.csv", format_table(table_from_records(trace.records())));
  write_output(c.out + "_truth.csv", format_table(state_table(trace.t, trace.state)));
  if (trace.terminated) std::cerr << "terminated: " << trace.terminal_event << "\n";
  return kOk;
}

int cmd_estimate(const std::string& path, const Common& c, bool smooth) {
  const PrinterModel model(c.parameters());
  const auto records = load_records(path);
  const FilterResult filtered = filter_records(records, c.drift(), model);
  std::vector<double> t;
  std::vector<GaussianBelief> beliefs;
  for (const auto& r : records) t.push_back(r.t);
  if (smooth) {
    const SmootherResult smoothed = rts_smooth(filtered);
    for (std::size_t k = 0; k < smoothed.size(); ++k) beliefs.push_back(smoothed.smoothed(k));
  } else {
    for (std::size_t k = 0; k < filtered.size(); ++k) beliefs.push_back(filtered.updated(k));
  }
  write_output(c.out, format_table(belief_table(t, beliefs)));
  return kOk;
}

int cmd_calibrate(const std::string& path, const Common& c, std::size_t em_window) {
  const PrinterModel model(c.parameters());
  const auto records = load_records(path);
  const CalibrationReport report = em_calibrate(records, c.drift(), em_window, model);
  constexpr const char* keys[] = {"theta_da", "theta_V", "theta_rT", "theta_rN", "theta_phi"};
  std::string text;
  for (int i = 0; i < kStateCount; ++i) text += std::string(keys[i]) + " = " + format_double(report.final_theta()(i)) + " 1/s\n";
  text += "iterations = " + std::to_string(report.iterations()) + "\n";
  text += std::string("converged = ") + (report.converged ? "true" : "false") + "\n";
  text += "window = " + std::to_string(report.window_begin) + " " + std::to_string(report.window_size) + "\n";
  for (std::size_t i = 0; i < report.objective.size(); ++i)
    text += "objective." + std::to_string(i + 1) + " = " + format_double(report.objective[i]) + "\n";
  write_output(c.out, text);
  if (!report.objective_non_increasing()) std::cerr << "warning: objective increased between iterations\n";
  return kOk;
}

InputSchedule load_schedule(const std::string& path, const Input& initial) {
  InputSchedule schedule{initial, {}};
  if (path.empty()) return schedule;
  const Table table = parse_table(read_file(path));
  const std::vector<std::string> expected = {"offset[s]", "I_A[mA]", "Q_c[sccm]", "Q_s[sccm]"};
  if (table.columns != expected)
    throw Error(ErrorKind::invalid_input, "schedule header must read 'offset[s],I_A[mA],Q_c[sccm],Q_s[sccm]'");
  double last = -1.0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    for (const auto& cell : row)
      if (!cell) throw Error(ErrorKind::invalid_input, "schedule row " + std::to_string(r + 1) + " has an empty cell");
    const double offset = *row[0];
    if (!(offset >= 0.0) || offset <= last)
      throw Error(ErrorKind::invalid_input, "schedule offsets must be non-negative and increasing");
    last = offset;
    const Input u(*row[1] * units::mA, *row[2] * units::sccm, *row[3] * units::sccm);
    if (offset == 0.0) schedule.initial = u;
    else schedule.changes.emplace_back(offset, u);
  }
  return schedule;
}

int cmd_forecast(const std::string& path, const std::string& schedule_path, const Common& c, int horizon) {
  const PrinterModel model(c.parameters());
  const auto records = load_records(path);
  const Theta theta = c.drift();
  const FilterResult filtered = filter_records(records, theta, model);
  const InputSchedule schedule = load_schedule(schedule_path, records.back().u);
  const auto steps = forecast(filtered.updated(filtered.size() - 1), theta, schedule, horizon, model);
  write_output(c.out, format_table(forecast_table(records.back().t, model.params.dt, steps)));
  return kOk;
}

int cmd_analyze_profile(const std::string& path, const std::string& kind, const Common& c,
                        std::optional<double> background, int smoothing) {
  const CrossSection cs = parse_cross_section(read_file(path));
  const double um = units::um;
  Table table;
  std::string line;
  if (kind == "grayscale") {
    if (cs.kind != ProfileKind::grayscale) throw Error(ErrorKind::invalid_input, "grayscale analysis needs a grayscale profile");
    if (cs.size() == 0) throw Degenerate("no-line-found");
    GrayscaleOptions options;
    options.smoothing = smoothing;
    const double level = background.value_or(*std::max_element(cs.value.begin(), cs.value.end()));
    const LineMetrics m = extract_grayscale_metrics(cs, level, options);
    if (!m.found) throw Degenerate("no-line-found");
    line = "L_w[um]=" + format_double(m.linewidth / um) + " L_o[um]=" + format_double(m.overspray / um) +
           " center[um]=" + format_double(m.center / um) + " shoulders=" + (m.shoulders_found ? "1" : "0") +
           " overspray_partial=" + (m.overspray_partial ? "1" : "0");
    const auto smooth = moving_average(cs.value, smoothing);
    table.columns = {"position[um]", "value[1]", "smoothed[1]"};
    for (std::size_t i = 0; i < cs.size(); ++i) table.rows.push_back({cs.position[i] / um, cs.value[i], smooth[i]});
  } else if (kind == "cfd" || kind == "flow") {
    if (cs.kind != ProfileKind::height) throw Error(ErrorKind::invalid_input, kind + " analysis needs a height profile");
    if (kind == "cfd") {
      const LineMetrics m = cfd_profile_metrics(cs);
      if (!m.found) throw Degenerate("no-line-found");
      line = "L_w[um]=" + format_double(m.linewidth / um) + " L_w_spread[um]=" + format_double(m.linewidth_spread / um) +
             " center[um]=" + format_double(m.center / um);
    } else {
      const double q = material_flow(cs, c.parameters().platen_speed);
      if (!(q > 0.0)) throw Degenerate("no material on the profile");
      line = "Q_m[sccm]=" + format_double(q / units::sccm);
    }
    table.columns = {"position[um]", "height[um]"};
    for (std::size_t i = 0; i < cs.size(); ++i) table.rows.push_back({cs.position[i] / um, cs.value[i] / um});
  } else {
    throw Error(ErrorKind::invalid_input, "kind must be grayscale, cfd or flow");
  }
  std::cout << line << "\n";
  if (!c.out.empty()) write_output(c.out, format_table(table));
  return kOk;
}

int cmd_serve(const Common& c, const std::string& address, std::uint16_t port) {
  c.parameters();
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  Service service(ServiceOptions{c.params_path});
  Server server(service, address, port);
  std::cerr << "listening on " << address << ":" << server.port() << "\n";
  std::thread waiter([&] {
    int received = 0;
    sigwait(&signals, &received);
    server.stop();
  });
  server.run();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aerosol-jet printer digital twin"};
  app.require_subcommand(1);
  Common common;
  std::string input, second, kind = "grayscale", address = "127.0.0.1";
  std::optional<std::uint64_t> seed;
  std::optional<double> background;
  bool smooth = false;
  int horizon = 1, smoothing = 3;
  std::size_t em_window = 0;
  std::uint16_t port = 7878;

  auto* simulate = app.add_subcommand("simulate", "Run a scenario; writes PREFIX_trace.csv and PREFIX_truth.csv");
  simulate->add_option("scenario", input, "Scenario file")->required();
  simulate->add_option("--seed", seed, "Override the scenario seed");
  add_common(simulate, common, false, false);

  auto* estimate = app.add_subcommand("estimate", "Filter a recorded table; means and ±2σ bounds per state");
  estimate->add_option("table", input, "Time-series table")->required();
  estimate->add_flag("--smooth", smooth, "Apply the backward smoother");
  add_common(estimate, common, true, true);

  auto* calibrate = app.add_subcommand("calibrate", "Learn drift rates from a recorded table");
  calibrate->add_option("table", input, "Time-series table")->required();
  calibrate->add_option("--em-window", em_window, "Use only the last N records (0: all)");
  add_common(calibrate, common, true, true);

  auto* fcast = app.add_subcommand("forecast", "Open-loop output forecast from the end of a recorded table");
  fcast->add_option("table", input, "Time-series table")->required();
  fcast->add_option("schedule", second, "Input schedule: offset[s],I_A[mA],Q_c[sccm],Q_s[sccm]");
  fcast->add_option("--horizon", horizon, "Steps ahead")->check(CLI::Range(1, 1000000));
  add_common(fcast, common, true, true);

  auto* profile = app.add_subcommand("analyze-profile", "Line metrics from a cross-section file");
  profile->add_option("profile", input, "Cross-section file")->required();
  profile->add_option("--kind", kind, "grayscale, cfd or flow")->check(CLI::IsMember({"grayscale", "cfd", "flow"}));
  profile->add_option("--background", background, "Background gray level (default: brightest sample)");
  profile->add_option("--smoothing", smoothing, "Moving-average length")->check(CLI::PositiveNumber);
  add_common(profile, common, false, false);

  auto* serve = app.add_subcommand("serve", "Host live twin sessions on a local socket");
  serve->add_option("--address", address, "Listen address");
  serve->add_option("--port", port, "TCP port (0: any free port)");
  serve->add_option("--params", common.params_path, "Parameter file (overrides AJTWIN_PARAMS)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(input, common, seed);
    if (estimate->parsed()) return cmd_estimate(input, common, smooth);
    if (calibrate->parsed()) return cmd_calibrate(input, common, em_window);
    if (fcast->parsed()) return cmd_forecast(input, second, common, horizon);
    if (profile->parsed()) return cmd_analyze_profile(input, kind, common, background, smoothing);
    if (serve->parsed()) return cmd_serve(common, address, port);
  } catch (const Degenerate& e) {
    std::cerr << "ajtwin: " << e.what() << "\n";
    return kDegenerate;
  } catch (const Error& e) {
    std::cerr << "ajtwin: " << error_kind_name(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  }
  return kOk;
}
