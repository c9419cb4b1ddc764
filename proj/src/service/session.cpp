#include "ajtwin/service/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "ajtwin/core/config.hpp"
#include "ajtwin/core/error.hpp"
#include "ajtwin/core/units.hpp"
#include "ajtwin/estimation/kalman.hpp"
#include "ajtwin/estimation/twin_model.hpp"
#include "ajtwin/io/table.hpp"

namespace ajtwin {

namespace {

constexpr const char* kThetaKeys[] = {"theta_da", "theta_V", "theta_rT", "theta_rN", "theta_phi"};

constexpr std::pair<EventKind, const char*> kEventNames[] = {
    {EventKind::input_change, "input_change"},
    {EventKind::fault_onset, "fault_onset"},
    {EventKind::anomaly_alert, "anomaly_alert"},
    {EventKind::theta_swap, "theta_swap"},
    {EventKind::calibration_failure, "calibration_failure"},
    {EventKind::estimation_failure, "estimation_failure"},
    {EventKind::probe, "probe"},
    {EventKind::terminated, "terminated"},
};

std::map<std::string, std::string> detail_fields(const std::string& detail) {
  std::map<std::string, std::string> out;
  std::stringstream in(detail);
  std::string item;
  while (std::getline(in, item, ';')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) continue;
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

std::string input_detail(const Input& u, const char* source) {
  return "I_A=" + format_double(u.I_A() / units::mA) + ";Q_c=" + format_double(u.Q_c() / units::sccm) +
         ";Q_s=" + format_double(u.Q_s() / units::sccm) + ";source=" + source;
}

// Six significant digits, for messages.
std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

const char* event_kind_name(EventKind kind) {
  for (const auto& [k, name] : kEventNames)
    if (k == kind) return name;
  return "unknown";
}

EventKind parse_event_kind(const std::string& name) {
  for (const auto& [k, n] : kEventNames)
    if (name == n) return k;
  throw Error(ErrorKind::invalid_input, "unknown event kind '" + name + "'");
}

std::string format_event_log(std::span<const SessionEvent> events) {
  std::string out = "seq,t[s],kind,detail\n";
  for (const auto& e : events)
    out += std::to_string(e.seq) + "," + format_double(e.t) + "," + event_kind_name(e.kind) + "," + e.detail + "\n";
  return out;
}

std::vector<SessionEvent> parse_event_log(const std::string& text) {
  std::stringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "seq,t[s],kind,detail")
    throw Error(ErrorKind::invalid_input, "event log header must read 'seq,t[s],kind,detail'");
  std::vector<SessionEvent> events;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::array<std::string, 4> cells;
    std::size_t start = 0;
    for (int i = 0; i < 3; ++i) {
      const auto comma = line.find(',', start);
      if (comma == std::string::npos)
        throw Error(ErrorKind::invalid_input, "event log row " + std::to_string(row) + ": expected four cells");
      cells[static_cast<std::size_t>(i)] = line.substr(start, comma - start);
      start = comma + 1;
    }
    cells[3] = line.substr(start);
    SessionEvent e;
    const double seq = parse_double(cells[0]);
    if (!(seq >= 0.0) || seq != std::floor(seq))
      throw Error(ErrorKind::invalid_input, "event log row " + std::to_string(row) + ": bad seq");
    e.seq = static_cast<std::uint64_t>(seq);
    e.t = parse_double(cells[1]);
    e.kind = parse_event_kind(cells[2]);
    e.detail = cells[3];
    if (!events.empty() && e.seq < events.back().seq)
      throw Error(ErrorKind::invalid_input, "event log row " + std::to_string(row) + ": seq decreases");
    events.push_back(std::move(e));
  }
  return events;
}

std::string format_theta(const Theta& theta) {
  std::string out;
  for (int i = 0; i < kStateCount; ++i) out += (i ? ";" : "") + std::string(kThetaKeys[i]) + "=" + format_double(theta(i));
  return out;
}

Theta parse_theta(const std::string& detail) {
  const auto fields = detail_fields(detail);
  Theta theta;
  for (int i = 0; i < kStateCount; ++i) {
    const auto it = fields.find(kThetaKeys[i]);
    if (it == fields.end()) throw Error(ErrorKind::invalid_input, std::string("θ detail lacks ") + kThetaKeys[i]);
    theta(i) = parse_double(it->second);
  }
  return theta;
}

TimeSeriesRecord canonical_record(const TimeSeriesRecord& record) {
  return records_from_table(parse_table(format_table(table_from_records({record})))).front();
}

struct Session::Estimator {
  TwinFilterModel model;
  ExtendedKalmanFilter<TwinFilterModel> filter;

  Estimator(const PrinterModel& printer, const Theta& theta, const GaussianBelief& prior)
      : model(printer, theta),
        filter(model, model.to_normalized(prior.mean), model.covariance_to_normalized(prior.covariance)) {}

  GaussianBelief belief() const {
    return {model.to_state(filter.mean()), model.covariance_to_si(filter.covariance())};
  }
};

Session::Session(std::string id, const Scenario& scenario, const ModelParameters& params, const Theta& theta)
    : id_(std::move(id)),
      mode_(SessionMode::live),
      model_(std::make_shared<PrinterModel>(params)),
      theta_(theta),
      scenario_(scenario),
      printer_(std::make_unique<VirtualPrinter>(scenario, model_->params)),
      input_(scenario.input_at(0.0)),
      fault_logged_(scenario.faults.size(), false) {
  if (std::abs(scenario.dt - params.dt) > 1e-12 * params.dt)
    throw Error(ErrorKind::invalid_input, "scenario dt differs from the model dt");
  if (scenario.step_count() == 0) finished_ = true;
}

Session::Session(std::string id, ReplaySource source, const ModelParameters& params, const Theta& theta)
    : id_(std::move(id)),
      mode_(SessionMode::replay),
      model_(std::make_shared<PrinterModel>(params)),
      theta_(theta),
      replay_(std::move(source)) {
  if (replay_.records.empty()) finished_ = true;
  else input_ = replay_.records.front().u;
}

Session::~Session() = default;

double Session::time() const {
  if (mode_ == SessionMode::live) return static_cast<double>(frames_.size()) * scenario_->dt;
  if (frames_.size() < replay_.records.size()) return replay_.records[frames_.size()].t;
  return frames_.empty() ? 0.0 : frames_.back().t;
}

Input Session::next_input() const {
  if (mode_ == SessionMode::replay)
    return frames_.size() < replay_.records.size() ? replay_.records[frames_.size()].u : input_;
  if (pending_input_) return *pending_input_;
  Input u = input_;
  for (std::size_t i = schedule_cursor_; i < scenario_->schedule.size(); ++i)
    if (scenario_->schedule[i].t <= time()) u = scenario_->schedule[i].u;
  return u;
}

std::optional<GaussianBelief> Session::belief() const {
  if (!estimator_) return std::nullopt;
  return estimator_->belief();
}

void Session::log(EventKind kind, std::string detail) {
  events_.push_back({next_seq(), time(), kind, std::move(detail)});
}

void Session::apply_theta(const Theta& theta) {
  theta_ = theta;
  if (estimator_) {
    const GaussianBelief b = estimator_->belief();
    estimator_ = std::make_unique<Estimator>(*model_, theta_, b);
  }
  log(EventKind::theta_swap, format_theta(theta_));
}

void Session::schedule_theta(const Theta& theta) { pending_theta_ = theta; }

void Session::record_failure(EventKind kind, const std::string& detail) { log(kind, detail); }

std::uint64_t Session::set_input(InputIndex which, double value) {
  if (mode_ != SessionMode::live) throw Error(ErrorKind::request, "replay sessions take inputs from the recording");
  if (finished_) throw Error(ErrorKind::request, "session has finished");
  const auto& b = model_->params.bounds;
  double lo = 0.0, hi = 0.0, display = 1.0;
  const char* name = "";
  switch (which) {
    case kAtomizerCurrent: lo = b.I_A_min, hi = b.I_A_max, display = units::mA, name = "I_A"; break;
    case kCarrierFlow: lo = b.Q_c_min, hi = b.Q_c_max, display = units::sccm, name = "Q_c"; break;
    case kSheathFlow: lo = b.Q_s_min, hi = b.Q_s_max, display = units::sccm, name = "Q_s"; break;
  }
  if (!(value >= lo && value <= hi))
    throw Error(ErrorKind::request, std::string(name) + " = " + short_number(value / display) + " outside [" +
                                        short_number(lo / display) + ", " + short_number(hi / display) + "]");
  Input u = next_input();
  u.vector()(which) = value;
  pending_input_ = u;
  return next_seq();
}

State Session::probe() {
  if (mode_ != SessionMode::live) throw Error(ErrorKind::request, "replay sessions have no latent truth");
  const State x = printer_->state();
  std::string detail;
  const auto table = state_table({time()}, {x});
  for (std::size_t i = 1; i < table.columns.size(); ++i)
    detail += (i > 1 ? ";" : "") + split_column(table.columns[i]).first + "=" + format_double(*table.rows[0][i]);
  log(EventKind::probe, detail);
  return x;
}

const TelemetryFrame& Session::tick() {
  if (finished_) throw Error(ErrorKind::request, "session has finished");
  const std::uint64_t seq = next_seq();
  const double t = time();
  TimeSeriesRecord record;

  if (mode_ == SessionMode::replay) {
    while (replay_event_cursor_ < replay_.events.size() && replay_.events[replay_event_cursor_].seq <= seq) {
      const auto& e = replay_.events[replay_event_cursor_++];
      if (e.kind == EventKind::theta_swap) pending_theta_ = parse_theta(e.detail);
      if (e.kind == EventKind::fault_onset) log(e.kind, e.detail);
    }
  }
  if (pending_theta_) {
    apply_theta(*pending_theta_);
    pending_theta_.reset();
  }

  if (mode_ == SessionMode::live) {
    const Input previous = input_;
    const char* source = "schedule";
    input_ = next_input();
    while (schedule_cursor_ < scenario_->schedule.size() && scenario_->schedule[schedule_cursor_].t <= t)
      ++schedule_cursor_;
    if (pending_input_) source = "operator";
    pending_input_.reset();
    if (seq > 0 && !(input_ == previous)) log(EventKind::input_change, input_detail(input_, source));
    for (std::size_t i = 0; i < scenario_->faults.size(); ++i) {
      const auto& f = scenario_->faults[i];
      if (fault_logged_[i] || t < f.onset) continue;
      fault_logged_[i] = true;
      log(EventKind::fault_onset, std::string("kind=") + fault_kind_name(f.kind) + ";onset=" + format_double(f.onset));
    }
    const PrinterSample sample = printer_->observe(input_);
    record = canonical_record({t, input_, sample.noisy, OutputMask().set()});
  } else {
    record = replay_.records[seq];
    if (seq > 0 && !(record.u == input_)) log(EventKind::input_change, input_detail(record.u, "record"));
    input_ = record.u;
  }

  records_.push_back(record);
  TelemetryFrame frame;
  frame.seq = seq;
  frame.t = record.t;
  frame.u = record.u;
  frame.y = record.y;
  frame.observed = record.observed;
  frame.theta = theta_;
  estimate(frame);
  frames_.push_back(frame);

  if (frame.anomaly) {
    if (++flagged_run_ == kAlertRun)
      events_.push_back({frame.seq, frame.t, EventKind::anomaly_alert,
                         "run=" + std::to_string(kAlertRun) + ";nis=" + format_double(frame.nis)});
  } else {
    flagged_run_ = 0;
  }

  if (mode_ == SessionMode::live) {
    if (frames_.size() >= scenario_->step_count()) {
      finished_ = true;
    } else if (!printer_->advance(input_)) {
      finished_ = true;
      log(EventKind::terminated, "reason=" + printer_->terminal_event());
    }
  } else if (frames_.size() >= replay_.records.size()) {
    finished_ = true;
  }
  return frames_.back();
}

void Session::estimate(TelemetryFrame& frame) {
  const std::size_t k = records_.size() - 1;
  const auto window = static_cast<std::size_t>(model_->params.estimation.init_window);
  std::optional<TwinFilterStep> step;
  if (!estimator_) {
    if (k + 1 < belief_origin_ + window) return;
    try {
      const std::span<const TimeSeriesRecord> span(records_.data() + belief_origin_, k + 1 - belief_origin_);
      const GaussianBelief prior{estimate_initial_state(span, *model_), initial_covariance(model_->params)};
      estimator_ = std::make_unique<Estimator>(*model_, theta_, prior);
      for (std::size_t j = 0; j < span.size(); ++j) {
        const TwinObservation obs = make_observation(span[j], estimator_->model);
        step = j == 0 ? estimator_->filter.start(span[0].u, obs)
                      : estimator_->filter.advance(span[j - 1].u, span[j].u, obs);
      }
    } catch (const Error& e) {
      estimator_.reset();
      belief_origin_ = k + 2 - window;
      log(EventKind::estimation_failure, std::string("stage=initial_fit;message=") + e.what());
      return;
    }
  } else {
    try {
      step = estimator_->filter.advance(records_[k - 1].u, records_[k].u,
                                        make_observation(records_[k], estimator_->model));
    } catch (const Error& e) {
      estimator_.reset();
      belief_origin_ = k + 1;
      log(EventKind::estimation_failure, std::string("stage=filter;message=") + e.what());
      return;
    }
  }
  frame.belief = estimator_->belief();
  const AnomalyScore score = anomaly_score(*step);
  frame.nis = score.nis;
  frame.anomaly = score.flag;
}

std::string Session::export_table(std::uint64_t from, std::uint64_t to) const {
  if (from > to || to > frames_.size())
    throw Error(ErrorKind::request, "range [" + std::to_string(from) + ", " + std::to_string(to) + ") outside [0, " +
                                        std::to_string(frames_.size()) + ")");
  return format_table(table_from_records({records_.begin() + static_cast<std::ptrdiff_t>(from),
                                          records_.begin() + static_cast<std::ptrdiff_t>(to)}));
}

std::string Session::export_events(std::uint64_t from, std::uint64_t to) const {
  if (from > to || to > frames_.size())
    throw Error(ErrorKind::request, "range [" + std::to_string(from) + ", " + std::to_string(to) + ") outside [0, " +
                                        std::to_string(frames_.size()) + ")");
  std::vector<SessionEvent> out;
  if (from < to) {
    const bool swap_at_start = std::any_of(events_.begin(), events_.end(), [&](const SessionEvent& e) {
      return e.seq == from && e.kind == EventKind::theta_swap;
    });
    if (!swap_at_start) out.push_back({0, frames_[from].t, EventKind::theta_swap, format_theta(frames_[from].theta)});
  }
  for (const auto& e : events_) {
    if (e.seq < from || e.seq >= to) continue;
    SessionEvent r = e;
    r.seq -= from;
    out.push_back(r);
  }
  return format_event_log(out);
}

}  // namespace ajtwin
