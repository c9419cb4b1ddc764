#include "ajtwin/service/service.hpp"

#include <chrono>
#include <thread>

#include "ajtwin/core/error.hpp"
#include "ajtwin/core/units.hpp"
#include "ajtwin/estimation/estimator.hpp"
#include "ajtwin/io/table.hpp"

namespace ajtwin {

using nlohmann::json;

namespace {

constexpr const char* kInputKeys[] = {"I_A", "Q_c", "Q_s"};
constexpr double kInputFactors[] = {units::mA, units::sccm, units::sccm};
constexpr const char* kOutputKeys[] = {"L_w", "L_o", "P_c", "P_s", "Q_m"};
constexpr double kOutputFactors[] = {units::um, units::um, 1.0, 1.0, units::sccm};
constexpr const char* kStateKeys[] = {"d_a", "V_l", "dr_tube", "dr_nozzle", "phi_A"};
constexpr double kStateFactors[] = {units::um, units::mL, units::um, units::um, 1.0};
constexpr const char* kThetaKeys[] = {"theta_da", "theta_V", "theta_rT", "theta_rN", "theta_phi"};

constexpr const char* kOps[] = {"hello",  "list_sessions", "create_session", "status",  "start",
                                "pause",  "step",          "set_input",      "what_if", "calibrate_now",
                                "subscribe", "unsubscribe", "frames",        "events",  "export",
                                "probe",  "close_session"};

[[noreturn]] void bad_request(const std::string& message) { throw Error(ErrorKind::request, message); }

const json& field(const json& request, const char* key) {
  if (!request.contains(key)) bad_request(std::string("missing field '") + key + "'");
  return request.at(key);
}

double number(const json& request, const char* key, std::optional<double> fallback = std::nullopt) {
  if (!request.contains(key)) {
    if (fallback) return *fallback;
    bad_request(std::string("missing field '") + key + "'");
  }
  const json& v = request.at(key);
  if (!v.is_number()) bad_request(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::uint64_t count(const json& request, const char* key, std::optional<std::uint64_t> fallback = std::nullopt) {
  if (!request.contains(key)) {
    if (fallback) return *fallback;
    bad_request(std::string("missing field '") + key + "'");
  }
  const json& v = request.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    bad_request(std::string("field '") + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string text(const json& request, const char* key) {
  const json& v = field(request, key);
  if (!v.is_string()) bad_request(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

json input_json(const Input& u) {
  json out;
  for (int i = 0; i < kInputCount; ++i) out[kInputKeys[i]] = u.vector()(i) / kInputFactors[i];
  return out;
}

json theta_json(const Theta& theta) {
  json out;
  for (int i = 0; i < kStateCount; ++i) out[kThetaKeys[i]] = theta(i);
  return out;
}

Theta theta_from_json(const json& v) {
  if (!v.is_object()) bad_request("theta must be an object");
  Theta theta = Theta::Zero();
  for (int i = 0; i < kStateCount; ++i) theta(i) = number(v, kThetaKeys[i], 0.0);
  return theta;
}

json output_json(const Output& y, const OutputMask& observed) {
  json out;
  for (int i = 0; i < kOutputCount; ++i)
    out[kOutputKeys[i]] = observed.test(static_cast<std::size_t>(i)) ? json(y.vector()(i) / kOutputFactors[i]) : json();
  return out;
}

json belief_json(const GaussianBelief& b) {
  json mean, variance;
  for (int i = 0; i < kStateCount; ++i) {
    mean[kStateKeys[i]] = b.mean.vector()(i) / kStateFactors[i];
    variance[kStateKeys[i]] = std::max(0.0, b.covariance(i, i)) / (kStateFactors[i] * kStateFactors[i]);
  }
  return {{"mean", mean}, {"variance", variance}};
}

int input_index(const std::string& name) {
  for (int i = 0; i < kInputCount; ++i)
    if (name == kInputKeys[i]) return i;
  bad_request("unknown input '" + name + "'; expected I_A, Q_c or Q_s");
}

}  // namespace

json frame_to_json(const TelemetryFrame& frame) {
  return {{"seq", frame.seq},
          {"t", frame.t},
          {"u", input_json(frame.u)},
          {"y", output_json(frame.y, frame.observed)},
          {"belief", frame.belief ? belief_json(*frame.belief) : json()},
          {"nis", frame.belief ? json(frame.nis) : json()},
          {"anomaly", frame.anomaly},
          {"theta", theta_json(frame.theta)}};
}

json event_to_json(const SessionEvent& event) {
  return {{"seq", event.seq}, {"t", event.t}, {"kind", event_kind_name(event.kind)}, {"detail", event.detail}};
}

void Outbox::push_response(json message) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    responses_.push_back(std::move(message));
  }
  ready_.notify_one();
}

void Outbox::push_frame(json message) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    if (frames_.size() >= capacity_) {
      frames_.pop_front();
      ++dropped_;
      ++dropped_unreported_;
    }
    frames_.push_back(std::move(message));
  }
  ready_.notify_one();
}

std::optional<json> Outbox::take() {
  if (!responses_.empty()) {
    json m = std::move(responses_.front());
    responses_.pop_front();
    return m;
  }
  if (!frames_.empty()) {
    json m = std::move(frames_.front());
    frames_.pop_front();
    m["dropped_before"] = dropped_unreported_;
    dropped_unreported_ = 0;
    return m;
  }
  return std::nullopt;
}

std::optional<json> Outbox::pop() {
  std::unique_lock lock(mutex_);
  ready_.wait(lock, [&] { return closed_ || !responses_.empty() || !frames_.empty(); });
  return take();
}

std::optional<json> Outbox::try_pop() {
  std::lock_guard lock(mutex_);
  return take();
}

void Outbox::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  ready_.notify_all();
}

std::size_t Outbox::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

struct Service::Host {
  std::mutex mutex;
  std::condition_variable wake;
  Session session;
  bool running = false;
  bool stopping = false;
  bool calibrating = false;
  double rate = 1.0;
  std::size_t events_published = 0;
  std::vector<std::weak_ptr<Outbox>> subscribers;
  std::thread runner;

  template <typename... Args>
  explicit Host(Args&&... args) : session(std::forward<Args>(args)...) {
    runner = std::thread([this] { run(); });
  }

  ~Host() {
    {
      std::lock_guard lock(mutex);
      stopping = true;
    }
    wake.notify_all();
    runner.join();
  }

  void broadcast(const json& message) {
    std::erase_if(subscribers, [](const std::weak_ptr<Outbox>& w) { return w.expired(); });
    for (const auto& w : subscribers)
      if (auto s = w.lock()) s->push_frame(message);
  }

  void publish_events() {
    const auto& events = session.events();
    for (; events_published < events.size(); ++events_published)
      broadcast({{"type", "event"}, {"session", session.id()}, {"event", event_to_json(events[events_published])}});
  }

  json tick() {
    json frame = frame_to_json(session.tick());
    publish_events();
    broadcast({{"type", "frame"}, {"session", session.id()}, {"frame", frame}});
    if (session.finished()) running = false;
    return frame;
  }

  const char* state() const { return session.finished() ? "finished" : running ? "running" : "paused"; }

  json status() const {
    const auto belief = session.belief();
    return {{"session", session.id()},
            {"mode", session.mode() == SessionMode::live ? "live" : "replay"},
            {"state", state()},
            {"t", session.time()},
            {"next_seq", session.next_seq()},
            {"dt", session.params().dt},
            {"rate", rate},
            {"input", input_json(session.next_input())},
            {"theta", theta_json(session.theta())},
            {"has_belief", belief.has_value()},
            {"calibrating", calibrating}};
  }

  void run() {
    std::unique_lock lock(mutex);
    auto deadline = std::chrono::steady_clock::now();
    while (!stopping) {
      if (!running) {
        wake.wait(lock, [&] { return stopping || running; });
        deadline = std::chrono::steady_clock::now();
        continue;
      }
      deadline += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(session.params().dt / rate));
      if (wake.wait_until(lock, deadline, [&] { return stopping || !running; })) continue;
      try {
        tick();
      } catch (const Error& e) {
        running = false;
        broadcast({{"type", "error"}, {"session", session.id()}, {"message", e.what()}});
      }
    }
  }
};

Service::Service(ServiceOptions options) : options_(std::move(options)) {}

Service::~Service() {
  std::map<std::string, std::shared_ptr<Host>> sessions;
  {
    std::lock_guard lock(mutex_);
    sessions.swap(sessions_);
  }
}

json Service::handle(const json& request, const std::shared_ptr<Outbox>& client) {
  json response = {{"id", request.is_object() && request.contains("id") ? request.at("id") : json()}};
  try {
    if (!request.is_object()) bad_request("request must be an object");
    response["result"] = dispatch(text(request, "op"), request, client);
    response["ok"] = true;
  } catch (const Error& e) {
    response["ok"] = false;
    response["error"] = {{"kind", error_kind_name(e.kind())}, {"message", e.what()}};
  } catch (const json::exception& e) {
    response["ok"] = false;
    response["error"] = {{"kind", "request"}, {"message", e.what()}};
  }
  return response;
}

void Service::disconnect(const std::shared_ptr<Outbox>& client) {
  std::vector<std::shared_ptr<Host>> hosts;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, h] : sessions_) hosts.push_back(h);
  }
  for (const auto& h : hosts) {
    std::lock_guard lock(h->mutex);
    std::erase_if(h->subscribers, [&](const std::weak_ptr<Outbox>& w) { return w.lock() == client; });
  }
}

std::shared_ptr<Service::Host> Service::host(const json& request) {
  const std::string id = text(request, "session");
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) bad_request("no session '" + id + "'");
  return it->second;
}

json Service::dispatch(const std::string& op, const json& request, const std::shared_ptr<Outbox>& client) {
  if (op == "hello") return {{"protocol", "ajtwin"}, {"version", kProtocolVersion}, {"ops", kOps}};
  if (op == "list_sessions") {
    std::lock_guard lock(mutex_);
    json ids = json::array();
    for (const auto& [id, h] : sessions_) ids.push_back(id);
    return {{"sessions", ids}};
  }
  if (op == "create_session") return create_session(request);
  if (op == "close_session") {
    const std::string id = text(request, "session");
    std::shared_ptr<Host> closed;
    {
      std::lock_guard lock(mutex_);
      const auto it = sessions_.find(id);
      if (it == sessions_.end()) bad_request("no session '" + id + "'");
      closed = std::move(it->second);
      sessions_.erase(it);
    }
    return {{"session", id}, {"closed", true}};
  }

  const auto h = host(request);
  if (op == "what_if") return what_if(h, request);
  if (op == "calibrate_now") return calibrate(h, request);

  std::lock_guard lock(h->mutex);
  Session& s = h->session;
  if (op == "status") return h->status();
  if (op == "start") {
    const double rate = number(request, "rate", h->rate);
    if (!(rate > 0.0 && rate <= 1e4)) bad_request("rate must lie in (0, 10000] simulated seconds per second");
    if (s.finished()) bad_request("session has finished");
    h->rate = rate;
    h->running = true;
    h->wake.notify_all();
    return h->status();
  }
  if (op == "pause") {
    h->running = false;
    h->wake.notify_all();
    return h->status();
  }
  if (op == "step") {
    const std::uint64_t n = count(request, "count", 1);
    if (n == 0 || n > options_.max_step_count)
      bad_request("count must lie in [1, " + std::to_string(options_.max_step_count) + "]");
    if (h->running) bad_request("pause the session before stepping");
    json frames = json::array();
    for (std::uint64_t i = 0; i < n && !s.finished(); ++i) frames.push_back(h->tick());
    if (frames.empty()) bad_request("session has finished");
    return {{"frames", frames}, {"status", h->status()}};
  }
  if (op == "set_input") {
    const int which = input_index(text(request, "which"));
    const double value = number(request, "value");
    const std::uint64_t seq = s.set_input(static_cast<InputIndex>(which), value * kInputFactors[which]);
    return {{"effective_seq", seq}, {"input", input_json(s.next_input())}};
  }
  if (op == "subscribe") {
    if (!client) bad_request("subscribe needs a streaming connection");
    std::erase_if(h->subscribers, [&](const std::weak_ptr<Outbox>& w) { return w.lock() == client; });
    h->subscribers.push_back(client);
    return {{"session", s.id()}, {"next_seq", s.next_seq()}};
  }
  if (op == "unsubscribe") {
    std::erase_if(h->subscribers, [&](const std::weak_ptr<Outbox>& w) { return w.lock() == client; });
    return {{"session", s.id()}, {"next_seq", s.next_seq()}};
  }
  if (op == "frames" || op == "events" || op == "export") {
    const std::uint64_t to = count(request, "to", s.next_seq());
    const std::uint64_t from = count(request, "from", 0);
    if (from > to || to > s.next_seq())
      bad_request("range [" + std::to_string(from) + ", " + std::to_string(to) + ") outside [0, " +
                  std::to_string(s.next_seq()) + ")");
    if (op == "export") return {{"table", s.export_table(from, to)}, {"events", s.export_events(from, to)}};
    json out = json::array();
    if (op == "frames") {
      for (std::uint64_t k = from; k < to; ++k) out.push_back(frame_to_json(s.frames()[k]));
    } else {
      for (const auto& e : s.events())
        if (e.seq >= from && e.seq < to) out.push_back(event_to_json(e));
    }
    return {{op, out}};
  }
  if (op == "probe") {
    const State x = s.probe();
    h->publish_events();
    json state;
    for (int i = 0; i < kStateCount; ++i) state[kStateKeys[i]] = x.vector()(i) / kStateFactors[i];
    return {{"t", s.time()}, {"state", state}};
  }
  bad_request("unknown op '" + op + "'");
}

json Service::create_session(const json& request) {
  const ModelParameters params =
      resolve_parameters(request.contains("params_path") ? text(request, "params_path") : options_.params_path);
  if (const auto problems = validate_parameters(params); !problems.empty())
    throw Error(ErrorKind::invalid_input, "parameters: " + problems.front());
  const Theta theta = request.contains("theta") ? theta_from_json(request.at("theta")) : Theta::Zero();
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = "s" + std::to_string(next_id_++);
  }
  std::shared_ptr<Host> h;
  if (request.contains("scenario") || request.contains("scenario_path")) {
    Scenario scenario = request.contains("scenario") ? parse_scenario(text(request, "scenario"))
                                                     : load_scenario(text(request, "scenario_path"));
    if (request.contains("seed")) scenario.seed = count(request, "seed");
    h = std::make_shared<Host>(id, scenario, params, theta);
  } else if (request.contains("replay")) {
    const json& replay = request.at("replay");
    ReplaySource source;
    source.records = records_from_table(parse_table(text(replay, "table")));
    if (replay.contains("events")) source.events = parse_event_log(text(replay, "events"));
    h = std::make_shared<Host>(id, std::move(source), params, theta);
  } else {
    bad_request("create_session needs 'scenario', 'scenario_path' or 'replay'");
  }
  json status;
  {
    std::lock_guard lock(h->mutex);
    status = h->status();
  }
  std::lock_guard lock(mutex_);
  sessions_[id] = h;
  return status;
}

json Service::what_if(const std::shared_ptr<Host>& h, const json& request) {
  const auto horizon = static_cast<int>(count(request, "horizon", 1));
  if (horizon < 1 || horizon > 100000) bad_request("horizon must lie in [1, 100000]");
  GaussianBelief belief;
  InputSchedule schedule;
  Theta theta;
  double t0 = 0.0;
  double dt = 0.0;
  std::shared_ptr<const PrinterModel> model;
  {
    std::lock_guard lock(h->mutex);
    const auto b = h->session.belief();
    if (!b || h->session.frames().empty()) throw Error(ErrorKind::not_ready, "no belief yet");
    belief = *b;
    theta = h->session.theta();
    model = h->session.model();
    dt = model->params.dt;
    t0 = h->session.frames().back().t;
    schedule.initial = h->session.frames().back().u;
    const Input next = h->session.next_input();
    if (!(next == schedule.initial)) schedule.changes.emplace_back(dt, next);
  }
  const json proposal = request.contains("schedule") ? request.at("schedule") : json::array();
  if (!proposal.is_array()) bad_request("schedule must be an array");
  const auto& bounds = model->params.bounds;
  const double lo[] = {bounds.I_A_min, bounds.Q_c_min, bounds.Q_s_min};
  const double hi[] = {bounds.I_A_max, bounds.Q_c_max, bounds.Q_s_max};
  double last_offset = -1.0;
  for (const json& entry : proposal) {
    const double offset = number(entry, "offset");
    if (!(offset >= 0.0) || offset < last_offset) bad_request("schedule offsets must be non-negative and ordered");
    last_offset = offset;
    Input u = schedule.at(offset);
    for (int i = 0; i < kInputCount; ++i) {
      if (!entry.contains(kInputKeys[i])) continue;
      const double v = number(entry, kInputKeys[i]) * kInputFactors[i];
      if (!(v >= lo[i] && v <= hi[i])) bad_request(std::string(kInputKeys[i]) + " outside operating bounds");
      u.vector()(i) = v;
    }
    std::erase_if(schedule.changes, [&](const auto& c) { return c.first >= offset; });
    if (offset == 0.0) schedule.initial = u;
    else schedule.changes.emplace_back(offset, u);
  }
  const auto steps = forecast(belief, theta, schedule, horizon, *model);
  json out = json::array();
  for (std::size_t k = 0; k < steps.size(); ++k) {
    json mean, low, high;
    for (int i = 0; i < kOutputCount; ++i) {
      const double m = steps[k].mean.vector()(i);
      const double band = 2.0 * std::sqrt(std::max(0.0, steps[k].covariance(i, i)));
      mean[kOutputKeys[i]] = m / kOutputFactors[i];
      low[kOutputKeys[i]] = (m - band) / kOutputFactors[i];
      high[kOutputKeys[i]] = (m + band) / kOutputFactors[i];
    }
    out.push_back({{"t", t0 + static_cast<double>(k + 1) * dt},
                   {"u", input_json(steps[k].input)},
                   {"mean", mean},
                   {"lo", low},
                   {"hi", high}});
  }
  return {{"t0", t0}, {"theta", theta_json(theta)}, {"steps", out}};
}

json Service::calibrate(const std::shared_ptr<Host>& h, const json& request) {
  const std::uint64_t window = count(request, "window");
  std::vector<TimeSeriesRecord> records;
  Theta theta;
  std::shared_ptr<const PrinterModel> model;
  {
    std::lock_guard lock(h->mutex);
    const auto& all = h->session.records();
    const auto minimum = static_cast<std::uint64_t>(h->session.params().estimation.init_window) + 1;
    if (window < minimum) bad_request("window must be at least " + std::to_string(minimum) + " frames");
    if (all.size() < window)
      throw Error(ErrorKind::not_ready,
                  "window of " + std::to_string(window) + " frames but " + std::to_string(all.size()) + " buffered");
    if (h->calibrating) bad_request("a calibration is already running");
    h->calibrating = true;
    records.assign(all.end() - static_cast<std::ptrdiff_t>(window), all.end());
    theta = h->session.theta();
    model = h->session.model();
  }
  try {
    const CalibrationReport report = em_calibrate(records, theta, 0, *model);
    std::lock_guard lock(h->mutex);
    h->calibrating = false;
    h->session.schedule_theta(report.final_theta());
    return {{"theta", theta_json(report.final_theta())},
            {"previous_theta", theta_json(theta)},
            {"iterations", report.iterations()},
            {"converged", report.converged},
            {"objective", report.objective},
            {"effective_seq", h->session.next_seq()}};
  } catch (const Error& e) {
    std::lock_guard lock(h->mutex);
    h->calibrating = false;
    h->session.record_failure(EventKind::calibration_failure, std::string("message=") + e.what());
    h->publish_events();
    throw;
  }
}

}  // namespace ajtwin
