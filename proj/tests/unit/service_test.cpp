#include <doctest.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>

#include "ajtwin/core/error.hpp"
#include "ajtwin/core/params.hpp"
#include "ajtwin/core/units.hpp"
#include "ajtwin/estimation/estimator.hpp"
#include "ajtwin/io/table.hpp"
#include "ajtwin/service/server.hpp"
#include "ajtwin/service/service.hpp"
#include "ajtwin/service/session.hpp"
#include "ajtwin/sim/scenario.hpp"
#include "ajtwin/sim/simulator.hpp"
#include "support.hpp"

using namespace ajtwin;
using nlohmann::json;

namespace {

const ModelParameters& params() {
  static const ModelParameters p = default_parameters();
  return p;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string scenario_text(const std::string& name) { return read_file(test::data_path("scenarios/" + name + ".scn")); }

Scenario shipped(const std::string& name) { return load_scenario(test::data_path("scenarios/" + name + ".scn")); }

json request(Service& service, json message, const std::shared_ptr<Outbox>& client = nullptr) {
  return service.handle(message, client);
}

json ok(Service& service, json message, const std::shared_ptr<Outbox>& client = nullptr) {
  const json response = service.handle(message, client);
  INFO(response.dump());
  REQUIRE(response.at("ok").get<bool>());
  return response.at("result");
}

std::string create(Service& service, const std::string& scenario, std::optional<std::uint64_t> seed = {}) {
  json m = {{"op", "create_session"}, {"scenario", scenario_text(scenario)}};
  if (seed) m["seed"] = *seed;
  return ok(service, m).at("session").get<std::string>();
}

json step(Service& service, const std::string& id, int count) {
  return ok(service, {{"op", "step"}, {"session", id}, {"count", count}}).at("frames");
}

void require_same_belief(const TelemetryFrame& a, const TelemetryFrame& b) {
  REQUIRE(a.belief.has_value() == b.belief.has_value());
  CHECK(a.t == b.t);
  CHECK(a.u == b.u);
  CHECK(a.y.vector() == b.y.vector());
  CHECK(a.theta == b.theta);
  if (!a.belief) return;
  CHECK(a.belief->mean.vector() == b.belief->mean.vector());
  CHECK(a.belief->covariance == b.belief->covariance);
  CHECK(a.nis == b.nis);
  CHECK(a.anomaly == b.anomaly);
}

// Structural equality with relative tolerance on numbers.
bool json_close(const json& a, const json& b, double tol, std::string& where) {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    if (test::rel_diff(x, y) <= tol || std::abs(x - y) <= 1e-300) return true;
    where = a.dump() + " vs " + b.dump();
    return false;
  }
  if (a.type() != b.type()) {
    where = a.dump() + " vs " + b.dump();
    return false;
  }
  if (a.is_object()) {
    if (a.size() != b.size()) {
      where = "object keys " + a.dump() + " vs " + b.dump();
      return false;
    }
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key())) {
        where = "missing key " + it.key();
        return false;
      }
      if (!json_close(it.value(), b.at(it.key()), tol, where)) {
        where = it.key() + "." + where;
        return false;
      }
    }
    return true;
  }
  if (a.is_array()) {
    if (a.size() != b.size()) {
      where = "array length " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
      return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!json_close(a[i], b[i], tol, where)) {
        where = "[" + std::to_string(i) + "]." + where;
        return false;
      }
    return true;
  }
  if (a != b) where = a.dump() + " vs " + b.dump();
  return a == b;
}

}  // namespace

TEST_CASE("a new session is paused at t = 0 with no frames") {
  Service service;
  const std::string id = create(service, "nominal");
  const json status = ok(service, {{"op", "status"}, {"session", id}});
  CHECK(status.at("state") == "paused");
  CHECK(status.at("t").get<double>() == 0.0);
  CHECK(status.at("next_seq").get<std::uint64_t>() == 0);
  CHECK(status.at("has_belief") == false);
  CHECK(status.at("mode") == "live");
}

TEST_CASE("malformed scenarios and unknown sessions are request errors") {
  Service service;
  json r = request(service, {{"id", 3}, {"op", "create_session"}, {"scenario", "duration = -1 s\n"}});
  CHECK(r.at("ok") == false);
  CHECK(r.at("id") == 3);
  CHECK(r.at("error").at("kind") == "invalid_input");
  r = request(service, {{"op", "status"}, {"session", "nope"}});
  CHECK(r.at("error").at("kind") == "request");
  r = request(service, {{"op", "warp"}});
  CHECK(r.at("error").at("kind") == "request");
  r = request(service, json::array());
  CHECK(r.at("ok") == false);
}

TEST_CASE("sessions with different seeds do not share noise") {
  Service service;
  const std::string a = create(service, "nominal", 1);
  const std::string b = create(service, "nominal", 2);
  const std::string c = create(service, "nominal", 1);
  const json fa = step(service, a, 5), fb = step(service, b, 5), fc = step(service, c, 5);
  CHECK(fa != fb);
  CHECK(fa == fc);
}

TEST_CASE("frame sequence is gapless and beliefs are well formed") {
  Session s("s", shipped("nominal"), params(), Theta::Zero());
  const auto window = static_cast<std::uint64_t>(params().estimation.init_window);
  for (std::uint64_t k = 0; k < 60; ++k) {
    const TelemetryFrame& f = s.tick();
    CHECK(f.seq == k);
    CHECK(f.t == static_cast<double>(k) * params().dt);
    CHECK(f.belief.has_value() == (k + 1 >= window));
    if (f.belief) {
      CHECK((f.belief->covariance.diagonal().array() >= 0.0).all());
      CHECK(f.nis >= 0.0);
    }
  }
}

TEST_CASE("set_input echoes in the next frame and rejects out-of-range values") {
  Service service;
  const std::string id = create(service, "nominal");
  step(service, id, 3);
  const json ack = ok(service, {{"op", "set_input"}, {"session", id}, {"which", "Q_c"}, {"value", 26}});
  CHECK(ack.at("effective_seq").get<std::uint64_t>() == 3);
  const json frame = step(service, id, 1).at(0);
  CHECK(frame.at("seq").get<std::uint64_t>() == 3);
  CHECK(frame.at("u").at("Q_c").get<double>() == doctest::Approx(26.0).epsilon(1e-14));

  const json rejected = request(service, {{"op", "set_input"}, {"session", id}, {"which", "Q_s"}, {"value", 95}});
  CHECK(rejected.at("ok") == false);
  CHECK(rejected.at("error").at("message").get<std::string>().find("[30, 80]") != std::string::npos);
  const json after = step(service, id, 1).at(0);
  CHECK(after.at("u").at("Q_s").get<double>() == doctest::Approx(50.0).epsilon(1e-14));
  CHECK(request(service, {{"op", "set_input"}, {"session", id}, {"which", "Q_x"}, {"value", 20}}).at("ok") == false);
}

TEST_CASE("scripted operator steps reproduce the scheduled Experiment-3 inputs") {
  Scenario scheduled = shipped("exp3");
  scheduled.duration = 4200.0;
  Scenario manual = scheduled;
  manual.schedule.resize(1);
  Session a("a", scheduled, params(), Theta::Zero());
  Session b("b", manual, params(), Theta::Zero());
  std::size_t next_change = 1;
  while (!a.finished()) {
    while (next_change < scheduled.schedule.size() && scheduled.schedule[next_change].t <= b.time()) {
      const Input& u = scheduled.schedule[next_change++].u;
      for (int i = 0; i < kInputCount; ++i) b.set_input(static_cast<InputIndex>(i), u.vector()(i));
    }
    const TelemetryFrame& fa = a.tick();
    const TelemetryFrame& fb = b.tick();
    require_same_belief(fa, fb);
  }
  CHECK(next_change == scheduled.schedule.size());
}

TEST_CASE("what_if needs a belief and is pure") {
  Service service;
  const std::string id = create(service, "nominal");
  step(service, id, 3);
  json r = request(service, {{"op", "what_if"}, {"session", id}, {"horizon", 1}});
  CHECK(r.at("error").at("kind") == "not_ready");
  step(service, id, 30);
  const json a = ok(service, {{"op", "what_if"}, {"session", id}, {"horizon", 5}});
  const json b = ok(service, {{"op", "what_if"}, {"session", id}, {"horizon", 5}});
  CHECK(a == b);
  CHECK(a.at("steps").size() == 5);
  CHECK(ok(service, {{"op", "status"}, {"session", id}}).at("next_seq") == 33);
  CHECK(request(service, {{"op", "what_if"}, {"session", id}, {"horizon", 0}}).at("ok") == false);
}

TEST_CASE("empty what_if with horizon 1 is the one-step forecast from the current belief") {
  Service service;
  const std::string id = create(service, "nominal");
  step(service, id, 20);
  const json r = ok(service, {{"op", "what_if"}, {"session", id}, {"horizon", 1}});
  Session s("x", shipped("nominal"), params(), Theta::Zero());
  for (int k = 0; k < 20; ++k) s.tick();
  const PrinterModel model(params());
  const auto expected =
      forecast(*s.belief(), Theta::Zero(), InputSchedule{s.frames().back().u, {}}, 1, model).front();
  CHECK(r.at("steps").at(0).at("mean").at("L_w").get<double>() == expected.mean.L_w() / units::um);
  CHECK(r.at("steps").at(0).at("mean").at("P_c").get<double>() == expected.mean.P_c());
  CHECK(r.at("steps").at(0).at("t").get<double>() == 20.0);
}

TEST_CASE("a +3 sccm carrier step moves the forecast linewidth with the sign of its carrier coefficient") {
  Service service;
  const std::string id = create(service, "nominal");
  step(service, id, 30);
  const json base = ok(service, {{"op", "what_if"}, {"session", id}, {"horizon", 3}});
  const json stepped = ok(service, {{"op", "what_if"},
                                    {"session", id},
                                    {"horizon", 3},
                                    {"schedule", json::array({{{"offset", 0}, {"Q_c", 28}}})}});
  const double beta = params().output.linewidth.beta_c;
  REQUIRE(beta != 0.0);
  for (int k = 0; k < 3; ++k) {
    const double shift = stepped.at("steps").at(k).at("mean").at("L_w").get<double>() -
                         base.at("steps").at(k).at("mean").at("L_w").get<double>();
    CHECK(std::signbit(shift) == std::signbit(beta));
    CHECK(shift != 0.0);
  }
  CHECK(stepped.at("steps").at(0).at("u").at("Q_c").get<double>() == doctest::Approx(28.0));
  const json outside = request(service, {{"op", "what_if"},
                                         {"session", id},
                                         {"schedule", json::array({{{"offset", 0}, {"Q_c", 60}}})}});
  CHECK(outside.at("ok") == false);
}

TEST_CASE("calibration on noiseless zero-drift data leaves theta near zero and swaps at a tick boundary") {
  Scenario quiet = shipped("nominal");
  quiet.process_noise_scale = 0.0;
  quiet.output_noise_scale = 0.0;
  Service service;
  const std::string id =
      ok(service, {{"op", "create_session"}, {"scenario", format_scenario(quiet)}}).at("session").get<std::string>();
  step(service, id, 120);
  CHECK(request(service, {{"op", "calibrate_now"}, {"session", id}, {"window", 500}}).at("error").at("kind") ==
        "not_ready");
  const json report = ok(service, {{"op", "calibrate_now"}, {"session", id}, {"window", 120}});
  const auto objective = report.at("objective").get<std::vector<double>>();
  for (std::size_t i = 1; i < objective.size(); ++i) CHECK(objective[i] <= objective[i - 1] + 1e-9);
  for (const auto& [key, value] : report.at("theta").items()) CHECK(std::abs(value.get<double>()) < 1e-8);
  CHECK(report.at("effective_seq") == 120);

  const json before = ok(service, {{"op", "frames"}, {"session", id}, {"from", 119}, {"to", 120}}).at("frames");
  const json after = step(service, id, 1);
  CHECK(before.at(0).at("theta").at("theta_da").get<double>() == 0.0);
  CHECK(after.at(0).at("theta") == report.at("theta"));
  const json events = ok(service, {{"op", "events"}, {"session", id}}).at("events");
  REQUIRE(events.size() == 1);
  CHECK(events.at(0).at("kind") == "theta_swap");
  CHECK(events.at(0).at("seq") == 120);
}

TEST_CASE("calibration on drifting data shrinks whitened one-step-ahead residuals") {
  Scenario drift = shipped("exp1");
  drift.duration = 2400.0;
  Session s("d", drift, params(), Theta::Zero());
  for (int k = 0; k < 1200; ++k) s.tick();
  const PrinterModel model(params());
  const CalibrationReport report = em_calibrate(s.records(), Theta::Zero(), 0, model);
  while (!s.finished()) s.tick();
  const std::vector<TimeSeriesRecord> later(s.records().begin() + 1200, s.records().end());
  const GaussianBelief prior{estimate_initial_state(std::span(later).first(10), model), initial_covariance(params())};
  auto residual = [&](const Theta& theta) {
    const FilterResult run = ekf_run(later, prior, theta, model);
    double sum = 0.0;
    for (std::size_t k = 1; k < run.size(); ++k) sum += run.steps[k].nis;
    return sum / static_cast<double>(run.size() - 1);
  };
  const double before = residual(Theta::Zero());
  const double after = residual(report.final_theta());
  MESSAGE("mean whitened one-step residual: θ = 0 " << before << ", calibrated " << after);
  CHECK(after < before);
}

TEST_CASE("export then replay reproduces the belief trajectory bitwise") {
  Scenario scenario = shipped("nominal");
  scenario.duration = 300.0;
  Session live("live", scenario, params(), Theta::Zero());
  for (int k = 0; k < 80; ++k) live.tick();
  live.set_input(kCarrierFlow, 27.0 * units::sccm);
  for (int k = 0; k < 40; ++k) live.tick();
  const PrinterModel model(params());
  live.schedule_theta(em_calibrate(live.records(), Theta::Zero(), 0, model).final_theta());
  for (int k = 0; k < 60; ++k) live.tick();
  live.set_input(kAtomizerCurrent, 360.0 * units::mA);
  while (!live.finished()) live.tick();

  const std::string table = live.export_table(0, live.next_seq());
  const std::string events = live.export_events(0, live.next_seq());
  ReplaySource source{records_from_table(parse_table(table)), parse_event_log(events)};
  Session replay("replay", std::move(source), params(), Theta::Zero());
  while (!replay.finished()) replay.tick();
  REQUIRE(replay.frames().size() == live.frames().size());
  for (std::size_t k = 0; k < live.frames().size(); ++k) require_same_belief(live.frames()[k], replay.frames()[k]);
  CHECK(replay.export_table(0, replay.next_seq()) == table);

  std::size_t swaps = 0, changes = 0;
  std::uint64_t last = 0;
  for (const auto& e : parse_event_log(events)) {
    CHECK(e.seq >= last);
    last = e.seq;
    swaps += e.kind == EventKind::theta_swap;
    changes += e.kind == EventKind::input_change;
  }
  CHECK(swaps == 2);
  CHECK(changes == 2);
}

TEST_CASE("export ranges") {
  Service service;
  const std::string id = create(service, "nominal");
  step(service, id, 12);
  const json empty = ok(service, {{"op", "export"}, {"session", id}, {"from", 5}, {"to", 5}});
  CHECK(empty.at("table").get<std::string>() == format_table(table_from_records({})));
  CHECK(empty.at("events").get<std::string>() == "seq,t[s],kind,detail\n");
  CHECK(request(service, {{"op", "export"}, {"session", id}, {"from", 6}, {"to", 5}}).at("ok") == false);
  CHECK(request(service, {{"op", "export"}, {"session", id}, {"from", 0}, {"to", 13}}).at("ok") == false);
  const json part = ok(service, {{"op", "export"}, {"session", id}, {"from", 4}, {"to", 9}});
  CHECK(records_from_table(parse_table(part.at("table").get<std::string>())).size() == 5);
  const auto log = parse_event_log(part.at("events").get<std::string>());
  REQUIRE(log.size() == 1);
  CHECK(log[0].kind == EventKind::theta_swap);
  CHECK(log[0].seq == 0);
}

TEST_CASE("event log format round trips") {
  const std::vector<SessionEvent> events = {
      {0, 0.0, EventKind::theta_swap, format_theta(Theta::Constant(1.0 / 3.0))},
      {4, 4.0, EventKind::input_change, "I_A=370;Q_c=26;Q_s=50;source=operator"},
      {9, 9.0, EventKind::anomaly_alert, "run=10;nis=12.5"},
  };
  const std::string text = format_event_log(events);
  const auto back = parse_event_log(text);
  REQUIRE(back.size() == 3);
  CHECK(format_event_log(back) == text);
  CHECK(parse_theta(back[0].detail) == Theta::Constant(1.0 / 3.0));
  CHECK_THROWS_AS(parse_event_log("seq,t,kind\n"), Error);
  CHECK_THROWS_AS(parse_event_log("seq,t[s],kind,detail\n3,3,theta_swap,x\n1,1,probe,\n"), Error);
  CHECK_THROWS_AS(parse_event_log("seq,t[s],kind,detail\n3,3,melt,x\n"), Error);
}

TEST_CASE("a slow subscriber loses its oldest frames but never the persisted log") {
  Service service;
  const std::string id = create(service, "nominal");
  auto slow = std::make_shared<Outbox>(4);
  ok(service, {{"op", "subscribe"}, {"session", id}}, slow);
  step(service, id, 20);
  CHECK(slow->dropped() == 16);
  std::vector<std::uint64_t> seqs;
  std::size_t reported = 0;
  while (auto m = slow->try_pop()) {
    CHECK(m->at("type") == "frame");
    seqs.push_back(m->at("frame").at("seq").get<std::uint64_t>());
    reported += m->at("dropped_before").get<std::size_t>();
  }
  CHECK(seqs == std::vector<std::uint64_t>{16, 17, 18, 19});
  CHECK(reported == 16);
  const json all = ok(service, {{"op", "frames"}, {"session", id}, {"from", 0}, {"to", 20}}).at("frames");
  CHECK(all.size() == 20);
}

TEST_CASE("the tick loop keeps running while a subscriber is not draining") {
  Service service;
  const std::string id = create(service, "nominal");
  auto stalled = std::make_shared<Outbox>(2);
  ok(service, {{"op", "subscribe"}, {"session", id}}, stalled);
  ok(service, {{"op", "start"}, {"session", id}, {"rate", 2000}});
  CHECK(request(service, {{"op", "step"}, {"session", id}}).at("ok") == false);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
  while (ok(service, {{"op", "status"}, {"session", id}}).at("next_seq").get<std::uint64_t>() < 40 &&
         std::chrono::steady_clock::now() < deadline)
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  const json status = ok(service, {{"op", "pause"}, {"session", id}});
  CHECK(status.at("state") == "paused");
  const auto n = status.at("next_seq").get<std::uint64_t>();
  CHECK(n >= 40);
  const json frames = ok(service, {{"op", "frames"}, {"session", id}}).at("frames");
  REQUIRE(frames.size() == n);
  for (std::uint64_t k = 0; k < n; ++k) CHECK(frames.at(k).at("seq") == k);
  CHECK(stalled->dropped() > 0);
}

TEST_CASE("an alert is raised after ten consecutive flagged frames") {
  Session s("m", shipped("mfc_fault"), params(), Theta::Zero());
  while (!s.finished()) s.tick();
  const auto& frames = s.frames();
  std::vector<std::uint64_t> expected;
  int run = 0;
  for (const auto& f : frames) {
    run = f.anomaly ? run + 1 : 0;
    if (run == kAlertRun) expected.push_back(f.seq);
  }
  std::vector<std::uint64_t> alerts;
  bool onset = false;
  for (const auto& e : s.events()) {
    if (e.kind == EventKind::anomaly_alert) alerts.push_back(e.seq);
    if (e.kind == EventKind::fault_onset) {
      onset = true;
      CHECK(e.seq == 300);
    }
  }
  CHECK(onset);
  CHECK(alerts == expected);
  REQUIRE(!alerts.empty());
  CHECK(std::any_of(alerts.begin(), alerts.end(), [](std::uint64_t s) { return s >= 300 && s < 400; }));
}

TEST_CASE("probe reports the hidden state and is refused for replays") {
  Service service;
  const std::string id = create(service, "nominal");
  step(service, id, 2);
  const json probe = ok(service, {{"op", "probe"}, {"session", id}});
  CHECK(probe.at("state").at("V_l").get<double>() > 0.9);
  CHECK(probe.at("state").at("d_a").get<double>() == doctest::Approx(3.0).epsilon(0.05));
  const std::string table = ok(service, {{"op", "export"}, {"session", id}}).at("table");
  const json replay = ok(service, {{"op", "create_session"}, {"replay", {{"table", table}}}});
  CHECK(replay.at("mode") == "replay");
  const std::string rid = replay.at("session");
  CHECK(request(service, {{"op", "probe"}, {"session", rid}}).at("ok") == false);
  CHECK(request(service, {{"op", "set_input"}, {"session", rid}, {"which", "Q_c"}, {"value", 20}}).at("ok") == false);
  CHECK(step(service, rid, 5).size() == 2);
  CHECK(ok(service, {{"op", "status"}, {"session", rid}}).at("state") == "finished");
  ok(service, {{"op", "close_session"}, {"session", rid}});
  CHECK(request(service, {{"op", "status"}, {"session", rid}}).at("ok") == false);
}

TEST_CASE("golden transcript") {
  const std::string path = test::data_path("fixtures/service_transcript.jsonl");
  const bool regenerate = std::getenv("AJTWIN_REGENERATE_GOLDEN") != nullptr;
  std::ifstream in(path);
  REQUIRE(in.good());
  Service service;
  std::string line, rewritten;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++n;
    const json entry = json::parse(line);
    const json actual = service.handle(entry.at("request"));
    if (regenerate) {
      rewritten += json({{"request", entry.at("request")}, {"response", actual}}).dump() + "\n";
      continue;
    }
    std::string where;
    INFO("transcript line " << n << ": " << where);
    CHECK_MESSAGE(json_close(entry.at("response"), actual, 1e-9, where), "line ", n, ": ", where);
  }
  CHECK(n >= 10);
  if (regenerate) std::ofstream(path) << rewritten;
}

TEST_CASE("the socket transport frames requests and streams telemetry") {
  namespace asio = boost::asio;
  using asio::ip::tcp;
  Service service;
  Server server(service, "127.0.0.1", 0);
  std::thread runner([&] { server.run(); });

  asio::io_context io;
  tcp::socket socket(io);
  socket.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), server.port()));
  auto send = [&](const std::string& payload) { asio::write(socket, asio::buffer(encode_message(payload))); };
  auto receive = [&] {
    unsigned char header[4];
    asio::read(socket, asio::buffer(header));
    const std::uint32_t n = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                            (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
    std::string payload(n, '\0');
    asio::read(socket, asio::buffer(payload));
    return json::parse(payload);
  };

  send(json({{"id", 1}, {"op", "hello"}}).dump());
  json r = receive();
  CHECK(r.at("id") == 1);
  CHECK(r.at("result").at("version") == kProtocolVersion);
  send("{not json");
  CHECK(receive().at("ok") == false);

  send(json({{"id", 2}, {"op", "create_session"}, {"scenario", scenario_text("nominal")}}).dump());
  const std::string id = receive().at("result").at("session");
  send(json({{"id", 3}, {"op", "subscribe"}, {"session", id}}).dump());
  CHECK(receive().at("result").at("next_seq") == 0);
  send(json({{"id", 4}, {"op", "step"}, {"session", id}, {"count", 3}}).dump());
  std::vector<std::uint64_t> seqs;
  bool answered = false;
  while (seqs.size() < 3 || !answered) {
    const json m = receive();
    if (m.contains("type")) {
      CHECK(m.at("type") == "frame");
      seqs.push_back(m.at("frame").at("seq").get<std::uint64_t>());
    } else {
      CHECK(m.at("id") == 4);
      answered = true;
    }
  }
  CHECK(seqs == std::vector<std::uint64_t>{0, 1, 2});
  socket.close();
  server.stop();
  runner.join();
}
