#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ajtwin/core/params.hpp"
#include "ajtwin/core/types.hpp"
#include "ajtwin/estimation/estimator.hpp"
#include "ajtwin/sim/printer.hpp"
#include "ajtwin/sim/scenario.hpp"

namespace ajtwin {

enum class SessionMode { live, replay };

enum class EventKind {
  input_change,
  fault_onset,
  anomaly_alert,
  theta_swap,
  calibration_failure,
  estimation_failure,
  probe,
  terminated,
};

const char* event_kind_name(EventKind kind);
EventKind parse_event_kind(const std::string& name);

// `seq` is the first frame the event applies to. Detail is a
// `key=value;key=value` list in display units.
struct SessionEvent {
  std::uint64_t seq = 0;
  double t = 0.0;
  EventKind kind = EventKind::input_change;
  std::string detail;
};

struct TelemetryFrame {
  std::uint64_t seq = 0;
  double t = 0.0;
  Input u;
  Output y;
  OutputMask observed;
  std::optional<GaussianBelief> belief;
  double nis = 0.0;
  bool anomaly = false;
  Theta theta = Theta::Zero();
};

struct ReplaySource {
  std::vector<TimeSeriesRecord> records;
  std::vector<SessionEvent> events;
};

// Event log as a delimited table: seq, t[s], kind, detail.
std::string format_event_log(std::span<const SessionEvent> events);
std::vector<SessionEvent> parse_event_log(const std::string& text);

std::string format_theta(const Theta& theta);
Theta parse_theta(const std::string& detail);

// The record as it reads back from an exported table.
TimeSeriesRecord canonical_record(const TimeSeriesRecord& record);

// Consecutive flagged frames that raise an alert event.
inline constexpr int kAlertRun = 10;

// One twin: a data source (virtual printer or recorded table), the filter
// belief and the persisted frame and event logs. Not thread-safe.
class Session {
 public:
  Session(std::string id, const Scenario& scenario, const ModelParameters& params, const Theta& theta);
  Session(std::string id, ReplaySource source, const ModelParameters& params, const Theta& theta);
  ~Session();

  const std::string& id() const { return id_; }
  SessionMode mode() const { return mode_; }
  const ModelParameters& params() const { return model_->params; }
  std::shared_ptr<const PrinterModel> model() const { return model_; }

  bool finished() const { return finished_; }
  std::uint64_t next_seq() const { return frames_.size(); }
  // Time of the next tick.
  double time() const;
  const Theta& theta() const { return theta_; }
  // Input the next tick will apply, pending operator changes included.
  Input next_input() const;
  std::optional<GaussianBelief> belief() const;

  const std::vector<TelemetryFrame>& frames() const { return frames_; }
  const std::vector<SessionEvent>& events() const { return events_; }
  const std::vector<TimeSeriesRecord>& records() const { return records_; }

  const TelemetryFrame& tick();

  // Returns the seq from which the value is in force.
  std::uint64_t set_input(InputIndex which, double value);
  // Applied at the start of the next tick.
  void schedule_theta(const Theta& theta);
  void record_failure(EventKind kind, const std::string& detail);
  // True state at the current tick (live sessions only).
  State probe();

  // Frames [from, to) as a series table and event log. The log opens with
  // the θ in force at `from`; event seqs are relative to `from`.
  std::string export_table(std::uint64_t from, std::uint64_t to) const;
  std::string export_events(std::uint64_t from, std::uint64_t to) const;

 private:
  struct Estimator;

  void log(EventKind kind, std::string detail);
  void apply_theta(const Theta& theta);
  void estimate(TelemetryFrame& frame);

  std::string id_;
  SessionMode mode_;
  std::shared_ptr<const PrinterModel> model_;
  Theta theta_;
  std::optional<Theta> pending_theta_;

  std::optional<Scenario> scenario_;
  std::unique_ptr<VirtualPrinter> printer_;
  Input input_;
  std::optional<Input> pending_input_;
  std::size_t schedule_cursor_ = 0;
  std::vector<bool> fault_logged_;

  ReplaySource replay_;
  std::size_t replay_event_cursor_ = 0;

  std::unique_ptr<Estimator> estimator_;
  std::size_t belief_origin_ = 0;
  int flagged_run_ = 0;

  std::vector<TimeSeriesRecord> records_;
  std::vector<TelemetryFrame> frames_;
  std::vector<SessionEvent> events_;
  bool finished_ = false;
};

}  // namespace ajtwin
