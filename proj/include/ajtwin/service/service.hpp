#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "ajtwin/service/session.hpp"

namespace ajtwin {

inline constexpr int kProtocolVersion = 1;

nlohmann::json frame_to_json(const TelemetryFrame& frame);
nlohmann::json event_to_json(const SessionEvent& event);

// Messages bound for one client. Responses are never dropped; pushed frames
// are bounded and the oldest go first when the client falls behind.
class Outbox {
 public:
  explicit Outbox(std::size_t frame_capacity = 1024) : capacity_(frame_capacity) {}

  void push_response(nlohmann::json message);
  void push_frame(nlohmann::json message);
  // Blocks until a message is ready or the outbox closes.
  std::optional<nlohmann::json> pop();
  std::optional<nlohmann::json> try_pop();
  void close();
  std::size_t dropped() const;

 private:
  std::optional<nlohmann::json> take();

  mutable std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<nlohmann::json> responses_;
  std::deque<nlohmann::json> frames_;
  std::size_t capacity_;
  std::size_t dropped_ = 0;
  std::size_t dropped_unreported_ = 0;
  bool closed_ = false;
};

struct ServiceOptions {
  // Used when a request names no parameter file.
  std::string params_path;
  std::size_t max_step_count = 100000;
};

// Request dispatcher over any number of independent sessions. Each session
// has its own tick thread while running; requests and ticks on one session
// are serialized by its lock.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // `client` receives pushed telemetry after a subscribe request.
  nlohmann::json handle(const nlohmann::json& request, const std::shared_ptr<Outbox>& client = nullptr);
  // Detaches the client from every subscription.
  void disconnect(const std::shared_ptr<Outbox>& client);

 private:
  struct Host;

  nlohmann::json dispatch(const std::string& op, const nlohmann::json& request,
                          const std::shared_ptr<Outbox>& client);
  std::shared_ptr<Host> host(const nlohmann::json& request);
  nlohmann::json create_session(const nlohmann::json& request);
  nlohmann::json calibrate(const std::shared_ptr<Host>& host, const nlohmann::json& request);
  nlohmann::json what_if(const std::shared_ptr<Host>& host, const nlohmann::json& request);

  ServiceOptions options_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Host>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace ajtwin
