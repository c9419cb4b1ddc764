#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "ajtwin/service/service.hpp"

namespace ajtwin {

inline constexpr std::uint32_t kMaxMessageBytes = 16u << 20;

// Frames are a 4-byte big-endian length followed by that many bytes of UTF-8
// JSON, in both directions.
std::string encode_message(const std::string& payload);

// Serves one Service on a loopback TCP port. Each connection gets a reader
// thread handling requests in order and a writer thread draining its outbox.
class Server {
 public:
  Server(Service& service, const std::string& address, std::uint16_t port);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const;
  // Accepts connections until stop(), which any thread may call.
  void run();
  void stop();

 private:
  void accept();

  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ajtwin
