#include "ajtwin/service/server.hpp"

#include <list>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>

#include "ajtwin/core/error.hpp"

namespace ajtwin {

namespace asio = boost::asio;
using asio::ip::tcp;
using nlohmann::json;

std::string encode_message(const std::string& payload) {
  if (payload.size() > kMaxMessageBytes) throw Error(ErrorKind::request, "message exceeds the size limit");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out(4, '\0');
  for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = static_cast<char>((n >> (24 - 8 * i)) & 0xff);
  return out + payload;
}

namespace {

struct Connection {
  tcp::socket socket;
  std::shared_ptr<Outbox> outbox = std::make_shared<Outbox>();
  std::thread reader;
  std::thread writer;
  std::atomic<bool> done{false};

  explicit Connection(tcp::socket s) : socket(std::move(s)) {}

  void serve(Service& service) {
    writer = std::thread([this] {
      while (auto message = outbox->pop()) {
        boost::system::error_code ec;
        asio::write(socket, asio::buffer(encode_message(message->dump())), ec);
        if (ec) break;
      }
    });
    try {
      while (true) {
        unsigned char header[4];
        asio::read(socket, asio::buffer(header));
        const std::uint32_t n = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                                (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
        if (n > kMaxMessageBytes) break;
        std::string payload(n, '\0');
        asio::read(socket, asio::buffer(payload));
        json request = json::parse(payload, nullptr, false);
        if (request.is_discarded()) {
          outbox->push_response({{"id", nullptr},
                                 {"ok", false},
                                 {"error", {{"kind", "request"}, {"message", "message is not valid JSON"}}}});
          continue;
        }
        outbox->push_response(service.handle(request, outbox));
      }
    } catch (const boost::system::system_error&) {
    }
    service.disconnect(outbox);
    outbox->close();
    writer.join();
    boost::system::error_code ec;
    socket.shutdown(tcp::socket::shutdown_both, ec);
    socket.close(ec);
    done = true;
  }
};

}  // namespace

struct Server::Impl {
  Service& service;
  asio::io_context io;
  tcp::acceptor acceptor;
  std::mutex mutex;
  std::list<std::unique_ptr<Connection>> connections;

  Impl(Service& s, const std::string& address, std::uint16_t port)
      : service(s), acceptor(io, tcp::endpoint(asio::ip::make_address(address), port)) {}

  void reap(bool all) {
    std::lock_guard lock(mutex);
    for (auto it = connections.begin(); it != connections.end();) {
      auto& c = **it;
      if (all && !c.done) {
        boost::system::error_code ec;
        c.socket.shutdown(tcp::socket::shutdown_both, ec);
      }
      if (all || c.done) {
        c.reader.join();
        it = connections.erase(it);
      } else {
        ++it;
      }
    }
  }
};

Server::Server(Service& service, const std::string& address, std::uint16_t port)
    : impl_(std::make_unique<Impl>(service, address, port)) {}

Server::~Server() {
  impl_->io.stop();
  impl_->reap(true);
}

std::uint16_t Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() {
  accept();
  impl_->io.run();
}

void Server::accept() {
  impl_->acceptor.async_accept([this](const boost::system::error_code& ec, tcp::socket socket) {
    if (ec) return;
    impl_->reap(false);
    auto connection = std::make_unique<Connection>(std::move(socket));
    Connection* c = connection.get();
    {
      std::lock_guard lock(impl_->mutex);
      impl_->connections.push_back(std::move(connection));
    }
    c->reader = std::thread([this, c] { c->serve(impl_->service); });
    accept();
  });
}

void Server::stop() {
  asio::post(impl_->io, [this] {
    boost::system::error_code ec;
    impl_->acceptor.close(ec);
  });
  impl_->io.stop();
}

}  // namespace ajtwin
