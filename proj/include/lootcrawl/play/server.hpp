#pragma once

#include <atomic>
#include <chrono>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "lootcrawl/play/session.hpp"

namespace lootcrawl::play {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  ///< 0 picks a free port
  std::chrono::seconds ttl = std::chrono::hours(1);
};

/// HTTP/JSON + WebSocket front of a SessionStore:
///   POST   /v1/sessions
///   GET    /v1/sessions/{id}
///   POST   /v1/sessions/{id}/actions
///   DELETE /v1/sessions/{id}
///   GET    /v1/sessions/{id}/events   (WebSocket upgrade)
/// One thread per connection.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Port actually bound.
  unsigned short port() const { return port_; }
  SessionStore& store() { return store_; }

  void start();
  /// Closes the listener and every open connection, then joins all threads.
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

 private:
  struct Impl;
  struct Connection;

  void accept_loop();
  void serve(std::shared_ptr<Connection> conn);
  void reap();

  ServerOptions options_;
  SessionStore store_;
  std::unique_ptr<Impl> impl_;
  unsigned short port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_thread_;
  std::mutex conns_mu_;
  std::list<std::shared_ptr<Connection>> conns_;
  std::mutex wait_mu_;
  std::condition_variable wait_cv_;
};

}  // namespace lootcrawl::play
