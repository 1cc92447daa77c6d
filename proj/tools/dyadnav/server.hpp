#pragma once

#include <memory>
#include <string>

#include "dyad/session.hpp"

namespace dyadnav {

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  dyad::SessionConfig defaults;
  std::string static_dir;  // served at / when non-empty
};

/// HTTP front end for SessionManager:
///   POST   /api/sessions                 body: config patch  -> {id, state}
///   POST   /api/sessions/{id}/messages   body: client message -> reply
///   GET    /api/sessions/{id}/state      latest state message
///   GET    /api/sessions/{id}/events     server-sent events (?from=N)
///   GET    /api/sessions/{id}/poll       JSON array of events (?from=N&wait_ms=M)
///   GET    /api/sessions/{id}/trace      JSONL trace of the current episode
///   DELETE /api/sessions/{id}
class SessionServer {
 public:
  explicit SessionServer(ServeOptions opts);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  /// Binds the socket; returns the port. Throws std::runtime_error on failure.
  int bind();
  /// Blocks until stop().
  void listen();
  void stop();
  dyad::SessionManager& sessions();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dyadnav
