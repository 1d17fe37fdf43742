#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>

#include "qsat/service.hpp"

namespace qsat {

/// JSON API over HTTP/1.1:
///   POST /api/v1/predict, GET /api/v1/models, GET /api/v1/importance,
///   GET /healthz.
class ApiServer {
 public:
  /// `handler_delay_ms` stalls every predict handler; tests use it to hold
  /// a request in flight across a shutdown.
  explicit ApiServer(BundleHolder& holder, int handler_delay_ms = 0);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Port 0 picks a free port. Returns false if the address is taken.
  bool bind(const std::string& host, int port);
  int port() const;
  /// Blocks until stop() is called.
  void run();
  /// Stops accepting connections; in-flight requests finish first.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ServeOptions {
  std::filesystem::path bundle_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  int handler_delay_ms = 0;
};

/// Loads the bundle, binds and serves until SIGTERM or SIGINT (graceful
/// drain, returns 0). SIGHUP reloads the bundle from disk; a failed reload
/// keeps the current bundle. Returns 2 if the port cannot be bound.
int serve(const ServeOptions& options, std::ostream& log);

}  // namespace qsat
