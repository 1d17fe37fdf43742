#include "qsat/http_server.hpp"

// Room for bursts of concurrent clients.
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#include <httplib.h>
#include <pthread.h>
#include <signal.h>

#include <atomic>
#include <chrono>
#include <thread>

#include "qsat/error.hpp"

namespace qsat {

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

}  // namespace

struct ApiServer::Impl {
  BundleHolder& holder;
  int delay_ms;
  httplib::Server server;
  int bound_port = -1;

  Impl(BundleHolder& h, int delay) : holder(h), delay_ms(delay) {
    server.Post("/api/v1/predict", [this](const httplib::Request& req, httplib::Response& res) {
      if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      const auto bundle = holder.get();
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::parse_error&) {
        send_json(res, 422, error_body("", "request body is not valid JSON"));
        return;
      }
      try {
        const auto request = PredictionRequest::from_json(body);
        send_json(res, 200, handle_predict(*bundle, request));
      } catch (const Error& e) {
        if (e.is_validation()) {
          send_json(res, 422, error_body(e.field(), e.what()));
        } else {
          send_json(res, 500, error_body(e.field(), e.what()));
        }
      }
    });
    server.Get("/api/v1/models", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, handle_models(*holder.get()));
    });
    server.Get("/api/v1/importance", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, handle_importance(*holder.get()));
    });
    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, handle_health(*holder.get()));
    });
    // A second server on the same port must fail to bind.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          std::string message = "internal error";
          try {
            if (ep) std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            message = e.what();
          } catch (...) {
          }
          send_json(res, 500, error_body("", message));
        });
  }
};

ApiServer::ApiServer(BundleHolder& holder, int handler_delay_ms)
    : impl_(std::make_unique<Impl>(holder, handler_delay_ms)) {}

ApiServer::~ApiServer() = default;

bool ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(host);
    return impl_->bound_port > 0;
  }
  if (!impl_->server.bind_to_port(host, port)) return false;
  impl_->bound_port = port;
  return true;
}

int ApiServer::port() const { return impl_->bound_port; }

void ApiServer::run() { impl_->server.listen_after_bind(); }

void ApiServer::stop() { impl_->server.stop(); }

int serve(const ServeOptions& options, std::ostream& log) {
  // Block the signals before any thread exists so only the watcher sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGHUP);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  BundleHolder holder(std::make_shared<const ModelBundle>(load_bundle(options.bundle_path)));
  ApiServer server(holder, options.handler_delay_ms);
  if (!server.bind(options.host, options.port)) {
    log << "error: cannot bind " << options.host << ":" << options.port << "\n";
    return 2;
  }
  log << "listening on " << options.host << ":" << server.port() << " (model "
      << holder.get()->model_version << ")" << std::endl;

  std::atomic<bool> done{false};
  std::thread watcher([&] {
    const timespec tick{0, 200'000'000};
    while (!done.load()) {
      const int sig = sigtimedwait(&signals, nullptr, &tick);
      if (sig == SIGHUP) {
        try {
          holder.set(std::make_shared<const ModelBundle>(load_bundle(options.bundle_path)));
          log << "reloaded bundle (model " << holder.get()->model_version << ")" << std::endl;
        } catch (const std::exception& e) {
          log << "reload failed, keeping current bundle: " << e.what() << std::endl;
        }
      } else if (sig == SIGTERM || sig == SIGINT) {
        log << "shutting down" << std::endl;
        server.stop();
        done = true;
      }
    }
  });

  server.run();
  done = true;
  watcher.join();
  log << "stopped" << std::endl;
  return 0;
}

}  // namespace qsat
