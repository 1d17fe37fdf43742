#include <gtest/gtest.h>
#include <httplib.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <future>
#include <regex>
#include <thread>

#include "qsat/http_server.hpp"
#include "test_support.hpp"

namespace qsat {
namespace {

using namespace std::chrono_literals;

const std::string kGoldenBody = [] {
  auto scores = nlohmann::json::object();
  for (auto name : kMetricNames) scores[std::string(name)] = 15;
  return nlohmann::json{{"design", "phenomenology"}, {"scores", scores}, {"alpha", 0.1}}.dump();
}();

class InProcessServer : public ::testing::Test {
 protected:
  void SetUp() override {
    holder_ = std::make_unique<BundleHolder>(
        std::make_shared<const ModelBundle>(testing::fixture_bundle()));
    server_ = std::make_unique<ApiServer>(*holder_);
    ASSERT_TRUE(server_->bind("127.0.0.1", 0));
    thread_ = std::thread([this] { server_->run(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", server_->port());
    for (int i = 0; i < 100 && !client_->Get("/healthz"); ++i) std::this_thread::sleep_for(10ms);
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }

  std::unique_ptr<BundleHolder> holder_;
  std::unique_ptr<ApiServer> server_;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(InProcessServer, Healthz) {
  const auto res = client_->Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto body = nlohmann::json::parse(res->body);
  EXPECT_EQ(body["status"], "ok");
  EXPECT_EQ(body["model_version"], testing::fixture_bundle().model_version);
}

TEST_F(InProcessServer, PredictMatchesServiceLayer) {
  const auto res = client_->Post("/api/v1/predict", kGoldenBody, "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
  const auto expected = handle_predict(
      testing::fixture_bundle(), PredictionRequest::from_json(nlohmann::json::parse(kGoldenBody)));
  EXPECT_EQ(res->body, expected.dump());
}

TEST_F(InProcessServer, ValidationErrorsAre422) {
  auto body = nlohmann::json::parse(kGoldenBody);
  body["scores"]["information_power"] = 99;
  auto res = client_->Post("/api/v1/predict", body.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);
  EXPECT_EQ(nlohmann::json::parse(res->body)["error"]["field"], "scores.information_power");

  res = client_->Post("/api/v1/predict", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);
  EXPECT_EQ(nlohmann::json::parse(res->body)["error"]["field"], "");
}

TEST_F(InProcessServer, ModelsAndImportance) {
  auto res = client_->Get("/api/v1/models");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(nlohmann::json::parse(res->body), handle_models(testing::fixture_bundle()));
  res = client_->Get("/api/v1/importance");
  ASSERT_TRUE(res);
  EXPECT_EQ(nlohmann::json::parse(res->body), handle_importance(testing::fixture_bundle()));
  res = client_->Get("/api/v1/nothing");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
}

TEST_F(InProcessServer, ConcurrentRequestsAreByteIdentical) {
  std::vector<std::future<std::string>> futures;
  for (int i = 0; i < 64; ++i) {
    futures.push_back(std::async(std::launch::async, [port = server_->port()] {
      httplib::Client c("127.0.0.1", port);
      const auto res = c.Post("/api/v1/predict", kGoldenBody, "application/json");
      return res ? res->body : std::string("<no response>");
    }));
  }
  const auto first = futures.front().get();
  EXPECT_NE(first, "<no response>");
  for (std::size_t i = 1; i < futures.size(); ++i) EXPECT_EQ(futures[i].get(), first);
}

/// `qsat serve` in a child process on a free port.
class ServeProcess {
 public:
  explicit ServeProcess(const std::string& extra_args) {
    dir_ = testing::temp_dir("serve_" + std::to_string(::getpid()));
    log_ = dir_ / "serve.log";
    pid_ = ::fork();
    if (pid_ == 0) {
      const std::string cmd = std::string("exec ") + QSAT_BINARY + " serve --bundle " +
                              testing::fixture_bundle_path().string() + " --port 0 " + extra_args +
                              " 2>" + log_.string();
      ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    const std::regex re("listening on [0-9.]+:([0-9]+)");
    for (int i = 0; i < 300 && port_ == 0; ++i) {
      std::smatch m;
      const auto text = testing::slurp(log_);
      if (std::regex_search(text, m, re)) port_ = std::stoi(m[1]);
      else std::this_thread::sleep_for(20ms);
    }
  }
  ~ServeProcess() {
    if (pid_ > 0 && !reaped_) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }

  int port() const { return port_; }
  void signal(int sig) const { ::kill(pid_, sig); }
  int wait_exit_code() {
    int status = 0;
    ::waitpid(pid_, &status, 0);
    reaped_ = true;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string log() const { return testing::slurp(log_); }

 private:
  std::filesystem::path dir_, log_;
  pid_t pid_ = -1;
  int port_ = 0;
  bool reaped_ = false;
};

TEST(ServeCommand, HealthzThenSigtermExitsCleanly) {
  ServeProcess proc("");
  ASSERT_GT(proc.port(), 0) << proc.log();
  httplib::Client c("127.0.0.1", proc.port());
  const auto res = c.Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(nlohmann::json::parse(res->body)["status"], "ok");
  proc.signal(SIGTERM);
  EXPECT_EQ(proc.wait_exit_code(), 0);
}

TEST(ServeCommand, InFlightRequestCompletesAcrossSigterm) {
  ServeProcess proc("--handler-delay-ms 1500");
  ASSERT_GT(proc.port(), 0) << proc.log();
  auto pending = std::async(std::launch::async, [port = proc.port()] {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(10, 0);
    const auto res = c.Post("/api/v1/predict", kGoldenBody, "application/json");
    return res ? std::make_pair(res->status, res->body) : std::make_pair(-1, std::string());
  });
  std::this_thread::sleep_for(500ms);
  proc.signal(SIGTERM);
  const auto [status, body] = pending.get();
  EXPECT_EQ(status, 200) << proc.log();
  EXPECT_EQ(nlohmann::json::parse(body)["recommended_n"],
            handle_predict(testing::fixture_bundle(),
                           PredictionRequest::from_json(nlohmann::json::parse(kGoldenBody)))
                ["recommended_n"]);
  EXPECT_EQ(proc.wait_exit_code(), 0);
}

TEST(ServeCommand, PortInUseExitsWithTwo) {
  ServeProcess first("");
  ASSERT_GT(first.port(), 0);
  const auto r = testing::run_qsat("serve --bundle " + testing::fixture_bundle_path().string() +
                                   " --port " + std::to_string(first.port()));
  EXPECT_EQ(r.exit_code, 2);
}

TEST(ServeCommand, BadBundleExitsWithTwo) {
  const auto dir = testing::temp_dir("serve_bad_bundle");
  write_file(dir / "bad.qsat.json", "{\"format_version\": 99}");
  const auto r = testing::run_qsat("serve --port 0 --bundle " + (dir / "bad.qsat.json").string());
  EXPECT_EQ(r.exit_code, 2);
}

}  // namespace
}  // namespace qsat
