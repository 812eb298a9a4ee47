#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "bacscan/config.hpp"
#include "bacscan/dispatcher.hpp"
#include "bacscan/store.hpp"

namespace bacscan {

inline constexpr int kApiVersion = 1;

struct ApiRequest {
  std::string method = "GET";
  std::string path;  // without query string
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct ServiceOptions {
  // Replays are checked against this scope; the run's own scope otherwise.
  std::optional<ScopePolicy> scope;
  DispatchConfig dispatch;
  DetectorConfig detector;
};

// The /api/v1 triage API, independent of any HTTP server. Every response
// body is JSON carrying "api_version"; errors look like
//   {"api_version":1,"error":{"code":"...","message":"...","field":"..."}}
class TriageService {
 public:
  TriageService(Store& store, ServiceOptions options,
                std::shared_ptr<HttpTransport> transport = make_http_transport());

  ApiResponse handle(const ApiRequest& request);

 private:
  ApiResponse list_flags(const ApiRequest& request);
  ApiResponse flag_detail(std::int64_t flag_id);
  ApiResponse post_verdict(std::int64_t flag_id, const ApiRequest& request);
  ApiResponse replay(std::int64_t flag_id, const ApiRequest& request);
  ApiResponse list_runs();
  ApiResponse run_stats(std::int64_t run_id);

  Store& store_;
  ServiceOptions options_;
  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<RateLimiter> limiter_;
  std::mutex mutex_;
};

struct ServeOptions {
  std::string bind = "127.0.0.1";
  int port = 8765;  // 0 picks a free port
  bool allow_remote = false;
  std::string ui_dir;  // mounted at / when set
};

// Serves a TriageService over HTTP on a background thread.
class ServiceServer {
 public:
  // Throws ConfigError for non-loopback binds without allow_remote and
  // Error when the port cannot be bound.
  ServiceServer(std::shared_ptr<TriageService> service, const ServeOptions& options);
  ~ServiceServer();
  ServiceServer(const ServiceServer&) = delete;
  ServiceServer& operator=(const ServiceServer&) = delete;

  int port() const { return port_; }
  std::string origin() const;
  void stop();
  void wait();

 private:
  struct Impl;
  std::shared_ptr<TriageService> service_;
  std::unique_ptr<Impl> impl_;
  std::string bind_;
  int port_ = 0;
};

}  // namespace bacscan
