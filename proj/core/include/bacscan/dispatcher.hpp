#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "bacscan/har.hpp"
#include "bacscan/model.hpp"

namespace bacscan {

struct DispatchConfig {
  std::size_t max_in_flight = 4;
  double per_host_rate = 5.0;  // requests per second, per host
  std::chrono::milliseconds timeout{10000};
  int retries = 0;  // extra attempts after a transport failure
  bool follow_redirects = false;
  bool verify_tls = true;

  void validate() const;
};

// Executes one HTTP exchange. Transport failures are returned as a record
// with status 0, never thrown.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual ResponseRecord execute(const BaseRequest& request, const DispatchConfig& config) = 0;
};

// cpp-httplib client, with TLS through OpenSSL.
std::unique_ptr<HttpTransport> make_http_transport();

// Per-host spacing limiter: grants for one host are at least
// 1/rate seconds apart, plus a small guard for clock and scheduling jitter.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;

  explicit RateLimiter(double per_second);

  // Blocks until the caller may send to `host`; returns the granted time.
  Clock::time_point acquire(const std::string& host);
  Clock::duration interval() const { return interval_; }

 private:
  Clock::duration interval_;
  std::mutex mutex_;
  std::map<std::string, Clock::time_point> next_slot_;
};

// Sends requests that pass the scope policy. The check happens before any
// connection is attempted.
class Dispatcher {
 public:
  // Dispatchers that share `limiter` share its per-host schedule.
  Dispatcher(ScopePolicy scope, DispatchConfig config,
             std::shared_ptr<HttpTransport> transport = make_http_transport(),
             std::shared_ptr<RateLimiter> limiter = nullptr);

  // Throws ScopeRefusedError for out-of-scope targets or once the scope's
  // max_requests budget is spent.
  ResponseRecord send(const BaseRequest& request);

  std::size_t sent() const { return sent_.load(); }
  const DispatchConfig& config() const { return config_; }
  const ScopePolicy& scope() const { return scope_; }

 private:
  ScopePolicy scope_;
  DispatchConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<RateLimiter> limiter_;
  std::atomic<std::size_t> sent_{0};
};

}  // namespace bacscan
