#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bacscan/model.hpp"

namespace bacscan::sim {

inline constexpr std::uint64_t kDefaultSeed = 20230301;
inline constexpr std::int64_t kTesterUser = 13495;
inline constexpr std::int64_t kTesterOrder = 1001;
inline constexpr std::string_view kPublicSource = "ABPQqLF6Vjt6Pzz7lHjE-CRr";

struct PlantedVuln {
  std::string vuln_id;
  std::string endpoint;     // path template, e.g. /api/orders/{id}
  std::string path_prefix;  // matches every request aimed at the endpoint
  int cwe = 0;              // 0 marks a false-positive decoy
  std::string trigger;
  std::string sensitive_payload_kind;  // detector pattern name the leak matches
  BaseRequest example;                 // hand-issued trigger; url holds the target only

  bool operator==(const PlantedVuln&) const = default;
};

struct SimRequest {
  std::string method;
  std::string target;  // raw path?query as received
  Headers headers;
  std::string body;
  std::string host;  // Host header value
};

struct SimResponse {
  int status = 200;
  std::string content_type;
  std::string body;
};

struct AuditEntry {
  std::uint64_t seq = 0;
  std::int64_t elapsed_us = 0;  // since the simulator was created, monotonic
  std::int64_t epoch_ms = 0;
  std::string method;
  std::string target;
  std::string host;
};

// Deterministic vulnerable API. Every response is a pure function of the
// seed and the request; the only state is the audit log.
class TargetSimulator {
 public:
  explicit TargetSimulator(std::uint64_t seed = kDefaultSeed);

  std::uint64_t seed() const { return seed_; }
  std::string tester_token() const;  // full Authorization header value

  // Records the request (except audit queries) and answers it.
  SimResponse handle(const SimRequest& request);
  // Answers without recording.
  SimResponse respond(const SimRequest& request) const;

  std::vector<PlantedVuln> ground_truth() const;
  // Requests whose unauthenticated form must yield 401.
  std::vector<BaseRequest> secured_examples() const;

  std::vector<AuditEntry> audit() const;
  void clear_audit();

 private:
  SimResponse users_info(const std::string& query) const;
  SimResponse secure_info(const SimRequest& request, const std::string& query) const;
  SimResponse order(const SimRequest& request, const std::string& id) const;
  SimResponse retrieve(const std::string& query) const;
  SimResponse settings(const SimRequest& request) const;
  SimResponse profile_update(const SimRequest& request) const;
  SimResponse nearby(const std::string& query) const;
  SimResponse audit_response() const;

  std::uint64_t seed_;
  std::chrono::steady_clock::time_point created_;
  mutable std::mutex audit_mutex_;
  std::vector<AuditEntry> audit_;
};

nlohmann::json to_json(const PlantedVuln& vuln);
nlohmann::json to_json(const AuditEntry& entry);
AuditEntry audit_entry_from_json(const nlohmann::json& j);

// Ground-truth manifest for the simulator reachable at `origin`.
nlohmann::json manifest(const TargetSimulator& sim, const std::string& origin);

// A HAR capture of a tester session against `origin`, with captured
// responses. One entry targets `canary_origin`, a host that scans must leave
// alone, and one entry is an exact duplicate.
std::string fixture_har(const TargetSimulator& sim, const std::string& origin,
                        const std::string& canary_origin);

struct ServerOptions {
  std::string bind = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  bool allow_remote = false;
};

bool is_loopback_address(std::string_view host);

// Serves a simulator over plain HTTP on a background thread.
class Server {
 public:
  // Throws ConfigError for non-loopback binds without allow_remote and
  // Error when the port cannot be bound.
  Server(std::shared_ptr<TargetSimulator> sim, const ServerOptions& options = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  int port() const { return port_; }
  std::string origin() const;  // http://bind:port
  TargetSimulator& simulator() { return *sim_; }

  void stop();
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();

 private:
  struct Impl;
  std::shared_ptr<TargetSimulator> sim_;
  std::unique_ptr<Impl> impl_;
  std::string bind_;
  int port_ = 0;
};

}  // namespace bacscan::sim
