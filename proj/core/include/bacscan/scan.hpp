#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bacscan/detector.hpp"
#include "bacscan/dispatcher.hpp"
#include "bacscan/har.hpp"
#include "bacscan/iam.hpp"
#include "bacscan/store.hpp"

namespace bacscan {

struct ScanOptions {
  ScopePolicy scope;
  DispatchConfig dispatch;
  DetectorConfig detector;
  std::vector<IamDescriptor> iams = IamRegistry::builtin().default_descriptors();
  std::size_t budget_per_request = 0;  // 0 keeps every mutation
  // Re-fetch baselines live even when the capture holds a response.
  bool refresh_baseline = false;
  // Generate and persist mutations without sending anything.
  bool dry_run = false;
  // Restrict the scan to these original exchanges; all of them when empty.
  std::vector<std::int64_t> base_ids;
};

struct ScanSummary {
  std::int64_t run_id = 0;
  RunCounts counts;
  std::size_t pve = 0;
  std::size_t manual_review = 0;
  std::size_t benign = 0;
  std::size_t out_of_scope = 0;  // base or mutated requests refused by scope
  std::vector<std::string> warnings;
};

struct ScanProgress {
  std::size_t done = 0;
  std::size_t total = 0;
};

// Runs every configured IAM over the stored original requests, sends the
// mutations through a scope-checked dispatcher and persists each exchange
// and its flag as soon as it completes.
ScanSummary run_scan(Store& store, const ScanOptions& options,
                     std::shared_ptr<HttpTransport> transport = make_http_transport(),
                     const std::function<void(const ScanProgress&)>& progress = {});

// User edits applied to a flagged mutation before it is sent again.
struct ReplayEdits {
  std::optional<std::string> method;
  std::optional<std::string> url;
  std::optional<Headers> headers;
  std::optional<std::string> body;
};

struct ReplayResult {
  std::int64_t flag_id = 0;
  std::int64_t exchange_id = 0;  // the appended replay row
  BaseRequest request;
  ResponseRecord response;
  PveFlag classification;  // against the flag's baseline; not persisted
};

// Re-sends a flagged mutation (optionally edited), appends the exchange as
// a replay row and classifies it. Existing flags and exchanges are never
// modified. Throws ScopeRefusedError before sending anything out of scope.
ReplayResult replay_flag(Store& store, std::int64_t flag_id, const ReplayEdits& edits,
                         Dispatcher& dispatcher, const Detector& detector);

// Scope recorded in a run's policy snapshot.
ScopePolicy scope_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ScopePolicy& scope);
nlohmann::json to_json(const DispatchConfig& config);

}  // namespace bacscan
