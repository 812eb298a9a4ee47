#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bacscan {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

Timestamp now_ms();
std::int64_t to_epoch_ms(Timestamp t);
Timestamp from_epoch_ms(std::int64_t ms);

struct Header {
  std::string name;
  std::string value;

  bool operator==(const Header&) const = default;
};

using Headers = std::vector<Header>;

// First header with a case-insensitive name match.
const Header* find_header(const Headers& headers, std::string_view name);

bool is_supported_method(std::string_view method);

// A captured HTTP request; the unit every attack method mutates.
struct BaseRequest {
  std::int64_t request_id = 0;
  std::string method = "GET";
  std::string url;
  std::string body;  // raw bytes
  Headers headers;
  Timestamp captured_at{};

  bool operator==(const BaseRequest&) const = default;
};

// Throws ValidationError naming the offending field.
void validate(const BaseRequest& request);

struct ResponseRecord {
  int status = 0;  // 0 means the exchange failed at the transport level
  std::string content_type;
  std::string body;
  std::int64_t elapsed_ms = 0;
  std::optional<std::string> transport_error;

  bool operator==(const ResponseRecord&) const = default;

  static ResponseRecord transport_failure(std::string error, std::int64_t elapsed_ms = 0);
  bool failed() const { return status == 0 || transport_error.has_value(); }
};

void validate(const ResponseRecord& response);

enum class MutationTarget { kUrl, kHeaders, kBody };

std::string_view to_string(MutationTarget target);
std::optional<MutationTarget> parse_mutation_target(std::string_view text);

struct MutatedRequest {
  std::int64_t base_id = 0;
  std::string iam_name;
  MutationTarget target = MutationTarget::kUrl;
  std::string modification;
  BaseRequest request;

  bool operator==(const MutatedRequest&) const = default;
};

enum class Classification { kPve, kManualReview, kBenign };

std::string_view to_string(Classification c);
std::optional<Classification> parse_classification(std::string_view text);

struct RegexHit {
  std::string pattern_name;
  std::string excerpt;

  bool operator==(const RegexHit&) const = default;
};

struct PveFlag {
  std::int64_t flag_id = 0;
  std::int64_t mutated_id = 0;
  std::optional<std::int64_t> baseline_id;
  std::optional<std::int64_t> run_id;
  Classification classification = Classification::kBenign;
  double dissimilarity = 0.0;
  std::vector<RegexHit> regex_hits;
  bool code_leak = false;
  std::string reason;

  bool operator==(const PveFlag&) const = default;
};

enum class Verdict { kConfirmedVuln, kFalsePositive };

std::string_view to_string(Verdict v);
std::optional<Verdict> parse_verdict(std::string_view text);

// CWE identifiers a confirmed verdict may carry.
inline constexpr int kTriageCwes[] = {200, 201, 285, 359, 538, 540, 862};
bool is_triage_cwe(int cwe);

struct TriageVerdict {
  std::int64_t flag_id = 0;
  Verdict verdict = Verdict::kFalsePositive;
  std::vector<int> cwe_tags;
  std::string notes;
  Timestamp decided_at{};

  bool operator==(const TriageVerdict&) const = default;
};

void validate(const TriageVerdict& verdict);

}  // namespace bacscan
