#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bacscan/model.hpp"
#include "bacscan/store.hpp"
#include "bacscan/url.hpp"

namespace bacscan {

// A request extracted from a HAR entry, plus the captured response when the
// capture holds one. The response serves as the default baseline.
struct CapturedEntry {
  BaseRequest request;
  BodyEncoding body_encoding = BodyEncoding::kText;
  std::optional<ResponseRecord> response;
  BodyEncoding response_encoding = BodyEncoding::kText;

  bool operator==(const CapturedEntry&) const = default;
};

struct HarParseResult {
  std::vector<CapturedEntry> entries;
  std::size_t entry_count = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

// Parses a HAR 1.2 document. Throws ParseError (with a byte offset or JSON
// pointer) when the document itself is malformed; defective entries are
// skipped and reported in `warnings`.
HarParseResult parse_har_document(std::string_view document);

std::vector<BaseRequest> parse_har(std::string_view document);

// Parses an ISO-8601 date-time such as 2023-03-01T12:00:00.123Z.
std::optional<Timestamp> parse_iso8601(std::string_view text);

struct ScopePolicy {
  // Exact host names or "*.suffix" wildcards, optionally with ":port".
  std::vector<std::string> allowed_hosts;
  std::vector<std::string> denied_path_prefixes;
  std::size_t max_requests = 10000;

  // Throws ValidationError; scanning without an allowlist is refused.
  void validate() const;
  bool host_allowed(const Url& url) const;
  bool path_allowed(const Url& url) const;
  bool allows(std::string_view url) const;
};

bool host_matches(std::string_view pattern, const Url& url);

template <typename T>
struct ScopePartition {
  std::vector<T> in_scope;
  std::vector<T> excluded;
};

ScopePartition<BaseRequest> apply_scope(std::vector<BaseRequest> requests,
                                        const ScopePolicy& policy);
ScopePartition<CapturedEntry> apply_scope(std::vector<CapturedEntry> entries,
                                          const ScopePolicy& policy);

// Keeps the first request for each (method, url, body); headers are ignored.
std::vector<BaseRequest> dedupe(std::vector<BaseRequest> requests);
std::vector<CapturedEntry> dedupe(std::vector<CapturedEntry> entries);

struct IngestSummary {
  std::size_t parsed = 0;    // entries in the document
  std::size_t skipped = 0;   // defective entries
  std::size_t deduped = 0;   // duplicates dropped
  std::size_t excluded = 0;  // outside scope or over max_requests
  std::vector<std::int64_t> stored_ids;
  std::vector<std::string> warnings;
};

// Parse, dedupe (optional), scope-filter and persist as original exchanges
// together with their captured responses.
IngestSummary ingest_har(Store& store, std::string_view document, const ScopePolicy& scope,
                         bool remove_duplicates = true);

}  // namespace bacscan
