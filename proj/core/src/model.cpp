#include "bacscan/model.hpp"

#include <algorithm>
#include <array>

#include "bacscan/error.hpp"
#include "bacscan/text.hpp"
#include "bacscan/url.hpp"

namespace bacscan {

Timestamp now_ms() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

std::int64_t to_epoch_ms(Timestamp t) { return t.time_since_epoch().count(); }

Timestamp from_epoch_ms(std::int64_t ms) { return Timestamp{std::chrono::milliseconds{ms}}; }

const Header* find_header(const Headers& headers, std::string_view name) {
  const auto it = std::find_if(headers.begin(), headers.end(),
                               [&](const Header& h) { return text::iequals(h.name, name); });
  return it == headers.end() ? nullptr : &*it;
}

bool is_supported_method(std::string_view method) {
  static constexpr std::array<std::string_view, 7> kMethods = {
      "GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS"};
  return std::find(kMethods.begin(), kMethods.end(), method) != kMethods.end();
}

void validate(const BaseRequest& request) {
  if (!is_supported_method(request.method)) {
    throw ValidationError("method", "unsupported HTTP method '" + request.method + "'");
  }
  if (!Url::parse(request.url)) {
    throw ValidationError("url", "not an absolute http(s) URL: '" + request.url + "'");
  }
  for (std::size_t i = 0; i < request.headers.size(); ++i) {
    if (request.headers[i].name.empty()) {
      throw ValidationError("headers/" + std::to_string(i) + "/name", "header name is empty");
    }
  }
}

ResponseRecord ResponseRecord::transport_failure(std::string error, std::int64_t elapsed_ms) {
  ResponseRecord r;
  r.status = 0;
  r.elapsed_ms = elapsed_ms;
  r.transport_error = std::move(error);
  return r;
}

void validate(const ResponseRecord& response) {
  if (response.status != 0 && (response.status < 100 || response.status > 599)) {
    throw ValidationError("status", "status " + std::to_string(response.status) + " out of range");
  }
  if ((response.status == 0) != response.transport_error.has_value()) {
    throw ValidationError("transport_error", "must be set exactly when status is 0");
  }
  if (response.elapsed_ms < 0) throw ValidationError("elapsed_ms", "negative elapsed time");
}

std::string_view to_string(MutationTarget target) {
  switch (target) {
    case MutationTarget::kUrl: return "URL";
    case MutationTarget::kHeaders: return "HEADERS";
    case MutationTarget::kBody: return "BODY";
  }
  return "URL";
}

std::optional<MutationTarget> parse_mutation_target(std::string_view text) {
  if (text == "URL") return MutationTarget::kUrl;
  if (text == "HEADERS") return MutationTarget::kHeaders;
  if (text == "BODY") return MutationTarget::kBody;
  return std::nullopt;
}

std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::kPve: return "PVE";
    case Classification::kManualReview: return "MANUAL_REVIEW";
    case Classification::kBenign: return "BENIGN";
  }
  return "BENIGN";
}

std::optional<Classification> parse_classification(std::string_view text) {
  if (text == "PVE") return Classification::kPve;
  if (text == "MANUAL_REVIEW") return Classification::kManualReview;
  if (text == "BENIGN") return Classification::kBenign;
  return std::nullopt;
}

std::string_view to_string(Verdict v) {
  return v == Verdict::kConfirmedVuln ? "CONFIRMED_VULN" : "FPPVE";
}

std::optional<Verdict> parse_verdict(std::string_view text) {
  if (text == "CONFIRMED_VULN") return Verdict::kConfirmedVuln;
  if (text == "FPPVE") return Verdict::kFalsePositive;
  return std::nullopt;
}

bool is_triage_cwe(int cwe) {
  return std::find(std::begin(kTriageCwes), std::end(kTriageCwes), cwe) != std::end(kTriageCwes);
}

void validate(const TriageVerdict& verdict) {
  for (std::size_t i = 0; i < verdict.cwe_tags.size(); ++i) {
    if (!is_triage_cwe(verdict.cwe_tags[i])) {
      throw ValidationError("cwe_tags/" + std::to_string(i),
                            "CWE-" + std::to_string(verdict.cwe_tags[i]) + " is not a triage CWE");
    }
  }
  if (verdict.verdict == Verdict::kConfirmedVuln && verdict.cwe_tags.empty()) {
    throw ValidationError("cwe_tags", "a confirmed vulnerability needs at least one CWE tag");
  }
}

}  // namespace bacscan
