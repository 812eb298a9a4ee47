#include "bacscan/detector.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/regex.hpp>
#include <nlohmann/json.hpp>

#include "bacscan/error.hpp"
#include "bacscan/levenshtein.hpp"
#include "bacscan/text.hpp"

namespace bacscan {

namespace {

constexpr std::size_t kExcerptChars = 64;

}  // namespace

// Quantifiers are bounded so a search over a long run of word characters
// stays linear in the body size.
std::vector<SensitivePattern> default_sensitive_patterns() {
  return {
      {"email", R"([A-Za-z0-9._%+\-]{1,64}@[A-Za-z0-9\-]{1,63}(?:\.[A-Za-z0-9\-]{1,63}){0,8}\.[A-Za-z]{2,24})", ""},
      {"ssn", R"((?<![\w\-])\d{3}([\- ])\d{2}\1\d{4}(?![\w\-]))", ""},
      {"phone", R"((?<![\w\-+])(?:\+?1[ .\-]?)?(?:\(\d{3}\)\s?|\d{3}[ .\-]?)\d{3}[ .\-]?\d{4}(?![\w\-]))", ""},
      {"credit_card", R"((?<![\w\-])\d(?:[ \-]?\d){12,18}(?![\w\-]))", "luhn"},
      {"street_address",
       R"((?i)\b\d{1,6}\s+(?:[A-Za-z0-9.'\-]{1,30}\s+){1,4}(?:street|st|avenue|ave|road|rd|boulevard|blvd|lane|ln|drive|dr|court|ct|way|place|pl|terrace|parkway|pkwy|highway|hwy)\b\.?)",
       ""},
      {"credential",
       R"((?i)[A-Za-z0-9_\-]{0,24}(?:password|passwd|pwd|secret|token|api[_\-]?key|access[_\-]?key)["']?\s{0,3}[:=]\s{0,3}["']?[^\s"',;&}<]{3,128})",
       ""},
      {"bearer_token",
       R"((?<![A-Za-z0-9+_\-])(?=[A-Za-z0-9+_\-]{0,511}\d)(?=[A-Za-z0-9+_\-]{0,511}[A-Za-z])[A-Za-z0-9+_\-]{32,512}={0,2}(?![A-Za-z0-9+_\-]))",
       ""},
  };
}

std::vector<std::string> default_markup_types() { return {"html", "css", "javascript", "ecmascript"}; }

void DetectorConfig::validate() const {
  if (!std::isfinite(dissimilarity_threshold) || dissimilarity_threshold <= 0.0 || dissimilarity_threshold > 1.0) {
    throw ValidationError("detector/dissimilarity_threshold", "must lie in (0, 1]");
  }
  if (max_auto_len == 0) throw ValidationError("detector/max_auto_len", "must be positive");
  for (std::size_t i = 0; i < markup_types.size(); ++i) {
    if (markup_types[i].empty()) {
      throw ValidationError("detector/markup_types/" + std::to_string(i), "empty entry");
    }
  }
  for (std::size_t i = 0; i < regex_set.size(); ++i) {
    const auto& p = regex_set[i];
    const std::string where = "detector/patterns/" + std::to_string(i);
    if (p.name.empty()) throw ValidationError(where + "/name", "empty pattern name");
    for (std::size_t j = 0; j < i; ++j) {
      if (regex_set[j].name == p.name) throw ValidationError(where + "/name", "duplicate pattern name '" + p.name + "'");
    }
    if (!p.validator.empty() && p.validator != "luhn") {
      throw ValidationError(where + "/validator", "unknown validator '" + p.validator + "'");
    }
    try {
      boost::regex compiled(p.pattern, boost::regex::perl);
    } catch (const boost::regex_error& e) {
      throw ValidationError(where + "/pattern", std::string("does not compile: ") + e.what());
    }
  }
}

bool luhn_valid(std::string_view digits_with_separators) {
  int sum = 0;
  int count = 0;
  for (auto it = digits_with_separators.rbegin(); it != digits_with_separators.rend(); ++it) {
    if (*it < '0' || *it > '9') continue;
    int d = *it - '0';
    if (count % 2 == 1) {
      d *= 2;
      if (d > 9) d -= 9;
    }
    sum += d;
    ++count;
  }
  return count > 0 && sum % 10 == 0;
}

bool is_text_content_type(std::string_view content_type) {
  const auto type = text::trim(content_type);
  if (type.empty() || text::istarts_with(type, "text/")) return true;
  for (const char* marker : {"json", "xml", "javascript", "ecmascript", "x-www-form-urlencoded",
                             "html", "csv", "yaml", "graphql"}) {
    if (text::icontains(type, marker)) return true;
  }
  return false;
}

bool detect_code_leak(const ResponseRecord& response) {
  for (const char* marker : {"html", "css", "javascript", "ecmascript", "xml"}) {
    if (text::icontains(response.content_type, marker)) return true;
  }
  if (text::icontains(response.content_type, "json")) return false;

  const auto body = text::trim(response.body);
  for (const char* prefix : {"<html", "<!doctype", "function(", "function ", "var ", "import "}) {
    if (text::istarts_with(body, prefix)) return true;
  }
  if (!body.empty() && body.front() == '{') {
    std::size_t punctuation = 0;
    for (const char c : body) {
      if (c == '{' || c == '}' || c == ';') ++punctuation;
    }
    // Brace-heavy text that is not JSON looks like source code.
    if (punctuation * 100 > body.size() * 5 && !nlohmann::json::accept(body)) return true;
  }
  return false;
}

struct Detector::Compiled {
  std::vector<boost::regex> regexes;
};

Detector::Detector(DetectorConfig config) : config_(std::move(config)), compiled_(std::make_unique<Compiled>()) {
  config_.validate();
  for (const auto& p : config_.regex_set) {
    compiled_->regexes.emplace_back(p.pattern, boost::regex::perl | boost::regex::optimize);
  }
}

Detector::~Detector() = default;
Detector::Detector(Detector&&) noexcept = default;
Detector& Detector::operator=(Detector&&) noexcept = default;

std::vector<RegexHit> Detector::scan_sensitive(std::string_view body) const {
  std::vector<RegexHit> hits;
  for (std::size_t i = 0; i < config_.regex_set.size(); ++i) {
    const auto& pattern = config_.regex_set[i];
    try {
      boost::cregex_iterator it(body.data(), body.data() + body.size(), compiled_->regexes[i]);
      for (; it != boost::cregex_iterator(); ++it) {
        const std::string_view match(body.data() + it->position(), static_cast<std::size_t>(it->length()));
        if (pattern.validator == "luhn" && !luhn_valid(match)) continue;
        hits.push_back({pattern.name, text::truncate_utf8(match, kExcerptChars)});
      }
    } catch (const std::runtime_error&) {
      // Boost aborts pathological searches; keep the hits found so far.
    }
  }
  return hits;
}

double Detector::dissimilarity(const ResponseRecord& baseline, const ResponseRecord& mutated) const {
  if (is_text_content_type(baseline.content_type) && is_text_content_type(mutated.content_type)) {
    return normalized_dissimilarity(baseline.body, mutated.body);
  }
  return normalized_dissimilarity_bytes(baseline.body, mutated.body);
}

PveFlag Detector::classify(const ResponseRecord& baseline, const ResponseRecord& mutated) const {
  PveFlag flag;
  flag.code_leak = detect_code_leak(mutated);

  if (baseline.failed() || mutated.failed()) {
    const auto& failed = baseline.failed() ? baseline : mutated;
    flag.classification = Classification::kBenign;
    flag.reason = std::string("transport failure on ") +
                  (baseline.failed() ? "baseline" : "mutated") + " request: " +
                  failed.transport_error.value_or("no response");
    return flag;
  }

  for (const auto& type : config_.markup_types) {
    if (text::icontains(mutated.content_type, type)) {
      flag.classification = Classification::kManualReview;
      flag.reason = "markup content type '" + mutated.content_type + "' needs manual review";
      return flag;
    }
  }
  const bool text_body = is_text_content_type(mutated.content_type);
  const std::size_t length = text_body ? text::utf8_length(mutated.body) : mutated.body.size();
  if (length > config_.max_auto_len) {
    flag.classification = Classification::kManualReview;
    flag.reason = "body length " + std::to_string(length) + " exceeds " +
                  std::to_string(config_.max_auto_len) + "; needs manual review";
    return flag;
  }

  flag.dissimilarity = dissimilarity(baseline, mutated);
  flag.regex_hits = scan_sensitive(mutated.body);
  const bool dissimilar = flag.dissimilarity >= config_.dissimilarity_threshold;
  const std::string measured = "dissimilarity " + text::format_fixed(flag.dissimilarity, 4) +
                               (dissimilar ? " >= " : " < ") +
                               text::format_fixed(config_.dissimilarity_threshold, 4);
  if (dissimilar && !flag.regex_hits.empty()) {
    flag.classification = Classification::kPve;
    flag.reason = measured + " with " + std::to_string(flag.regex_hits.size()) + " sensitive match(es)";
  } else {
    flag.classification = Classification::kBenign;
    flag.reason = measured + (flag.regex_hits.empty() ? ", no sensitive match" : "");
  }
  return flag;
}

std::vector<RegexHit> scan_sensitive(std::string_view body, const DetectorConfig& config) {
  return Detector(config).scan_sensitive(body);
}

PveFlag classify_response(const ResponseRecord& baseline, const ResponseRecord& mutated,
                          const DetectorConfig& config) {
  return Detector(config).classify(baseline, mutated);
}

}  // namespace bacscan
