#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "bacscan/model.hpp"

namespace bacscan {

struct SensitivePattern {
  std::string name;
  std::string pattern;  // Perl-compatible syntax
  // Optional post-match check; "luhn" is the only validator today.
  std::string validator;
};

std::vector<SensitivePattern> default_sensitive_patterns();
std::vector<std::string> default_markup_types();

struct DetectorConfig {
  double dissimilarity_threshold = 0.9;
  std::size_t max_auto_len = 100000;
  std::vector<std::string> markup_types = default_markup_types();
  std::vector<SensitivePattern> regex_set = default_sensitive_patterns();

  // Throws ValidationError naming the offending field.
  void validate() const;
};

bool luhn_valid(std::string_view digits_with_separators);

// True when the content type denotes text whose characters, rather than raw
// bytes, should be compared. An empty type is treated as text.
bool is_text_content_type(std::string_view content_type);

bool detect_code_leak(const ResponseRecord& response);

class Detector {
 public:
  explicit Detector(DetectorConfig config = {});
  ~Detector();
  Detector(Detector&&) noexcept;
  Detector& operator=(Detector&&) noexcept;

  const DetectorConfig& config() const { return config_; }

  // Hits ordered by pattern, then by position; excerpts hold at most 64
  // characters of the match.
  std::vector<RegexHit> scan_sensitive(std::string_view body) const;

  // Dissimilarity over characters for text responses, bytes otherwise.
  double dissimilarity(const ResponseRecord& baseline, const ResponseRecord& mutated) const;

  // The returned flag carries no ids; callers attach them when persisting.
  PveFlag classify(const ResponseRecord& baseline, const ResponseRecord& mutated) const;

 private:
  struct Compiled;
  DetectorConfig config_;
  std::unique_ptr<Compiled> compiled_;
};

std::vector<RegexHit> scan_sensitive(std::string_view body, const DetectorConfig& config = {});
PveFlag classify_response(const ResponseRecord& baseline, const ResponseRecord& mutated,
                          const DetectorConfig& config = {});

}  // namespace bacscan
