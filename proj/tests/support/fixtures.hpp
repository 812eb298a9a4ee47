#pragma once

#include <string>
#include <utility>

#include "bacscan/model.hpp"

namespace fixtures {

// A baseline/mutated pair of 100-character JSON-ish bodies whose Levenshtein
// distance is exactly `distance`. The mutated body holds an SSN when
// `with_ssn` is set. Baseline differences use 'Z', which never occurs in the
// mutated body, so no alignment can beat position-wise substitution.
inline std::pair<bacscan::ResponseRecord, bacscan::ResponseRecord> pair_at_distance(std::size_t distance,
                                                                                     bool with_ssn) {
  std::string mutated = with_ssn ? "ssn 123-45-6789 " : "name qa-tester; ";
  const std::string filler = "the quick brown fox jumps over a lazy dog ";
  while (mutated.size() < 100) mutated += filler;
  mutated.resize(100);
  std::string baseline = mutated;
  // Leave the leading 16 characters (the SSN slot) intact when possible.
  std::size_t changed = 0;
  for (std::size_t i = 99; changed < distance; --i) {
    baseline[i] = 'Z';
    ++changed;
    if (i == 0) break;
  }
  bacscan::ResponseRecord b{200, "application/json", baseline, 1, std::nullopt};
  bacscan::ResponseRecord m{200, "application/json", mutated, 1, std::nullopt};
  return {b, m};
}

}  // namespace fixtures
