#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace bacscan {

// Unit-cost Levenshtein distance. Common prefix and suffix are trimmed, then
// the bit-parallel block algorithm of Myers (1999) runs with the shorter
// string as the pattern; memory is linear in the shorter string. Very large
// pattern alphabets fall back to the two-row dynamic program.
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);
std::size_t edit_distance(std::string_view a, std::string_view b);  // byte-wise

// Reference two-row dynamic program, O(|a|*|b|) time, O(min) memory.
std::size_t edit_distance_two_row(std::u32string_view a, std::u32string_view b);

// Distance over Unicode scalar values of two UTF-8 strings divided by the
// longer length; 0 when both are empty.
double normalized_dissimilarity(std::string_view a, std::string_view b);
double normalized_dissimilarity_bytes(std::string_view a, std::string_view b);

enum class SpanKind { kInsert, kDelete, kReplace };

std::string_view to_string(SpanKind kind);

// Half-open byte range inside one body.
struct DiffSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  SpanKind kind = SpanKind::kReplace;

  bool operator==(const DiffSpan&) const = default;
};

struct DiffResult {
  std::vector<DiffSpan> baseline;  // kDelete or kReplace
  std::vector<DiffSpan> mutated;   // kInsert or kReplace
  std::size_t distance = 0;
  // Set when the inputs were too large for an alignment trace and a single
  // span covering everything between the common prefix and suffix was used.
  bool approximate = false;
};

// Aligns two UTF-8 bodies with a minimum-cost edit trace (Hirschberg) and
// reports the differing regions of each as byte spans.
DiffResult diff_spans(std::string_view baseline, std::string_view mutated,
                      std::size_t max_cells = 250'000'000);

}  // namespace bacscan
