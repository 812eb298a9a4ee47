#include "bacscan/levenshtein.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <unordered_map>

#include "bacscan/text.hpp"

namespace bacscan {

namespace {

constexpr std::size_t kMaxPeqWords = std::size_t{1} << 22;  // 32 MiB of match vectors

template <typename Char>
void trim_common(std::basic_string_view<Char>& a, std::basic_string_view<Char>& b) {
  std::size_t prefix = 0;
  while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
  a.remove_prefix(prefix);
  b.remove_prefix(prefix);
  std::size_t suffix = 0;
  while (suffix < a.size() && suffix < b.size() &&
         a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix]) {
    ++suffix;
  }
  a.remove_suffix(suffix);
  b.remove_suffix(suffix);
}

template <typename Char>
std::size_t two_row(std::basic_string_view<Char> a, std::basic_string_view<Char> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

// Myers' block-based bit-vector algorithm. `pattern` is the shorter input.
template <typename Char>
std::size_t bit_parallel(std::basic_string_view<Char> pattern, std::basic_string_view<Char> text) {
  const std::size_t m = pattern.size();
  const std::size_t words = (m + 63) / 64;

  std::unordered_map<Char, std::size_t> alphabet;
  for (const Char c : pattern) alphabet.try_emplace(c, alphabet.size());
  if (alphabet.size() * words > kMaxPeqWords) return two_row(pattern, text);

  std::vector<std::uint64_t> peq(alphabet.size() * words, 0);
  for (std::size_t i = 0; i < m; ++i) {
    peq[alphabet[pattern[i]] * words + i / 64] |= std::uint64_t{1} << (i % 64);
  }

  std::vector<std::uint64_t> pv(words, ~std::uint64_t{0});
  std::vector<std::uint64_t> mv(words, 0);
  const std::uint64_t last_bit = std::uint64_t{1} << ((m - 1) % 64);
  std::size_t score = m;

  for (const Char c : text) {
    const auto found = alphabet.find(c);
    const std::uint64_t* eq_row = found == alphabet.end() ? nullptr : &peq[found->second * words];
    int carry = 1;  // horizontal delta entering the top of the column
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t eq = eq_row ? eq_row[w] : 0;
      const std::uint64_t p = pv[w];
      const std::uint64_t n = mv[w];
      const std::uint64_t xv = eq | n;
      if (carry < 0) eq |= 1;
      const std::uint64_t xh = (((eq & p) + p) ^ p) | eq;
      std::uint64_t ph = n | ~(xh | p);
      std::uint64_t mh = p & xh;
      const std::uint64_t high = w + 1 == words ? last_bit : std::uint64_t{1} << 63;
      const int out = (ph & high) ? 1 : ((mh & high) ? -1 : 0);
      ph <<= 1;
      mh <<= 1;
      if (carry < 0) {
        mh |= 1;
      } else if (carry > 0) {
        ph |= 1;
      }
      pv[w] = mh | ~(xv | ph);
      mv[w] = ph & xv;
      carry = out;
    }
    score = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(score) + carry);
  }
  return score;
}

template <typename Char>
std::size_t distance_impl(std::basic_string_view<Char> a, std::basic_string_view<Char> b) {
  trim_common(a, b);
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  if (a.size() > b.size()) std::swap(a, b);
  return bit_parallel(a, b);
}

}  // namespace

std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
  return distance_impl(a, b);
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  return distance_impl(std::basic_string_view<char>(a), std::basic_string_view<char>(b));
}

std::size_t edit_distance_two_row(std::u32string_view a, std::u32string_view b) {
  return two_row(a, b);
}

double normalized_dissimilarity(std::string_view a, std::string_view b) {
  const auto da = text::decode_utf8(a);
  const auto db = text::decode_utf8(b);
  const std::size_t longest = std::max(da.size(), db.size());
  if (longest == 0) return 0.0;
  const std::size_t d = edit_distance(std::u32string_view(da.data(), da.size()),
                                      std::u32string_view(db.data(), db.size()));
  return static_cast<double>(d) / static_cast<double>(longest);
}

double normalized_dissimilarity_bytes(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

std::string_view to_string(SpanKind kind) {
  switch (kind) {
    case SpanKind::kInsert: return "insert";
    case SpanKind::kDelete: return "delete";
    case SpanKind::kReplace: return "replace";
  }
  return "replace";
}

// --- alignment trace ----------------------------------------------------------

namespace {

enum class Op : unsigned char { kMatch, kSubstitute, kInsert, kDelete };

using Seq = std::u32string_view;

// Last row of the edit-distance matrix of a against every prefix of b.
std::vector<std::size_t> last_row(Seq a, Seq b, bool reversed) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    const char32_t ca = reversed ? a[a.size() - i] : a[i - 1];
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const char32_t cb = reversed ? b[b.size() - j] : b[j - 1];
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (ca == cb ? 0 : 1)});
      diag = up;
    }
  }
  return row;
}

void full_trace(Seq a, Seq b, std::vector<Op>& ops) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  const auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      at(i, j) = std::min({at(i - 1, j) + 1, at(i, j - 1) + 1,
                           at(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  std::vector<Op> rev;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)) {
      rev.push_back(a[i - 1] == b[j - 1] ? Op::kMatch : Op::kSubstitute);
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      rev.push_back(Op::kDelete);
      --i;
    } else {
      rev.push_back(Op::kInsert);
      --j;
    }
  }
  ops.insert(ops.end(), rev.rbegin(), rev.rend());
}

void hirschberg(Seq a, Seq b, std::vector<Op>& ops) {
  if (a.empty()) {
    ops.insert(ops.end(), b.size(), Op::kInsert);
    return;
  }
  if (b.empty()) {
    ops.insert(ops.end(), a.size(), Op::kDelete);
    return;
  }
  if (a.size() * b.size() <= 1 << 16 || a.size() == 1 || b.size() == 1) {
    full_trace(a, b, ops);
    return;
  }
  const std::size_t mid = a.size() / 2;
  const auto left = last_row(a.substr(0, mid), b, false);
  const auto right = last_row(a.substr(mid), b, true);
  std::size_t split = 0;
  std::size_t best = static_cast<std::size_t>(-1);
  for (std::size_t k = 0; k <= b.size(); ++k) {
    const std::size_t cost = left[k] + right[b.size() - k];
    if (cost < best) {
      best = cost;
      split = k;
    }
  }
  hirschberg(a.substr(0, mid), b.substr(0, split), ops);
  hirschberg(a.substr(mid), b.substr(split), ops);
}

}  // namespace

DiffResult diff_spans(std::string_view baseline, std::string_view mutated, std::size_t max_cells) {
  const auto da = text::decode_utf8(baseline);
  const auto db = text::decode_utf8(mutated);
  const auto off_a = text::utf8_offsets(baseline);
  const auto off_b = text::utf8_offsets(mutated);
  Seq a(da.data(), da.size());
  Seq b(db.data(), db.size());

  std::size_t prefix = 0;
  while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
  std::size_t suffix = 0;
  while (suffix < a.size() - prefix && suffix < b.size() - prefix &&
         a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix]) {
    ++suffix;
  }
  const Seq core_a = a.substr(prefix, a.size() - prefix - suffix);
  const Seq core_b = b.substr(prefix, b.size() - prefix - suffix);

  DiffResult result;
  const auto add_run = [&](std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
    if (a0 == a1 && b0 == b1) return;
    const SpanKind kind = a0 == a1 ? SpanKind::kInsert : (b0 == b1 ? SpanKind::kDelete : SpanKind::kReplace);
    if (a1 > a0) result.baseline.push_back({off_a[a0], off_a[a1], kind});
    if (b1 > b0) result.mutated.push_back({off_b[b0], off_b[b1], kind});
  };

  if (core_a.size() * core_b.size() > max_cells) {
    result.approximate = true;
    result.distance = edit_distance(core_a, core_b);
    add_run(prefix, prefix + core_a.size(), prefix, prefix + core_b.size());
    return result;
  }

  std::vector<Op> ops;
  hirschberg(core_a, core_b, ops);
  std::size_t i = prefix;
  std::size_t j = prefix;
  std::size_t run_a = i;
  std::size_t run_b = j;
  bool in_run = false;
  for (const Op op : ops) {
    if (op == Op::kMatch) {
      if (in_run) add_run(run_a, i, run_b, j);
      in_run = false;
      ++i;
      ++j;
      continue;
    }
    if (!in_run) {
      run_a = i;
      run_b = j;
      in_run = true;
    }
    ++result.distance;
    if (op == Op::kSubstitute || op == Op::kDelete) ++i;
    if (op == Op::kSubstitute || op == Op::kInsert) ++j;
  }
  if (in_run) add_run(run_a, i, run_b, j);
  return result;
}

}  // namespace bacscan
