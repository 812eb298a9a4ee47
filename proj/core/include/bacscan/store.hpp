#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bacscan/model.hpp"

namespace bacscan {

inline constexpr int kSchemaVersion = 1;

enum class ExchangeKind { kOriginal, kBaseline, kMutated, kReplay };

std::string_view to_string(ExchangeKind kind);
std::optional<ExchangeKind> parse_exchange_kind(std::string_view text);

// How a body arrived before being decoded to raw bytes.
enum class BodyEncoding { kText, kBase64 };

std::string_view to_string(BodyEncoding encoding);
std::optional<BodyEncoding> parse_body_encoding(std::string_view text);

// One row of the request table joined with its header rows.
struct Exchange {
  std::int64_t id = 0;
  ExchangeKind kind = ExchangeKind::kOriginal;
  std::optional<std::int64_t> run_id;
  std::optional<std::int64_t> base_id;
  std::string iam_name;
  std::optional<MutationTarget> target;
  std::string modification;
  BaseRequest request;
  BodyEncoding body_encoding = BodyEncoding::kText;
  std::optional<ResponseRecord> response;
  BodyEncoding response_encoding = BodyEncoding::kText;

  bool operator==(const Exchange&) const = default;
};

struct ExchangeContext {
  // Defaults to kMutated when a mutation is given, kOriginal otherwise.
  std::optional<ExchangeKind> kind;
  std::optional<std::int64_t> run_id;
  // Required for baseline and replay rows; taken from the mutation otherwise.
  std::optional<std::int64_t> base_id;
  BodyEncoding body_encoding = BodyEncoding::kText;
  BodyEncoding response_encoding = BodyEncoding::kText;
};

struct HeaderRecord {
  std::int64_t header_id = 0;
  std::int64_t request_id = 0;
  std::string name;
  std::string value;
};

struct RunCounts {
  std::int64_t bases = 0;
  std::int64_t mutations = 0;
  std::int64_t sent = 0;
  std::int64_t transport_failures = 0;

  bool operator==(const RunCounts&) const = default;
};

struct ScanRun {
  std::int64_t run_id = 0;
  Timestamp started_at{};
  std::optional<Timestamp> ended_at;
  nlohmann::json policy = nlohmann::json::object();
  RunCounts counts;
};

enum class VerdictStatus { kUntriaged, kTriaged, kConfirmed, kFalsePositive };

std::optional<VerdictStatus> parse_verdict_status(std::string_view text);

struct FlagFilter {
  std::optional<Classification> classification;
  std::optional<std::string> iam_name;
  std::optional<VerdictStatus> verdict_status;
  std::optional<std::int64_t> run_id;
  std::size_t offset = 0;
  std::optional<std::size_t> limit;
};

struct FlagRecord {
  PveFlag flag;
  Exchange mutated;
  std::optional<Exchange> baseline;
  std::optional<TriageVerdict> verdict;
};

// Persistent scan store. One Store object serializes its own writes; other
// processes may open the same file for reading concurrently.
class Store {
 public:
  static Store open(const std::filesystem::path& path);
  static Store open_in_memory();

  Store(Store&&) noexcept;
  Store& operator=(Store&&) noexcept;
  ~Store();

  std::int64_t persist_exchange(const BaseRequest& base,
                                const std::optional<MutatedRequest>& mutated,
                                const std::optional<ResponseRecord>& response,
                                const ExchangeContext& context = {});

  Exchange exchange(std::int64_t id) const;
  std::vector<Exchange> exchanges_of_kind(ExchangeKind kind,
                                          std::optional<std::int64_t> run_id = std::nullopt) const;
  std::vector<HeaderRecord> header_rows(std::int64_t request_id) const;

  std::int64_t begin_run(const nlohmann::json& policy);
  void update_run_counts(std::int64_t run_id, const RunCounts& counts);
  void finish_run(std::int64_t run_id);
  ScanRun run(std::int64_t run_id) const;
  std::optional<std::int64_t> latest_run_id() const;
  std::vector<ScanRun> runs() const;

  // Assigns and returns flag_id.
  std::int64_t insert_flag(const PveFlag& flag);
  PveFlag flag(std::int64_t flag_id) const;
  FlagRecord flag_record(std::int64_t flag_id) const;
  std::vector<FlagRecord> query_flags(const FlagFilter& filter) const;
  std::size_t count_flags(const FlagFilter& filter) const;

  // Supersedes any earlier verdict on the same flag; history is retained.
  TriageVerdict record_verdict(TriageVerdict verdict);
  std::optional<TriageVerdict> active_verdict(std::int64_t flag_id) const;
  std::vector<TriageVerdict> verdict_history(std::int64_t flag_id) const;

  // Writes requests.csv and headers.csv into `directory`.
  void export_csv(const std::filesystem::path& directory) const;
  // One JSON object per line covering every table; bodies are base64.
  void export_jsonl(std::ostream& out) const;
  // Loads a dump produced by export_jsonl into an empty store, keeping ids.
  void import_jsonl(std::istream& in);

 private:
  struct Impl;
  explicit Store(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace bacscan
