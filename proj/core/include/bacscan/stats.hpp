#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bacscan/store.hpp"

namespace bacscan {

struct IamStats {
  std::string iam_name;
  std::size_t total_sent = 0;
  double success_rate = 0.0;  // share of sent mutations answered with 2xx
  std::size_t dissimilar_count = 0;
  std::size_t pve_count = 0;
  std::size_t manual_review_count = 0;
  std::size_t code_leak_true = 0;
  std::size_t code_leak_false = 0;
  std::size_t confirmed_count = 0;
  std::size_t fppve_count = 0;

  bool operator==(const IamStats&) const = default;
};

// One row per IAM configured for the run (in plan order), empty when the
// run sent nothing. Throws NotFoundError for an unknown run.
std::vector<IamStats> per_iam_stats(const Store& store, std::int64_t run_id);

// (iam_name, flags with code_leak set) per IAM of the run, zeros included.
std::vector<std::pair<std::string, std::size_t>> code_leak_histogram(const Store& store, std::int64_t run_id);

struct FlagSummary {
  std::int64_t flag_id = 0;
  std::int64_t mutated_id = 0;
  std::string iam_name;
  std::string target;
  std::string modification;
  Classification classification = Classification::kBenign;
  double dissimilarity = 0.0;
  std::size_t regex_hits = 0;
  bool code_leak = false;
  std::optional<Verdict> verdict;
};

struct RunReport {
  ScanRun run;
  std::vector<IamStats> iams;
  std::vector<FlagSummary> flags;
  std::size_t pve_total = 0;
  std::size_t manual_review_total = 0;
  std::size_t benign_total = 0;
  std::size_t triaged = 0;
  std::size_t confirmed = 0;
  std::size_t fppve = 0;
  std::optional<double> confirmed_ratio;  // confirmed / PVE flags
  std::optional<double> fppve_ratio;      // FPPVE / triaged flags
};

// Uses the latest run when `run_id` is empty.
RunReport build_report(const Store& store, std::optional<std::int64_t> run_id = std::nullopt);

enum class ReportFormat { kStructured, kTable, kCsv };

std::optional<ReportFormat> parse_report_format(std::string_view text);

enum class CsvTable { kStats, kFlags };

nlohmann::json to_json(const RunReport& report);

// Output is a pure function of the report: no clocks, no environment.
void export_report(const RunReport& report, ReportFormat format, std::ostream& out,
                   CsvTable csv_table = CsvTable::kStats);

}  // namespace bacscan
