#include "bacscan/stats.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include "bacscan/error.hpp"
#include "bacscan/text.hpp"

namespace bacscan {

using nlohmann::json;

namespace {

double run_threshold(const ScanRun& run) {
  const json* detector = run.policy.contains("detector") ? &run.policy["detector"] : nullptr;
  if (detector && detector->contains("dissimilarity_threshold")) {
    return (*detector)["dissimilarity_threshold"].get<double>();
  }
  return 0.9;
}

std::vector<std::string> run_iam_names(const ScanRun& run) {
  std::vector<std::string> names;
  if (!run.policy.contains("iams")) return names;
  for (const auto& iam : run.policy["iams"]) {
    if (iam.value("enabled", true)) names.push_back(iam.at("name").get<std::string>());
  }
  return names;
}

std::size_t row_index(std::vector<IamStats>& rows, const std::string& name) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].iam_name == name) return i;
  }
  rows.push_back({});
  rows.back().iam_name = name;
  return rows.size() - 1;
}

}  // namespace

std::vector<IamStats> per_iam_stats(const Store& store, std::int64_t run_id) {
  const ScanRun run = store.run(run_id);
  const double threshold = run_threshold(run);

  std::vector<IamStats> rows;
  for (const auto& name : run_iam_names(run)) row_index(rows, name);

  std::map<std::string, std::size_t> successes;
  std::size_t sent = 0;
  for (const auto& ex : store.exchanges_of_kind(ExchangeKind::kMutated, run_id)) {
    if (!ex.response) continue;
    IamStats& row = rows[row_index(rows, ex.iam_name)];
    ++row.total_sent;
    ++sent;
    if (ex.response->status >= 200 && ex.response->status < 300) ++successes[ex.iam_name];
  }
  if (sent == 0) return {};

  FlagFilter filter;
  filter.run_id = run_id;
  for (const auto& rec : store.query_flags(filter)) {
    IamStats& row = rows[row_index(rows, rec.mutated.iam_name)];
    if (rec.flag.dissimilarity >= threshold) ++row.dissimilar_count;
    if (rec.flag.classification == Classification::kPve) ++row.pve_count;
    if (rec.flag.classification == Classification::kManualReview) ++row.manual_review_count;
    ++(rec.flag.code_leak ? row.code_leak_true : row.code_leak_false);
    if (rec.verdict) {
      ++(rec.verdict->verdict == Verdict::kConfirmedVuln ? row.confirmed_count : row.fppve_count);
    }
  }
  for (auto& row : rows) {
    if (row.total_sent > 0) {
      row.success_rate = static_cast<double>(successes[row.iam_name]) / static_cast<double>(row.total_sent);
    }
  }
  return rows;
}

RunReport build_report(const Store& store, std::optional<std::int64_t> run_id) {
  if (!run_id) run_id = store.latest_run_id();
  if (!run_id) throw NotFoundError("the store holds no scan runs");
  RunReport report;
  report.run = store.run(*run_id);
  report.iams = per_iam_stats(store, *run_id);

  FlagFilter filter;
  filter.run_id = *run_id;
  for (const auto& rec : store.query_flags(filter)) {
    FlagSummary s;
    s.flag_id = rec.flag.flag_id;
    s.mutated_id = rec.flag.mutated_id;
    s.iam_name = rec.mutated.iam_name;
    s.target = rec.mutated.target ? std::string(to_string(*rec.mutated.target)) : std::string{};
    s.modification = rec.mutated.modification;
    s.classification = rec.flag.classification;
    s.dissimilarity = rec.flag.dissimilarity;
    s.regex_hits = rec.flag.regex_hits.size();
    s.code_leak = rec.flag.code_leak;
    if (rec.verdict) s.verdict = rec.verdict->verdict;
    report.flags.push_back(std::move(s));

    switch (rec.flag.classification) {
      case Classification::kPve: ++report.pve_total; break;
      case Classification::kManualReview: ++report.manual_review_total; break;
      case Classification::kBenign: ++report.benign_total; break;
    }
    if (rec.verdict) {
      ++report.triaged;
      ++(rec.verdict->verdict == Verdict::kConfirmedVuln ? report.confirmed : report.fppve);
    }
  }
  if (report.pve_total > 0) {
    report.confirmed_ratio = static_cast<double>(report.confirmed) / static_cast<double>(report.pve_total);
  }
  if (report.triaged > 0) {
    report.fppve_ratio = static_cast<double>(report.fppve) / static_cast<double>(report.triaged);
  }
  return report;
}

std::vector<std::pair<std::string, std::size_t>> code_leak_histogram(const Store& store, std::int64_t run_id) {
  std::vector<std::pair<std::string, std::size_t>> out;
  const ScanRun run = store.run(run_id);
  for (const auto& name : run_iam_names(run)) out.emplace_back(name, 0);
  for (const auto& rec : store.query_flags({.run_id = run_id})) {
    if (!rec.flag.code_leak) continue;
    const auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == rec.mutated.iam_name; });
    if (it != out.end()) ++it->second;
  }
  return out;
}

std::optional<ReportFormat> parse_report_format(std::string_view text) {
  if (text == "structured" || text == "json") return ReportFormat::kStructured;
  if (text == "table" || text == "text") return ReportFormat::kTable;
  if (text == "csv") return ReportFormat::kCsv;
  return std::nullopt;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string optional_ratio(const std::optional<double>& v) {
  return v ? text::format_fixed(*v, 3) : std::string("n/a");
}

std::string pad(std::string s, std::size_t width, bool right = false) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return right ? fill + s : s + fill;
}

void write_table(const RunReport& r, std::ostream& out) {
  out << "run " << r.run.run_id << ": " << r.run.counts.bases << " base requests, "
      << r.run.counts.mutations << " mutations, " << r.run.counts.sent << " sent, "
      << r.run.counts.transport_failures << " transport failures\n\n";
  const std::vector<std::pair<std::string, std::size_t>> columns = {
      {"iam", 20}, {"sent", 6}, {"2xx", 7}, {"dissim", 7}, {"pve", 5},
      {"manual", 7}, {"leak", 5}, {"noleak", 7}, {"conf", 5}, {"fppve", 6}};
  for (std::size_t c = 0; c < columns.size(); ++c) {
    out << pad(columns[c].first, columns[c].second, c > 0) << (c + 1 < columns.size() ? "  " : "\n");
  }
  for (const auto& row : r.iams) {
    const std::vector<std::string> cells = {
        row.iam_name,
        std::to_string(row.total_sent),
        text::format_fixed(row.success_rate * 100.0, 1) + "%",
        std::to_string(row.dissimilar_count),
        std::to_string(row.pve_count),
        std::to_string(row.manual_review_count),
        std::to_string(row.code_leak_true),
        std::to_string(row.code_leak_false),
        std::to_string(row.confirmed_count),
        std::to_string(row.fppve_count)};
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << pad(cells[c], columns[c].second, c > 0) << (c + 1 < cells.size() ? "  " : "\n");
    }
  }
  if (r.iams.empty()) out << "(nothing was sent in this run)\n";
  out << "\nPVE " << r.pve_total << ", manual review " << r.manual_review_total << ", benign "
      << r.benign_total << "\n";
  out << "triaged " << r.triaged << ": confirmed " << r.confirmed << ", FPPVE " << r.fppve << "\n";
  out << "confirmed/PVE " << optional_ratio(r.confirmed_ratio) << ", FPPVE/triaged "
      << optional_ratio(r.fppve_ratio) << "\n";
}

void write_csv(const RunReport& r, CsvTable table, std::ostream& out) {
  if (table == CsvTable::kStats) {
    out << text::csv_row({"iam_name", "total_sent", "success_rate", "dissimilar_count", "pve_count",
                          "manual_review_count", "code_leak_true", "code_leak_false",
                          "confirmed_count", "fppve_count"});
    for (const auto& row : r.iams) {
      out << text::csv_row({row.iam_name, std::to_string(row.total_sent),
                            text::format_fixed(row.success_rate, 6), std::to_string(row.dissimilar_count),
                            std::to_string(row.pve_count), std::to_string(row.manual_review_count),
                            std::to_string(row.code_leak_true), std::to_string(row.code_leak_false),
                            std::to_string(row.confirmed_count), std::to_string(row.fppve_count)});
    }
    return;
  }
  out << text::csv_row({"flag_id", "mutated_id", "iam_name", "target", "modification", "classification",
                        "dissimilarity", "regex_hits", "code_leak", "verdict"});
  for (const auto& f : r.flags) {
    out << text::csv_row({std::to_string(f.flag_id), std::to_string(f.mutated_id), f.iam_name, f.target,
                          f.modification, std::string(to_string(f.classification)),
                          text::format_fixed(f.dissimilarity, 6), std::to_string(f.regex_hits),
                          f.code_leak ? "true" : "false",
                          f.verdict ? std::string(to_string(*f.verdict)) : std::string{}});
  }
}

}  // namespace

json to_json(const RunReport& r) {
  json iams = json::array();
  for (const auto& row : r.iams) {
    iams.push_back({{"iam_name", row.iam_name},
                    {"total_sent", row.total_sent},
                    {"success_rate", row.success_rate},
                    {"dissimilar_count", row.dissimilar_count},
                    {"pve_count", row.pve_count},
                    {"manual_review_count", row.manual_review_count},
                    {"code_leak_histogram", {{"true", row.code_leak_true}, {"false", row.code_leak_false}}},
                    {"confirmed_count", row.confirmed_count},
                    {"fppve_count", row.fppve_count}});
  }
  json flags = json::array();
  for (const auto& f : r.flags) {
    flags.push_back({{"flag_id", f.flag_id},
                     {"mutated_id", f.mutated_id},
                     {"iam_name", f.iam_name},
                     {"target", f.target},
                     {"modification", f.modification},
                     {"classification", to_string(f.classification)},
                     {"dissimilarity", f.dissimilarity},
                     {"regex_hits", f.regex_hits},
                     {"code_leak", f.code_leak},
                     {"verdict", f.verdict ? json(to_string(*f.verdict)) : json(nullptr)}});
  }
  return {{"schema", "bacscan.report"},
          {"version", 1},
          {"run",
           {{"run_id", r.run.run_id},
            {"started_at_ms", to_epoch_ms(r.run.started_at)},
            {"ended_at_ms", r.run.ended_at ? json(to_epoch_ms(*r.run.ended_at)) : json(nullptr)},
            {"counts",
             {{"bases", r.run.counts.bases},
              {"mutations", r.run.counts.mutations},
              {"sent", r.run.counts.sent},
              {"transport_failures", r.run.counts.transport_failures}}},
            {"policy", r.run.policy}}},
          {"iams", iams},
          {"totals",
           {{"pve", r.pve_total},
            {"manual_review", r.manual_review_total},
            {"benign", r.benign_total},
            {"triaged", r.triaged},
            {"confirmed", r.confirmed},
            {"fppve", r.fppve},
            {"confirmed_ratio", optional_number(r.confirmed_ratio)},
            {"fppve_ratio", optional_number(r.fppve_ratio)}}},
          {"flags", flags}};
}

void export_report(const RunReport& report, ReportFormat format, std::ostream& out, CsvTable csv_table) {
  switch (format) {
    case ReportFormat::kStructured: out << to_json(report).dump(2) << "\n"; break;
    case ReportFormat::kTable: write_table(report, out); break;
    case ReportFormat::kCsv: write_csv(report, csv_table, out); break;
  }
}

}  // namespace bacscan
