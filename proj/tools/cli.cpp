#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bacscan/config.hpp"
#include "bacscan/error.hpp"
#include "bacscan/har.hpp"
#include "bacscan/scan.hpp"
#include "bacscan/service.hpp"
#include "bacscan/sim.hpp"
#include "bacscan/stats.hpp"
#include "bacscan/store.hpp"
#include "bacscan/text.hpp"

namespace bacscan::cli {

using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

void wait_for_signal() {
  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

// Raised for mistakes the user can fix by changing the command line.
struct UsageError : Error {
  using Error::Error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << contents;
  if (!out.flush()) throw Error("cannot write " + path);
}

struct Globals {
  std::string config_path;
  std::string store_path;
  std::string output = "text";
};

Config load(const Globals& g) {
  Config config = g.config_path.empty() ? Config{} : load_config(g.config_path);
  apply_env_overrides(config, process_env);
  if (!g.store_path.empty()) config.store = g.store_path;
  return config;
}

bool structured(const Globals& g) { return g.output == "structured"; }

ScopePolicy resolve_scope(const Config& config, const std::vector<std::string>& hosts,
                          const std::vector<std::string>& denied, std::optional<std::size_t> max_requests) {
  ScopePolicy scope = config.scope;
  if (!hosts.empty()) scope.allowed_hosts = hosts;
  if (!denied.empty()) scope.denied_path_prefixes = denied;
  if (max_requests) scope.max_requests = *max_requests;
  if (scope.allowed_hosts.empty()) {
    throw UsageError("an explicit scope is required: pass --scope HOST[:PORT] or set scope.allowed_hosts");
  }
  scope.validate();
  return scope;
}

Header parse_header_arg(const std::string& arg) {
  const auto colon = arg.find(':');
  if (colon == std::string::npos || colon == 0) throw UsageError("header must look like 'Name: value': " + arg);
  return {std::string(text::trim(arg.substr(0, colon))), std::string(text::trim(arg.substr(colon + 1)))};
}

void print_lines(std::ostream& out, const std::vector<std::string>& lines, const char* prefix) {
  for (const auto& l : lines) out << prefix << l << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Broken access control scanner for HTTP APIs", "bacscan"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--store", g.store_path, "SQLite store path (default bacscan.db)");
  app.add_option("--output", g.output, "Output style for summaries")
      ->check(CLI::IsMember({"structured", "text"}));

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load a HAR capture into the store");
  std::string har_path;
  std::vector<std::string> scope_hosts, denied_paths;
  bool no_dedupe = false;
  ingest->add_option("har", har_path, "HAR file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--scope,--scope-host", scope_hosts, "Allowed host[:port] or *.suffix (repeatable)");
  ingest->add_option("--deny-path", denied_paths, "Path prefix to leave alone (repeatable)");
  ingest->add_flag("--no-dedupe", no_dedupe, "Keep duplicate requests");

  // scan
  auto* scan = app.add_subcommand("scan", "Mutate stored requests and classify the responses");
  std::vector<std::string> iam_names;
  std::vector<std::int64_t> base_ids;
  std::optional<double> rate, threshold;
  std::optional<std::size_t> concurrency, budget, max_requests, timeout_ms;
  bool refresh = false, dry_run = false;
  scan->add_option("--scope,--scope-host", scope_hosts, "Allowed host[:port] or *.suffix (repeatable)");
  scan->add_option("--deny-path", denied_paths, "Path prefix to leave alone (repeatable)");
  scan->add_option("--iam", iam_names, "Run only these IAMs (repeatable)");
  scan->add_option("--base", base_ids, "Scan only these stored request ids (repeatable)");
  scan->add_option("--rate", rate, "Requests per second per host")->check(CLI::PositiveNumber);
  scan->add_option("--concurrency", concurrency, "Requests in flight")->check(CLI::PositiveNumber);
  scan->add_option("--timeout-ms", timeout_ms, "Per-request timeout")->check(CLI::PositiveNumber);
  scan->add_option("--threshold", threshold, "Dissimilarity threshold")->check(CLI::Range(0.0, 1.0));
  scan->add_option("--budget", budget, "Mutations per base request (0 keeps all)");
  scan->add_option("--max-requests", max_requests, "Hard cap on requests sent")->check(CLI::PositiveNumber);
  scan->add_flag("--refresh-baseline", refresh, "Fetch baselines live instead of using the capture");
  scan->add_flag("--dry-run", dry_run, "Generate and store mutations without sending");

  // report
  auto* report = app.add_subcommand("report", "Per-IAM statistics for a run");
  std::optional<std::int64_t> run_id;
  std::string format, table = "stats", out_path;
  report->add_option("--run", run_id, "Run id (default: latest)");
  report->add_option("--format", format, "json, table or csv")->check(CLI::IsMember({"json", "structured", "table", "text", "csv"}));
  report->add_option("--table", table, "CSV table")->check(CLI::IsMember({"stats", "flags"}));
  report->add_option("--out", out_path, "Write to a file instead of stdout");

  // flags
  auto* flags = app.add_subcommand("flags", "List flags");
  std::string f_class, f_iam, f_status;
  std::size_t f_limit = 50;
  flags->add_option("--run", run_id, "Run id");
  flags->add_option("--classification", f_class, "PVE, MANUAL_REVIEW or BENIGN");
  flags->add_option("--iam", f_iam, "IAM name");
  flags->add_option("--status", f_status, "untriaged, triaged, confirmed or fppve");
  flags->add_option("--limit", f_limit, "Maximum rows")->check(CLI::PositiveNumber);

  // verdict
  auto* verdict = app.add_subcommand("verdict", "Record a triage verdict on a flag");
  std::int64_t flag_id = 0;
  std::string verdict_text, notes;
  std::vector<int> cwes;
  verdict->add_option("flag", flag_id, "Flag id")->required();
  verdict->add_option("--verdict", verdict_text, "CONFIRMED_VULN or FPPVE")
      ->required()
      ->check(CLI::IsMember({"CONFIRMED_VULN", "FPPVE"}));
  verdict->add_option("--cwe", cwes, "CWE tag (repeatable)");
  verdict->add_option("--notes", notes, "Free text");

  // replay
  auto* replay = app.add_subcommand("replay", "Re-send a flagged mutation, optionally edited");
  std::optional<std::string> r_url, r_method, r_body;
  std::vector<std::string> r_headers;
  replay->add_option("flag", flag_id, "Flag id")->required();
  replay->add_option("--scope", scope_hosts, "Allowed host[:port] (default: the run's scope)");
  replay->add_option("--url", r_url, "Replacement URL");
  replay->add_option("--method", r_method, "Replacement method");
  replay->add_option("--header", r_headers, "Replacement header 'Name: value' (repeatable; replaces all)");
  replay->add_option("--body", r_body, "Replacement body");

  // export / import
  auto* exp = app.add_subcommand("export", "Dump the store");
  std::string exp_kind, exp_dest;
  exp->add_option("kind", exp_kind, "csv or jsonl")->required()->check(CLI::IsMember({"csv", "jsonl"}));
  exp->add_option("dest", exp_dest, "Directory for csv, file or - for jsonl")->required();
  auto* imp = app.add_subcommand("import", "Load a jsonl dump into an empty store");
  std::string imp_path;
  imp->add_option("file", imp_path, "jsonl dump")->required()->check(CLI::ExistingFile);

  // serve-sim
  auto* serve_sim = app.add_subcommand("serve-sim", "Run the vulnerable target simulator");
  std::uint64_t seed = sim::kDefaultSeed;
  std::string bind = "127.0.0.1", manifest_path, fixture_path, canary_origin;
  int port = 0;
  bool allow_remote = false;
  serve_sim->add_option("--seed", seed, "Data seed");
  serve_sim->add_option("--port", port, "Port (0 picks one)")->check(CLI::Range(0, 65535));
  serve_sim->add_option("--bind", bind, "Bind address");
  serve_sim->add_flag("--allow-remote", allow_remote, "Permit a non-loopback bind");
  serve_sim->add_option("--manifest", manifest_path, "Write the ground-truth manifest here");
  serve_sim->add_option("--har", fixture_path, "Write a fixture HAR capture here");
  serve_sim->add_option("--canary-origin", canary_origin, "Out-of-scope origin used in the fixture HAR");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the triage API");
  std::optional<std::string> s_bind, ui_dir;
  std::optional<int> s_port;
  serve->add_option("--bind", s_bind, "Bind address");
  serve->add_option("--port", s_port, "Port (0 picks one)")->check(CLI::Range(0, 65535));
  serve->add_flag("--allow-remote", allow_remote, "Permit a non-loopback bind");
  serve->add_option("--ui-dir", ui_dir, "Static UI assets served at /");
  serve->add_option("--scope", scope_hosts, "Scope for replays (default: each run's scope)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "bacscan 0.3.0\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "bacscan: " << e.what() << "\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << "Run 'bacscan " << (sub == &app ? "" : sub->get_name() + " ") << "--help' for usage.\n";
    return kExitUsage;
  }

  try {
    const Config config = load(g);

    if (*ingest) {
      const ScopePolicy scope = resolve_scope(config, scope_hosts, denied_paths, std::nullopt);
      Store store = Store::open(config.store);
      const IngestSummary s = ingest_har(store, read_file(har_path), scope, config.dedupe && !no_dedupe);
      if (structured(g)) {
        out << json{{"parsed", s.parsed},   {"skipped", s.skipped},     {"deduped", s.deduped},
                    {"excluded", s.excluded}, {"stored_ids", s.stored_ids}, {"warnings", s.warnings}}
                   .dump(2)
            << "\n";
      } else {
        out << "parsed " << s.parsed << ", stored " << s.stored_ids.size() << ", deduped " << s.deduped
            << ", excluded " << s.excluded << ", skipped " << s.skipped << "\n";
        print_lines(err, s.warnings, "warning: ");
      }
      return kExitOk;
    }

    if (*scan) {
      ScanOptions options;
      options.scope = resolve_scope(config, scope_hosts, denied_paths, max_requests);
      options.dispatch = config.dispatch;
      if (rate) options.dispatch.per_host_rate = *rate;
      if (concurrency) options.dispatch.max_in_flight = *concurrency;
      if (timeout_ms) options.dispatch.timeout = std::chrono::milliseconds(*timeout_ms);
      options.detector = config.detector;
      if (threshold) options.detector.dissimilarity_threshold = *threshold;
      options.iams = config.iams;
      if (!iam_names.empty()) {
        for (const auto& name : iam_names) {
          const bool known = std::any_of(options.iams.begin(), options.iams.end(),
                                         [&](const IamDescriptor& d) { return d.name == name; });
          if (!known) throw UsageError("unknown IAM '" + name + "'");
        }
        for (auto& d : options.iams) {
          d.enabled = std::find(iam_names.begin(), iam_names.end(), d.name) != iam_names.end();
        }
      }
      options.budget_per_request = budget.value_or(config.budget_per_request);
      options.refresh_baseline = refresh;
      options.dry_run = dry_run;
      options.base_ids = base_ids;

      Store store = Store::open(config.store);
      std::size_t last_decile = 0;
      const auto progress = [&](const ScanProgress& p) {
        if (structured(g) || p.total == 0) return;
        const std::size_t decile = p.done * 10 / p.total;
        if (decile != last_decile) {
          last_decile = decile;
          err << "progress " << p.done << "/" << p.total << "\n";
        }
      };
      const ScanSummary s = run_scan(store, options, make_http_transport(), progress);
      if (s.counts.bases == 0) err << "warning: no stored requests to scan; run 'bacscan ingest' first\n";
      if (structured(g)) {
        out << json{{"run_id", s.run_id},
                    {"bases", s.counts.bases},
                    {"mutations", s.counts.mutations},
                    {"sent", s.counts.sent},
                    {"transport_failures", s.counts.transport_failures},
                    {"pve", s.pve},
                    {"manual_review", s.manual_review},
                    {"benign", s.benign},
                    {"out_of_scope", s.out_of_scope},
                    {"warnings", s.warnings}}
                   .dump(2)
            << "\n";
      } else {
        out << "run " << s.run_id << ": " << s.counts.sent << " sent, " << s.pve << " PVE, " << s.manual_review
            << " MANUAL_REVIEW, " << s.benign << " BENIGN";
        if (s.out_of_scope) out << ", " << s.out_of_scope << " refused by scope";
        out << "\n";
        print_lines(err, s.warnings, "warning: ");
      }
      return kExitOk;
    }

    if (*report) {
      Store store = Store::open(config.store);
      const RunReport r = build_report(store, run_id);
      const std::string chosen = format.empty() ? (structured(g) ? "json" : "table") : format;
      const ReportFormat fmt = *parse_report_format(chosen);
      const CsvTable csv_table = table == "flags" ? CsvTable::kFlags : CsvTable::kStats;
      if (out_path.empty()) {
        export_report(r, fmt, out, csv_table);
      } else {
        std::ostringstream buffer;
        export_report(r, fmt, buffer, csv_table);
        write_file(out_path, buffer.str());
      }
      return kExitOk;
    }

    if (*flags) {
      Store store = Store::open(config.store);
      FlagFilter filter;
      filter.run_id = run_id;
      if (!f_class.empty()) {
        filter.classification = parse_classification(f_class);
        if (!filter.classification) throw UsageError("unknown classification '" + f_class + "'");
      }
      if (!f_iam.empty()) filter.iam_name = f_iam;
      if (!f_status.empty()) {
        filter.verdict_status = parse_verdict_status(f_status);
        if (!filter.verdict_status) throw UsageError("unknown status '" + f_status + "'");
      }
      filter.limit = f_limit;
      const auto rows = store.query_flags(filter);
      json items = json::array();
      for (const auto& r : rows) {
        items.push_back({{"flag_id", r.flag.flag_id},
                         {"classification", to_string(r.flag.classification)},
                         {"iam_name", r.mutated.iam_name},
                         {"dissimilarity", r.flag.dissimilarity},
                         {"url", r.mutated.request.url},
                         {"verdict", r.verdict ? json(to_string(r.verdict->verdict)) : json(nullptr)}});
      }
      if (structured(g)) {
        out << items.dump(2) << "\n";
      } else {
        for (const auto& i : items) {
          out << i["flag_id"].get<std::int64_t>() << "\t" << i["classification"].get<std::string>() << "\t"
              << text::format_fixed(i["dissimilarity"].get<double>(), 4) << "\t"
              << i["iam_name"].get<std::string>() << "\t" << i["url"].get<std::string>() << "\n";
        }
      }
      return kExitOk;
    }

    if (*verdict) {
      Store store = Store::open(config.store);
      TriageVerdict v;
      v.flag_id = flag_id;
      v.verdict = *parse_verdict(verdict_text);
      v.cwe_tags = cwes;
      v.notes = notes;
      v.decided_at = now_ms();
      store.record_verdict(v);
      if (structured(g)) {
        out << json{{"flag_id", flag_id}, {"verdict", verdict_text}, {"cwe_tags", cwes}}.dump(2) << "\n";
      } else {
        out << "flag " << flag_id << " marked " << verdict_text << "\n";
      }
      return kExitOk;
    }

    if (*replay) {
      Store store = Store::open(config.store);
      const PveFlag flag = store.flag(flag_id);
      std::optional<ScanRun> run;
      if (flag.run_id) run = store.run(*flag.run_id);
      ScopePolicy scope = config.scope;
      if (!scope_hosts.empty()) {
        scope.allowed_hosts = scope_hosts;
      } else if (scope.allowed_hosts.empty() && run && run->policy.contains("scope")) {
        scope = scope_from_json(run->policy["scope"]);
      }
      if (scope.allowed_hosts.empty()) throw UsageError("an explicit scope is required for replay");
      ReplayEdits edits;
      edits.url = r_url;
      edits.method = r_method;
      edits.body = r_body;
      if (!r_headers.empty()) {
        Headers headers;
        for (const auto& h : r_headers) headers.push_back(parse_header_arg(h));
        edits.headers = headers;
      }
      Dispatcher dispatcher(scope, config.dispatch);
      DetectorConfig detector_config = config.detector;
      if (run && run->policy.contains("detector")) {
        detector_config.dissimilarity_threshold =
            run->policy["detector"].value("dissimilarity_threshold", detector_config.dissimilarity_threshold);
      }
      const ReplayResult r = replay_flag(store, flag_id, edits, dispatcher, Detector(detector_config));
      if (structured(g)) {
        out << json{{"flag_id", flag_id},
                    {"exchange_id", r.exchange_id},
                    {"status", r.response.status},
                    {"transport_error", r.response.transport_error ? json(*r.response.transport_error) : json(nullptr)},
                    {"classification", to_string(r.classification.classification)},
                    {"dissimilarity", r.classification.dissimilarity},
                    {"reason", r.classification.reason}}
                   .dump(2)
            << "\n";
      } else {
        out << "replay " << r.exchange_id << ": status " << r.response.status << ", "
            << to_string(r.classification.classification) << " (" << r.classification.reason << ")\n";
      }
      return kExitOk;
    }

    if (*exp) {
      Store store = Store::open(config.store);
      if (exp_kind == "csv") {
        store.export_csv(exp_dest);
      } else if (exp_dest == "-") {
        store.export_jsonl(out);
      } else {
        std::ofstream file(exp_dest, std::ios::binary);
        if (!file) throw Error("cannot write " + exp_dest);
        store.export_jsonl(file);
      }
      return kExitOk;
    }

    if (*imp) {
      Store store = Store::open(config.store);
      std::ifstream file(imp_path, std::ios::binary);
      store.import_jsonl(file);
      return kExitOk;
    }

    if (*serve_sim) {
      auto simulator = std::make_shared<sim::TargetSimulator>(seed);
      sim::Server server(simulator, {bind, port, allow_remote});
      const std::string origin = server.origin();
      if (!manifest_path.empty()) write_file(manifest_path, sim::manifest(*simulator, origin).dump(2) + "\n");
      if (!fixture_path.empty()) {
        const std::string canary =
            canary_origin.empty() ? "http://localhost:" + std::to_string(server.port()) : canary_origin;
        write_file(fixture_path, sim::fixture_har(*simulator, origin, canary));
      }
      if (structured(g)) {
        out << json{{"origin", origin}, {"port", server.port()}, {"seed", seed}}.dump() << std::endl;
      } else {
        out << "simulator listening on " << origin << " (seed " << seed << ")" << std::endl;
      }
      wait_for_signal();
      server.stop();
      return kExitOk;
    }

    if (*serve) {
      ServiceOptions options;
      if (!scope_hosts.empty() || !config.scope.allowed_hosts.empty()) {
        ScopePolicy scope = config.scope;
        if (!scope_hosts.empty()) scope.allowed_hosts = scope_hosts;
        options.scope = scope;
      }
      options.dispatch = config.dispatch;
      options.detector = config.detector;
      Store store = Store::open(config.store);
      auto service = std::make_shared<TriageService>(store, options);
      ServeOptions serve_options;
      serve_options.bind = s_bind.value_or(config.service.bind);
      serve_options.port = s_port.value_or(config.service.port);
      serve_options.allow_remote = allow_remote || config.service.allow_remote;
      serve_options.ui_dir = ui_dir.value_or(config.service.ui_dir);
      ServiceServer server(service, serve_options);
      if (structured(g)) {
        out << json{{"origin", server.origin()}, {"port", server.port()}}.dump() << std::endl;
      } else {
        out << "triage API listening on " << server.origin() << "/api/v1/" << std::endl;
      }
      wait_for_signal();
      server.stop();
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "bacscan: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "bacscan: config: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "bacscan: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "bacscan: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace bacscan::cli
