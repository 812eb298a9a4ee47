// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bacscan/detector.hpp"
#include "bacscan/dispatcher.hpp"
#include "bacscan/error.hpp"
#include "bacscan/iam.hpp"
#include "bacscan/levenshtein.hpp"
#include "bacscan/sim.hpp"
#include "bacscan/stats.hpp"
#include "bacscan/store.hpp"
#include "bacscan/text.hpp"
#include "bacscan/url.hpp"
#include "cli.hpp"
#include "support/fixtures.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

using namespace bacscan;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome fail(std::string detail) { return {false, std::move(detail)}; }

// Every simulator this binary starts, so the safety check covers all of them.
struct AuditRecord {
  std::string label;
  std::string host;  // host:port the scans were scoped to
  std::vector<sim::AuditEntry> entries;
};
std::vector<AuditRecord> g_audits;

int cli_run(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o;
  std::ostringstream e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::cerr << "bacscan " << args[2] << " exited " << code << ": " << e.str() << "\n";
  return code;
}

// The full ingest -> scan -> report pipeline against the default fixture.
struct Pipeline {
  std::filesystem::path dir;
  std::filesystem::path store_path;
  std::string host;
  std::int64_t run_id = 0;
  double seconds = 0;
  bool ok = false;
  std::string error;
  std::vector<sim::PlantedVuln> truth;
};

Pipeline run_pipeline() {
  Pipeline p;
  p.dir = std::filesystem::temp_directory_path() / "bacscan_acceptance";
  std::filesystem::remove_all(p.dir);
  std::filesystem::create_directories(p.dir);
  p.store_path = p.dir / "scan.db";

  sim::Server server(std::make_shared<sim::TargetSimulator>());
  p.host = "127.0.0.1:" + std::to_string(server.port());
  p.truth = server.simulator().ground_truth();
  const auto har = p.dir / "fixture.har";
  {
    std::ofstream out(har);
    out << sim::fixture_har(server.simulator(), server.origin(), "http://localhost:" + std::to_string(server.port()));
  }

  const auto start = std::chrono::steady_clock::now();
  const std::string store = p.store_path.string();
  std::string report;
  if (cli_run({"--store", store, "ingest", har.string(), "--scope", p.host}) != 0) {
    p.error = "ingest failed";
  } else if (cli_run({"--store", store, "scan", "--scope", p.host}) != 0) {
    p.error = "scan failed";
  } else if (cli_run({"--store", store, "report", "--format", "json"}, &report) != 0) {
    p.error = "report failed";
  } else {
    try {
      p.run_id = json::parse(report).at("run").at("run_id").get<std::int64_t>();
      p.ok = true;
    } catch (const std::exception& e) {
      p.error = std::string("unreadable report: ") + e.what();
    }
  }
  p.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  server.stop();
  g_audits.push_back({"pipeline", p.host, server.simulator().audit()});
  return p;
}

std::string path_of(const std::string& url) {
  const auto u = Url::parse(url);
  return u ? u->path : std::string{};
}

Outcome planted_vuln_recall(const Pipeline& p) {
  if (!p.ok) return fail(p.error);
  const Store store = Store::open(p.store_path);
  const auto flags = store.query_flags({.run_id = p.run_id});
  std::size_t found = 0;
  std::size_t planted = 0;
  std::vector<std::string> missed;
  bool decoy_pve = false;
  for (const auto& v : p.truth) {
    const auto hit = [&](const FlagRecord& r, bool pve_only) {
      const bool kind = r.flag.classification == Classification::kPve ||
                        (!pve_only && r.flag.classification == Classification::kManualReview);
      return kind && path_of(r.mutated.request.url).rfind(v.path_prefix, 0) == 0;
    };
    if (v.cwe == 0) {
      decoy_pve = std::any_of(flags.begin(), flags.end(), [&](const auto& r) { return hit(r, true); });
      continue;
    }
    ++planted;
    if (std::any_of(flags.begin(), flags.end(), [&](const auto& r) { return hit(r, false); })) {
      ++found;
    } else {
      missed.push_back(v.vuln_id);
    }
  }
  std::ostringstream d;
  d << found << "/" << planted << " planted vulns flagged, decoy " << (decoy_pve ? "PVE" : "not PVE") << ", "
    << static_cast<int>(p.seconds * 10) / 10.0 << " s";
  for (const auto& m : missed) d << ", missed " << m;
  return {planted == 5 && found == planted && decoy_pve && p.seconds < 60.0, d.str()};
}

Outcome levenshtein_equivalence() {
  gen::Rng rng(0x5EED);
  constexpr int kPairs = 20000;
  for (int i = 0; i < kPairs; ++i) {
    const auto a = rng.coin() ? gen::code_points(rng, 20) : oracle::decode(gen::ascii(rng, "abcd", 20));
    const auto b = rng.coin() ? gen::code_points(rng, 20) : oracle::decode(gen::ascii(rng, "abcd", 20));
    const auto expected = oracle::levenshtein(a, b);
    if (edit_distance(a, b) != expected) return fail("mismatch on pair " + std::to_string(i));
  }
  constexpr int kTriples = 5000;
  for (int i = 0; i < kTriples; ++i) {
    const auto a = gen::code_points(rng, 20);
    const auto b = gen::code_points(rng, 20);
    const auto c = gen::code_points(rng, 20);
    const auto ab = edit_distance(a, b);
    const auto bc = edit_distance(b, c);
    const auto ac = edit_distance(a, c);
    if (edit_distance(a, a) != 0) return fail("identity fails on triple " + std::to_string(i));
    if ((ab == 0) != (a == b)) return fail("zero distance between distinct strings on triple " + std::to_string(i));
    if (ab != edit_distance(b, a)) return fail("symmetry fails on triple " + std::to_string(i));
    if (ac > ab + bc) return fail("triangle inequality fails on triple " + std::to_string(i));
  }
  return {true, std::to_string(kPairs) + " pairs equal the oracle; metric laws hold on " + std::to_string(kTriples) +
                    " triples"};
}

Outcome threshold_semantics() {
  DetectorConfig config;
  config.dissimilarity_threshold = 0.90;
  const Detector detector(config);
  struct Case {
    std::size_t distance;
    bool ssn;
    Classification expected;
  };
  const Case cases[] = {{89, true, Classification::kBenign},
                        {90, true, Classification::kPve},
                        {91, true, Classification::kPve},
                        {91, false, Classification::kBenign}};
  std::ostringstream d;
  bool ok = true;
  for (const auto& c : cases) {
    const auto [baseline, mutated] = fixtures::pair_at_distance(c.distance, c.ssn);
    const PveFlag flag = detector.classify(baseline, mutated);
    const bool good = flag.classification == c.expected &&
                      flag.dissimilarity == static_cast<double>(c.distance) / 100.0;
    ok = ok && good;
    d << (d.tellp() > 0 ? ", " : "") << "0." << c.distance << (c.ssn ? "+ssn" : "") << "="
      << to_string(flag.classification);
  }
  return {ok, d.str()};
}

Outcome carve_outs() {
  const Detector detector;
  const ResponseRecord baseline{200, "application/json", R"({"id":13495})", 1, std::nullopt};
  std::string long_body = "{\"ssn\":\"123-45-6789\",\"pad\":\"";
  long_body += std::string(100001 - long_body.size() - 2, 'x');
  long_body += "\"}";
  const PveFlag long_flag = detector.classify(baseline, {200, "application/json", long_body, 1, std::nullopt});
  const PveFlag html_flag = detector.classify(
      baseline, {200, "text/html", "<html><body>ssn 123-45-6789 for user 13494</body></html>", 1, std::nullopt});

  const sim::TargetSimulator s;
  const auto leak = [&](const std::string& target, Headers headers = {}) {
    const auto r = s.respond({"GET", target, std::move(headers), "", "sim"});
    return detect_code_leak({r.status, r.content_type, r.body, 1, std::nullopt});
  };
  const Headers auth = {{"Authorization", s.tester_token()}};
  bool static_ok = true;
  for (const char* t : {"/static/app.html", "/static/app.css", "/static/app.js"}) static_ok = static_ok && leak(t);
  bool data_ok = true;
  for (const auto& [t, h] : std::vector<std::pair<std::string, Headers>>{
           {"/users/get-info/?user=13494", {}},
           {"/api/orders/1001", auth},
           {"/api/account/settings", auth},
           {"/locations/nearby?lat=40.7&lon=-74.0", {}}}) {
    data_ok = data_ok && !leak(t, h);
  }
  std::ostringstream d;
  d << "100001 chars=" << to_string(long_flag.classification) << " (" << long_body.size()
    << " bytes), html=" << to_string(html_flag.classification) << ", code leak on /static "
    << (static_ok ? "true" : "NOT true") << ", on data " << (data_ok ? "false" : "NOT false");
  return {long_body.size() == 100001 && long_flag.classification == Classification::kManualReview &&
              html_flag.classification == Classification::kManualReview && static_ok && data_ok,
          d.str()};
}

Headers without_content_length(Headers h) {
  std::erase_if(h, [](const Header& x) { return text::iequals(x.name, "Content-Length"); });
  return h;
}

Outcome iam_contracts() {
  BaseRequest case1;
  case1.request_id = 1;
  case1.url = "https://example-site/users/get-info/?user=13495";
  case1.headers = {{"Authorization", "Bearer tester"}};
  std::vector<std::string> urls;
  for (const auto& m : iterate_identifiers(case1, 1)) urls.push_back(m.request.url);
  const std::vector<std::string> expected = {"https://example-site/users/get-info/?user=13494",
                                             "https://example-site/users/get-info/?user=13496"};
  if (urls != expected) return fail("iterate_identifiers emitted " + std::to_string(urls.size()) + " unexpected variants");

  gen::Rng rng(0xA11CE);
  const auto descriptors = IamRegistry::builtin().default_descriptors();
  constexpr int kBases = 500;
  std::size_t mutations = 0;
  for (int i = 0; i < kBases; ++i) {
    const BaseRequest base = gen::base_request(rng);
    const BaseRequest copy = base;
    const auto first = generate_all(base, descriptors);
    if (!(base == copy)) return fail("generate_all modified its input");
    if (first != generate_all(base, descriptors)) return fail("generate_all is not deterministic on " + base.url);
    for (const auto& m : first) {
      ++mutations;
      const auto& r = m.request;
      bool local = r != base && m.base_id == base.request_id;
      switch (m.target) {
        case MutationTarget::kUrl:
          local = local && r.method == base.method && r.headers == base.headers && r.body == base.body;
          break;
        case MutationTarget::kHeaders:
          local = local && r.url == base.url && r.method == base.method && r.body == base.body;
          break;
        case MutationTarget::kBody:
          local = local && r.url == base.url && r.method == base.method &&
                  without_content_length(r.headers) == without_content_length(base.headers);
          break;
      }
      if (!local) return fail("locality violated by '" + m.modification + "' on " + base.url);
    }
  }
  return {true, "case 1 yields 13494/13496; " + std::to_string(mutations) + " mutations over " +
                    std::to_string(kBases) + " random bases are pure, deterministic and local"};
}

bool targets_url(const std::string& iam) {
  for (const auto& d : IamRegistry::builtin().default_descriptors()) {
    if (d.name == iam) {
      return std::find(d.targets.begin(), d.targets.end(), MutationTarget::kUrl) != d.targets.end();
    }
  }
  return false;
}

Outcome ordinal_stats(const Pipeline& p) {
  if (!p.ok) return fail(p.error);
  const Store store = Store::open(p.store_path);
  auto rows = per_iam_stats(store, p.run_id);
  std::stable_sort(rows.begin(), rows.end(), [](const IamStats& a, const IamStats& b) { return a.pve_count > b.pve_count; });
  std::size_t url_iams = 0;
  std::size_t min_url = SIZE_MAX;
  std::size_t max_other = 0;
  std::ostringstream d;
  for (const auto& r : rows) {
    const bool url = targets_url(r.iam_name);
    if (url) {
      ++url_iams;
      min_url = std::min(min_url, r.pve_count);
    } else {
      max_other = std::max(max_other, r.pve_count);
    }
    d << (d.tellp() > 0 ? ", " : "") << r.iam_name << "=" << r.pve_count;
  }
  bool ranked_first = url_iams > 0;
  for (std::size_t i = 0; i < rows.size(); ++i) ranked_first = ranked_first && (targets_url(rows[i].iam_name) == (i < url_iams));
  return {ranked_first && min_url > max_other, d.str()};
}

Outcome safety(const Pipeline& p) {
  // A dispatcher scoped like the pipeline must refuse the canary before
  // anything reaches the simulator.
  sim::Server server(std::make_shared<sim::TargetSimulator>());
  const std::string host = "127.0.0.1:" + std::to_string(server.port());
  ScopePolicy scope;
  scope.allowed_hosts = {host};
  Dispatcher dispatcher(scope, {});
  BaseRequest canary;
  canary.url = "http://localhost:" + std::to_string(server.port()) + "/__canary/users/get-info/?user=13495";
  bool refused = false;
  try {
    dispatcher.send(canary);
  } catch (const ScopeRefusedError&) {
    refused = true;
  }
  server.stop();
  g_audits.push_back({"refusal", host, server.simulator().audit()});
  if (!refused) return fail("dispatcher sent a canary request");

  std::size_t total = 0;
  double worst = -1e9;
  for (const auto& a : g_audits) {
    for (const auto& e : a.entries) {
      ++total;
      if (e.target.find("__canary") != std::string::npos || e.host != a.host) {
        return fail(a.label + " audit holds an out-of-scope request: " + e.host + e.target);
      }
    }
    // Token bucket at 5/s with a one-token burst: any window of dt seconds
    // holds at most 1 + 5*dt requests.
    std::vector<std::int64_t> t;
    for (const auto& e : a.entries) t.push_back(e.elapsed_us);
    std::sort(t.begin(), t.end());
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t j = i + 1; j < t.size(); ++j) {
        const double allowed = 5.0 * static_cast<double>(t[j] - t[i]) / 1e6;
        const double used = static_cast<double>(j - i);
        worst = std::max(worst, used - allowed);
        if (used > allowed) {
          return fail(a.label + ": " + std::to_string(j - i + 1) + " requests within " +
                      std::to_string((t[j] - t[i]) / 1000) + " ms");
        }
      }
    }
  }
  if (!p.ok || total == 0) return fail("no audited traffic to analyse");
  std::ostringstream d;
  d << total << " audited requests, none out of scope, canary refused; rate headroom "
    << static_cast<int>(-worst * 1000) / 1000.0 << " tokens at the tightest window";
  return {true, d.str()};
}

Outcome persistence_round_trip() {
  gen::Rng rng(0xD00D);
  Store a = Store::open_in_memory();
  std::vector<std::pair<std::int64_t, Exchange>> inputs;
  constexpr int kExchanges = 50;
  for (int i = 0; i < kExchanges; ++i) {
    BaseRequest b = gen::base_request(rng);
    b.body = gen::bytes(rng, 200);
    const auto response = rng.coin(0.8) ? std::optional(gen::response(rng)) : std::nullopt;
    const auto id = a.persist_exchange(b, std::nullopt, response);
    Exchange e;
    e.request = b;
    e.response = response;
    inputs.push_back({id, e});
  }
  std::ostringstream first;
  a.export_jsonl(first);
  Store b = Store::open_in_memory();
  std::istringstream in(first.str());
  b.import_jsonl(in);
  std::ostringstream second;
  b.export_jsonl(second);
  if (first.str() != second.str()) return fail("re-export differs from the first export");

  for (const auto& [id, expected] : inputs) {
    const Exchange x = a.exchange(id);
    const Exchange y = b.exchange(id);
    BaseRequest want = expected.request;
    want.request_id = id;
    if (!(x == y)) return fail("exchange " + std::to_string(id) + " differs after import");
    if (!(y.request == want) || y.response != expected.response) {
      return fail("exchange " + std::to_string(id) + " differs from what was persisted");
    }
    const auto rows = b.header_rows(id);
    if (rows.size() != want.headers.size()) return fail("header rows lost for " + std::to_string(id));
  }

  std::set<std::int64_t> request_ids;
  std::vector<std::int64_t> header_refs;
  std::istringstream lines(first.str());
  std::string line;
  while (std::getline(lines, line)) {
    const json j = json::parse(line);
    const auto table = j.at("table").get<std::string>();
    if (table == "requests") request_ids.insert(j.at("request_id").get<std::int64_t>());
    if (table == "headers") header_refs.push_back(j.at("request_id").get<std::int64_t>());
  }
  for (const auto ref : header_refs) {
    if (!request_ids.count(ref)) return fail("header row points at missing request " + std::to_string(ref));
  }
  return {true, std::to_string(kExchanges) + " exchanges identical after import, byte-identical re-export, " +
                    std::to_string(header_refs.size()) + " header rows all resolve"};
}

}  // namespace

int main() {
  const Pipeline pipeline = run_pipeline();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"planted-vuln recall", [&] { return planted_vuln_recall(pipeline); }},
      {"levenshtein oracle equivalence", levenshtein_equivalence},
      {"threshold semantics", threshold_semantics},
      {"carve-outs", carve_outs},
      {"IAM contracts", iam_contracts},
      {"ordinal per-IAM ranking", [&] { return ordinal_stats(pipeline); }},
      {"safety", [&] { return safety(pipeline); }},
      {"persistence round trip", persistence_round_trip},
  };
  int failures = 0;
  int n = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = fail(std::string("threw: ") + e.what());
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << ++n << "] " << name << ": " << o.detail << std::endl;
  }
  std::filesystem::remove_all(pipeline.dir);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
