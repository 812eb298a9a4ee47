#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "bacscan/config.hpp"
#include "bacscan/error.hpp"
#include "bacscan/scan.hpp"
#include "bacscan/service.hpp"
#include "bacscan/sim.hpp"
#include "bacscan/url.hpp"
#include "cli.hpp"

using namespace bacscan;
using nlohmann::json;

namespace {

class SimTransport final : public HttpTransport {
 public:
  explicit SimTransport(std::shared_ptr<sim::TargetSimulator> s) : sim_(std::move(s)) {}
  bool down = false;
  int calls = 0;

  ResponseRecord execute(const BaseRequest& request, const DispatchConfig&) override {
    ++calls;
    if (down) return ResponseRecord::transport_failure("connection refused");
    const auto url = Url::parse(request.url);
    const auto r = sim_->handle({request.method, url->target(), request.headers, request.body, url->authority});
    return {r.status, r.content_type, r.body, 1, std::nullopt};
  }

 private:
  std::shared_ptr<sim::TargetSimulator> sim_;
};

// A store holding one scan of /users/get-info against an in-process simulator.
struct Scanned {
  std::shared_ptr<sim::TargetSimulator> sim = std::make_shared<sim::TargetSimulator>();
  std::shared_ptr<SimTransport> transport = std::make_shared<SimTransport>(sim);
  Store store = Store::open_in_memory();
  std::int64_t run_id = 0;

  Scanned() {
    BaseRequest b;
    b.url = "http://sim.test/users/get-info/?user=13495";
    const auto r = sim->respond({"GET", "/users/get-info/?user=13495", {}, "", "sim.test"});
    store.persist_exchange(b, std::nullopt, ResponseRecord{r.status, r.content_type, r.body, 1, std::nullopt});
    ScanOptions o;
    o.scope.allowed_hosts = {"sim.test"};
    o.dispatch.per_host_rate = 1000;
    o.iams = {{"iterate_identifiers", {}, {{"window", 1}}, true}, {"mutate_url_params", {}, {}, true}};
    run_id = run_scan(store, o, transport).run_id;
  }
};

ApiRequest req(std::string method, std::string path, std::string body = "") {
  ApiRequest r;
  r.method = std::move(method);
  r.path = std::move(path);
  r.body = std::move(body);
  return r;
}

json body_of(const ApiResponse& r) { return json::parse(r.body); }

std::int64_t first_pve(Store& store) {
  const auto rows = store.query_flags({.classification = Classification::kPve});
  REQUIRE_FALSE(rows.empty());
  return rows[0].flag.flag_id;
}

struct Cli {
  int code = 0;
  std::string out;
  std::string err;
};

Cli invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  Cli r;
  r.code = bacscan::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::filesystem::path temp_path(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("bacscan_svc_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("api: health and unknown routes") {
  Store store = Store::open_in_memory();
  TriageService svc(store, {});
  auto r = svc.handle(req("GET", "/api/v1/health"));
  CHECK(r.status == 200);
  CHECK(body_of(r)["api_version"] == 1);
  r = svc.handle(req("GET", "/api/v1/nope"));
  CHECK(r.status == 404);
  CHECK(body_of(r)["error"]["code"] == "not_found");
  r = svc.handle(req("DELETE", "/api/v1/flags"));
  CHECK(r.status == 405);
  CHECK(body_of(r)["error"]["code"] == "method_not_allowed");
  CHECK(svc.handle(req("GET", "/api/v1/flags/abc")).status == 404);
  CHECK(svc.handle(req("GET", "/api/v1/flags/77")).status == 404);
}

TEST_CASE("api: list flags with filters and paging") {
  Scanned s;
  TriageService svc(s.store, {}, s.transport);
  ApiRequest r = req("GET", "/api/v1/flags");
  const json all = body_of(svc.handle(r));
  CHECK(all["total"] == s.store.count_flags({}));
  CHECK(all["page"] == 1);
  CHECK(all["page_size"] == 50);

  r.query = {{"classification", "PVE"}, {"page_size", "1"}};
  const json one = body_of(svc.handle(r));
  CHECK(one["total"] == s.store.count_flags({.classification = Classification::kPve}));
  CHECK(one["items"].size() == 1);
  CHECK(one["items"][0]["classification"] == "PVE");

  r.query = {{"iam", "iterate_identifiers"}};
  CHECK(body_of(svc.handle(r))["total"] == 2);

  r.query = {{"classification", "maybe"}};
  const auto bad = svc.handle(r);
  CHECK(bad.status == 400);
  CHECK(body_of(bad)["error"]["field"] == "classification");
  r.query = {{"page_size", "100000"}};
  CHECK(svc.handle(r).status == 400);
}

TEST_CASE("api: flag detail carries bodies, diff and verdicts") {
  Scanned s;
  TriageService svc(s.store, {}, s.transport);
  const auto id = first_pve(s.store);
  const auto r = svc.handle(req("GET", "/api/v1/flags/" + std::to_string(id)));
  REQUIRE(r.status == 200);
  const json j = body_of(r);
  CHECK(j["flag"]["flag_id"] == id);
  CHECK(j["mutated"]["response"]["body"]["encoding"] == "text");
  CHECK(j["baseline"].is_object());
  CHECK(j["diff"]["distance"].get<int>() > 0);
  CHECK_FALSE(j["diff"]["mutated"].empty());
  CHECK(j["verdict"].is_null());
}

TEST_CASE("api: verdicts") {
  Scanned s;
  TriageService svc(s.store, {}, s.transport);
  const auto id = first_pve(s.store);
  const std::string path = "/api/v1/flags/" + std::to_string(id) + "/verdict";
  auto r = svc.handle(req("POST", path, R"({"verdict":"CONFIRMED_VULN","cwe_tags":[359],"notes":"other user"})"));
  CHECK(r.status == 201);
  CHECK(body_of(r)["verdict"]["verdict"] == "CONFIRMED_VULN");
  r = svc.handle(req("POST", path, R"({"verdict":"FPPVE"})"));
  CHECK(r.status == 201);
  const json detail = body_of(svc.handle(req("GET", "/api/v1/flags/" + std::to_string(id))));
  CHECK(detail["verdict"]["verdict"] == "FPPVE");
  CHECK(detail["verdict_history"].size() == 2);

  r = svc.handle(req("POST", path, R"({"verdict":"MAYBE"})"));
  CHECK(r.status == 400);
  CHECK(body_of(r)["error"]["field"] == "verdict");
  r = svc.handle(req("POST", path, R"({"verdict":"FPPVE","extra":1})"));
  CHECK(r.status == 400);
  CHECK(body_of(r)["error"]["field"] == "extra");
  r = svc.handle(req("POST", path, R"({"verdict":"CONFIRMED_VULN","cwe_tags":["x"]})"));
  CHECK(body_of(r)["error"]["field"] == "cwe_tags/0");
  CHECK(svc.handle(req("POST", path, "{broken")).status == 400);
  CHECK(svc.handle(req("POST", "/api/v1/flags/9999/verdict", R"({"verdict":"FPPVE"})")).status == 404);
  CHECK(svc.handle(req("GET", path)).status == 405);
}

TEST_CASE("api: replay appends an exchange and leaves flags alone") {
  Scanned s;
  TriageService svc(s.store, {}, s.transport);
  const auto id = first_pve(s.store);
  const auto before = s.store.flag_record(id);
  const auto flags_before = s.store.count_flags({});
  const auto r = svc.handle(req("POST", "/api/v1/flags/" + std::to_string(id) + "/replay",
                                R"({"url":"http://sim.test/users/get-info/?user=13495"})"));
  REQUIRE(r.status == 200);
  const json j = body_of(r);
  CHECK(j["response"]["status"] == 200);
  CHECK(j["classification"] == "BENIGN");
  CHECK(s.store.exchange(j["exchange_id"].get<std::int64_t>()).kind == ExchangeKind::kReplay);
  CHECK(s.store.flag_record(id).flag == before.flag);
  CHECK(s.store.count_flags({}) == flags_before);
}

TEST_CASE("api: replay outside scope is refused without sending") {
  Scanned s;
  TriageService svc(s.store, {}, s.transport);
  const auto id = first_pve(s.store);
  const int calls = s.transport->calls;
  const auto r = svc.handle(req("POST", "/api/v1/flags/" + std::to_string(id) + "/replay",
                                R"({"url":"http://outside.test/"})"));
  CHECK(r.status == 403);
  CHECK(body_of(r)["error"]["code"] == "scope_refused");
  CHECK(s.transport->calls == calls);
}

TEST_CASE("api: replay against a stopped target reports the transport failure") {
  Scanned s;
  TriageService svc(s.store, {}, s.transport);
  s.transport->down = true;
  const auto r = svc.handle(req("POST", "/api/v1/flags/" + std::to_string(first_pve(s.store)) + "/replay", "{}"));
  REQUIRE(r.status == 200);
  const json j = body_of(r);
  CHECK(j["response"]["status"] == 0);
  CHECK(j["response"]["transport_error"] == "connection refused");
  CHECK(j["classification"] == "BENIGN");
}

TEST_CASE("api: runs and stats") {
  Scanned s;
  TriageService svc(s.store, {}, s.transport);
  const json runs = body_of(svc.handle(req("GET", "/api/v1/runs")));
  REQUIRE(runs["runs"].size() == 1);
  const auto r = svc.handle(req("GET", "/api/v1/runs/" + std::to_string(s.run_id) + "/stats"));
  REQUIRE(r.status == 200);
  const json stats = body_of(r);
  CHECK(stats["iams"].size() == 2);
  CHECK(stats["totals"].is_object());
  CHECK(svc.handle(req("GET", "/api/v1/runs/55/stats")).status == 404);
}

TEST_CASE("service server answers over loopback HTTP") {
  Scanned s;
  auto svc = std::make_shared<TriageService>(s.store, ServiceOptions{}, s.transport);
  ServeOptions o;
  o.port = 0;
  ServiceServer server(svc, o);
  httplib::Client client("127.0.0.1", server.port());
  auto res = client.Get("/api/v1/flags?classification=PVE&page_size=2");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["items"].size() <= 2);
  res = client.Get("/");
  REQUIRE(res);
  CHECK(res->status == 200);
  server.stop();

  o.bind = "0.0.0.0";
  CHECK_THROWS_AS(ServiceServer(svc, o), ConfigError);
}

TEST_CASE("config: defaults, unknown keys and env overrides") {
  Config c = parse_config("{}");
  CHECK(c.service.bind == "127.0.0.1");
  CHECK(c.dedupe);
  c = parse_config(R"({"scope":{"allowed_hosts":["a.example"]},"detector":{"dissimilarity_threshold":0.8}})");
  CHECK(c.scope.allowed_hosts == std::vector<std::string>{"a.example"});
  CHECK(c.detector.dissimilarity_threshold == 0.8);
  try {
    parse_config(R"({"scope":{"foo":1}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.location() == "/scope/foo");
  }
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"iams":[{"name":"nope"}]})"), ConfigError);
  apply_env_overrides(c, [](const char* name) -> std::optional<std::string> {
    if (std::string(name) == "BACSCAN_STORE") return "/tmp/x.db";
    return std::nullopt;
  });
  CHECK(c.store == "/tmp/x.db");
  CHECK(parse_config(to_json(c).dump()).scope.allowed_hosts == c.scope.allowed_hosts);
}

TEST_CASE("cli: usage errors exit 2, help exits 0") {
  CHECK(invoke({"--help"}).code == bacscan::cli::kExitOk);
  CHECK(invoke({"frobnicate"}).code == bacscan::cli::kExitUsage);
  CHECK(invoke({}).code == bacscan::cli::kExitUsage);
  const auto store = temp_path("usage.db");
  const auto scan = invoke({"--store", store.string(), "scan"});
  CHECK(scan.code == bacscan::cli::kExitUsage);
  CHECK(scan.err.find("scope") != std::string::npos);
}

TEST_CASE("cli: ingest, scan, report and triage against the simulator server") {
  sim::Server server(std::make_shared<sim::TargetSimulator>());
  const std::string host = "127.0.0.1:" + std::to_string(server.port());
  const auto har = temp_path("fixture.har");
  const auto store = temp_path("cycle.db");
  {
    std::ofstream out(har);
    out << sim::fixture_har(server.simulator(), server.origin(), "http://localhost:" + std::to_string(server.port()));
  }
  const std::string s = store.string();
  auto r = invoke({"--store", s, "ingest", har.string(), "--scope", host});
  REQUIRE_MESSAGE(r.code == 0, r.err);

  r = invoke({"--store", s, "scan", "--scope", host, "--iam", "iterate_identifiers", "--rate", "200"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const auto& e : server.simulator().audit()) CHECK(e.host == host);

  r = invoke({"--store", s, "--output", "structured", "report", "--format", "json"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json report = json::parse(r.out);
  CHECK(report["iams"].size() == 1);

  r = invoke({"--store", s, "flags", "--classification", "PVE", "--limit", "1"});
  CHECK(r.code == 0);

  Store opened = Store::open(store);
  const auto id = std::to_string(first_pve(opened));
  CHECK(invoke({"--store", s, "verdict", id, "--verdict", "CONFIRMED_VULN", "--cwe", "359"}).code == 0);
  CHECK(invoke({"--store", s, "verdict", id, "--verdict", "MAYBE"}).code == bacscan::cli::kExitUsage);
  CHECK(invoke({"--store", s, "verdict", id, "--verdict", "CONFIRMED_VULN", "--cwe", "79"}).code == bacscan::cli::kExitUsage);
  CHECK(invoke({"--store", s, "verdict", "424242", "--verdict", "FPPVE"}).code == bacscan::cli::kExitRuntime);

  const auto dump = temp_path("dump.jsonl");
  CHECK(invoke({"--store", s, "export", "jsonl", dump.string()}).code == 0);
  const auto copy = temp_path("copy.db");
  CHECK(invoke({"--store", copy.string(), "import", dump.string()}).code == 0);
  CHECK(invoke({"--store", copy.string(), "import", dump.string()}).code == bacscan::cli::kExitRuntime);

  r = invoke({"--store", s, "replay", id, "--url", "http://elsewhere.test/"});
  CHECK(r.code != 0);
  for (const auto& p : {har, store, dump, copy}) std::filesystem::remove_all(p);
}

TEST_CASE("cli: report on an empty store is a runtime error") {
  const auto store = temp_path("empty.db");
  const auto r = invoke({"--store", store.string(), "report"});
  CHECK(r.code == bacscan::cli::kExitRuntime);
  CHECK_FALSE(r.err.empty());
  std::filesystem::remove_all(store);
}
