#include <doctest.h>

#include <nlohmann/json.hpp>

#include "bacscan/error.hpp"
#include "bacscan/har.hpp"
#include "bacscan/text.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

using namespace bacscan;
using nlohmann::json;

namespace {

json entry(std::string method, std::string url) {
  return {{"startedDateTime", "2023-03-01T12:00:00.000Z"},
          {"request",
           {{"method", method},
            {"url", url},
            {"httpVersion", "HTTP/1.1"},
            {"headers", json::array()},
            {"queryString", json::array()},
            {"cookies", json::array()},
            {"headersSize", -1},
            {"bodySize", 0}}},
          {"response",
           {{"status", 200},
            {"statusText", "OK"},
            {"headers", json::array()},
            {"content", {{"size", 2}, {"mimeType", "application/json"}, {"text", "{}"}}}}},
          {"time", 12}};
}

std::string har(const json& entries) {
  return json{{"log", {{"version", "1.2"}, {"creator", {{"name", "t"}, {"version", "1"}}}, {"entries", entries}}}}
      .dump();
}

BaseRequest request(std::string method, std::string url, std::string body = "") {
  BaseRequest r;
  r.method = std::move(method);
  r.url = std::move(url);
  r.body = std::move(body);
  return r;
}

}  // namespace

TEST_CASE("parse_har: GET with two headers") {
  json e = entry("GET", "https://example-site/users/get-info/?user=13495");
  e["request"]["headers"] = json::array({{{"name", "Authorization"}, {"value", "Bearer abc"}},
                                         {{"name", "Accept"}, {"value", "application/json"}}});
  const auto requests = parse_har(har(json::array({e})));
  REQUIRE(requests.size() == 1);
  CHECK(requests[0].method == "GET");
  CHECK(requests[0].url == "https://example-site/users/get-info/?user=13495");
  CHECK(requests[0].headers == Headers{{"Authorization", "Bearer abc"}, {"Accept", "application/json"}});
  CHECK(requests[0].body.empty());
  CHECK(to_epoch_ms(requests[0].captured_at) == 1'677'672'000'000);
}

TEST_CASE("parse_har: base64 POST body decodes to raw bytes") {
  const std::string raw("\x00\x01\xfe{\"a\":1}", 10);
  json e = entry("POST", "https://example-site/orders");
  e["request"]["postData"] = {{"mimeType", "application/octet-stream"},
                              {"text", text::base64_encode(raw)},
                              {"encoding", "base64"}};
  const auto result = parse_har_document(har(json::array({e})));
  REQUIRE(result.entries.size() == 1);
  CHECK(result.entries[0].request.body == raw);
  CHECK(result.entries[0].body_encoding == BodyEncoding::kBase64);
  REQUIRE(result.entries[0].response);
  CHECK(result.entries[0].response->status == 200);
  CHECK(result.entries[0].response->body == "{}");
}

TEST_CASE("parse_har: truncated document is a ParseError with a location") {
  const std::string doc = har(json::array({entry("GET", "https://a.example/x")}));
  try {
    parse_har(doc.substr(0, doc.size() / 2));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK_FALSE(e.location().empty());
  }
}

TEST_CASE("parse_har: structural errors and skipped entries") {
  CHECK_THROWS_AS(parse_har("{}"), ParseError);
  CHECK_THROWS_AS(parse_har(R"({"log":{"entries":5}})"), ParseError);
  CHECK(parse_har(har(json::array())).empty());

  json bad_method = entry("BREW", "https://a.example/x");
  json bad_url = entry("GET", "not a url");
  json good = entry("GET", "https://a.example/y");
  const auto result = parse_har_document(har(json::array({bad_method, bad_url, good})));
  CHECK(result.entry_count == 3);
  CHECK(result.skipped == 2);
  CHECK(result.warnings.size() == 2);
  REQUIRE(result.entries.size() == 1);
  CHECK(result.entries[0].request.url == "https://a.example/y");
}

TEST_CASE("parse_iso8601") {
  CHECK(to_epoch_ms(*parse_iso8601("2023-03-01T12:00:00.123Z")) == 1'677'672'000'123);
  CHECK(to_epoch_ms(*parse_iso8601("2023-03-01T13:00:00+01:00")) == 1'677'672'000'000);
  CHECK_FALSE(parse_iso8601("yesterday"));
  CHECK_FALSE(parse_iso8601("2023-13-01T00:00:00Z"));
}

TEST_CASE("scope: wildcard suffix") {
  ScopePolicy p;
  p.allowed_hosts = {"*.example-site"};
  const auto parts = apply_scope(std::vector<BaseRequest>{request("GET", "https://api.example-site/a"),
                                                          request("GET", "https://evil.other/a")},
                                 p);
  REQUIRE(parts.in_scope.size() == 1);
  CHECK(parts.in_scope[0].url == "https://api.example-site/a");
  REQUIRE(parts.excluded.size() == 1);
  CHECK(parts.excluded[0].url == "https://evil.other/a");
  CHECK_FALSE(p.allows("https://example-site/a"));
  CHECK(p.allows("https://deep.api.example-site/a"));
}

TEST_CASE("scope: exact hosts, ports and denied paths") {
  ScopePolicy p;
  p.allowed_hosts = {"127.0.0.1:8080", "Example.ORG"};
  p.denied_path_prefixes = {"/logout"};
  CHECK(p.allows("http://127.0.0.1:8080/x"));
  CHECK_FALSE(p.allows("http://127.0.0.1:8081/x"));
  CHECK(p.allows("https://example.org/"));
  CHECK_FALSE(p.allows("https://example.org/logout?all=1"));
  CHECK_FALSE(p.allows("garbage"));
}

TEST_CASE("scope: max_requests caps the in-scope list") {
  ScopePolicy p;
  p.allowed_hosts = {"a.example"};
  p.max_requests = 3;
  std::vector<BaseRequest> rs;
  for (int i = 0; i < 10; ++i) rs.push_back(request("GET", "https://a.example/" + std::to_string(i)));
  const auto parts = apply_scope(rs, p);
  CHECK(parts.in_scope.size() == 3);
  CHECK(parts.excluded.size() == 7);
  CHECK(parts.in_scope[2].url == "https://a.example/2");
}

TEST_CASE("scope: empty allowlist is refused") {
  ScopePolicy p;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  CHECK_THROWS(apply_scope(std::vector<BaseRequest>{request("GET", "https://a.example/")}, p));
}

TEST_CASE("scope partition is exact and order preserving") {
  gen::Rng rng(17);
  for (int round = 0; round < 100; ++round) {
    std::vector<BaseRequest> rs;
    const std::size_t n = rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = gen::base_request(rng);
      r.request_id = static_cast<std::int64_t>(i);
      rs.push_back(r);
    }
    ScopePolicy p;
    for (int k = 0; k < 3 && !rs.empty(); ++k) {
      p.allowed_hosts.push_back(Url::parse(rng.pick(rs).url)->host);
    }
    if (p.allowed_hosts.empty()) p.allowed_hosts = {"none.example"};
    p.max_requests = 1 + rng.below(40);
    const auto parts = apply_scope(rs, p);
    REQUIRE(parts.in_scope.size() + parts.excluded.size() == rs.size());
    REQUIRE(parts.in_scope.size() <= p.max_requests);
    std::size_t allowed = 0;
    for (const auto& r : rs) allowed += p.allows(r.url) ? 1 : 0;
    REQUIRE(parts.in_scope.size() == std::min(allowed, p.max_requests));
    for (const auto& r : parts.in_scope) REQUIRE(p.allows(r.url));
    for (std::size_t i = 1; i < parts.in_scope.size(); ++i) {
      REQUIRE(parts.in_scope[i - 1].request_id < parts.in_scope[i].request_id);
    }
  }
}

TEST_CASE("dedupe keeps the first of each method, url, body") {
  const std::vector<BaseRequest> rs = {request("GET", "https://a.example/1"), request("GET", "https://a.example/1"),
                                       request("POST", "https://a.example/1"),
                                       request("POST", "https://a.example/1", "x")};
  auto copy = rs;
  copy[1].headers.push_back({"X", "y"});
  const auto out = dedupe(copy);
  REQUIRE(out.size() == 3);
  CHECK(out[0].headers.empty());
}

TEST_CASE("dedupe matches the set oracle and is idempotent") {
  gen::Rng rng(23);
  std::vector<BaseRequest> keys;
  for (int i = 0; i < 40; ++i) keys.push_back(gen::base_request(rng));
  for (int round = 0; round < 20; ++round) {
    std::vector<BaseRequest> rs;
    for (int i = 0; i < 100; ++i) {
      auto r = rng.pick(keys);
      r.request_id = i;
      r.headers.push_back({"X-Round", std::to_string(i)});
      rs.push_back(r);
    }
    const auto expected = oracle::dedupe(rs);
    const auto actual = dedupe(rs);
    REQUIRE(actual == expected);
    REQUIRE(dedupe(actual) == actual);
  }
}

TEST_CASE("ingest_har stores in-scope entries with their responses") {
  Store store = Store::open_in_memory();
  ScopePolicy p;
  p.allowed_hosts = {"a.example"};
  const json entries = json::array({entry("GET", "https://a.example/1"), entry("GET", "https://a.example/1"),
                                    entry("GET", "https://b.example/1"), entry("BREW", "https://a.example/2")});
  const auto summary = ingest_har(store, har(entries), p);
  CHECK(summary.parsed == 4);
  CHECK(summary.skipped == 1);
  CHECK(summary.deduped == 1);
  CHECK(summary.excluded == 1);
  REQUIRE(summary.stored_ids.size() == 1);
  const Exchange e = store.exchange(summary.stored_ids[0]);
  CHECK(e.kind == ExchangeKind::kOriginal);
  REQUIRE(e.response);
  CHECK(e.response->body == "{}");

  Store second = Store::open_in_memory();
  const auto without = ingest_har(second, har(entries), p, false);
  CHECK(without.deduped == 0);
  CHECK(without.stored_ids.size() == 2);
}
