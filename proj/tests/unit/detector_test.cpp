#include <doctest.h>

#include "bacscan/detector.hpp"
#include "bacscan/error.hpp"
#include "bacscan/sim.hpp"
#include "support/fixtures.hpp"
#include "support/gen.hpp"

using namespace bacscan;

namespace {

ResponseRecord json_response(std::string body) { return {200, "application/json", std::move(body), 3, std::nullopt}; }

std::vector<std::string> names(const std::vector<RegexHit>& hits) {
  std::vector<std::string> out;
  for (const auto& h : hits) out.push_back(h.pattern_name);
  return out;
}

}  // namespace

TEST_CASE("scan_sensitive: ssn") {
  const auto hits = scan_sensitive("ssn: 123-45-6789");
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].pattern_name == "ssn");
  CHECK(hits[0].excerpt == "123-45-6789");
}

TEST_CASE("scan_sensitive: nothing sensitive") { CHECK(scan_sensitive("hello world").empty()); }

TEST_CASE("scan_sensitive: two emails in position order") {
  const auto hits = scan_sensitive("a@b.com and c@d.org");
  REQUIRE(hits.size() == 2);
  CHECK(hits[0] == RegexHit{"email", "a@b.com"});
  CHECK(hits[1] == RegexHit{"email", "c@d.org"});
}

TEST_CASE("scan_sensitive: SSN needs separators") {
  CHECK(scan_sensitive("id 123456789").empty());
  CHECK(names(scan_sensitive("123 45 6789")) == std::vector<std::string>{"ssn"});
}

TEST_CASE("scan_sensitive: card numbers must pass Luhn") {
  CHECK(names(scan_sensitive("card 4111 1111 1111 1111")) == std::vector<std::string>{"credit_card"});
  CHECK(scan_sensitive("card 4111 1111 1111 1112").empty());
  CHECK(luhn_valid("4111-1111-1111-1111"));
  CHECK_FALSE(luhn_valid("4111-1111-1111-1112"));
}

TEST_CASE("scan_sensitive: phones, addresses, credentials and tokens") {
  CHECK(names(scan_sensitive("call (555) 123-4567")) == std::vector<std::string>{"phone"});
  CHECK(names(scan_sensitive("ship to 1600 Pennsylvania Avenue")) == std::vector<std::string>{"street_address"});
  CHECK(names(scan_sensitive("api_key = \"abc123secret\"")) == std::vector<std::string>{"credential"});
  const auto token = names(scan_sensitive("Bearer 9f86d081884c7d659a2feaa0c55ad015a3bf4f1b2b0b822cd15d6c15b0f00a08"));
  CHECK(std::find(token.begin(), token.end(), "bearer_token") != token.end());
  CHECK(std::count(token.begin(), token.end(), "phone") == 0);
}

TEST_CASE("scan_sensitive: excerpts are truncated to 64 characters") {
  const auto hits = scan_sensitive("password=" + std::string(200, 'x'));
  REQUIRE_FALSE(hits.empty());
  for (const auto& h : hits) CHECK(h.excerpt.size() <= 64);
}

TEST_CASE("scan_sensitive: pattern order, then position") {
  const auto hits = scan_sensitive("123-45-6789 x@y.io 987-65-4321 z@w.io");
  CHECK(names(hits) == std::vector<std::string>{"email", "email", "ssn", "ssn"});
  CHECK(hits[0].excerpt == "x@y.io");
  CHECK(hits[2].excerpt == "123-45-6789");
}

TEST_CASE("classify: another user's record is PVE") {
  const sim::TargetSimulator s;
  const auto own = s.respond({"GET", "/users/get-info/?user=13495", {}, "", "sim"});
  const auto other = s.respond({"GET", "/users/get-info/?user=13494", {}, "", "sim"});
  const PveFlag flag = classify_response(json_response(own.body), json_response(other.body));
  CHECK(flag.classification == Classification::kPve);
  CHECK(flag.dissimilarity >= 0.9);
  CHECK_FALSE(flag.regex_hits.empty());
}

TEST_CASE("classify: identical bodies are BENIGN at dissimilarity 0") {
  const auto r = json_response(R"({"email":"a@b.com"})");
  const PveFlag flag = classify_response(r, r);
  CHECK(flag.classification == Classification::kBenign);
  CHECK(flag.dissimilarity == 0.0);
}

TEST_CASE("classify: 150000-character body goes to manual review") {
  const auto base = json_response("{}");
  const auto big = ResponseRecord{200, "text/plain", std::string(150000, 'a') + " 123-45-6789", 5, std::nullopt};
  const PveFlag flag = classify_response(base, big);
  CHECK(flag.classification == Classification::kManualReview);
  CHECK(flag.reason.find("exceeds") != std::string::npos);
}

TEST_CASE("classify: own data with a small boilerplate change is BENIGN") {
  const std::string own = R"({"id":13495,"email":"qa.tester@example.org","note":")" + std::string(60, 'n') + "\"}";
  std::string tweaked = own;
  for (std::size_t i = 0; i < own.size() / 20; ++i) tweaked[40 + i] = 'm';
  const PveFlag flag = classify_response(json_response(own), json_response(tweaked));
  CHECK(flag.dissimilarity < 0.1);
  CHECK(flag.classification == Classification::kBenign);
}

TEST_CASE("classify: transport failures are BENIGN") {
  const auto ok = json_response("{}");
  const auto failed = ResponseRecord::transport_failure("timeout", 10000);
  CHECK(classify_response(ok, failed).classification == Classification::kBenign);
  CHECK(classify_response(failed, ok).classification == Classification::kBenign);
  CHECK(classify_response(ok, failed).reason.find("transport") != std::string::npos);
}

TEST_CASE("classify: threshold boundary is inclusive") {
  DetectorConfig config;
  config.dissimilarity_threshold = 0.9;
  auto [b89, m89] = fixtures::pair_at_distance(89, true);
  auto [b90, m90] = fixtures::pair_at_distance(90, true);
  auto [b91, m91] = fixtures::pair_at_distance(91, true);
  auto [c91, n91] = fixtures::pair_at_distance(91, false);
  const Detector detector(config);
  CHECK(detector.dissimilarity(b89, m89) == 0.89);
  CHECK(detector.classify(b89, m89).classification == Classification::kBenign);
  CHECK(detector.dissimilarity(b90, m90) == 0.9);
  CHECK(detector.classify(b90, m90).classification == Classification::kPve);
  CHECK(detector.classify(b91, m91).classification == Classification::kPve);
  CHECK(detector.dissimilarity(c91, n91) == 0.91);
  CHECK(detector.classify(c91, n91).classification == Classification::kBenign);
}

TEST_CASE("classify: binary bodies compare by bytes") {
  const ResponseRecord a{200, "image/png", "\x89PNG\x01\x02", 1, std::nullopt};
  const ResponseRecord b{200, "image/png", "\x89PNG\x01\x03", 1, std::nullopt};
  CHECK(Detector().dissimilarity(a, b) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("classify is deterministic and never both PVE and manual review") {
  gen::Rng rng(5);
  const Detector detector;
  for (int i = 0; i < 300; ++i) {
    auto a = gen::response(rng);
    auto b = gen::response(rng);
    if (rng.coin(0.3)) b.body += " 123-45-6789 a@b.co";
    const PveFlag f1 = detector.classify(a, b);
    const PveFlag f2 = detector.classify(a, b);
    REQUIRE(f1 == f2);
    REQUIRE(f1.dissimilarity >= 0.0);
    REQUIRE(f1.dissimilarity <= 1.0);
    if (f1.classification == Classification::kPve) {
      REQUIRE(f1.dissimilarity >= 0.9);
      REQUIRE_FALSE(f1.regex_hits.empty());
    }
  }
}

TEST_CASE("raising the threshold never turns BENIGN into PVE") {
  gen::Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto a = gen::response(rng);
    auto b = gen::response(rng);
    b.body += " 321-54-9876";
    double t = 0.05 + 0.9 * static_cast<double>(rng.below(100)) / 100.0;
    DetectorConfig low;
    low.dissimilarity_threshold = t;
    DetectorConfig high;
    high.dissimilarity_threshold = std::min(1.0, t + 0.1);
    const auto before = classify_response(a, b, low).classification;
    const auto after = classify_response(a, b, high).classification;
    if (before == Classification::kBenign) REQUIRE(after != Classification::kPve);
  }
}

TEST_CASE("detect_code_leak") {
  CHECK(detect_code_leak({200, "text/html", "<html><body>hi</body></html>", 0, std::nullopt}));
  CHECK_FALSE(detect_code_leak({200, "application/json", R"({"a":1})", 0, std::nullopt}));
  CHECK(detect_code_leak({200, "text/plain", "function(){ var a = {b: {c: 1}}; return a; };", 0, std::nullopt}));
  CHECK(detect_code_leak({200, "text/plain", "import os\nSECRET = 1\n", 0, std::nullopt}));
  CHECK(detect_code_leak({200, "", "<!DOCTYPE html><p>x</p>", 0, std::nullopt}));
  CHECK(detect_code_leak({200, "text/plain", "{a;b;c;{d};e;}", 0, std::nullopt}));
  CHECK_FALSE(detect_code_leak({200, "text/plain", "plain words only", 0, std::nullopt}));
  CHECK_FALSE(detect_code_leak({200, "text/plain", R"({"a":{"b":[1,2,{"c":3}]}})", 0, std::nullopt}));
}

TEST_CASE("detect_code_leak on simulator responses") {
  const sim::TargetSimulator s;
  for (const char* path : {"/static/app.html", "/static/app.css", "/static/app.js"}) {
    const auto r = s.respond({"GET", path, {}, "", "sim"});
    CHECK_MESSAGE(detect_code_leak({r.status, r.content_type, r.body, 0, std::nullopt}), path);
  }
  for (const char* path : {"/users/get-info/?user=13494", "/locations/nearby?lat=1&lon=2"}) {
    const auto r = s.respond({"GET", path, {}, "", "sim"});
    CHECK_FALSE_MESSAGE(detect_code_leak({r.status, r.content_type, r.body, 0, std::nullopt}), path);
  }
}

TEST_CASE("DetectorConfig validation names the field") {
  DetectorConfig c;
  c.dissimilarity_threshold = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.max_auto_len = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.regex_set.push_back({"email", "x", ""});
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.regex_set.push_back({"broken", "(unclosed", ""});
  try {
    c.validate();
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field().find("patterns") != std::string::npos);
  }
}
