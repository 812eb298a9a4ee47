#include <doctest.h>

#include <algorithm>
#include <set>

#include "bacscan/error.hpp"
#include "bacscan/iam.hpp"
#include "bacscan/url.hpp"
#include "support/gen.hpp"

using namespace bacscan;

namespace {

BaseRequest get(std::string url, Headers headers = {}) {
  BaseRequest r;
  r.request_id = 7;
  r.method = "GET";
  r.url = std::move(url);
  r.headers = std::move(headers);
  return r;
}

BaseRequest post(std::string url, std::string body) {
  BaseRequest r = get(std::move(url), {{"Content-Type", "application/json"},
                                       {"Content-Length", std::to_string(body.size())}});
  r.method = "POST";
  r.body = std::move(body);
  return r;
}

std::vector<std::string> urls(const std::vector<MutatedRequest>& ms) {
  std::vector<std::string> out;
  for (const auto& m : ms) out.push_back(m.request.url);
  return out;
}

std::string content_length(const BaseRequest& r) {
  const Header* h = find_header(r.headers, "Content-Length");
  return h ? h->value : "";
}

Headers without_content_length(Headers h) {
  std::erase_if(h, [](const Header& x) { return x.name == "Content-Length"; });
  return h;
}

}  // namespace

TEST_CASE("iterate_identifiers: window 1 on a query value") {
  const auto ms = iterate_identifiers(get("https://example-site/users/get-info/?user=13495"), 1);
  CHECK(urls(ms) == std::vector<std::string>{"https://example-site/users/get-info/?user=13494",
                                             "https://example-site/users/get-info/?user=13496"});
  for (const auto& m : ms) {
    CHECK(m.iam_name == "iterate_identifiers");
    CHECK(m.target == MutationTarget::kUrl);
    CHECK(m.base_id == 7);
    CHECK(m.modification.rfind("iterate_identifiers: ", 0) == 0);
  }
}

TEST_CASE("iterate_identifiers: path segment and query value") {
  const auto ms = iterate_identifiers(get("https://a.example/users/42/posts?page=3"), 1);
  CHECK(urls(ms) == std::vector<std::string>{"https://a.example/users/41/posts?page=3",
                                             "https://a.example/users/43/posts?page=3",
                                             "https://a.example/users/42/posts?page=2",
                                             "https://a.example/users/42/posts?page=4"});
}

TEST_CASE("iterate_identifiers: clamps at zero and skips non-numeric values") {
  CHECK(urls(iterate_identifiers(get("https://a.example/x?id=0"), 2)) ==
        std::vector<std::string>{"https://a.example/x?id=1", "https://a.example/x?id=2"});
  CHECK(iterate_identifiers(get("https://a.example/users/me?sort=asc"), 2).empty());
}

TEST_CASE("iterate_identifiers: JSON body fields") {
  const auto ms = iterate_identifiers(post("https://a.example/orders", R"({"order":1001,"note":"x"})"), 1);
  REQUIRE(ms.size() == 2);
  CHECK(ms[0].target == MutationTarget::kBody);
  CHECK(ms[0].request.body == R"({"order":1000,"note":"x"})");
  CHECK(content_length(ms[0].request) == std::to_string(ms[0].request.body.size()));
}

TEST_CASE("strip_headers: each header, then all auth headers") {
  const auto base = get("https://a.example/me", {{"Authorization", "Bearer t"}, {"Accept", "*/*"}});
  const auto ms = strip_headers(base);
  REQUIRE(ms.size() == 3);
  CHECK(ms[0].request.headers == Headers{{"Accept", "*/*"}});
  CHECK(ms[1].request.headers == Headers{{"Authorization", "Bearer t"}});
  CHECK(ms[2].request.headers == Headers{{"Accept", "*/*"}});
  CHECK(ms[2].modification.find("auth") != std::string::npos);
  CHECK(strip_headers(get("https://a.example/")).empty());
}

TEST_CASE("mutate_url_params: empty, remove, then each payload per param") {
  const auto ms = mutate_url_params(get("https://a.example/p?a=1&b=x"), {"0", "*"});
  CHECK(urls(ms) == std::vector<std::string>{
                        "https://a.example/p?a=&b=x", "https://a.example/p?b=x", "https://a.example/p?a=0&b=x",
                        "https://a.example/p?a=*&b=x", "https://a.example/p?a=1&b=", "https://a.example/p?a=1",
                        "https://a.example/p?a=1&b=0", "https://a.example/p?a=1&b=*"});
  CHECK(mutate_url_params(get("https://a.example/p"), {"0"}).empty());
}

TEST_CASE("mutate_url_params drops edits equal to the base") {
  const auto ms = mutate_url_params(get("https://a.example/p?a=0"), {"0", "1"});
  CHECK(urls(ms) == std::vector<std::string>{"https://a.example/p?a=", "https://a.example/p",
                                             "https://a.example/p?a=1"});
}

TEST_CASE("strip_body") {
  const auto ms = strip_body(post("https://a.example/o", R"({"a":1})"));
  REQUIRE(ms.size() == 1);
  CHECK(ms[0].request.body.empty());
  CHECK(content_length(ms[0].request) == "0");
  CHECK(strip_body(get("https://a.example/")).empty());
}

TEST_CASE("append_header_noise") {
  const auto ms = append_header_noise(get("https://a.example/", {{"X-Trace", "abc"}}), {"'"});
  REQUIRE(ms.size() == 1);
  CHECK(ms[0].request.headers == Headers{{"X-Trace", "abc'"}});
  CHECK(ms[0].target == MutationTarget::kHeaders);
}

TEST_CASE("append_json_fields: append and overwrite") {
  nlohmann::ordered_json extra = {{"admin", true}};
  auto ms = append_json_fields(post("https://a.example/o", R"({"a":1})"), extra);
  REQUIRE(ms.size() == 1);
  CHECK(ms[0].request.body == R"({"a":1,"admin":true})");
  CHECK(content_length(ms[0].request) == "20");

  ms = append_json_fields(post("https://a.example/o", R"({"admin":false})"), extra);
  REQUIRE(ms.size() == 1);
  CHECK(ms[0].request.body == R"({"admin":true})");
  CHECK(ms[0].modification.find("overwrites") != std::string::npos);

  CHECK(append_json_fields(post("https://a.example/o", "[1,2]"), extra).empty());
  CHECK(append_json_fields(post("https://a.example/o", "not json"), extra).empty());
  CHECK_THROWS_AS(JsonFieldInjection(nlohmann::ordered_json::array()), ConfigError);
}

TEST_CASE("generate_all: plan order and budget") {
  BaseRequest base = post("https://a.example/u/5?x=1", R"({"id":9})");
  base.headers.push_back({"Authorization", "t"});
  const auto descriptors = IamRegistry::builtin().default_descriptors();
  const auto all = generate_all(base, descriptors);
  REQUIRE(all.size() > 5);
  const auto names = IamRegistry::builtin().names();
  std::size_t last_rank = 0;
  for (const auto& m : all) {
    const auto rank = static_cast<std::size_t>(std::find(names.begin(), names.end(), m.iam_name) - names.begin());
    REQUIRE(rank < names.size());
    CHECK(rank >= last_rank);
    last_rank = rank;
  }
  const auto five = generate_all(base, descriptors, 5);
  REQUIRE(five.size() == 5);
  CHECK(std::equal(five.begin(), five.end(), all.begin()));
}

TEST_CASE("AttackPlan configuration errors") {
  CHECK_THROWS_AS(AttackPlan({{"strip_body", {}, {}, true}, {"strip_body", {}, {}, true}}), ConfigError);
  CHECK_THROWS_AS(AttackPlan({{"no_such_iam", {}, {}, true}}), ConfigError);
  CHECK_THROWS_AS(AttackPlan({{"iterate_identifiers", {}, {{"bogus", 1}}, true}}), ConfigError);
  const AttackPlan disabled({{"strip_body", {}, {}, false}});
  CHECK(disabled.generate(post("https://a.example/", "x")).empty());
  const AttackPlan windowed({{"iterate_identifiers", {}, {{"window", 3}}, true}});
  CHECK(windowed.generate(get("https://a.example/?id=10")).size() == 6);
}

TEST_CASE("the registry accepts new strategies without touching generate_all") {
  class Upcase final : public InformationAttackMethod {
   public:
    std::string_view name() const override { return "upcase_method"; }
    std::vector<MutationTarget> targets() const override { return {MutationTarget::kUrl}; }

   protected:
    std::vector<Edit> modify_url(const BaseRequest& base) const override {
      BaseRequest r = base;
      r.url += "X";
      return {{r, "appended X"}};
    }
  };
  IamRegistry registry = IamRegistry::builtin();
  registry.add("upcase_method", {MutationTarget::kUrl}, [](const nlohmann::json&) { return std::make_unique<Upcase>(); });
  const AttackPlan plan({{"upcase_method", {}, {}, true}}, registry);
  const auto ms = plan.generate(get("https://a.example/"));
  REQUIRE(ms.size() == 1);
  CHECK(ms[0].modification == "upcase_method: appended X");
}

TEST_CASE("IAM properties over random bases: pure, deterministic, local") {
  gen::Rng rng(77);
  const auto descriptors = IamRegistry::builtin().default_descriptors();
  for (int i = 0; i < 400; ++i) {
    const BaseRequest base = gen::base_request(rng);
    const BaseRequest copy = base;
    const auto first = generate_all(base, descriptors);
    REQUIRE(base == copy);
    REQUIRE(first == generate_all(base, descriptors));
    for (const auto& m : first) {
      INFO(m.modification << " on " << base.url);
      REQUIRE(m.request != base);
      REQUIRE(m.base_id == base.request_id);
      REQUIRE(m.modification.rfind(m.iam_name + ": ", 0) == 0);
      REQUIRE(Url::parse(m.request.url).has_value());
      switch (m.target) {
        case MutationTarget::kUrl:
          REQUIRE(m.request.method == base.method);
          REQUIRE(m.request.headers == base.headers);
          REQUIRE(m.request.body == base.body);
          REQUIRE(Url::parse(m.request.url)->host == Url::parse(base.url)->host);
          break;
        case MutationTarget::kHeaders:
          REQUIRE(m.request.url == base.url);
          REQUIRE(m.request.method == base.method);
          REQUIRE(m.request.body == base.body);
          break;
        case MutationTarget::kBody:
          REQUIRE(m.request.url == base.url);
          REQUIRE(m.request.method == base.method);
          REQUIRE(without_content_length(m.request.headers) == without_content_length(base.headers));
          break;
      }
    }
  }
}

TEST_CASE("identifier neighbours stay within the window") {
  gen::Rng rng(78);
  for (int i = 0; i < 300; ++i) {
    const auto v = rng.range(0, 100000);
    const int window = static_cast<int>(rng.range(1, 4));
    const auto ms = iterate_identifiers(get("https://a.example/r?id=" + std::to_string(v)), window);
    std::set<std::int64_t> seen;
    for (const auto& m : ms) {
      const auto q = *Url::parse(m.request.url)->query;
      const auto n = std::stoll(q.substr(3));
      REQUIRE(n >= 0);
      REQUIRE(n != v);
      REQUIRE(std::llabs(n - v) <= window);
      REQUIRE(seen.insert(n).second);
    }
    REQUIRE(ms.size() == static_cast<std::size_t>(std::min<std::int64_t>(v, window) + window));
  }
}
