#include <doctest.h>

#include "bacscan/error.hpp"
#include "bacscan/text.hpp"
#include "bacscan/url.hpp"
#include "support/gen.hpp"

using namespace bacscan;

TEST_CASE("Url::parse splits components") {
  const auto u = Url::parse("https://user@Api.Example:8443/a/b?x=1&y#frag");
  REQUIRE(u);
  CHECK(u->scheme == "https");
  CHECK(u->host == "Api.Example");
  CHECK(u->port == 8443);
  CHECK(u->path == "/a/b");
  CHECK(u->query == "x=1&y");
  CHECK(u->fragment == "frag");
  CHECK(u->target() == "/a/b?x=1&y");
  CHECK(u->host_key() == "api.example:8443");
  CHECK(u->str() == "https://user@Api.Example:8443/a/b?x=1&y#frag");
}

TEST_CASE("Url::parse rejects non-http and host-less input") {
  CHECK_FALSE(Url::parse("ftp://a/b"));
  CHECK_FALSE(Url::parse("/relative"));
  CHECK_FALSE(Url::parse("http:///nohost"));
  CHECK_FALSE(Url::parse("http://a:99999/"));
  const auto v6 = Url::parse("http://[::1]:8080/");
  REQUIRE(v6);
  CHECK(v6->host == "::1");
  CHECK(v6->effective_port() == 8080);
  CHECK(Url::parse("http://a.example")->target() == "/");
  CHECK(Url::parse("https://a.example/")->effective_port() == 443);
}

TEST_CASE("url and query round trips on random inputs") {
  gen::Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const auto r = gen::base_request(rng);
    const auto u = Url::parse(r.url);
    REQUIRE(u);
    REQUIRE(u->str() == r.url);
    if (u->query) REQUIRE(join_query(split_query(*u->query)) == *u->query);
    REQUIRE(join_path(split_path(u->path)) == u->path);
  }
  CHECK(join_query(split_query("a&b=&=c&&")) == "a&b=&=c&&");
}

TEST_CASE("base64 round trip and errors") {
  gen::Rng rng(9);
  for (int i = 0; i < 300; ++i) {
    const auto b = gen::bytes(rng, 64);
    REQUIRE(text::base64_decode(text::base64_encode(b)) == b);
  }
  CHECK(text::base64_encode("hi") == "aGk=");
  CHECK(text::base64_decode("aG k=\n") == "hi");
  CHECK_THROWS_AS(text::base64_decode("a*=="), ParseError);
}

TEST_CASE("utf8 helpers") {
  CHECK(text::utf8_length("中文x") == 3);
  CHECK(text::truncate_utf8("中文x", 1) == "中");
  CHECK(text::is_valid_utf8("é"));
  CHECK_FALSE(text::is_valid_utf8("\xc3"));
  CHECK(text::utf8_offsets("aé") == std::vector<std::size_t>{0, 1, 3});
  CHECK(text::decode_utf8("\xff").size() == 1);
}

TEST_CASE("csv quoting") {
  CHECK(text::csv_field("plain") == "plain");
  CHECK(text::csv_field("a,b") == "\"a,b\"");
  CHECK(text::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(text::csv_row({"a", "b\nc"}) == "a,\"b\nc\"\r\n");
  CHECK(text::format_fixed(0.5, 3) == "0.500");
}
