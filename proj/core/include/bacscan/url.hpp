#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bacscan {

// An absolute URL split into its raw components. `str()` reproduces the
// parsed input byte for byte, so callers can edit one component without
// disturbing the others.
struct Url {
  std::string scheme;
  std::string authority;  // userinfo@host:port as written
  std::string host;       // without brackets for IPv6 literals
  std::optional<int> port;
  std::string path;
  std::optional<std::string> query;     // without the leading '?'
  std::optional<std::string> fragment;  // without the leading '#'

  // Returns nullopt unless the input is an absolute http(s) URL with a host.
  static std::optional<Url> parse(std::string_view text);

  std::string str() const;
  int effective_port() const;
  bool is_https() const;
  // scheme://authority, suitable for an HTTP client base.
  std::string origin() const;
  // path?query, the HTTP request target. Never empty.
  std::string target() const;
  // host[:port] in lower case, the key used for rate limiting.
  std::string host_key() const;
};

struct QueryParam {
  std::string key;
  std::string value;
  bool has_equals = true;

  bool operator==(const QueryParam&) const = default;
};

// Splits a raw query on '&' without decoding. join_query(split_query(q)) == q.
std::vector<QueryParam> split_query(std::string_view query);
std::string join_query(const std::vector<QueryParam>& params);

// Splits a path on '/' keeping empty segments. join_path(split_path(p)) == p.
std::vector<std::string> split_path(std::string_view path);
std::string join_path(const std::vector<std::string>& segments);

}  // namespace bacscan
