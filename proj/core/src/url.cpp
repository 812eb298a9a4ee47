#include "bacscan/url.hpp"

#include <charconv>

#include "bacscan/text.hpp"

namespace bacscan {

std::optional<Url> Url::parse(std::string_view text) {
  const auto scheme_end = text.find("://");
  if (scheme_end == std::string_view::npos || scheme_end == 0) return std::nullopt;
  Url url;
  url.scheme = std::string(text.substr(0, scheme_end));
  const std::string lower_scheme = text::to_lower(url.scheme);
  if (lower_scheme != "http" && lower_scheme != "https") return std::nullopt;

  std::string_view rest = text.substr(scheme_end + 3);
  const auto authority_end = rest.find_first_of("/?#");
  url.authority = std::string(rest.substr(0, authority_end));
  rest = authority_end == std::string_view::npos ? std::string_view{} : rest.substr(authority_end);

  std::string_view hostport = url.authority;
  if (const auto at = hostport.rfind('@'); at != std::string_view::npos) {
    hostport = hostport.substr(at + 1);
  }
  std::string_view port_text;
  if (!hostport.empty() && hostport.front() == '[') {
    const auto close = hostport.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    url.host = std::string(hostport.substr(1, close - 1));
    const auto after = hostport.substr(close + 1);
    if (!after.empty()) {
      if (after.front() != ':') return std::nullopt;
      port_text = after.substr(1);
    }
  } else {
    const auto colon = hostport.rfind(':');
    if (colon != std::string_view::npos) {
      url.host = std::string(hostport.substr(0, colon));
      port_text = hostport.substr(colon + 1);
    } else {
      url.host = std::string(hostport);
    }
  }
  if (url.host.empty()) return std::nullopt;
  if (!port_text.empty()) {
    int port = 0;
    const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port <= 0 || port > 65535) {
      return std::nullopt;
    }
    url.port = port;
  }

  const auto hash = rest.find('#');
  if (hash != std::string_view::npos) {
    url.fragment = std::string(rest.substr(hash + 1));
    rest = rest.substr(0, hash);
  }
  const auto question = rest.find('?');
  if (question != std::string_view::npos) {
    url.query = std::string(rest.substr(question + 1));
    rest = rest.substr(0, question);
  }
  url.path = std::string(rest);
  return url;
}

std::string Url::str() const {
  std::string out = scheme + "://" + authority + path;
  if (query) out += "?" + *query;
  if (fragment) out += "#" + *fragment;
  return out;
}

int Url::effective_port() const {
  if (port) return *port;
  return is_https() ? 443 : 80;
}

bool Url::is_https() const { return text::iequals(scheme, "https"); }

std::string Url::origin() const { return scheme + "://" + authority; }

std::string Url::target() const {
  std::string out = path.empty() ? "/" : path;
  if (query) out += "?" + *query;
  return out;
}

std::string Url::host_key() const {
  return text::to_lower(host) + ":" + std::to_string(effective_port());
}

std::vector<QueryParam> split_query(std::string_view query) {
  std::vector<QueryParam> params;
  if (query.empty()) return params;
  std::size_t start = 0;
  while (true) {
    const auto amp = query.find('&', start);
    const std::string_view piece =
        query.substr(start, amp == std::string_view::npos ? std::string_view::npos : amp - start);
    QueryParam param;
    if (const auto eq = piece.find('='); eq != std::string_view::npos) {
      param.key = std::string(piece.substr(0, eq));
      param.value = std::string(piece.substr(eq + 1));
    } else {
      param.key = std::string(piece);
      param.has_equals = false;
    }
    params.push_back(std::move(param));
    if (amp == std::string_view::npos) break;
    start = amp + 1;
  }
  return params;
}

std::string join_query(const std::vector<QueryParam>& params) {
  std::string out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i > 0) out += '&';
    out += params[i].key;
    if (params[i].has_equals) out += "=" + params[i].value;
  }
  return out;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> segments;
  std::size_t start = 0;
  while (true) {
    const auto slash = path.find('/', start);
    segments.emplace_back(
        path.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return segments;
}

std::string join_path(const std::vector<std::string>& segments) {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) out += '/';
    out += segments[i];
  }
  return out;
}

}  // namespace bacscan
