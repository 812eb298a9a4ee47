#include "bacscan/har.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "bacscan/error.hpp"
#include "bacscan/text.hpp"

namespace bacscan {

using nlohmann::json;

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  const auto* first = s.data() + pos;
  const auto [ptr, ec] = std::from_chars(first, first + len, out);
  return ec == std::errc{} && ptr == first + len;
}

bool is_base64_marked(const json& obj) {
  for (const char* key : {"encoding", "_encoding"}) {
    const auto it = obj.find(key);
    if (it != obj.end() && it->is_string() && text::iequals(it->get<std::string>(), "base64")) {
      return true;
    }
  }
  return false;
}

std::string string_field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it != obj.end() && it->is_string() ? it->get<std::string>() : std::string{};
}

// Reconstructs a form body when the capture lists postData.params only.
std::string params_body(const json& params) {
  std::string out;
  for (const auto& p : params) {
    if (!p.is_object()) continue;
    if (!out.empty()) out += '&';
    out += string_field(p, "name") + "=" + string_field(p, "value");
  }
  return out;
}

std::optional<CapturedEntry> parse_entry(const json& entry, const std::string& where,
                                         std::vector<std::string>& warnings) {
  auto skip = [&](const std::string& why) -> std::optional<CapturedEntry> {
    warnings.push_back(where + ": " + why);
    return std::nullopt;
  };
  if (!entry.is_object()) return skip("entry is not an object");
  const auto req_it = entry.find("request");
  if (req_it == entry.end() || !req_it->is_object()) return skip("missing request object");
  const json& req = *req_it;

  CapturedEntry out;
  out.request.method = string_field(req, "method");
  for (char& c : out.request.method) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  out.request.url = string_field(req, "url");
  if (!is_supported_method(out.request.method)) {
    return skip("unsupported method '" + out.request.method + "'");
  }
  if (!Url::parse(out.request.url)) {
    return skip("unsupported or relative URL '" + out.request.url + "'");
  }

  if (const auto h = req.find("headers"); h != req.end() && h->is_array()) {
    for (const auto& header : *h) {
      if (!header.is_object()) continue;
      std::string name = string_field(header, "name");
      // HTTP/2 pseudo-headers are not replayable as header fields.
      if (name.empty() || name.front() == ':') continue;
      out.request.headers.push_back({std::move(name), string_field(header, "value")});
    }
  }

  if (const auto pd = req.find("postData"); pd != req.end() && pd->is_object()) {
    if (const auto t = pd->find("text"); t != pd->end() && t->is_string()) {
      if (is_base64_marked(*pd)) {
        try {
          out.request.body = text::base64_decode(t->get<std::string>());
        } catch (const ParseError&) {
          return skip("request body is marked base64 but does not decode");
        }
        out.body_encoding = BodyEncoding::kBase64;
      } else {
        out.request.body = t->get<std::string>();
      }
    } else if (const auto params = pd->find("params"); params != pd->end() && params->is_array()) {
      out.request.body = params_body(*params);
    }
  }

  if (const auto started = entry.find("startedDateTime"); started != entry.end() && started->is_string()) {
    out.request.captured_at = parse_iso8601(started->get<std::string>()).value_or(Timestamp{});
  }

  if (const auto resp = entry.find("response"); resp != entry.end() && resp->is_object()) {
    const auto status = resp->find("status");
    if (status != resp->end() && status->is_number_integer()) {
      const int code = status->get<int>();
      if (code >= 100 && code <= 599) {
        ResponseRecord rec;
        rec.status = code;
        if (const auto content = resp->find("content"); content != resp->end() && content->is_object()) {
          rec.content_type = string_field(*content, "mimeType");
          const std::string body = string_field(*content, "text");
          if (is_base64_marked(*content)) {
            try {
              rec.body = text::base64_decode(body);
              out.response_encoding = BodyEncoding::kBase64;
            } catch (const ParseError&) {
              warnings.push_back(where + ": response body does not decode; baseline dropped");
              return out;
            }
          } else {
            rec.body = body;
          }
        }
        if (const auto time = entry.find("time"); time != entry.end() && time->is_number()) {
          rec.elapsed_ms = std::max<std::int64_t>(0, std::llround(time->get<double>()));
        }
        out.response = std::move(rec);
      }
    }
  }
  return out;
}

}  // namespace

std::optional<Timestamp> parse_iso8601(std::string_view s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':') {
    return std::nullopt;
  }
  if (!read_int(s, 0, 4, y) || !read_int(s, 5, 2, mo) || !read_int(s, 8, 2, d) ||
      !read_int(s, 11, 2, h) || !read_int(s, 14, 2, mi) || !read_int(s, 17, 2, sec)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  int millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 3) millis = millis * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    for (int k = digits; k < 3; ++k) millis *= 10;
  }
  int offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int oh = 0, om = 0;
      if (!read_int(s, pos + 1, 2, oh)) return std::nullopt;
      std::size_t next = pos + 3;
      if (next < s.size() && s[next] == ':') ++next;
      if (!read_int(s, next, 2, om)) return std::nullopt;
      offset_minutes = (oh * 60 + om) * (s[pos] == '-' ? -1 : 1);
      pos = next + 2;
    }
  }
  if (pos != s.size()) return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  const auto t = sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} + milliseconds{millis} -
                 minutes{offset_minutes};
  return time_point_cast<milliseconds>(t);
}

HarParseResult parse_har_document(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed HAR document: " + std::string(e.what()),
                     "byte " + std::to_string(e.byte));
  }
  if (!doc.is_object()) throw ParseError("HAR root is not an object", "/");
  const auto log = doc.find("log");
  if (log == doc.end() || !log->is_object()) throw ParseError("missing log object", "/log");
  const auto entries = log->find("entries");
  if (entries == log->end() || !entries->is_array()) {
    throw ParseError("missing entries array", "/log/entries");
  }

  HarParseResult result;
  result.entry_count = entries->size();
  for (std::size_t i = 0; i < entries->size(); ++i) {
    auto entry = parse_entry((*entries)[i], "/log/entries/" + std::to_string(i), result.warnings);
    if (entry) {
      result.entries.push_back(std::move(*entry));
    } else {
      ++result.skipped;
    }
  }
  return result;
}

std::vector<BaseRequest> parse_har(std::string_view document) {
  auto parsed = parse_har_document(document);
  std::vector<BaseRequest> out;
  out.reserve(parsed.entries.size());
  for (auto& e : parsed.entries) out.push_back(std::move(e.request));
  return out;
}

bool host_matches(std::string_view pattern, const Url& url) {
  std::string_view host_pattern = pattern;
  std::optional<int> port;
  // Split an optional ":port"; bracketed IPv6 literals keep their colons.
  const auto colon = pattern.rfind(':');
  const auto bracket = pattern.rfind(']');
  if (colon != std::string_view::npos && (bracket == std::string_view::npos || colon > bracket)) {
    int p = 0;
    const auto digits = pattern.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), p);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return false;
    port = p;
    host_pattern = pattern.substr(0, colon);
  }
  if (host_pattern.size() >= 2 && host_pattern.front() == '[' && host_pattern.back() == ']') {
    host_pattern = host_pattern.substr(1, host_pattern.size() - 2);
  }
  if (port && *port != url.effective_port()) return false;

  const std::string host = text::to_lower(url.host);
  const std::string pat = text::to_lower(host_pattern);
  if (pat.rfind("*.", 0) == 0) {
    const std::string suffix = pat.substr(1);  // ".example-site"
    return host.size() > suffix.size() &&
           host.compare(host.size() - suffix.size(), suffix.size(), suffix) == 0;
  }
  return host == pat;
}

void ScopePolicy::validate() const {
  if (allowed_hosts.empty()) {
    throw ValidationError("scope/allowed_hosts", "an explicit host allowlist is required");
  }
  for (std::size_t i = 0; i < allowed_hosts.size(); ++i) {
    if (allowed_hosts[i].empty()) {
      throw ValidationError("scope/allowed_hosts/" + std::to_string(i), "empty host pattern");
    }
  }
  if (max_requests == 0) throw ValidationError("scope/max_requests", "must be positive");
}

bool ScopePolicy::host_allowed(const Url& url) const {
  for (const auto& pattern : allowed_hosts) {
    if (host_matches(pattern, url)) return true;
  }
  return false;
}

bool ScopePolicy::path_allowed(const Url& url) const {
  const std::string path = url.path.empty() ? "/" : url.path;
  for (const auto& prefix : denied_path_prefixes) {
    if (path.rfind(prefix, 0) == 0) return false;
  }
  return true;
}

bool ScopePolicy::allows(std::string_view url) const {
  const auto parsed = Url::parse(url);
  return parsed && host_allowed(*parsed) && path_allowed(*parsed);
}

namespace {

const BaseRequest& request_of(const BaseRequest& r) { return r; }
const BaseRequest& request_of(const CapturedEntry& e) { return e.request; }

template <typename T>
ScopePartition<T> partition(std::vector<T> items, const ScopePolicy& policy) {
  policy.validate();
  ScopePartition<T> out;
  for (auto& item : items) {
    const bool ok = policy.allows(request_of(item).url) && out.in_scope.size() < policy.max_requests;
    (ok ? out.in_scope : out.excluded).push_back(std::move(item));
  }
  return out;
}

template <typename T>
std::vector<T> dedupe_items(std::vector<T> items) {
  std::unordered_set<std::string> seen;
  std::vector<T> out;
  for (auto& item : items) {
    const BaseRequest& r = request_of(item);
    std::string key = r.method + '\n' + r.url + '\n' + r.body;
    if (seen.insert(std::move(key)).second) out.push_back(std::move(item));
  }
  return out;
}

}  // namespace

ScopePartition<BaseRequest> apply_scope(std::vector<BaseRequest> requests,
                                        const ScopePolicy& policy) {
  return partition(std::move(requests), policy);
}

ScopePartition<CapturedEntry> apply_scope(std::vector<CapturedEntry> entries,
                                          const ScopePolicy& policy) {
  return partition(std::move(entries), policy);
}

std::vector<BaseRequest> dedupe(std::vector<BaseRequest> requests) {
  return dedupe_items(std::move(requests));
}

std::vector<CapturedEntry> dedupe(std::vector<CapturedEntry> entries) {
  return dedupe_items(std::move(entries));
}

IngestSummary ingest_har(Store& store, std::string_view document, const ScopePolicy& scope,
                         bool remove_duplicates) {
  scope.validate();
  auto parsed = parse_har_document(document);
  IngestSummary summary;
  summary.parsed = parsed.entry_count;
  summary.skipped = parsed.skipped;
  summary.warnings = std::move(parsed.warnings);

  std::vector<CapturedEntry> entries = std::move(parsed.entries);
  if (remove_duplicates) {
    const std::size_t before = entries.size();
    entries = dedupe(std::move(entries));
    summary.deduped = before - entries.size();
  }
  auto partition = apply_scope(std::move(entries), scope);
  summary.excluded = partition.excluded.size();
  for (const auto& e : partition.excluded) {
    summary.warnings.push_back("excluded by scope: " + e.request.method + " " + e.request.url);
  }
  for (const auto& e : partition.in_scope) {
    ExchangeContext ctx;
    ctx.kind = ExchangeKind::kOriginal;
    ctx.body_encoding = e.body_encoding;
    ctx.response_encoding = e.response_encoding;
    summary.stored_ids.push_back(store.persist_exchange(e.request, std::nullopt, e.response, ctx));
  }
  return summary;
}

}  // namespace bacscan
