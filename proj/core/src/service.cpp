#include "bacscan/service.hpp"

#include <charconv>
#include <vector>

#include "bacscan/error.hpp"
#include "bacscan/levenshtein.hpp"
#include "bacscan/scan.hpp"
#include "bacscan/stats.hpp"
#include "bacscan/text.hpp"

namespace bacscan {

using nlohmann::json;

namespace {

constexpr std::size_t kDefaultPageSize = 50;
constexpr std::size_t kMaxPageSize = 500;

// Thrown inside handlers to produce a specific error response.
struct ApiError {
  int status;
  std::string code;
  std::string message;
  std::string field;
};

ApiResponse reply(int status, json body) {
  body["api_version"] = kApiVersion;
  return {status, "application/json", body.dump()};
}

ApiResponse error_reply(int status, const std::string& code, const std::string& message,
                        const std::string& field = {}) {
  json err = {{"code", code}, {"message", message}};
  err["field"] = field.empty() ? json(nullptr) : json(field);
  return reply(status, {{"error", err}});
}

std::vector<std::string> route_segments(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    const std::size_t slash = path.find('/', pos);
    const std::size_t end = slash == std::string_view::npos ? path.size() : slash;
    if (end > pos) parts.emplace_back(path.substr(pos, end - pos));
    if (slash == std::string_view::npos) break;
    pos = slash + 1;
  }
  return parts;
}

std::optional<std::int64_t> parse_id(const std::string& s) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v <= 0) return std::nullopt;
  return v;
}

std::size_t query_count(const ApiRequest& r, const char* key, std::size_t fallback, std::size_t min,
                        std::size_t max) {
  const auto it = r.query.find(key);
  if (it == r.query.end()) return fallback;
  std::size_t v = 0;
  const std::string& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < min || v > max) {
    throw ApiError{400, "bad_request",
                   "expected an integer in " + std::to_string(min) + ".." + std::to_string(max), key};
  }
  return v;
}

json body_json(const std::string& bytes) {
  if (text::is_valid_utf8(bytes)) return {{"encoding", "text"}, {"data", bytes}};
  return {{"encoding", "base64"}, {"data", text::base64_encode(bytes)}};
}

json headers_json(const Headers& headers) {
  json out = json::array();
  for (const auto& h : headers) out.push_back({{"name", h.name}, {"value", h.value}});
  return out;
}

json optional_id(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

json exchange_json(const Exchange& e) {
  json response = nullptr;
  if (e.response) {
    const auto& r = *e.response;
    response = {{"status", r.status},
                {"content_type", r.content_type},
                {"body", body_json(r.body)},
                {"elapsed_ms", r.elapsed_ms},
                {"transport_error", r.transport_error ? json(*r.transport_error) : json(nullptr)}};
  }
  return {{"id", e.id},
          {"kind", to_string(e.kind)},
          {"run_id", optional_id(e.run_id)},
          {"base_id", optional_id(e.base_id)},
          {"iam_name", e.iam_name},
          {"target", e.target ? json(to_string(*e.target)) : json(nullptr)},
          {"modification", e.modification},
          {"request",
           {{"method", e.request.method},
            {"url", e.request.url},
            {"headers", headers_json(e.request.headers)},
            {"body", body_json(e.request.body)}}},
          {"response", response}};
}

json hits_json(const std::vector<RegexHit>& hits) {
  json out = json::array();
  for (const auto& h : hits) out.push_back({{"pattern", h.pattern_name}, {"excerpt", h.excerpt}});
  return out;
}

json flag_json(const PveFlag& f) {
  return {{"flag_id", f.flag_id},
          {"mutated_id", f.mutated_id},
          {"baseline_id", optional_id(f.baseline_id)},
          {"run_id", optional_id(f.run_id)},
          {"classification", to_string(f.classification)},
          {"dissimilarity", f.dissimilarity},
          {"regex_hits", hits_json(f.regex_hits)},
          {"code_leak", f.code_leak},
          {"reason", f.reason}};
}

json verdict_json(const TriageVerdict& v) {
  return {{"flag_id", v.flag_id},
          {"verdict", to_string(v.verdict)},
          {"cwe_tags", v.cwe_tags},
          {"notes", v.notes},
          {"decided_at_ms", to_epoch_ms(v.decided_at)}};
}

json spans_json(const std::vector<DiffSpan>& spans) {
  json out = json::array();
  for (const auto& s : spans) out.push_back({{"begin", s.begin}, {"end", s.end}, {"kind", to_string(s.kind)}});
  return out;
}

json summary_json(const FlagRecord& r) {
  json j = flag_json(r.flag);
  j["iam_name"] = r.mutated.iam_name;
  j["target"] = r.mutated.target ? json(to_string(*r.mutated.target)) : json(nullptr);
  j["modification"] = r.mutated.modification;
  j["url"] = r.mutated.request.url;
  j["method"] = r.mutated.request.method;
  j["status"] = r.mutated.response ? json(r.mutated.response->status) : json(nullptr);
  j["verdict"] = r.verdict ? verdict_json(*r.verdict) : json(nullptr);
  return j;
}

json run_json(const ScanRun& run) {
  return {{"run_id", run.run_id},
          {"started_at_ms", to_epoch_ms(run.started_at)},
          {"ended_at_ms", run.ended_at ? json(to_epoch_ms(*run.ended_at)) : json(nullptr)},
          {"counts",
           {{"bases", run.counts.bases},
            {"mutations", run.counts.mutations},
            {"sent", run.counts.sent},
            {"transport_failures", run.counts.transport_failures}}},
          {"policy", run.policy}};
}

json parse_body(const ApiRequest& r) {
  if (text::trim(r.body).empty()) return json::object();
  try {
    json j = json::parse(r.body);
    if (!j.is_object()) throw ApiError{400, "bad_request", "request body must be a JSON object", ""};
    return j;
  } catch (const json::parse_error&) {
    throw ApiError{400, "bad_request", "request body is not valid JSON", ""};
  }
}

void expect_keys(const json& j, std::initializer_list<const char*> keys) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ApiError{400, "bad_request", "unknown field", key};
  }
}

std::string string_field(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_string()) throw ApiError{400, "bad_request", "expected a string", key};
  return v.get<std::string>();
}

Headers parse_headers(const json& j) {
  Headers out;
  if (j.is_object()) {
    for (const auto& [name, value] : j.items()) {
      if (!value.is_string()) throw ApiError{400, "bad_request", "expected a string", "headers/" + name};
      out.push_back({name, value.get<std::string>()});
    }
    return out;
  }
  if (!j.is_array()) throw ApiError{400, "bad_request", "expected an array of {name, value}", "headers"};
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& h = j[i];
    const std::string at = "headers/" + std::to_string(i);
    if (!h.is_object() || !h.contains("name") || !h["name"].is_string() || !h.contains("value") ||
        !h["value"].is_string()) {
      throw ApiError{400, "bad_request", "expected {name, value} strings", at};
    }
    out.push_back({h["name"].get<std::string>(), h["value"].get<std::string>()});
  }
  return out;
}

// Detector settings of the run the flag belongs to, so a replay is judged
// the way the original mutation was.
DetectorConfig run_detector(const DetectorConfig& base, const ScanRun& run) {
  DetectorConfig d = base;
  const json& p = run.policy.contains("detector") ? run.policy["detector"] : json::object();
  if (p.is_object()) {
    d.dissimilarity_threshold = p.value("dissimilarity_threshold", d.dissimilarity_threshold);
    d.max_auto_len = p.value("max_auto_len", d.max_auto_len);
    d.markup_types = p.value("markup_types", d.markup_types);
  }
  return d;
}

}  // namespace

TriageService::TriageService(Store& store, ServiceOptions options, std::shared_ptr<HttpTransport> transport)
    : store_(store),
      options_(std::move(options)),
      transport_(std::move(transport)),
      limiter_(std::make_shared<RateLimiter>((options_.dispatch.validate(), options_.dispatch.per_host_rate))) {
  options_.detector.validate();
  if (options_.scope) options_.scope->validate();
}

ApiResponse TriageService::handle(const ApiRequest& request) {
  const auto parts = route_segments(request.path);
  const auto method_is = [&](const char* m) { return request.method == m; };
  const auto not_allowed = [&] {
    return error_reply(405, "method_not_allowed", request.method + " is not supported on " + request.path);
  };
  std::lock_guard lock(mutex_);
  try {
    if (parts.size() < 3 || parts[0] != "api" || parts[1] != "v1") {
      return error_reply(404, "not_found", "no such endpoint: " + request.path);
    }
    const std::string& resource = parts[2];
    if (resource == "health" && parts.size() == 3) {
      return method_is("GET") ? reply(200, {{"status", "ok"}}) : not_allowed();
    }
    if (resource == "flags") {
      if (parts.size() == 3) return method_is("GET") ? list_flags(request) : not_allowed();
      const auto id = parse_id(parts[3]);
      if (!id) return error_reply(404, "not_found", "no such flag: " + parts[3]);
      if (parts.size() == 4) return method_is("GET") ? flag_detail(*id) : not_allowed();
      if (parts.size() == 5 && parts[4] == "verdict") {
        return method_is("POST") ? post_verdict(*id, request) : not_allowed();
      }
      if (parts.size() == 5 && parts[4] == "replay") {
        return method_is("POST") ? replay(*id, request) : not_allowed();
      }
    }
    if (resource == "runs") {
      if (parts.size() == 3) return method_is("GET") ? list_runs() : not_allowed();
      const auto id = parse_id(parts[3]);
      if (!id) return error_reply(404, "not_found", "no such run: " + parts[3]);
      if (parts.size() == 5 && parts[4] == "stats") return method_is("GET") ? run_stats(*id) : not_allowed();
    }
    return error_reply(404, "not_found", "no such endpoint: " + request.path);
  } catch (const ApiError& e) {
    return error_reply(e.status, e.code, e.message, e.field);
  } catch (const ValidationError& e) {
    return error_reply(400, "invalid", e.what(), e.field());
  } catch (const ParseError& e) {
    return error_reply(400, "bad_request", e.what());
  } catch (const NotFoundError& e) {
    return error_reply(404, "not_found", e.what());
  } catch (const ScopeRefusedError& e) {
    return error_reply(403, "scope_refused", e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "internal", e.what());
  }
}

ApiResponse TriageService::list_flags(const ApiRequest& request) {
  FlagFilter filter;
  if (auto it = request.query.find("classification"); it != request.query.end()) {
    filter.classification = parse_classification(text::to_lower(it->second) == "manual_review"
                                                     ? std::string("MANUAL_REVIEW")
                                                     : it->second);
    if (!filter.classification) {
      throw ApiError{400, "bad_request", "expected PVE, MANUAL_REVIEW or BENIGN", "classification"};
    }
  }
  if (auto it = request.query.find("iam"); it != request.query.end()) filter.iam_name = it->second;
  if (auto it = request.query.find("status"); it != request.query.end()) {
    filter.verdict_status = parse_verdict_status(it->second);
    if (!filter.verdict_status) {
      throw ApiError{400, "bad_request", "expected untriaged, triaged, confirmed or fppve", "status"};
    }
  }
  if (auto it = request.query.find("run"); it != request.query.end()) {
    filter.run_id = parse_id(it->second);
    if (!filter.run_id) throw ApiError{400, "bad_request", "expected a run id", "run"};
  }
  const std::size_t page = query_count(request, "page", 1, 1, 1'000'000);
  const std::size_t page_size = query_count(request, "page_size", kDefaultPageSize, 1, kMaxPageSize);

  const std::size_t total = store_.count_flags(filter);
  filter.offset = (page - 1) * page_size;
  filter.limit = page_size;
  json items = json::array();
  for (const auto& r : store_.query_flags(filter)) items.push_back(summary_json(r));
  return reply(200, {{"total", total}, {"page", page}, {"page_size", page_size}, {"items", items}});
}

ApiResponse TriageService::flag_detail(std::int64_t flag_id) {
  const FlagRecord r = store_.flag_record(flag_id);
  json diff = nullptr;
  if (r.baseline && r.baseline->response && r.mutated.response) {
    const DiffResult d = diff_spans(r.baseline->response->body, r.mutated.response->body);
    diff = {{"distance", d.distance},
            {"approximate", d.approximate},
            {"baseline", spans_json(d.baseline)},
            {"mutated", spans_json(d.mutated)}};
  }
  json history = json::array();
  for (const auto& v : store_.verdict_history(flag_id)) history.push_back(verdict_json(v));
  return reply(200, {{"flag", flag_json(r.flag)},
                     {"mutated", exchange_json(r.mutated)},
                     {"baseline", r.baseline ? exchange_json(*r.baseline) : json(nullptr)},
                     {"diff", diff},
                     {"verdict", r.verdict ? verdict_json(*r.verdict) : json(nullptr)},
                     {"verdict_history", history}});
}

ApiResponse TriageService::post_verdict(std::int64_t flag_id, const ApiRequest& request) {
  store_.flag(flag_id);  // 404 before any body complaints
  const json body = parse_body(request);
  expect_keys(body, {"verdict", "cwe_tags", "notes"});
  if (!body.contains("verdict")) throw ApiError{400, "bad_request", "required", "verdict"};
  TriageVerdict v;
  v.flag_id = flag_id;
  const auto verdict = parse_verdict(string_field(body, "verdict"));
  if (!verdict) throw ApiError{400, "bad_request", "expected CONFIRMED_VULN or FPPVE", "verdict"};
  v.verdict = *verdict;
  if (body.contains("cwe_tags")) {
    const json& tags = body["cwe_tags"];
    if (!tags.is_array()) throw ApiError{400, "bad_request", "expected an array of integers", "cwe_tags"};
    for (std::size_t i = 0; i < tags.size(); ++i) {
      if (!tags[i].is_number_integer()) {
        throw ApiError{400, "bad_request", "expected an integer", "cwe_tags/" + std::to_string(i)};
      }
      v.cwe_tags.push_back(tags[i].get<int>());
    }
  }
  if (body.contains("notes")) v.notes = string_field(body, "notes");
  v.decided_at = now_ms();
  const TriageVerdict stored = store_.record_verdict(v);
  return reply(201, {{"verdict", verdict_json(stored)}});
}

ApiResponse TriageService::replay(std::int64_t flag_id, const ApiRequest& request) {
  const PveFlag flag = store_.flag(flag_id);
  const json body = parse_body(request);
  expect_keys(body, {"method", "url", "headers", "body", "body_base64"});
  ReplayEdits edits;
  if (body.contains("method")) edits.method = string_field(body, "method");
  if (body.contains("url")) edits.url = string_field(body, "url");
  if (body.contains("headers")) edits.headers = parse_headers(body["headers"]);
  if (body.contains("body") && body.contains("body_base64")) {
    throw ApiError{400, "bad_request", "give body or body_base64, not both", "body_base64"};
  }
  if (body.contains("body")) edits.body = string_field(body, "body");
  if (body.contains("body_base64")) edits.body = text::base64_decode(string_field(body, "body_base64"));

  std::optional<ScanRun> run;
  if (flag.run_id) run = store_.run(*flag.run_id);
  ScopePolicy scope;
  if (options_.scope) {
    scope = *options_.scope;
  } else if (run && run->policy.contains("scope")) {
    scope = scope_from_json(run->policy["scope"]);
  }
  if (scope.allowed_hosts.empty()) {
    throw ScopeRefusedError("no scope configured for replays of flag " + std::to_string(flag_id));
  }
  Dispatcher dispatcher(scope, options_.dispatch, transport_, limiter_);
  const Detector detector(run ? run_detector(options_.detector, *run) : options_.detector);
  const ReplayResult result = replay_flag(store_, flag_id, edits, dispatcher, detector);

  const auto& resp = result.response;
  return reply(200, {{"flag_id", flag_id},
                     {"exchange_id", result.exchange_id},
                     {"request",
                      {{"method", result.request.method},
                       {"url", result.request.url},
                       {"headers", headers_json(result.request.headers)},
                       {"body", body_json(result.request.body)}}},
                     {"response",
                      {{"status", resp.status},
                       {"content_type", resp.content_type},
                       {"body", body_json(resp.body)},
                       {"elapsed_ms", resp.elapsed_ms},
                       {"transport_error", resp.transport_error ? json(*resp.transport_error) : json(nullptr)}}},
                     {"classification", to_string(result.classification.classification)},
                     {"dissimilarity", result.classification.dissimilarity},
                     {"regex_hits", hits_json(result.classification.regex_hits)},
                     {"code_leak", result.classification.code_leak},
                     {"reason", result.classification.reason}});
}

ApiResponse TriageService::list_runs() {
  json runs = json::array();
  for (const auto& r : store_.runs()) runs.push_back(run_json(r));
  return reply(200, {{"runs", runs}});
}

ApiResponse TriageService::run_stats(std::int64_t run_id) {
  const json report = to_json(build_report(store_, run_id));
  return reply(200, {{"run_id", run_id}, {"iams", report["iams"]}, {"totals", report["totals"]}});
}

}  // namespace bacscan
