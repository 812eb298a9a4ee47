#include "bacscan/config.hpp"

#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "bacscan/error.hpp"
#include "bacscan/scan.hpp"

namespace bacscan {

using nlohmann::json;

namespace {

// Walks one JSON object, checking types and rejecting keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path, std::initializer_list<const char*> keys)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
    for (const auto& [key, value] : j_.items()) {
      bool known = false;
      for (const char* k : keys) known = known || key == k;
      if (!known) fail(path_ + "/" + key, "unknown key");
    }
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where.empty() ? "/" : where, what);
  }

  const json* get(const char* key) const {
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string at(const char* key) const { return path_ + "/" + key; }

  void read(const char* key, std::string& out) const {
    if (const json* v = get(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void read(const char* key, bool& out) const {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void read(const char* key, double& out) const {
    if (const json* v = get(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<double>();
    }
  }

  void read(const char* key, std::size_t& out) const {
    if (const json* v = get(key)) {
      if (!v->is_number_unsigned()) fail(at(key), "expected a non-negative integer");
      out = v->get<std::size_t>();
    }
  }

  void read(const char* key, int& out) const {
    if (const json* v = get(key)) {
      if (!v->is_number_integer()) fail(at(key), "expected an integer");
      out = v->get<int>();
    }
  }

  void read(const char* key, std::vector<std::string>& out) const {
    if (const json* v = get(key)) {
      if (!v->is_array()) fail(at(key), "expected an array of strings");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_string()) fail(at(key) + "/" + std::to_string(i), "expected a string");
        out.push_back((*v)[i].get<std::string>());
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
};

void read_scope(const Section& root, ScopePolicy& scope) {
  const json* j = root.get("scope");
  if (!j) return;
  Section s(*j, "/scope", {"allowed_hosts", "denied_path_prefixes", "max_requests"});
  s.read("allowed_hosts", scope.allowed_hosts);
  s.read("denied_path_prefixes", scope.denied_path_prefixes);
  s.read("max_requests", scope.max_requests);
}

void read_dispatch(const Section& root, DispatchConfig& d) {
  const json* j = root.get("dispatch");
  if (!j) return;
  Section s(*j, "/dispatch",
            {"max_in_flight", "per_host_rate", "timeout_ms", "retries", "follow_redirects", "verify_tls"});
  s.read("max_in_flight", d.max_in_flight);
  s.read("per_host_rate", d.per_host_rate);
  std::size_t timeout = static_cast<std::size_t>(d.timeout.count());
  s.read("timeout_ms", timeout);
  d.timeout = std::chrono::milliseconds(timeout);
  s.read("retries", d.retries);
  s.read("follow_redirects", d.follow_redirects);
  s.read("verify_tls", d.verify_tls);
}

void read_detector(const Section& root, DetectorConfig& d) {
  const json* j = root.get("detector");
  if (!j) return;
  Section s(*j, "/detector", {"dissimilarity_threshold", "max_auto_len", "markup_types", "patterns"});
  s.read("dissimilarity_threshold", d.dissimilarity_threshold);
  s.read("max_auto_len", d.max_auto_len);
  s.read("markup_types", d.markup_types);
  if (const json* patterns = s.get("patterns")) {
    if (!patterns->is_array()) Section::fail("/detector/patterns", "expected an array");
    d.regex_set.clear();
    for (std::size_t i = 0; i < patterns->size(); ++i) {
      Section p((*patterns)[i], "/detector/patterns/" + std::to_string(i), {"name", "pattern", "validator"});
      SensitivePattern out;
      p.read("name", out.name);
      p.read("pattern", out.pattern);
      p.read("validator", out.validator);
      d.regex_set.push_back(std::move(out));
    }
  }
}

void read_iams(const Section& root, std::vector<IamDescriptor>& iams) {
  const json* j = root.get("iams");
  if (!j) return;
  if (!j->is_array()) Section::fail("/iams", "expected an array");
  iams.clear();
  const auto& registry = IamRegistry::builtin();
  for (std::size_t i = 0; i < j->size(); ++i) {
    const std::string where = "/iams/" + std::to_string(i);
    Section s((*j)[i], where, {"name", "enabled", "config"});
    IamDescriptor d;
    s.read("name", d.name);
    if (d.name.empty()) Section::fail(where + "/name", "required");
    if (!registry.contains(d.name)) Section::fail(where + "/name", "unknown IAM '" + d.name + "'");
    s.read("enabled", d.enabled);
    if (const json* c = s.get("config")) {
      if (!c->is_object()) Section::fail(where + "/config", "expected an object");
      d.config = *c;
    }
    iams.push_back(std::move(d));
  }
}

void read_service(const Section& root, ServiceConfig& svc) {
  const json* j = root.get("service");
  if (!j) return;
  Section s(*j, "/service", {"bind", "port", "allow_remote", "ui_dir"});
  s.read("bind", svc.bind);
  s.read("port", svc.port);
  s.read("allow_remote", svc.allow_remote);
  s.read("ui_dir", svc.ui_dir);
}

template <typename F>
void revalidate(const std::string& prefix, F&& check) {
  try {
    check();
  } catch (const ValidationError& e) {
    // Validation fields are relative paths such as "dispatch/retries".
    const std::string field = e.field();
    throw ConfigError("/" + (field.rfind(prefix, 0) == 0 ? field : prefix + "/" + field),
                      std::string(e.what()).substr(field.empty() ? 0 : field.size() + 2));
  }
}

}  // namespace

Config parse_config(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ConfigError("byte " + std::to_string(e.byte), "malformed JSON");
  }
  Config config;
  const Section root(doc, "",
                     {"store", "scope", "dispatch", "detector", "iams", "budget_per_request", "dedupe", "service"});
  std::string store = config.store.string();
  root.read("store", store);
  config.store = store;
  read_scope(root, config.scope);
  read_dispatch(root, config.dispatch);
  read_detector(root, config.detector);
  read_iams(root, config.iams);
  root.read("budget_per_request", config.budget_per_request);
  root.read("dedupe", config.dedupe);
  read_service(root, config.service);

  revalidate("dispatch", [&] { config.dispatch.validate(); });
  revalidate("detector", [&] { config.detector.validate(); });
  if (config.scope.max_requests == 0) throw ConfigError("/scope/max_requests", "must be positive");
  if (config.service.port < 0 || config.service.port > 65535) {
    throw ConfigError("/service/port", "must lie in 0..65535");
  }
  try {
    AttackPlan plan(config.iams);
  } catch (const ConfigError& e) {
    throw ConfigError("/iams", e.what());
  }
  return config;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot read config file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void apply_env_overrides(Config& config, const EnvLookup& env) {
  if (auto store = env("BACSCAN_STORE"); store && !store->empty()) config.store = *store;
  if (auto bind = env("BACSCAN_BIND"); bind && !bind->empty()) config.service.bind = *bind;
}

std::optional<std::string> process_env(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::optional<std::string>(v) : std::nullopt;
}

json to_json(const Config& c) {
  json patterns = json::array();
  for (const auto& p : c.detector.regex_set) {
    patterns.push_back({{"name", p.name}, {"pattern", p.pattern}, {"validator", p.validator}});
  }
  json iams = json::array();
  for (const auto& d : c.iams) iams.push_back({{"name", d.name}, {"enabled", d.enabled}, {"config", d.config}});
  return {{"store", c.store.string()},
          {"scope", to_json(c.scope)},
          {"dispatch", to_json(c.dispatch)},
          {"detector",
           {{"dissimilarity_threshold", c.detector.dissimilarity_threshold},
            {"max_auto_len", c.detector.max_auto_len},
            {"markup_types", c.detector.markup_types},
            {"patterns", patterns}}},
          {"iams", iams},
          {"budget_per_request", c.budget_per_request},
          {"dedupe", c.dedupe},
          {"service",
           {{"bind", c.service.bind},
            {"port", c.service.port},
            {"allow_remote", c.service.allow_remote},
            {"ui_dir", c.service.ui_dir}}}};
}

}  // namespace bacscan
