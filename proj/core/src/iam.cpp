#include "bacscan/iam.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "bacscan/error.hpp"
#include "bacscan/text.hpp"
#include "bacscan/url.hpp"

namespace bacscan {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Longer digit runs are treated as hashes or tokens rather than identifiers.
constexpr std::size_t kMaxIdentifierDigits = 18;

bool is_identifier(std::string_view s) {
  return text::is_decimal_digits(s) && s.size() <= kMaxIdentifierDigits;
}

void sync_content_length(BaseRequest& request) {
  for (auto& h : request.headers) {
    if (text::iequals(h.name, "Content-Length")) h.value = std::to_string(request.body.size());
  }
}

std::string with_url(const Url& url) { return url.str(); }

std::optional<ordered_json> parse_object_body(const std::string& body) {
  if (body.empty()) return std::nullopt;
  auto parsed = ordered_json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  return parsed;
}

}  // namespace

// --- base interface ---------------------------------------------------------

std::vector<Edit> InformationAttackMethod::modify_url(const BaseRequest&) const { return {}; }
std::vector<Edit> InformationAttackMethod::modify_headers(const BaseRequest&) const { return {}; }
std::vector<Edit> InformationAttackMethod::modify_body(const BaseRequest&) const { return {}; }

std::vector<MutatedRequest> InformationAttackMethod::generate(const BaseRequest& base) const {
  std::vector<MutatedRequest> out;
  const auto emit = [&](std::vector<Edit> edits, MutationTarget target) {
    for (auto& edit : edits) {
      if (edit.request == base) continue;
      MutatedRequest m;
      m.base_id = base.request_id;
      m.iam_name = std::string(name());
      m.target = target;
      m.modification = std::string(name()) + ": " + edit.description;
      m.request = std::move(edit.request);
      out.push_back(std::move(m));
    }
  };
  emit(modify_url(base), MutationTarget::kUrl);
  emit(modify_headers(base), MutationTarget::kHeaders);
  emit(modify_body(base), MutationTarget::kBody);
  return out;
}

// --- iterate_identifiers ----------------------------------------------------

IdentifierIteration::IdentifierIteration(int window) : window_(window) {
  if (window < 1) throw ConfigError("window", "must be a positive integer");
}

std::vector<std::string> IdentifierIteration::neighbours(std::string_view digits) const {
  std::uint64_t value = 0;
  std::from_chars(digits.data(), digits.data() + digits.size(), value);
  std::vector<std::string> out;
  for (int k = window_; k >= 1; --k) {
    if (value >= static_cast<std::uint64_t>(k)) out.push_back(std::to_string(value - k));
  }
  for (int k = 1; k <= window_; ++k) out.push_back(std::to_string(value + k));
  return out;
}

std::vector<Edit> IdentifierIteration::modify_url(const BaseRequest& base) const {
  std::vector<Edit> edits;
  const auto url = Url::parse(base.url);
  if (!url) return edits;

  const auto segments = split_path(url->path);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!is_identifier(segments[i])) continue;
    for (const auto& value : neighbours(segments[i])) {
      auto changed = segments;
      changed[i] = value;
      Url u = *url;
      u.path = join_path(changed);
      BaseRequest r = base;
      r.url = with_url(u);
      edits.push_back({std::move(r), "path segment " + std::to_string(i) + " " + segments[i] +
                                         " -> " + value});
    }
  }

  if (url->query) {
    const auto params = split_query(*url->query);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].has_equals || !is_identifier(params[i].value)) continue;
      for (const auto& value : neighbours(params[i].value)) {
        auto changed = params;
        changed[i].value = value;
        Url u = *url;
        u.query = join_query(changed);
        BaseRequest r = base;
        r.url = with_url(u);
        edits.push_back({std::move(r), "query param '" + params[i].key + "' " + params[i].value +
                                           " -> " + value});
      }
    }
  }
  return edits;
}

std::vector<Edit> IdentifierIteration::modify_body(const BaseRequest& base) const {
  std::vector<Edit> edits;
  const auto object = parse_object_body(base.body);
  if (!object) return edits;
  for (const auto& [key, field] : object->items()) {
    std::string digits;
    bool as_string = false;
    if (field.is_number_unsigned() || (field.is_number_integer() && field.get<std::int64_t>() >= 0)) {
      digits = std::to_string(field.get<std::uint64_t>());
    } else if (field.is_string() && is_identifier(field.get<std::string>())) {
      digits = field.get<std::string>();
      as_string = true;
    } else {
      continue;
    }
    if (!is_identifier(digits)) continue;
    for (const auto& value : neighbours(digits)) {
      ordered_json changed = *object;
      if (as_string) {
        changed[key] = value;
      } else {
        changed[key] = std::stoull(value);
      }
      BaseRequest r = base;
      r.body = changed.dump();
      sync_content_length(r);
      edits.push_back({std::move(r), "body field '" + key + "' " + digits + " -> " + value});
    }
  }
  return edits;
}

// --- strip_headers ----------------------------------------------------------

std::vector<std::string> default_auth_headers() {
  return {"Authorization", "Cookie", "X-Api-Key", "X-Auth-Token"};
}

HeaderRemoval::HeaderRemoval(std::vector<std::string> auth_headers)
    : auth_headers_(std::move(auth_headers)) {}

std::vector<Edit> HeaderRemoval::modify_headers(const BaseRequest& base) const {
  std::vector<Edit> edits;
  for (std::size_t i = 0; i < base.headers.size(); ++i) {
    BaseRequest r = base;
    r.headers.erase(r.headers.begin() + static_cast<std::ptrdiff_t>(i));
    edits.push_back({std::move(r), "removed header '" + base.headers[i].name + "'"});
  }
  const auto is_auth = [&](const Header& h) {
    return std::any_of(auth_headers_.begin(), auth_headers_.end(),
                       [&](const std::string& a) { return text::iequals(a, h.name); });
  };
  if (std::any_of(base.headers.begin(), base.headers.end(), is_auth)) {
    BaseRequest r = base;
    std::string removed;
    for (const auto& h : base.headers) {
      if (!is_auth(h)) continue;
      if (!removed.empty()) removed += ", ";
      removed += h.name;
    }
    std::erase_if(r.headers, is_auth);
    edits.push_back({std::move(r), "removed all auth headers (" + removed + ")"});
  }
  return edits;
}

// --- mutate_url_params ------------------------------------------------------

std::vector<std::string> default_url_payloads() { return {"0", "1", "true", "null", "*"}; }

UrlParameterTampering::UrlParameterTampering(std::vector<std::string> payloads)
    : payloads_(std::move(payloads)) {}

std::vector<Edit> UrlParameterTampering::modify_url(const BaseRequest& base) const {
  std::vector<Edit> edits;
  const auto url = Url::parse(base.url);
  if (!url || !url->query) return edits;
  const auto params = split_query(*url->query);

  const auto make = [&](std::vector<QueryParam> changed, std::string description) {
    Url u = *url;
    if (changed.empty()) {
      u.query.reset();
    } else {
      u.query = join_query(changed);
    }
    BaseRequest r = base;
    r.url = with_url(u);
    edits.push_back({std::move(r), std::move(description)});
  };

  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& key = params[i].key;
    {
      auto changed = params;
      changed[i].value.clear();
      changed[i].has_equals = true;
      make(std::move(changed), "query param '" + key + "' emptied");
    }
    {
      auto changed = params;
      changed.erase(changed.begin() + static_cast<std::ptrdiff_t>(i));
      make(std::move(changed), "query param '" + key + "' removed");
    }
    for (const auto& payload : payloads_) {
      auto changed = params;
      changed[i].value = payload;
      changed[i].has_equals = true;
      make(std::move(changed), "query param '" + key + "' set to '" + payload + "'");
    }
  }
  return edits;
}

// --- strip_body -------------------------------------------------------------

std::vector<Edit> BodyRemoval::modify_body(const BaseRequest& base) const {
  if (base.body.empty()) return {};
  BaseRequest r = base;
  r.body.clear();
  sync_content_length(r);
  return {{std::move(r), "request body removed (" + std::to_string(base.body.size()) + " bytes)"}};
}

// --- append_header_noise ----------------------------------------------------

std::vector<std::string> default_header_noise() { return {"'", "0"}; }

HeaderNoise::HeaderNoise(std::vector<std::string> payloads) : payloads_(std::move(payloads)) {}

std::vector<Edit> HeaderNoise::modify_headers(const BaseRequest& base) const {
  std::vector<Edit> edits;
  for (std::size_t i = 0; i < base.headers.size(); ++i) {
    for (const auto& payload : payloads_) {
      BaseRequest r = base;
      r.headers[i].value += payload;
      edits.push_back(
          {std::move(r), "appended '" + payload + "' to header '" + base.headers[i].name + "'"});
    }
  }
  return edits;
}

// --- append_json_fields -----------------------------------------------------

ordered_json default_json_extras() {
  ordered_json extras = ordered_json::object();
  extras["admin"] = true;
  extras["debug"] = true;
  return extras;
}

JsonFieldInjection::JsonFieldInjection(ordered_json fields) : fields_(std::move(fields)) {
  if (!fields_.is_object()) throw ConfigError("fields", "must be an object");
}

std::vector<Edit> JsonFieldInjection::modify_body(const BaseRequest& base) const {
  std::vector<Edit> edits;
  const auto object = parse_object_body(base.body);
  if (!object) return edits;
  for (const auto& [key, value] : fields_.items()) {
    ordered_json changed = *object;
    const bool collision = changed.contains(key);
    changed[key] = value;
    BaseRequest r = base;
    r.body = changed.dump();
    sync_content_length(r);
    std::string description = collision ? "set field '" + key + "' to " + value.dump() +
                                              " (overwrites existing key)"
                                        : "appended field '" + key + "': " + value.dump();
    edits.push_back({std::move(r), std::move(description)});
  }
  return edits;
}

// --- free functions ---------------------------------------------------------

std::vector<MutatedRequest> iterate_identifiers(const BaseRequest& base, int window) {
  return IdentifierIteration(window).generate(base);
}

std::vector<MutatedRequest> strip_headers(const BaseRequest& base,
                                          std::vector<std::string> auth_headers) {
  return HeaderRemoval(std::move(auth_headers)).generate(base);
}

std::vector<MutatedRequest> mutate_url_params(const BaseRequest& base,
                                              std::vector<std::string> payloads) {
  return UrlParameterTampering(std::move(payloads)).generate(base);
}

std::vector<MutatedRequest> strip_body(const BaseRequest& base) {
  return BodyRemoval().generate(base);
}

std::vector<MutatedRequest> append_header_noise(const BaseRequest& base,
                                                std::vector<std::string> payloads) {
  return HeaderNoise(std::move(payloads)).generate(base);
}

std::vector<MutatedRequest> append_json_fields(const BaseRequest& base,
                                               ordered_json extra_fields) {
  return JsonFieldInjection(std::move(extra_fields)).generate(base);
}

// --- registry ---------------------------------------------------------------

namespace {

void reject_unknown_keys(const json& config, std::initializer_list<std::string_view> allowed) {
  if (!config.is_object()) throw ConfigError("", "IAM config must be an object");
  for (const auto& [key, value] : config.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(key, "unknown IAM config key");
    }
  }
}

std::vector<std::string> string_list(const json& config, const char* key,
                                     std::vector<std::string> fallback) {
  const auto it = config.find(key);
  if (it == config.end()) return fallback;
  if (!it->is_array()) throw ConfigError(key, "must be an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < it->size(); ++i) {
    if (!(*it)[i].is_string()) {
      throw ConfigError(std::string(key) + "/" + std::to_string(i), "must be a string");
    }
    out.push_back((*it)[i].get<std::string>());
  }
  return out;
}

}  // namespace

const IamRegistry& IamRegistry::builtin() {
  static const IamRegistry registry = [] {
    IamRegistry r;
    r.add(std::string(kIterateIdentifiers), {MutationTarget::kUrl, MutationTarget::kBody},
          [](const json& c) {
            reject_unknown_keys(c, {"window"});
            int window = 2;
            if (const auto it = c.find("window"); it != c.end()) {
              if (!it->is_number_integer()) throw ConfigError("window", "must be an integer");
              window = it->get<int>();
            }
            return std::make_unique<IdentifierIteration>(window);
          });
    r.add(std::string(kStripHeaders), {MutationTarget::kHeaders}, [](const json& c) {
      reject_unknown_keys(c, {"auth_headers"});
      return std::make_unique<HeaderRemoval>(string_list(c, "auth_headers", default_auth_headers()));
    });
    r.add(std::string(kMutateUrlParams), {MutationTarget::kUrl}, [](const json& c) {
      reject_unknown_keys(c, {"payloads"});
      return std::make_unique<UrlParameterTampering>(
          string_list(c, "payloads", default_url_payloads()));
    });
    r.add(std::string(kStripBody), {MutationTarget::kBody}, [](const json& c) {
      reject_unknown_keys(c, {});
      return std::make_unique<BodyRemoval>();
    });
    r.add(std::string(kAppendHeaderNoise), {MutationTarget::kHeaders}, [](const json& c) {
      reject_unknown_keys(c, {"payloads"});
      return std::make_unique<HeaderNoise>(string_list(c, "payloads", default_header_noise()));
    });
    r.add(std::string(kAppendJsonFields), {MutationTarget::kBody}, [](const json& c) {
      reject_unknown_keys(c, {"fields"});
      ordered_json fields = default_json_extras();
      if (const auto it = c.find("fields"); it != c.end()) {
        if (!it->is_object()) throw ConfigError("fields", "must be an object");
        // Round-trip through text so key order follows the config document.
        fields = ordered_json::parse(it->dump());
      }
      return std::make_unique<JsonFieldInjection>(std::move(fields));
    });
    return r;
  }();
  return registry;
}

void IamRegistry::add(std::string name, std::vector<MutationTarget> targets, IamFactory factory) {
  if (contains(name)) throw ConfigError(name, "IAM already registered");
  if (targets.empty()) throw ConfigError(name, "IAM must target at least one request part");
  entries_.push_back({std::move(name), std::move(targets), std::move(factory)});
}

bool IamRegistry::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

std::vector<std::string> IamRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::unique_ptr<InformationAttackMethod> IamRegistry::create(const IamDescriptor& descriptor) const {
  const auto it = std::find_if(entries_.begin(), entries_.end(),
                               [&](const Entry& e) { return e.name == descriptor.name; });
  if (it == entries_.end()) throw ConfigError(descriptor.name, "unknown IAM");
  try {
    // A null config means no options.
    return it->factory(descriptor.config.is_null() ? nlohmann::json::object() : descriptor.config);
  } catch (const ConfigError& e) {
    std::string message = e.what();
    if (!e.location().empty()) message.erase(0, e.location().size() + 2);
    throw ConfigError(descriptor.name + "/config" + (e.location().empty() ? "" : "/" + e.location()), message);
  }
}

std::vector<IamDescriptor> IamRegistry::default_descriptors() const {
  std::vector<IamDescriptor> out;
  for (const auto& e : entries_) out.push_back({e.name, e.targets, json::object(), true});
  return out;
}

AttackPlan::AttackPlan(const std::vector<IamDescriptor>& descriptors, const IamRegistry& registry)
    : descriptors_(descriptors) {
  std::set<std::string> seen;
  for (const auto& d : descriptors_) {
    if (!seen.insert(d.name).second) throw ConfigError(d.name, "duplicate IAM name in registry");
    methods_.push_back(d.enabled ? registry.create(d) : nullptr);
    if (d.targets.empty() && methods_.back()) descriptors_[methods_.size() - 1].targets = methods_.back()->targets();
  }
}

std::vector<MutatedRequest> AttackPlan::generate(const BaseRequest& base, std::size_t budget) const {
  std::vector<MutatedRequest> out;
  for (const auto& method : methods_) {
    if (!method) continue;
    auto produced = method->generate(base);
    for (auto& m : produced) {
      if (budget != 0 && out.size() >= budget) return out;
      out.push_back(std::move(m));
    }
  }
  return out;
}

std::vector<std::string> AttackPlan::names() const {
  std::vector<std::string> out;
  for (const auto& d : descriptors_) {
    if (d.enabled) out.push_back(d.name);
  }
  return out;
}

std::vector<MutatedRequest> generate_all(const BaseRequest& base,
                                         const std::vector<IamDescriptor>& registry,
                                         std::size_t budget) {
  return AttackPlan(registry).generate(base, budget);
}

}  // namespace bacscan
