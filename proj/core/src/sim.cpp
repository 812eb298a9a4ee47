#include "bacscan/sim.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <random>

#include "bacscan/error.hpp"
#include "bacscan/text.hpp"
#include "bacscan/url.hpp"

namespace bacscan::sim {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// mt19937_64's raw output is fixed by the standard, unlike the library
// distributions, so all derived values are reproduced exactly everywhere.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t id)
      : gen_(splitmix64(seed ^ splitmix64(stream * 0x100000001B3ULL + id))) {}

  std::uint64_t below(std::uint64_t n) { return gen_() % n; }
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo + 1); }

  template <std::size_t N>
  const char* pick(const char* const (&items)[N]) {
    return items[below(N)];
  }

  std::string chars(std::size_t n, std::string_view alphabet) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += alphabet[below(alphabet.size())];
    return out;
  }

  std::string digits(std::size_t n) { return chars(n, "0123456789"); }

 private:
  std::mt19937_64 gen_;
};

enum Stream : std::uint64_t { kUser = 1, kOrder, kStore, kSecret, kToken, kBig, kDebug };

constexpr std::string_view kAlnum = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
constexpr std::string_view kHex = "0123456789abcdef";

const char* const kFirstNames[] = {"Maria", "James", "Aisha", "Chen", "Olga", "Rahul", "Sofia",
                                   "Kwame", "Elena", "Tomas", "Yuki", "Fatima", "Liam", "Noor",
                                   "Diego", "Hannah", "Ivan", "Amara", "Lucas", "Mei"};
const char* const kLastNames[] = {"Lopez", "Walker", "Okafor", "Wang", "Petrova", "Sharma", "Rossi",
                                  "Mensah", "Novak", "Silva", "Tanaka", "Haddad", "Murphy", "Karimi",
                                  "Fernandez", "Schmidt", "Ivanov", "Nwosu", "Martin", "Chen"};
const char* const kStreets[] = {"Cedar", "Maple", "Oak", "Pine", "Elm", "Willow", "Birch", "Lake",
                                "Hill", "Sunset", "River", "Park", "Washington", "Franklin", "Main"};
const char* const kSuffixes[] = {"Street", "Avenue", "Lane", "Road", "Drive", "Court", "Boulevard", "Way"};
const char* const kCities[] = {"Springfield", "Riverton", "Lakewood", "Fairview", "Greenville",
                               "Madison", "Georgetown", "Clinton", "Salem", "Bristol"};
const char* const kStates[] = {"NY", "CA", "TX", "WA", "IL", "MA", "OR", "GA", "CO", "VA"};
const char* const kEmployers[] = {"Northwind Traders", "Contoso Health", "Fabrikam Logistics",
                                  "Tailspin Airlines", "Adventure Works", "Wide World Importers"};
const char* const kEvents[] = {"password changed", "login from new device", "address updated",
                               "payment method added", "support ticket opened", "newsletter opt-in",
                               "two-factor disabled", "profile photo updated"};
const char* const kItems[] = {"Wireless Mouse", "USB-C Hub", "Desk Lamp", "Notebook Set", "Water Bottle",
                              "Headphones", "Phone Case", "Backpack", "Coffee Grinder", "Yoga Mat"};

std::string two(std::uint64_t v) { return (v < 10 ? "0" : "") + std::to_string(v); }

std::string street_address(Rng& rng) {
  return std::to_string(rng.between(10, 9899)) + " " + rng.pick(kStreets) + " " + rng.pick(kSuffixes);
}

std::string ssn(Rng& rng) {
  return std::to_string(rng.between(100, 665)) + "-" + two(rng.between(10, 99)) + "-" +
         std::to_string(rng.between(1000, 9999));
}

std::string phone(Rng& rng) {
  return "555-" + std::to_string(rng.between(200, 999)) + "-" + std::to_string(rng.between(1000, 9999));
}

std::string email_for(const std::string& first, const std::string& last, std::int64_t id) {
  return text::to_lower(first) + "." + text::to_lower(last) + std::to_string(id) + "@mail.example.com";
}

std::string timestamp(Rng& rng) {
  return "2024-" + two(rng.between(1, 12)) + "-" + two(rng.between(1, 28)) + "T" + two(rng.below(24)) +
         ":" + two(rng.below(60)) + ":00Z";
}

// 16-digit Visa-shaped number with a valid Luhn check digit, in groups of 4.
std::string card_number(Rng& rng) {
  std::string digits = "4" + rng.digits(14);
  int sum = 0;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    int d = digits[digits.size() - 1 - i] - '0';
    if (i % 2 == 0) {
      d *= 2;
      if (d > 9) d -= 9;
    }
    sum += d;
  }
  digits += static_cast<char>('0' + (10 - sum % 10) % 10);
  return digits.substr(0, 4) + " " + digits.substr(4, 4) + " " + digits.substr(8, 4) + " " + digits.substr(12, 4);
}

bool user_exists(std::int64_t id) { return id == 0 || id == 1 || (id >= 13480 && id <= 13510); }
bool order_exists(std::int64_t id) { return id >= 995 && id <= 1010; }

ordered_json user_record(std::uint64_t seed, std::int64_t id) {
  if (id == kTesterUser) return {{"id", id}, {"name", "QA Tester"}};
  Rng rng(seed, kUser, static_cast<std::uint64_t>(id));
  const std::string first = rng.pick(kFirstNames);
  const std::string last = rng.pick(kLastNames);
  ordered_json activity = ordered_json::array();
  for (int i = 0; i < 5; ++i) activity.push_back({{"at", timestamp(rng)}, {"event", rng.pick(kEvents)}});
  return {{"id", id},
          {"name", first + " " + last},
          {"email", email_for(first, last, id)},
          {"ssn", ssn(rng)},
          {"phone", phone(rng)},
          {"date_of_birth", std::to_string(rng.between(1950, 2003)) + "-" + two(rng.between(1, 12)) + "-" +
                                two(rng.between(1, 28))},
          {"address",
           {{"street", street_address(rng)},
            {"city", rng.pick(kCities)},
            {"state", rng.pick(kStates)},
            {"zip", rng.digits(5)}}},
          {"employer", rng.pick(kEmployers)},
          {"recent_activity", activity},
          {"preferences", {{"newsletter", rng.below(2) == 1}, {"sms_alerts", rng.below(2) == 1}}}};
}

ordered_json order_record(std::uint64_t seed, std::int64_t id) {
  if (id == kTesterOrder) return {{"order_id", id}, {"status", "delivered"}};
  Rng rng(seed, kOrder, static_cast<std::uint64_t>(id));
  const std::string first = rng.pick(kFirstNames);
  const std::string last = rng.pick(kLastNames);
  ordered_json items = ordered_json::array();
  std::uint64_t total_cents = 0;
  const auto count = rng.between(3, 5);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto cents = rng.between(499, 14999);
    const auto qty = rng.between(1, 3);
    total_cents += cents * qty;
    items.push_back({{"sku", "SKU-" + rng.digits(5)},
                     {"name", rng.pick(kItems)},
                     {"qty", qty},
                     {"unit_price", std::to_string(cents / 100) + "." + two(cents % 100)}});
  }
  return {{"order_id", id},
          {"status", "shipped"},
          {"placed_at", timestamp(rng)},
          {"customer", {{"name", first + " " + last}, {"email", email_for(first, last, id)}, {"phone", phone(rng)}}},
          {"shipping_address", street_address(rng) + ", " + rng.pick(kCities) + ", " + rng.pick(kStates)},
          {"payment",
           {{"card_number", card_number(rng)},
            {"expiry", two(rng.between(1, 12)) + "/" + std::to_string(rng.between(26, 31))},
            {"cardholder", first + " " + last}}},
          {"items", items},
          {"total", std::to_string(total_cents / 100) + "." + two(total_cents % 100)}};
}

struct Store {
  int id;
  std::string name;
  std::string address;
  double lat;
  double lon;
  bool listed;
};

constexpr double kHomeLat = 40.7128;
constexpr double kHomeLon = -74.0060;

double round4(double v) { return std::round(v * 10000.0) / 10000.0; }

std::vector<Store> stores(std::uint64_t seed) {
  std::vector<Store> out;
  for (int id = 1; id <= 40; ++id) {
    Rng rng(seed, kStore, static_cast<std::uint64_t>(id));
    Store s;
    s.id = id;
    s.name = std::string("Noodle House #") + std::to_string(id);
    s.address = street_address(rng) + ", " + rng.pick(kCities) + ", " + rng.pick(kStates);
    s.listed = id <= 2;
    if (s.listed) {
      s.lat = round4(kHomeLat + 0.001 * static_cast<double>(rng.between(1, 9)));
      s.lon = round4(kHomeLon - 0.001 * static_cast<double>(rng.between(1, 9)));
    } else {
      s.lat = round4(30.0 + static_cast<double>(rng.below(50000)) / 10000.0);
      s.lon = round4(-120.0 + static_cast<double>(rng.below(300000)) / 10000.0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

ordered_json to_json(const Store& s) {
  return {{"store_id", s.id}, {"name", s.name}, {"address", s.address}, {"lat", s.lat}, {"lon", s.lon}};
}

std::optional<double> parse_coordinate(const std::string& raw) {
  if (raw.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(raw.c_str(), &end);
  if (end != raw.c_str() + raw.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

double distance_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kRadians = 3.14159265358979323846 / 180.0;
  const double x = (lon2 - lon1) * kRadians * std::cos((lat1 + lat2) / 2.0 * kRadians);
  const double y = (lat2 - lat1) * kRadians;
  return std::sqrt(x * x + y * y) * 6371.0;
}

std::optional<std::string> query_value(const std::string& query, std::string_view key) {
  for (const auto& p : split_query(query)) {
    if (p.key == key) return p.value;
  }
  return std::nullopt;
}

std::optional<std::int64_t> parse_id(const std::string& raw) {
  if (!text::is_decimal_digits(raw) || raw.size() > 12) return std::nullopt;
  std::int64_t v = 0;
  std::from_chars(raw.data(), raw.data() + raw.size(), v);
  return v;
}

SimResponse json_response(int status, const ordered_json& body) {
  return {status, "application/json", body.dump(2)};
}

SimResponse error(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

std::string secret(std::uint64_t seed, std::uint64_t which, std::size_t n, std::string_view alphabet = kAlnum) {
  Rng rng(seed, kSecret, which);
  return rng.chars(n, alphabet);
}

std::string python_config(std::uint64_t seed) {
  std::string s;
  s += "import os\nimport logging\n\n";
  s += "# Billing service configuration. Loaded by deploy/entrypoint.sh at container start.\n";
  s += "# Values below override the environment in production.\n\n";
  s += "LOG_LEVEL = os.environ.get(\"LOG_LEVEL\", \"INFO\")\n";
  s += "DATABASE_URL = \"postgres://billing:" + secret(seed, 1, 18) + "@db-primary.internal:5432/billing\"\n";
  s += "DB_PASSWORD = \"" + secret(seed, 1, 18) + "\"\n";
  s += "AWS_ACCESS_KEY_ID = \"AKIA" + secret(seed, 2, 16, "ABCDEFGHIJKLMNOPQRSTUVWXYZ234567") + "\"\n";
  s += "AWS_SECRET_ACCESS_KEY = \"" + secret(seed, 3, 40) + "\"\n";
  s += "PAYMENTS_API_KEY = \"sk_live_" + secret(seed, 4, 24) + "\"\n";
  s += "ADMIN_EMAIL = \"billing-admin@corp.example.com\"\n";
  s += "ONCALL_EMAILS = [\"ops-primary@corp.example.com\", \"ops-secondary@corp.example.com\"]\n\n";
  s += "logging.basicConfig(level=LOG_LEVEL)\nlog = logging.getLogger(\"billing\")\n\n\n";
  s += "def connect():\n    import psycopg2\n    log.info(\"connecting to %s\", DATABASE_URL.split(\"@\")[-1])\n";
  s += "    return psycopg2.connect(DATABASE_URL, connect_timeout=5)\n\n\n";
  s += "def payment_headers():\n    return {\"Authorization\": \"Bearer \" + PAYMENTS_API_KEY,\n";
  s += "            \"Content-Type\": \"application/json\"}\n\n\n";
  s += "def rotate_credentials(client):\n    \"\"\"Rotation is manual until the vault migration lands.\"\"\"\n";
  s += "    client.update(secret_id=\"billing/db\", value=DB_PASSWORD)\n";
  s += "    client.update(secret_id=\"billing/aws\", value=AWS_SECRET_ACCESS_KEY)\n";
  s += "    log.warning(\"credentials pushed to %d replicas\", client.replicas)\n";
  return s;
}

std::string js_settings(std::uint64_t seed) {
  std::string s;
  s += "var settings = {\n";
  s += "  apiBase: \"https://api.internal.example.com/v2\",\n";
  s += "  adminEmail: \"root@corp.example.com\",\n";
  s += "  supportEmail: \"helpdesk@corp.example.com\",\n";
  s += "  password: \"" + secret(seed, 5, 16) + "\",\n";
  s += "  apiKey: \"" + secret(seed, 6, 32, kHex) + "\",\n";
  s += "  sessionSecret: \"" + secret(seed, 7, 24) + "\",\n";
  s += "  retry: { attempts: 3, backoffMs: 250 },\n";
  s += "  features: { betaCheckout: true, legacyReports: false }\n";
  s += "};\n\n";
  s += "function authHeaders() {\n  return {\n    \"X-Api-Key\": settings.apiKey,\n";
  s += "    \"X-Admin\": settings.adminEmail\n  };\n}\n\n";
  s += "function bootstrap(app) {\n  app.configure(settings.apiBase, authHeaders());\n";
  s += "  app.on(\"error\", function (err) {\n    console.error(\"request failed\", err.status);\n";
  s += "    if (err.status === 401) { app.login(settings.adminEmail, settings.password); }\n  });\n";
  s += "  return app;\n}\n\nmodule.exports = { settings: settings, bootstrap: bootstrap };\n";
  return s;
}

const char* const kHtml =
    "<!doctype html>\n<html lang=\"en\">\n<head>\n  <meta charset=\"utf-8\">\n"
    "  <title>Account portal</title>\n  <link rel=\"stylesheet\" href=\"/static/app.css\">\n"
    "</head>\n<body>\n  <main id=\"app\">\n    <h1>Welcome back</h1>\n"
    "    <form id=\"login\"><input name=\"email\" type=\"email\"><input name=\"password\" type=\"password\">"
    "<button>Sign in</button></form>\n  </main>\n  <script src=\"/static/app.js\"></script>\n</body>\n</html>\n";

const char* const kCss =
    "body { font-family: system-ui, sans-serif; margin: 0; background: #fafafa; }\n"
    "#app { max-width: 40rem; margin: 4rem auto; }\n"
    "form input { display: block; margin-bottom: 0.5rem; width: 100%; }\n";

const char* const kJs =
    "function boot() {\n  var form = document.getElementById(\"login\");\n"
    "  form.addEventListener(\"submit\", function (e) {\n    e.preventDefault();\n"
    "    fetch(\"/api/session\", { method: \"POST\", body: new FormData(form) });\n  });\n}\n"
    "document.addEventListener(\"DOMContentLoaded\", boot);\n";

std::string big_body(std::uint64_t seed) {
  static const char* const kWords[] = {"lorem", "ipsum", "dolor", "sit", "amet", "consectetur",
                                       "adipiscing", "elit", "sed", "do", "eiusmod", "tempor"};
  Rng rng(seed, kBig, 0);
  std::string out;
  out.reserve(120100);
  while (out.size() < 120000) {
    out += kWords[rng.below(std::size(kWords))];
    out += rng.below(12) == 0 ? '\n' : ' ';
  }
  return out;
}

std::string path_of(const std::string& target) { return target.substr(0, target.find('?')); }

std::string query_of(const std::string& target) {
  const auto q = target.find('?');
  return q == std::string::npos ? std::string{} : target.substr(q + 1);
}

const std::string* header(const SimRequest& r, std::string_view name) {
  for (const auto& h : r.headers) {
    if (text::iequals(h.name, name)) return &h.value;
  }
  return nullptr;
}

}  // namespace

TargetSimulator::TargetSimulator(std::uint64_t seed)
    : seed_(seed), created_(std::chrono::steady_clock::now()) {}

std::string TargetSimulator::tester_token() const {
  Rng rng(seed_, kToken, static_cast<std::uint64_t>(kTesterUser));
  return "Bearer " + rng.chars(40, kHex);
}

SimResponse TargetSimulator::handle(const SimRequest& request) {
  if (path_of(request.target) != "/__audit") {
    const auto now = std::chrono::steady_clock::now();
    AuditEntry e;
    e.elapsed_us = std::chrono::duration_cast<std::chrono::microseconds>(now - created_).count();
    e.epoch_ms = to_epoch_ms(now_ms());
    e.method = request.method;
    e.target = request.target;
    e.host = request.host;
    std::lock_guard lock(audit_mutex_);
    e.seq = audit_.size() + 1;
    audit_.push_back(std::move(e));
  } else if (request.method == "DELETE") {
    clear_audit();
    return json_response(200, {{"cleared", true}});
  }
  return respond(request);
}

SimResponse TargetSimulator::respond(const SimRequest& request) const {
  const std::string path = path_of(request.target);
  const std::string query = query_of(request.target);

  if (path == "/__audit") return audit_response();
  if (path == "/users/get-info/" || path == "/users/get-info") return users_info(query);
  if (path == "/secure/get-info/" || path == "/secure/get-info") return secure_info(request, query);
  if (path.rfind("/api/orders/", 0) == 0) return order(request, path.substr(12));
  if (path == "/retrieve-data/" || path == "/retrieve-data") return retrieve(query);
  if (path == "/api/account/settings") return settings(request);
  if (path == "/api/profile/update") return profile_update(request);
  if (path == "/locations/nearby") return nearby(query);
  if (path == "/static/app.html") return {200, "text/html; charset=utf-8", kHtml};
  if (path == "/static/app.css") return {200, "text/css", kCss};
  if (path == "/static/app.js") return {200, "application/javascript", kJs};
  if (path == "/big") return {200, "text/plain; charset=utf-8", big_body(seed_)};
  return {404, "text/plain", "not found\n"};
}

// Missing, empty and wildcard filters fall through to a full directory dump.
SimResponse TargetSimulator::users_info(const std::string& query) const {
  const auto raw = query_value(query, "user");
  if (!raw || raw->empty() || *raw == "*" || *raw == "%2A") {
    ordered_json all = ordered_json::array();
    for (std::int64_t id : {std::int64_t{0}, std::int64_t{1}}) all.push_back(user_record(seed_, id));
    for (std::int64_t id = 13480; id <= 13510; ++id) all.push_back(user_record(seed_, id));
    return json_response(200, all);
  }
  const auto id = parse_id(*raw);
  if (!id) return error(400, "user must be numeric");
  if (!user_exists(*id)) return error(404, "user not found");
  return json_response(200, user_record(seed_, *id));
}

SimResponse TargetSimulator::secure_info(const SimRequest& request, const std::string& query) const {
  const auto* auth = header(request, "Authorization");
  if (!auth || *auth != tester_token()) return error(401, "unauthorized");
  const auto raw = query_value(query, "user");
  const auto id = raw ? parse_id(*raw) : std::nullopt;
  if (!id) return error(400, "user must be numeric");
  if (*id != kTesterUser) return error(403, "forbidden");
  return json_response(200, user_record(seed_, *id));
}

// Authenticated, but never checks that the order belongs to the caller.
SimResponse TargetSimulator::order(const SimRequest& request, const std::string& id_text) const {
  const auto* auth = header(request, "Authorization");
  if (!auth || *auth != tester_token()) return error(401, "unauthorized");
  const auto id = parse_id(id_text);
  if (!id) return error(400, "order id must be numeric");
  if (!order_exists(*id)) return error(404, "order not found");
  return json_response(200, order_record(seed_, *id));
}

// Opaque tokens for public files; numeric handles from an older API still
// resolve to internal source files.
SimResponse TargetSimulator::retrieve(const std::string& query) const {
  const auto source = query_value(query, "source");
  if (!source || source->empty()) return error(400, "source is required");
  if (*source == kPublicSource) {
    return {200, "text/plain; charset=utf-8", "Spring newsletter: the downtown branch opens at 9am on weekdays.\n"};
  }
  if (*source == "0") return {200, "text/plain; charset=utf-8", python_config(seed_)};
  if (*source == "1") return {200, "text/plain; charset=utf-8", js_settings(seed_)};
  return error(404, "unknown source");
}

// With no Authorization header at all the handler falls back to the service
// account instead of refusing.
SimResponse TargetSimulator::settings(const SimRequest& request) const {
  const auto* auth = header(request, "Authorization");
  if (auth) {
    if (*auth != tester_token()) return error(401, "unauthorized");
    return json_response(200, {{"user", kTesterUser}, {"theme", "dark"}, {"locale", "en-US"}});
  }
  Rng rng(seed_, kSecret, 100);
  ordered_json contacts = ordered_json::array();
  for (int i = 0; i < 3; ++i) {
    const std::string first = rng.pick(kFirstNames);
    const std::string last = rng.pick(kLastNames);
    contacts.push_back({{"name", first + " " + last}, {"email", email_for(first, last, 900 + i)}, {"phone", phone(rng)}});
  }
  ordered_json body = {
      {"account", "service-admin"},
      {"role", "admin"},
      {"smtp", {{"host", "smtp.internal.example.com"}, {"username", "mailer"}, {"password", secret(seed_, 8, 20)}}},
      {"api_key", secret(seed_, 9, 40)},
      {"webhook_secret", secret(seed_, 10, 32)},
      {"notification_emails",
       {"security@corp.example.com", "billing@corp.example.com", "ops@corp.example.com"}},
      {"audit_contacts", contacts},
      {"feature_flags", {{"impersonation", true}, {"bulk_export", true}, {"legacy_login", false}}}};
  return json_response(200, body);
}

SimResponse TargetSimulator::profile_update(const SimRequest& request) const {
  if (request.method != "POST") return error(405, "method not allowed");
  const auto* auth = header(request, "Authorization");
  if (!auth || *auth != tester_token()) return error(401, "unauthorized");
  const json body = json::parse(request.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) return error(400, "invalid JSON body");
  if (body.contains("debug") && body["debug"] == true) {
    Rng rng(seed_, kDebug, 0);
    ordered_json sessions = ordered_json::array();
    for (int i = 0; i < 8; ++i) {
      const std::string first = rng.pick(kFirstNames);
      const std::string last = rng.pick(kLastNames);
      const auto id = static_cast<std::int64_t>(rng.between(13480, 13510));
      sessions.push_back({{"user", id}, {"email", email_for(first, last, id)}, {"ssn", ssn(rng)}});
    }
    return json_response(200, {{"ok", true},
                               {"debug",
                                {{"handler", "profile.update"},
                                 {"db_password", secret(seed_, 11, 16)},
                                 {"session_cache", sessions}}}});
  }
  ordered_json reply = {{"ok", true}};
  if (body.contains("user")) reply["user"] = body["user"];
  return json_response(200, reply);
}

SimResponse TargetSimulator::nearby(const std::string& query) const {
  const auto lat_raw = query_value(query, "lat");
  const auto lon_raw = query_value(query, "lon");
  const auto lat = lat_raw ? parse_coordinate(*lat_raw) : std::nullopt;
  const auto lon = lon_raw ? parse_coordinate(*lon_raw) : std::nullopt;
  ordered_json out = ordered_json::array();
  for (const auto& s : stores(seed_)) {
    // Without a usable position the filter is skipped, unlisted stores included.
    if (!lat || !lon || (s.listed && distance_km(*lat, *lon, s.lat, s.lon) <= 10.0)) out.push_back(to_json(s));
  }
  return json_response(200, out);
}

SimResponse TargetSimulator::audit_response() const {
  json entries = json::array();
  for (const auto& e : audit()) entries.push_back(to_json(e));
  return {200, "application/json", json{{"requests", entries}}.dump()};
}

std::vector<AuditEntry> TargetSimulator::audit() const {
  std::lock_guard lock(audit_mutex_);
  return audit_;
}

void TargetSimulator::clear_audit() {
  std::lock_guard lock(audit_mutex_);
  audit_.clear();
}

std::vector<PlantedVuln> TargetSimulator::ground_truth() const {
  const Headers auth = {{"Authorization", tester_token()}};
  BaseRequest debug_update{0, "POST", "/api/profile/update",
                           R"({"user":13495,"display_name":"qa-tester","debug":true})",
                           {{"Authorization", tester_token()}, {"Content-Type", "application/json"}},
                           {}};
  return {
      {"idor-user-info", "/users/get-info/?user={id}", "/users/get-info", 359,
       "change the user query parameter to another identifier, or empty it", "ssn",
       {0, "GET", "/users/get-info/?user=13494", "", {}, {}}},
      {"idor-order", "/api/orders/{id}", "/api/orders/", 285,
       "iterate the order id path segment while authenticated as the tester", "credit_card",
       {0, "GET", "/api/orders/1002", "", auth, {}}},
      {"source-leak", "/retrieve-data/?source={token}", "/retrieve-data", 540,
       "replace the opaque source token with a numeric handle (0 or 1)", "credential",
       {0, "GET", "/retrieve-data/?source=0", "", {}, {}}},
      {"missing-auth", "/api/account/settings", "/api/account/settings", 862,
       "remove the Authorization header", "credential",
       {0, "GET", "/api/account/settings", "", {}, {}}},
      {"debug-exposure", "/api/profile/update", "/api/profile/update", 200,
       "add \"debug\": true to the JSON body", "ssn", std::move(debug_update)},
      {"public-locations", "/locations/nearby?lat={lat}&lon={lon}", "/locations/nearby", 0,
       "empty or remove lat/lon to list every store, including unlisted ones (public data)",
       "street_address", {0, "GET", "/locations/nearby?lat=&lon=", "", {}, {}}},
  };
}

std::vector<BaseRequest> TargetSimulator::secured_examples() const {
  return {{0, "GET", "/secure/get-info/?user=13495", "", {}, {}},
          {0, "GET", "/api/orders/1001", "", {}, {}},
          {0, "POST", "/api/profile/update", R"({"user":13495})", {{"Content-Type", "application/json"}}, {}}};
}

json to_json(const PlantedVuln& v) {
  json headers = json::array();
  for (const auto& h : v.example.headers) headers.push_back({{"name", h.name}, {"value", h.value}});
  return {{"vuln_id", v.vuln_id},
          {"endpoint", v.endpoint},
          {"path_prefix", v.path_prefix},
          {"cwe", v.cwe},
          {"decoy", v.cwe == 0},
          {"trigger", v.trigger},
          {"sensitive_payload_kind", v.sensitive_payload_kind},
          {"example",
           {{"method", v.example.method}, {"url", v.example.url}, {"headers", headers}, {"body", v.example.body}}}};
}

json to_json(const AuditEntry& e) {
  return {{"seq", e.seq},
          {"elapsed_us", e.elapsed_us},
          {"epoch_ms", e.epoch_ms},
          {"method", e.method},
          {"target", e.target},
          {"host", e.host}};
}

AuditEntry audit_entry_from_json(const json& j) {
  AuditEntry e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.elapsed_us = j.at("elapsed_us").get<std::int64_t>();
  e.epoch_ms = j.at("epoch_ms").get<std::int64_t>();
  e.method = j.at("method").get<std::string>();
  e.target = j.at("target").get<std::string>();
  e.host = j.at("host").get<std::string>();
  return e;
}

json manifest(const TargetSimulator& sim, const std::string& origin) {
  json vulns = json::array();
  for (auto v : sim.ground_truth()) {
    v.example.url = origin + v.example.url;
    vulns.push_back(to_json(v));
  }
  json secured = json::array();
  for (const auto& r : sim.secured_examples()) {
    secured.push_back({{"method", r.method}, {"url", origin + r.url}, {"expected_status", 401}});
  }
  return {{"schema", "bacscan.sim-manifest"},
          {"version", 1},
          {"seed", sim.seed()},
          {"origin", origin},
          {"tester_user", kTesterUser},
          {"tester_token", sim.tester_token()},
          {"vulns", vulns},
          {"secured", secured}};
}

std::string fixture_har(const TargetSimulator& sim, const std::string& origin, const std::string& canary_origin) {
  const std::string token = sim.tester_token();
  struct Capture {
    std::string method;
    std::string base;
    std::string target;
    Headers headers;
    std::string body;
  };
  const Capture user_info{"GET", origin, "/users/get-info/?user=13495",
                          {{"Authorization", token}, {"Accept", "application/json"}}, ""};
  const std::vector<Capture> captures = {
      user_info,
      {"GET", origin, "/api/orders/1001", {{"Authorization", token}}, ""},
      {"GET", origin, "/secure/get-info/?user=13495", {{"Authorization", token}}, ""},
      {"GET", origin, std::string("/retrieve-data/?source=") + std::string(kPublicSource), {}, ""},
      {"GET", origin, "/api/account/settings", {{"Authorization", token}}, ""},
      {"POST", origin, "/api/profile/update",
       {{"Content-Type", "application/json"}, {"Authorization", token}},
       R"({"user":13495,"display_name":"qa-tester"})"},
      {"GET", origin, "/locations/nearby?lat=40.7128&lon=-74.0060", {}, ""},
      {"GET", origin, "/static/app.html?v=1", {}, ""},
      {"GET", canary_origin, "/__canary/users/get-info/?user=13495", {{"Authorization", token}}, ""},
      user_info,
  };

  json entries = json::array();
  int second = 0;
  for (const auto& c : captures) {
    const SimResponse r = sim.respond({c.method, c.target, c.headers, c.body, ""});
    json headers = json::array();
    for (const auto& h : c.headers) headers.push_back({{"name", h.name}, {"value", h.value}});
    json request = {{"method", c.method},
                    {"url", c.base + c.target},
                    {"httpVersion", "HTTP/1.1"},
                    {"headers", headers},
                    {"queryString", json::array()},
                    {"cookies", json::array()},
                    {"headersSize", -1},
                    {"bodySize", c.body.size()}};
    if (!c.body.empty()) request["postData"] = {{"mimeType", "application/json"}, {"text", c.body}};
    json response = {{"status", r.status},
                     {"statusText", r.status == 200 ? "OK" : ""},
                     {"httpVersion", "HTTP/1.1"},
                     {"headers", json::array({{{"name", "Content-Type"}, {"value", r.content_type}}})},
                     {"cookies", json::array()},
                     {"content", {{"size", r.body.size()}, {"mimeType", r.content_type}, {"text", r.body}}},
                     {"redirectURL", ""},
                     {"headersSize", -1},
                     {"bodySize", r.body.size()}};
    entries.push_back({{"startedDateTime", "2024-03-01T12:00:" + two(static_cast<std::uint64_t>(second++)) + ".000Z"},
                       {"time", 12},
                       {"request", request},
                       {"response", response},
                       {"cache", json::object()},
                       {"timings", {{"send", 0}, {"wait", 12}, {"receive", 0}}}});
  }
  json har = {{"log",
               {{"version", "1.2"},
                {"creator", {{"name", "bacscan-sim"}, {"version", "1"}}},
                {"entries", entries}}}};
  return har.dump(2);
}

bool is_loopback_address(std::string_view host) {
  return host == "127.0.0.1" || host == "::1" || host == "localhost" || host.rfind("127.", 0) == 0;
}

std::string Server::origin() const {
  const bool v6 = bind_.find(':') != std::string::npos;
  return "http://" + (v6 ? "[" + bind_ + "]" : bind_) + ":" + std::to_string(port_);
}

}  // namespace bacscan::sim
