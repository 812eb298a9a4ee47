#include "bacscan/store.hpp"

#include <sqlite3.h>

#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>

#include "bacscan/error.hpp"
#include "bacscan/text.hpp"

namespace bacscan {

using nlohmann::json;

std::string_view to_string(ExchangeKind kind) {
  switch (kind) {
    case ExchangeKind::kOriginal: return "original";
    case ExchangeKind::kBaseline: return "baseline";
    case ExchangeKind::kMutated: return "mutated";
    case ExchangeKind::kReplay: return "replay";
  }
  return "original";
}

std::optional<ExchangeKind> parse_exchange_kind(std::string_view text) {
  if (text == "original") return ExchangeKind::kOriginal;
  if (text == "baseline") return ExchangeKind::kBaseline;
  if (text == "mutated") return ExchangeKind::kMutated;
  if (text == "replay") return ExchangeKind::kReplay;
  return std::nullopt;
}

std::string_view to_string(BodyEncoding encoding) {
  return encoding == BodyEncoding::kBase64 ? "base64" : "text";
}

std::optional<BodyEncoding> parse_body_encoding(std::string_view text) {
  if (text == "text") return BodyEncoding::kText;
  if (text == "base64") return BodyEncoding::kBase64;
  return std::nullopt;
}

std::optional<VerdictStatus> parse_verdict_status(std::string_view text) {
  if (text == "untriaged") return VerdictStatus::kUntriaged;
  if (text == "triaged") return VerdictStatus::kTriaged;
  if (text == "confirmed") return VerdictStatus::kConfirmed;
  if (text == "fppve") return VerdictStatus::kFalsePositive;
  return std::nullopt;
}

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS meta (
  key TEXT PRIMARY KEY,
  value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS runs (
  run_id INTEGER PRIMARY KEY AUTOINCREMENT,
  started_at INTEGER NOT NULL,
  ended_at INTEGER,
  policy TEXT NOT NULL,
  bases INTEGER NOT NULL DEFAULT 0,
  mutations INTEGER NOT NULL DEFAULT 0,
  sent INTEGER NOT NULL DEFAULT 0,
  transport_failures INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS requests (
  request_id INTEGER PRIMARY KEY AUTOINCREMENT,
  kind TEXT NOT NULL,
  run_id INTEGER REFERENCES runs(run_id),
  base_id INTEGER REFERENCES requests(request_id),
  iam_name TEXT NOT NULL DEFAULT '',
  target TEXT,
  modification TEXT NOT NULL DEFAULT '',
  method TEXT NOT NULL,
  url TEXT NOT NULL,
  body BLOB NOT NULL,
  body_encoding TEXT NOT NULL,
  captured_at INTEGER NOT NULL,
  response_status INTEGER,
  response_type TEXT,
  response_body BLOB,
  response_encoding TEXT,
  elapsed_ms INTEGER,
  transport_error TEXT
);
CREATE TABLE IF NOT EXISTS headers (
  header_id INTEGER PRIMARY KEY AUTOINCREMENT,
  request_id INTEGER NOT NULL REFERENCES requests(request_id),
  position INTEGER NOT NULL,
  name TEXT NOT NULL,
  value TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS headers_by_request ON headers(request_id, position);
CREATE TABLE IF NOT EXISTS flags (
  flag_id INTEGER PRIMARY KEY AUTOINCREMENT,
  run_id INTEGER REFERENCES runs(run_id),
  mutated_id INTEGER NOT NULL REFERENCES requests(request_id),
  baseline_id INTEGER REFERENCES requests(request_id),
  classification TEXT NOT NULL,
  dissimilarity REAL NOT NULL,
  regex_hits TEXT NOT NULL,
  code_leak INTEGER NOT NULL,
  reason TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS verdicts (
  verdict_id INTEGER PRIMARY KEY AUTOINCREMENT,
  flag_id INTEGER NOT NULL REFERENCES flags(flag_id),
  verdict TEXT NOT NULL,
  cwe_tags TEXT NOT NULL,
  notes TEXT NOT NULL,
  decided_at INTEGER NOT NULL,
  active INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS verdicts_by_flag ON verdicts(flag_id, active);
)sql";

class Statement {
 public:
  Statement(sqlite3* db, const std::string& sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt_, nullptr) != SQLITE_OK) {
      throw StorageError(std::string("prepare failed: ") + sqlite3_errmsg(db));
    }
  }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;
  ~Statement() { sqlite3_finalize(stmt_); }

  Statement& bind(int index, std::int64_t value) {
    check(sqlite3_bind_int64(stmt_, index, value));
    return *this;
  }
  Statement& bind(int index, int value) { return bind(index, static_cast<std::int64_t>(value)); }
  Statement& bind(int index, double value) {
    check(sqlite3_bind_double(stmt_, index, value));
    return *this;
  }
  Statement& bind(int index, std::string_view value) {
    check(sqlite3_bind_text(stmt_, index, value.data(), static_cast<int>(value.size()),
                            SQLITE_TRANSIENT));
    return *this;
  }
  Statement& bind(int index, const char* value) { return bind(index, std::string_view(value)); }
  Statement& bind(int index, const std::string& value) {
    return bind(index, std::string_view(value));
  }
  Statement& bind_blob(int index, std::string_view value) {
    check(sqlite3_bind_blob(stmt_, index, value.data(), static_cast<int>(value.size()),
                            SQLITE_TRANSIENT));
    return *this;
  }
  Statement& bind_null(int index) {
    check(sqlite3_bind_null(stmt_, index));
    return *this;
  }
  template <typename T>
  Statement& bind(int index, const std::optional<T>& value) {
    if (value) return bind(index, *value);
    return bind_null(index);
  }

  // True while a row is available.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw StorageError(std::string("step failed: ") + sqlite3_errmsg(db_));
  }
  void run() {
    while (step()) {
    }
  }

  int param(const char* name) const { return sqlite3_bind_parameter_index(stmt_, name); }

  bool is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }
  std::int64_t int64(int col) const { return sqlite3_column_int64(stmt_, col); }
  double real(int col) const { return sqlite3_column_double(stmt_, col); }
  std::string str(int col) const {
    const auto* data = sqlite3_column_blob(stmt_, col);
    const int size = sqlite3_column_bytes(stmt_, col);
    return data == nullptr ? std::string{} : std::string(static_cast<const char*>(data), size);
  }
  std::optional<std::int64_t> opt_int64(int col) const {
    return is_null(col) ? std::nullopt : std::optional<std::int64_t>(int64(col));
  }

 private:
  void check(int rc) {
    if (rc != SQLITE_OK) throw StorageError(std::string("bind failed: ") + sqlite3_errmsg(db_));
  }
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

void exec(sqlite3* db, const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string message = err ? err : "unknown error";
    sqlite3_free(err);
    throw StorageError("sqlite: " + message);
  }
}

class Transaction {
 public:
  explicit Transaction(sqlite3* db) : db_(db) { exec(db_, "BEGIN IMMEDIATE"); }
  Transaction(const Transaction&) = delete;
  Transaction& operator=(const Transaction&) = delete;
  ~Transaction() {
    if (!committed_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    exec(db_, "COMMIT");
    committed_ = true;
  }

 private:
  sqlite3* db_;
  bool committed_ = false;
};

json hits_to_json(const std::vector<RegexHit>& hits) {
  json out = json::array();
  for (const auto& h : hits) out.push_back({{"pattern", h.pattern_name}, {"excerpt", h.excerpt}});
  return out;
}

std::vector<RegexHit> hits_from_json(const json& j) {
  std::vector<RegexHit> hits;
  for (const auto& h : j) hits.push_back({h.at("pattern").get<std::string>(), h.at("excerpt").get<std::string>()});
  return hits;
}

constexpr const char* kExchangeColumns =
    "request_id, kind, run_id, base_id, iam_name, target, modification, method, url, body, "
    "body_encoding, captured_at, response_status, response_type, response_body, "
    "response_encoding, elapsed_ms, transport_error";

constexpr const char* kFlagColumns =
    "flag_id, run_id, mutated_id, baseline_id, classification, dissimilarity, regex_hits, "
    "code_leak, reason";

constexpr const char* kVerdictColumns = "flag_id, verdict, cwe_tags, notes, decided_at";

}  // namespace

struct Store::Impl {
  sqlite3* db = nullptr;
  mutable std::recursive_mutex mutex;

  ~Impl() {
    if (db) sqlite3_close(db);
  }

  void init() {
    exec(db, "PRAGMA foreign_keys = ON");
    sqlite3_busy_timeout(db, 5000);
    exec(db, kSchema);
    Statement get(db, "SELECT value FROM meta WHERE key = 'schema_version'");
    if (get.step()) {
      const std::string version = get.str(0);
      if (version != std::to_string(kSchemaVersion)) {
        throw StorageError("store schema version " + version + " is not supported (expected " +
                           std::to_string(kSchemaVersion) + ")");
      }
    } else {
      Statement put(db, "INSERT INTO meta(key, value) VALUES('schema_version', ?)");
      put.bind(1, std::to_string(kSchemaVersion)).run();
    }
  }

  Exchange read_exchange_row(const Statement& s) const {
    Exchange e;
    e.id = s.int64(0);
    e.kind = parse_exchange_kind(s.str(1)).value_or(ExchangeKind::kOriginal);
    e.run_id = s.opt_int64(2);
    e.base_id = s.opt_int64(3);
    e.iam_name = s.str(4);
    if (!s.is_null(5)) e.target = parse_mutation_target(s.str(5));
    e.modification = s.str(6);
    e.request.request_id = e.id;
    e.request.method = s.str(7);
    e.request.url = s.str(8);
    e.request.body = s.str(9);
    e.body_encoding = parse_body_encoding(s.str(10)).value_or(BodyEncoding::kText);
    e.request.captured_at = from_epoch_ms(s.int64(11));
    if (!s.is_null(12)) {
      ResponseRecord r;
      r.status = static_cast<int>(s.int64(12));
      r.content_type = s.str(13);
      r.body = s.str(14);
      e.response_encoding = parse_body_encoding(s.str(15)).value_or(BodyEncoding::kText);
      r.elapsed_ms = s.int64(16);
      if (!s.is_null(17)) r.transport_error = s.str(17);
      e.response = std::move(r);
    }
    e.request.headers = read_headers(e.id);
    return e;
  }

  Headers read_headers(std::int64_t request_id) const {
    Statement s(db, "SELECT name, value FROM headers WHERE request_id = ? ORDER BY position");
    s.bind(1, request_id);
    Headers headers;
    while (s.step()) headers.push_back({s.str(0), s.str(1)});
    return headers;
  }

  Exchange read_exchange(std::int64_t id) const {
    Statement s(db, std::string("SELECT ") + kExchangeColumns + " FROM requests WHERE request_id = ?");
    s.bind(1, id);
    if (!s.step()) throw NotFoundError("request " + std::to_string(id) + " not found");
    return read_exchange_row(s);
  }

  static PveFlag read_flag_row(const Statement& s) {
    PveFlag f;
    f.flag_id = s.int64(0);
    f.run_id = s.opt_int64(1);
    f.mutated_id = s.int64(2);
    f.baseline_id = s.opt_int64(3);
    f.classification = parse_classification(s.str(4)).value_or(Classification::kBenign);
    f.dissimilarity = s.real(5);
    f.regex_hits = hits_from_json(json::parse(s.str(6)));
    f.code_leak = s.int64(7) != 0;
    f.reason = s.str(8);
    return f;
  }

  static TriageVerdict read_verdict_row(const Statement& s) {
    TriageVerdict v;
    v.flag_id = s.int64(0);
    v.verdict = parse_verdict(s.str(1)).value_or(Verdict::kFalsePositive);
    v.cwe_tags = json::parse(s.str(2)).get<std::vector<int>>();
    v.notes = s.str(3);
    v.decided_at = from_epoch_ms(s.int64(4));
    return v;
  }

  PveFlag read_flag(std::int64_t flag_id) const {
    Statement s(db, std::string("SELECT ") + kFlagColumns + " FROM flags WHERE flag_id = ?");
    s.bind(1, flag_id);
    if (!s.step()) throw NotFoundError("flag " + std::to_string(flag_id) + " not found");
    return read_flag_row(s);
  }

  std::optional<TriageVerdict> read_active_verdict(std::int64_t flag_id) const {
    Statement s(db, std::string("SELECT ") + kVerdictColumns +
                        " FROM verdicts WHERE flag_id = ? AND active = 1");
    s.bind(1, flag_id);
    if (!s.step()) return std::nullopt;
    return read_verdict_row(s);
  }

  std::int64_t insert_request_row(const BaseRequest& req, const ExchangeKind kind,
                                  std::optional<std::int64_t> explicit_id,
                                  std::optional<std::int64_t> run_id,
                                  std::optional<std::int64_t> base_id, const std::string& iam_name,
                                  std::optional<MutationTarget> target,
                                  const std::string& modification, BodyEncoding body_encoding,
                                  const std::optional<ResponseRecord>& response,
                                  BodyEncoding response_encoding) {
    Statement s(db, std::string("INSERT INTO requests(") + kExchangeColumns +
                        ") VALUES(?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?)");
    if (explicit_id) {
      s.bind(1, *explicit_id);
    } else {
      s.bind_null(1);
    }
    s.bind(2, to_string(kind));
    s.bind(3, run_id);
    s.bind(4, base_id);
    s.bind(5, iam_name);
    if (target) {
      s.bind(6, to_string(*target));
    } else {
      s.bind_null(6);
    }
    s.bind(7, modification);
    s.bind(8, req.method);
    s.bind(9, req.url);
    s.bind_blob(10, req.body);
    s.bind(11, to_string(body_encoding));
    s.bind(12, to_epoch_ms(req.captured_at));
    if (response) {
      s.bind(13, response->status);
      s.bind(14, response->content_type);
      s.bind_blob(15, response->body);
      s.bind(16, to_string(response_encoding));
      s.bind(17, response->elapsed_ms);
      s.bind(18, response->transport_error);
    } else {
      for (int i = 13; i <= 18; ++i) s.bind_null(i);
    }
    s.run();
    return sqlite3_last_insert_rowid(db);
  }

  void insert_header_row(std::optional<std::int64_t> header_id, std::int64_t request_id,
                         std::int64_t position, const Header& h) {
    Statement s(db, "INSERT INTO headers(header_id, request_id, position, name, value) VALUES(?,?,?,?,?)");
    s.bind(1, header_id).bind(2, request_id).bind(3, position).bind(4, h.name).bind(5, h.value);
    s.run();
  }

  std::string filter_sql(const FlagFilter& filter, const std::string& select) const {
    std::string sql = select +
                      " FROM flags f JOIN requests r ON r.request_id = f.mutated_id"
                      " LEFT JOIN verdicts v ON v.flag_id = f.flag_id AND v.active = 1 WHERE 1=1";
    if (filter.classification) sql += " AND f.classification = :classification";
    if (filter.iam_name) sql += " AND r.iam_name = :iam";
    if (filter.run_id) sql += " AND f.run_id = :run";
    if (filter.verdict_status) {
      switch (*filter.verdict_status) {
        case VerdictStatus::kUntriaged: sql += " AND v.verdict_id IS NULL"; break;
        case VerdictStatus::kTriaged: sql += " AND v.verdict_id IS NOT NULL"; break;
        case VerdictStatus::kConfirmed: sql += " AND v.verdict = 'CONFIRMED_VULN'"; break;
        case VerdictStatus::kFalsePositive: sql += " AND v.verdict = 'FPPVE'"; break;
      }
    }
    return sql;
  }

  static void bind_filter(Statement& s, const FlagFilter& filter) {
    if (filter.classification) s.bind(s.param(":classification"), to_string(*filter.classification));
    if (filter.iam_name) s.bind(s.param(":iam"), *filter.iam_name);
    if (filter.run_id) s.bind(s.param(":run"), *filter.run_id);
  }
};

Store::Store(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Store::Store(Store&&) noexcept = default;
Store& Store::operator=(Store&&) noexcept = default;
Store::~Store() = default;

Store Store::open(const std::filesystem::path& path) {
  auto impl = std::make_unique<Impl>();
  const int rc = sqlite3_open_v2(path.string().c_str(), &impl->db,
                                 SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                                 nullptr);
  if (rc != SQLITE_OK) {
    const std::string message = impl->db ? sqlite3_errmsg(impl->db) : "out of memory";
    throw StorageError("cannot open store '" + path.string() + "': " + message);
  }
  exec(impl->db, "PRAGMA journal_mode = WAL");
  impl->init();
  return Store(std::move(impl));
}

Store Store::open_in_memory() {
  auto impl = std::make_unique<Impl>();
  if (sqlite3_open_v2(":memory:", &impl->db,
                      SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                      nullptr) != SQLITE_OK) {
    throw StorageError("cannot open in-memory store");
  }
  impl->init();
  return Store(std::move(impl));
}

std::int64_t Store::persist_exchange(const BaseRequest& base,
                                     const std::optional<MutatedRequest>& mutated,
                                     const std::optional<ResponseRecord>& response,
                                     const ExchangeContext& context) {
  const BaseRequest& request = mutated ? mutated->request : base;
  validate(request);
  if (response) validate(*response);
  const ExchangeKind kind =
      context.kind.value_or(mutated ? ExchangeKind::kMutated : ExchangeKind::kOriginal);
  std::optional<std::int64_t> base_id = context.base_id;
  std::string iam_name;
  std::string modification;
  std::optional<MutationTarget> target;
  if (mutated) {
    if (mutated->iam_name.empty()) throw ValidationError("iam_name", "mutation has no IAM name");
    if (mutated->modification.empty()) {
      throw ValidationError("modification", "mutation has no modification description");
    }
    base_id = base_id.value_or(mutated->base_id);
    iam_name = mutated->iam_name;
    modification = mutated->modification;
    target = mutated->target;
  }
  if ((kind == ExchangeKind::kBaseline || kind == ExchangeKind::kReplay || mutated) && !base_id) {
    throw ValidationError("base_id", "derived exchanges must reference their base request");
  }

  std::lock_guard lock(impl_->mutex);
  Transaction tx(impl_->db);
  const std::int64_t id = impl_->insert_request_row(
      request, kind, std::nullopt, context.run_id, base_id, iam_name, target, modification,
      context.body_encoding, response, context.response_encoding);
  for (std::size_t i = 0; i < request.headers.size(); ++i) {
    impl_->insert_header_row(std::nullopt, id, static_cast<std::int64_t>(i), request.headers[i]);
  }
  tx.commit();
  return id;
}

Exchange Store::exchange(std::int64_t id) const {
  std::lock_guard lock(impl_->mutex);
  return impl_->read_exchange(id);
}

std::vector<Exchange> Store::exchanges_of_kind(ExchangeKind kind,
                                               std::optional<std::int64_t> run_id) const {
  std::lock_guard lock(impl_->mutex);
  std::string sql = std::string("SELECT ") + kExchangeColumns + " FROM requests WHERE kind = ?";
  if (run_id) sql += " AND run_id = ?";
  sql += " ORDER BY request_id";
  Statement s(impl_->db, sql);
  s.bind(1, to_string(kind));
  if (run_id) s.bind(2, *run_id);
  std::vector<Exchange> out;
  while (s.step()) out.push_back(impl_->read_exchange_row(s));
  return out;
}

std::vector<HeaderRecord> Store::header_rows(std::int64_t request_id) const {
  std::lock_guard lock(impl_->mutex);
  Statement s(impl_->db,
              "SELECT header_id, request_id, name, value FROM headers WHERE request_id = ? "
              "ORDER BY position");
  s.bind(1, request_id);
  std::vector<HeaderRecord> out;
  while (s.step()) out.push_back({s.int64(0), s.int64(1), s.str(2), s.str(3)});
  return out;
}

std::int64_t Store::begin_run(const json& policy) {
  std::lock_guard lock(impl_->mutex);
  Statement s(impl_->db, "INSERT INTO runs(started_at, policy) VALUES(?, ?)");
  s.bind(1, to_epoch_ms(now_ms())).bind(2, policy.dump());
  s.run();
  return sqlite3_last_insert_rowid(impl_->db);
}

void Store::update_run_counts(std::int64_t run_id, const RunCounts& counts) {
  std::lock_guard lock(impl_->mutex);
  Statement s(impl_->db,
              "UPDATE runs SET bases = ?, mutations = ?, sent = ?, transport_failures = ? "
              "WHERE run_id = ?");
  s.bind(1, counts.bases).bind(2, counts.mutations).bind(3, counts.sent);
  s.bind(4, counts.transport_failures).bind(5, run_id);
  s.run();
}

void Store::finish_run(std::int64_t run_id) {
  std::lock_guard lock(impl_->mutex);
  Statement s(impl_->db, "UPDATE runs SET ended_at = ? WHERE run_id = ?");
  s.bind(1, to_epoch_ms(now_ms())).bind(2, run_id);
  s.run();
}

namespace {

ScanRun read_run_row(const Statement& s) {
  ScanRun r;
  r.run_id = s.int64(0);
  r.started_at = from_epoch_ms(s.int64(1));
  if (!s.is_null(2)) r.ended_at = from_epoch_ms(s.int64(2));
  r.policy = json::parse(s.str(3));
  r.counts = {s.int64(4), s.int64(5), s.int64(6), s.int64(7)};
  return r;
}

constexpr const char* kRunColumns =
    "run_id, started_at, ended_at, policy, bases, mutations, sent, transport_failures";

}  // namespace

ScanRun Store::run(std::int64_t run_id) const {
  std::lock_guard lock(impl_->mutex);
  Statement s(impl_->db, std::string("SELECT ") + kRunColumns + " FROM runs WHERE run_id = ?");
  s.bind(1, run_id);
  if (!s.step()) throw NotFoundError("run " + std::to_string(run_id) + " not found");
  return read_run_row(s);
}

std::optional<std::int64_t> Store::latest_run_id() const {
  std::lock_guard lock(impl_->mutex);
  Statement s(impl_->db, "SELECT MAX(run_id) FROM runs");
  if (!s.step()) return std::nullopt;
  return s.opt_int64(0);
}

std::vector<ScanRun> Store::runs() const {
  std::lock_guard lock(impl_->mutex);
  Statement s(impl_->db, std::string("SELECT ") + kRunColumns + " FROM runs ORDER BY run_id");
  std::vector<ScanRun> out;
  while (s.step()) out.push_back(read_run_row(s));
  return out;
}

std::int64_t Store::insert_flag(const PveFlag& flag) {
  if (flag.dissimilarity < 0.0 || flag.dissimilarity > 1.0) {
    throw ValidationError("dissimilarity", "must lie in [0, 1]");
  }
  if (flag.classification == Classification::kPve && flag.regex_hits.empty()) {
    throw ValidationError("regex_hits", "a PVE flag needs at least one sensitive-data hit");
  }
  std::lock_guard lock(impl_->mutex);
  impl_->read_exchange(flag.mutated_id);  // referential check with a clear error
  Statement s(impl_->db,
              "INSERT INTO flags(run_id, mutated_id, baseline_id, classification, dissimilarity, "
              "regex_hits, code_leak, reason) VALUES(?,?,?,?,?,?,?,?)");
  s.bind(1, flag.run_id).bind(2, flag.mutated_id).bind(3, flag.baseline_id);
  s.bind(4, to_string(flag.classification)).bind(5, flag.dissimilarity);
  s.bind(6, hits_to_json(flag.regex_hits).dump(-1, ' ', false, json::error_handler_t::replace)).bind(7, flag.code_leak ? 1 : 0);
  s.bind(8, flag.reason);
  s.run();
  return sqlite3_last_insert_rowid(impl_->db);
}

PveFlag Store::flag(std::int64_t flag_id) const {
  std::lock_guard lock(impl_->mutex);
  return impl_->read_flag(flag_id);
}

FlagRecord Store::flag_record(std::int64_t flag_id) const {
  std::lock_guard lock(impl_->mutex);
  FlagRecord rec;
  rec.flag = impl_->read_flag(flag_id);
  rec.mutated = impl_->read_exchange(rec.flag.mutated_id);
  if (rec.flag.baseline_id) rec.baseline = impl_->read_exchange(*rec.flag.baseline_id);
  rec.verdict = impl_->read_active_verdict(flag_id);
  return rec;
}

std::vector<FlagRecord> Store::query_flags(const FlagFilter& filter) const {
  std::lock_guard lock(impl_->mutex);
  std::string sql = impl_->filter_sql(filter, "SELECT f.flag_id") + " ORDER BY f.flag_id";
  if (filter.limit) sql += " LIMIT " + std::to_string(*filter.limit);
  if (filter.offset > 0) {
    if (!filter.limit) sql += " LIMIT -1";
    sql += " OFFSET " + std::to_string(filter.offset);
  }
  std::vector<std::int64_t> ids;
  {
    Statement s(impl_->db, sql);
    Impl::bind_filter(s, filter);
    while (s.step()) ids.push_back(s.int64(0));
  }
  std::vector<FlagRecord> out;
  out.reserve(ids.size());
  for (const auto id : ids) out.push_back(flag_record(id));
  return out;
}

std::size_t Store::count_flags(const FlagFilter& filter) const {
  std::lock_guard lock(impl_->mutex);
  const std::string sql = impl_->filter_sql(filter, "SELECT COUNT(*)");
  Statement s(impl_->db, sql);
  Impl::bind_filter(s, filter);
  s.step();
  return static_cast<std::size_t>(s.int64(0));
}

TriageVerdict Store::record_verdict(TriageVerdict verdict) {
  validate(verdict);
  if (verdict.decided_at == Timestamp{}) verdict.decided_at = now_ms();
  std::lock_guard lock(impl_->mutex);
  const PveFlag flag = impl_->read_flag(verdict.flag_id);
  if (flag.classification == Classification::kBenign) {
    throw ValidationError("flag_id", "flag " + std::to_string(verdict.flag_id) +
                                         " is BENIGN; only PVE or MANUAL_REVIEW flags are triaged");
  }
  Transaction tx(impl_->db);
  Statement clear(impl_->db, "UPDATE verdicts SET active = 0 WHERE flag_id = ?");
  clear.bind(1, verdict.flag_id).run();
  Statement s(impl_->db,
              "INSERT INTO verdicts(flag_id, verdict, cwe_tags, notes, decided_at, active) "
              "VALUES(?,?,?,?,?,1)");
  s.bind(1, verdict.flag_id).bind(2, to_string(verdict.verdict));
  s.bind(3, json(verdict.cwe_tags).dump()).bind(4, verdict.notes);
  s.bind(5, to_epoch_ms(verdict.decided_at));
  s.run();
  tx.commit();
  return verdict;
}

std::optional<TriageVerdict> Store::active_verdict(std::int64_t flag_id) const {
  std::lock_guard lock(impl_->mutex);
  return impl_->read_active_verdict(flag_id);
}

std::vector<TriageVerdict> Store::verdict_history(std::int64_t flag_id) const {
  std::lock_guard lock(impl_->mutex);
  Statement s(impl_->db, std::string("SELECT ") + kVerdictColumns +
                             " FROM verdicts WHERE flag_id = ? ORDER BY verdict_id");
  s.bind(1, flag_id);
  std::vector<TriageVerdict> out;
  while (s.step()) out.push_back(Impl::read_verdict_row(s));
  return out;
}

void Store::export_csv(const std::filesystem::path& directory) const {
  std::lock_guard lock(impl_->mutex);
  std::filesystem::create_directories(directory);
  {
    std::ofstream out(directory / "requests.csv", std::ios::binary);
    if (!out) throw Error("cannot write " + (directory / "requests.csv").string());
    out << text::csv_row({"request_id", "kind", "run_id", "base_id", "iam_name", "target",
                          "modification", "method", "url", "body_base64", "body_encoding",
                          "captured_at", "response_status", "response_type",
                          "response_body_base64", "response_encoding", "elapsed_ms",
                          "transport_error"});
    Statement s(impl_->db, std::string("SELECT ") + kExchangeColumns +
                               " FROM requests ORDER BY request_id");
    while (s.step()) {
      auto opt = [&](int col) { return s.is_null(col) ? std::string{} : s.str(col); };
      out << text::csv_row({s.str(0), s.str(1), opt(2), opt(3), s.str(4), opt(5), s.str(6),
                            s.str(7), s.str(8), text::base64_encode(s.str(9)), s.str(10),
                            s.str(11), opt(12), opt(13), text::base64_encode(opt(14)), opt(15),
                            opt(16), opt(17)});
    }
  }
  std::ofstream out(directory / "headers.csv", std::ios::binary);
  if (!out) throw Error("cannot write " + (directory / "headers.csv").string());
  out << text::csv_row({"header_id", "request_id", "name", "value"});
  Statement s(impl_->db, "SELECT header_id, request_id, name, value FROM headers ORDER BY header_id");
  while (s.step()) out << text::csv_row({s.str(0), s.str(1), s.str(2), s.str(3)});
}

void Store::export_jsonl(std::ostream& out) const {
  std::lock_guard lock(impl_->mutex);
  auto opt_json = [](const Statement& s, int col) -> json {
    return s.is_null(col) ? json(nullptr) : json(s.int64(col));
  };
  {
    Statement s(impl_->db, std::string("SELECT ") + kRunColumns + " FROM runs ORDER BY run_id");
    while (s.step()) {
      json j = {{"table", "runs"},      {"run_id", s.int64(0)}, {"started_at", s.int64(1)},
                {"ended_at", opt_json(s, 2)}, {"policy", s.str(3)},  {"bases", s.int64(4)},
                {"mutations", s.int64(5)}, {"sent", s.int64(6)}, {"transport_failures", s.int64(7)}};
      out << j.dump() << '\n';
    }
  }
  {
    Statement s(impl_->db, std::string("SELECT ") + kExchangeColumns +
                               " FROM requests ORDER BY request_id");
    while (s.step()) {
      json j = {{"table", "requests"},
                {"request_id", s.int64(0)},
                {"kind", s.str(1)},
                {"run_id", opt_json(s, 2)},
                {"base_id", opt_json(s, 3)},
                {"iam_name", s.str(4)},
                {"target", s.is_null(5) ? json(nullptr) : json(s.str(5))},
                {"modification", s.str(6)},
                {"method", s.str(7)},
                {"url", s.str(8)},
                {"body", text::base64_encode(s.str(9))},
                {"body_encoding", s.str(10)},
                {"captured_at", s.int64(11)}};
      if (s.is_null(12)) {
        j["response"] = nullptr;
      } else {
        j["response"] = {{"status", s.int64(12)},
                         {"content_type", s.str(13)},
                         {"body", text::base64_encode(s.str(14))},
                         {"encoding", s.str(15)},
                         {"elapsed_ms", s.int64(16)},
                         {"transport_error", s.is_null(17) ? json(nullptr) : json(s.str(17))}};
      }
      out << j.dump() << '\n';
    }
  }
  {
    Statement s(impl_->db,
                "SELECT header_id, request_id, position, name, value FROM headers ORDER BY header_id");
    while (s.step()) {
      json j = {{"table", "headers"}, {"header_id", s.int64(0)}, {"request_id", s.int64(1)},
                {"position", s.int64(2)}, {"name", s.str(3)}, {"value", s.str(4)}};
      out << j.dump() << '\n';
    }
  }
  {
    Statement s(impl_->db, std::string("SELECT ") + kFlagColumns + " FROM flags ORDER BY flag_id");
    while (s.step()) {
      json j = {{"table", "flags"},
                {"flag_id", s.int64(0)},
                {"run_id", opt_json(s, 1)},
                {"mutated_id", s.int64(2)},
                {"baseline_id", opt_json(s, 3)},
                {"classification", s.str(4)},
                {"dissimilarity", s.real(5)},
                {"regex_hits", json::parse(s.str(6))},
                {"code_leak", s.int64(7) != 0},
                {"reason", s.str(8)}};
      out << j.dump() << '\n';
    }
  }
  Statement s(impl_->db,
              "SELECT verdict_id, flag_id, verdict, cwe_tags, notes, decided_at, active FROM "
              "verdicts ORDER BY verdict_id");
  while (s.step()) {
    json j = {{"table", "verdicts"},   {"verdict_id", s.int64(0)}, {"flag_id", s.int64(1)},
              {"verdict", s.str(2)},    {"cwe_tags", json::parse(s.str(3))}, {"notes", s.str(4)},
              {"decided_at", s.int64(5)}, {"active", s.int64(6) != 0}};
    out << j.dump() << '\n';
  }
}

void Store::import_jsonl(std::istream& in) {
  std::lock_guard lock(impl_->mutex);
  {
    Statement s(impl_->db, "SELECT (SELECT COUNT(*) FROM requests) + (SELECT COUNT(*) FROM runs)");
    s.step();
    if (s.int64(0) != 0) throw StorageError("import requires an empty store");
  }
  auto opt_int = [](const json& j) -> std::optional<std::int64_t> {
    return j.is_null() ? std::nullopt : std::optional<std::int64_t>(j.get<std::int64_t>());
  };
  Transaction tx(impl_->db);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), "line " + std::to_string(line_no));
    }
    try {
      const std::string table = j.at("table").get<std::string>();
      if (table == "runs") {
        Statement s(impl_->db, std::string("INSERT INTO runs(") + kRunColumns +
                                   ") VALUES(?,?,?,?,?,?,?,?)");
        s.bind(1, j.at("run_id").get<std::int64_t>()).bind(2, j.at("started_at").get<std::int64_t>());
        s.bind(3, opt_int(j.at("ended_at"))).bind(4, j.at("policy").get<std::string>());
        s.bind(5, j.at("bases").get<std::int64_t>()).bind(6, j.at("mutations").get<std::int64_t>());
        s.bind(7, j.at("sent").get<std::int64_t>());
        s.bind(8, j.at("transport_failures").get<std::int64_t>());
        s.run();
      } else if (table == "requests") {
        BaseRequest req;
        req.method = j.at("method").get<std::string>();
        req.url = j.at("url").get<std::string>();
        req.body = text::base64_decode(j.at("body").get<std::string>());
        req.captured_at = from_epoch_ms(j.at("captured_at").get<std::int64_t>());
        std::optional<ResponseRecord> response;
        BodyEncoding response_encoding = BodyEncoding::kText;
        if (const auto& r = j.at("response"); !r.is_null()) {
          ResponseRecord rec;
          rec.status = r.at("status").get<int>();
          rec.content_type = r.at("content_type").get<std::string>();
          rec.body = text::base64_decode(r.at("body").get<std::string>());
          rec.elapsed_ms = r.at("elapsed_ms").get<std::int64_t>();
          if (!r.at("transport_error").is_null()) {
            rec.transport_error = r.at("transport_error").get<std::string>();
          }
          response_encoding =
              parse_body_encoding(r.at("encoding").get<std::string>()).value_or(BodyEncoding::kText);
          response = std::move(rec);
        }
        std::optional<MutationTarget> target;
        if (!j.at("target").is_null()) target = parse_mutation_target(j.at("target").get<std::string>());
        impl_->insert_request_row(
            req, parse_exchange_kind(j.at("kind").get<std::string>()).value_or(ExchangeKind::kOriginal),
            j.at("request_id").get<std::int64_t>(), opt_int(j.at("run_id")), opt_int(j.at("base_id")),
            j.at("iam_name").get<std::string>(), target, j.at("modification").get<std::string>(),
            parse_body_encoding(j.at("body_encoding").get<std::string>()).value_or(BodyEncoding::kText),
            response, response_encoding);
      } else if (table == "headers") {
        impl_->insert_header_row(j.at("header_id").get<std::int64_t>(),
                                 j.at("request_id").get<std::int64_t>(),
                                 j.at("position").get<std::int64_t>(),
                                 {j.at("name").get<std::string>(), j.at("value").get<std::string>()});
      } else if (table == "flags") {
        Statement s(impl_->db, std::string("INSERT INTO flags(") + kFlagColumns +
                                   ") VALUES(?,?,?,?,?,?,?,?,?)");
        s.bind(1, j.at("flag_id").get<std::int64_t>()).bind(2, opt_int(j.at("run_id")));
        s.bind(3, j.at("mutated_id").get<std::int64_t>()).bind(4, opt_int(j.at("baseline_id")));
        s.bind(5, j.at("classification").get<std::string>());
        s.bind(6, j.at("dissimilarity").get<double>()).bind(7, j.at("regex_hits").dump());
        s.bind(8, j.at("code_leak").get<bool>() ? 1 : 0).bind(9, j.at("reason").get<std::string>());
        s.run();
      } else if (table == "verdicts") {
        Statement s(impl_->db,
                    "INSERT INTO verdicts(verdict_id, flag_id, verdict, cwe_tags, notes, "
                    "decided_at, active) VALUES(?,?,?,?,?,?,?)");
        s.bind(1, j.at("verdict_id").get<std::int64_t>()).bind(2, j.at("flag_id").get<std::int64_t>());
        s.bind(3, j.at("verdict").get<std::string>()).bind(4, j.at("cwe_tags").dump());
        s.bind(5, j.at("notes").get<std::string>()).bind(6, j.at("decided_at").get<std::int64_t>());
        s.bind(7, j.at("active").get<bool>() ? 1 : 0);
        s.run();
      } else {
        throw ParseError("unknown table '" + table + "'", "line " + std::to_string(line_no));
      }
    } catch (const json::exception& e) {
      throw ParseError(e.what(), "line " + std::to_string(line_no));
    } catch (const StorageError& e) {
      throw StorageError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  tx.commit();
}

}  // namespace bacscan
