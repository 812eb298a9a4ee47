#include "bacscan/scan.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <thread>

#include "bacscan/error.hpp"
#include "bacscan/url.hpp"

namespace bacscan {

using nlohmann::json;

json to_json(const ScopePolicy& scope) {
  return {{"allowed_hosts", scope.allowed_hosts},
          {"denied_path_prefixes", scope.denied_path_prefixes},
          {"max_requests", scope.max_requests}};
}

json to_json(const DispatchConfig& config) {
  return {{"max_in_flight", config.max_in_flight},
          {"per_host_rate", config.per_host_rate},
          {"timeout_ms", config.timeout.count()},
          {"retries", config.retries},
          {"follow_redirects", config.follow_redirects},
          {"verify_tls", config.verify_tls}};
}

namespace {

struct Outcome {
  std::optional<ResponseRecord> response;
  std::string refused;  // non-empty when the dispatcher declined the request
};

// Runs work(i) for i in [0, count) on up to `workers` threads and hands the
// results to consume() on the calling thread in index order.
void dispatch_ordered(std::size_t count, std::size_t workers,
                      const std::function<Outcome(std::size_t)>& work,
                      const std::function<void(std::size_t, Outcome&)>& consume) {
  if (count == 0) return;
  std::vector<std::optional<Outcome>> results(count);
  std::exception_ptr failure;
  std::mutex mutex;
  std::condition_variable ready;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> cancelled{false};

  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || cancelled.load()) return;
      Outcome out;
      std::exception_ptr error;
      try {
        out = work(i);
      } catch (...) {
        error = std::current_exception();
      }
      std::lock_guard lock(mutex);
      if (error && !failure) failure = error;
      results[i] = std::move(out);
      ready.notify_all();
    }
  };

  std::vector<std::thread> threads;
  const std::size_t n = std::min(workers, count);
  threads.reserve(n);
  for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);

  std::exception_ptr consume_failure;
  for (std::size_t i = 0; i < count && !consume_failure; ++i) {
    Outcome out;
    {
      std::unique_lock lock(mutex);
      ready.wait(lock, [&] { return results[i].has_value() || failure; });
      if (failure) break;
      out = std::move(*results[i]);
      results[i].reset();
    }
    try {
      consume(i, out);
    } catch (...) {
      consume_failure = std::current_exception();
    }
  }
  cancelled = true;
  for (auto& t : threads) t.join();
  if (consume_failure) std::rethrow_exception(consume_failure);
  if (failure) std::rethrow_exception(failure);
}

Outcome send_guarded(Dispatcher& dispatcher, const BaseRequest& request) {
  try {
    return {dispatcher.send(request), {}};
  } catch (const ScopeRefusedError& e) {
    return {std::nullopt, e.what()};
  }
}

json run_policy(const ScanOptions& options) {
  json iams = json::array();
  for (const auto& d : options.iams) {
    iams.push_back({{"name", d.name}, {"enabled", d.enabled}, {"config", d.config}});
  }
  return {{"scope", to_json(options.scope)},
          {"dispatch", to_json(options.dispatch)},
          {"detector",
           {{"dissimilarity_threshold", options.detector.dissimilarity_threshold},
            {"max_auto_len", options.detector.max_auto_len},
            {"markup_types", options.detector.markup_types}}},
          {"iams", iams},
          {"budget_per_request", options.budget_per_request},
          {"refresh_baseline", options.refresh_baseline},
          {"dry_run", options.dry_run}};
}

struct Base {
  Exchange original;
  std::optional<ResponseRecord> baseline;
  std::optional<std::int64_t> baseline_id;
};

}  // namespace

ScanSummary run_scan(Store& store, const ScanOptions& options, std::shared_ptr<HttpTransport> transport,
                     const std::function<void(const ScanProgress&)>& progress) {
  options.scope.validate();
  options.dispatch.validate();
  const Detector detector(options.detector);
  const AttackPlan plan(options.iams);
  Dispatcher dispatcher(options.scope, options.dispatch, std::move(transport));

  ScanSummary summary;
  summary.run_id = store.begin_run(run_policy(options));
  const auto refuse = [&](const std::string& why) {
    ++summary.out_of_scope;
    summary.warnings.push_back(why);
  };

  std::vector<Base> bases;
  for (auto& ex : store.exchanges_of_kind(ExchangeKind::kOriginal)) {
    if (!options.base_ids.empty() &&
        std::find(options.base_ids.begin(), options.base_ids.end(), ex.id) == options.base_ids.end()) {
      continue;
    }
    if (!options.scope.allows(ex.request.url)) {
      refuse("request " + std::to_string(ex.id) + " is outside the scan scope: " + ex.request.url);
      continue;
    }
    Base base;
    if (ex.response && !options.refresh_baseline) {
      base.baseline = ex.response;
      base.baseline_id = ex.id;
    }
    base.original = std::move(ex);
    bases.push_back(std::move(base));
  }
  summary.counts.bases = static_cast<std::int64_t>(bases.size());

  struct Job {
    std::size_t base;
    MutatedRequest mutation;
  };
  std::vector<Job> jobs;
  for (std::size_t b = 0; b < bases.size(); ++b) {
    BaseRequest request = bases[b].original.request;
    request.request_id = bases[b].original.id;
    for (auto& m : plan.generate(request, options.budget_per_request)) jobs.push_back({b, std::move(m)});
  }
  summary.counts.mutations = static_cast<std::int64_t>(jobs.size());

  std::vector<std::size_t> live_baselines;
  if (!options.dry_run) {
    for (std::size_t b = 0; b < bases.size(); ++b) {
      if (!bases[b].baseline) live_baselines.push_back(b);
    }
  }
  const std::size_t total = live_baselines.size() + jobs.size();
  std::size_t done = 0;
  const auto record = [&](const std::optional<ResponseRecord>& response) {
    if (response && response->failed()) ++summary.counts.transport_failures;
    summary.counts.sent = static_cast<std::int64_t>(dispatcher.sent());
    store.update_run_counts(summary.run_id, summary.counts);
    ++done;
    if (progress) progress({done, total});
  };

  dispatch_ordered(
      live_baselines.size(), options.dispatch.max_in_flight,
      [&](std::size_t i) { return send_guarded(dispatcher, bases[live_baselines[i]].original.request); },
      [&](std::size_t i, Outcome& out) {
        Base& base = bases[live_baselines[i]];
        if (!out.response) {
          refuse(out.refused);
        } else {
          ExchangeContext ctx;
          ctx.kind = ExchangeKind::kBaseline;
          ctx.run_id = summary.run_id;
          ctx.base_id = base.original.id;
          ctx.body_encoding = base.original.body_encoding;
          base.baseline_id = store.persist_exchange(base.original.request, std::nullopt, out.response, ctx);
          base.baseline = out.response;
        }
        record(out.response);
      });

  dispatch_ordered(
      options.dry_run ? 0 : jobs.size(), options.dispatch.max_in_flight,
      [&](std::size_t i) -> Outcome {
        // A refused baseline means nothing for this base may be sent.
        if (!bases[jobs[i].base].baseline) return {std::nullopt, "baseline unavailable"};
        return send_guarded(dispatcher, jobs[i].mutation.request);
      },
      [&](std::size_t i, Outcome& out) {
        const Job& job = jobs[i];
        const Base& base = bases[job.base];
        if (!out.response) {
          refuse("mutation of request " + std::to_string(base.original.id) + " not sent: " + out.refused);
          record(std::nullopt);
          return;
        }
        ExchangeContext ctx;
        ctx.run_id = summary.run_id;
        const std::int64_t mutated_id =
            store.persist_exchange(base.original.request, job.mutation, out.response, ctx);
        PveFlag flag = detector.classify(*base.baseline, *out.response);
        flag.mutated_id = mutated_id;
        flag.baseline_id = base.baseline_id;
        flag.run_id = summary.run_id;
        store.insert_flag(flag);
        switch (flag.classification) {
          case Classification::kPve: ++summary.pve; break;
          case Classification::kManualReview: ++summary.manual_review; break;
          case Classification::kBenign: ++summary.benign; break;
        }
        record(out.response);
      });

  if (options.dry_run) {
    for (const auto& job : jobs) {
      ExchangeContext ctx;
      ctx.run_id = summary.run_id;
      store.persist_exchange(bases[job.base].original.request, job.mutation, std::nullopt, ctx);
      record(std::nullopt);
    }
  }

  summary.counts.sent = static_cast<std::int64_t>(dispatcher.sent());
  store.update_run_counts(summary.run_id, summary.counts);
  store.finish_run(summary.run_id);
  return summary;
}

ScopePolicy scope_from_json(const json& j) {
  ScopePolicy scope;
  if (!j.is_object()) return scope;
  scope.allowed_hosts = j.value("allowed_hosts", std::vector<std::string>{});
  scope.denied_path_prefixes = j.value("denied_path_prefixes", std::vector<std::string>{});
  scope.max_requests = j.value("max_requests", scope.max_requests);
  return scope;
}

ReplayResult replay_flag(Store& store, std::int64_t flag_id, const ReplayEdits& edits,
                         Dispatcher& dispatcher, const Detector& detector) {
  const FlagRecord record = store.flag_record(flag_id);
  BaseRequest request = record.mutated.request;
  if (edits.method) request.method = *edits.method;
  if (edits.url) request.url = *edits.url;
  if (edits.headers) request.headers = *edits.headers;
  if (edits.body) request.body = *edits.body;
  validate(request);

  ReplayResult result;
  result.flag_id = flag_id;
  result.response = dispatcher.send(request);
  result.request = request;

  ExchangeContext ctx;
  ctx.kind = ExchangeKind::kReplay;
  ctx.run_id = record.mutated.run_id;
  ctx.base_id = record.mutated.id;
  ctx.body_encoding = record.mutated.body_encoding;
  result.exchange_id = store.persist_exchange(request, std::nullopt, result.response, ctx);

  const ResponseRecord baseline = record.baseline && record.baseline->response
                                      ? *record.baseline->response
                                      : ResponseRecord::transport_failure("baseline unavailable");
  result.classification = detector.classify(baseline, result.response);
  result.classification.baseline_id = record.flag.baseline_id;
  result.classification.run_id = record.flag.run_id;
  return result;
}

}  // namespace bacscan
