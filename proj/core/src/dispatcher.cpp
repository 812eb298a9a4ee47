#include "bacscan/dispatcher.hpp"

#include <cmath>
#include <thread>

#include "bacscan/error.hpp"
#include "bacscan/url.hpp"

namespace bacscan {

void DispatchConfig::validate() const {
  if (max_in_flight == 0) throw ValidationError("dispatch/max_in_flight", "must be positive");
  if (!std::isfinite(per_host_rate) || per_host_rate <= 0.0) {
    throw ValidationError("dispatch/per_host_rate", "must be a positive number");
  }
  if (timeout.count() <= 0) throw ValidationError("dispatch/timeout_ms", "must be positive");
  if (retries < 0) throw ValidationError("dispatch/retries", "must not be negative");
}

RateLimiter::RateLimiter(double per_second) {
  if (!std::isfinite(per_second) || per_second <= 0.0) {
    throw ValidationError("dispatch/per_host_rate", "must be a positive number");
  }
  // 5% guard so arrival jitter never squeezes one extra request into a window.
  const double micros = 1e6 / per_second * 1.05;
  interval_ = std::chrono::duration_cast<Clock::duration>(
      std::chrono::microseconds(static_cast<std::int64_t>(std::ceil(micros))));
}

RateLimiter::Clock::time_point RateLimiter::acquire(const std::string& host) {
  Clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = Clock::now();
    auto& next = next_slot_[host];
    slot = std::max(now, next);
    next = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
  return slot;
}

Dispatcher::Dispatcher(ScopePolicy scope, DispatchConfig config,
                       std::shared_ptr<HttpTransport> transport, std::shared_ptr<RateLimiter> limiter)
    : scope_(std::move(scope)), config_(config), transport_(std::move(transport)), limiter_(std::move(limiter)) {
  config_.validate();
  scope_.validate();
  if (!transport_) throw ValidationError("transport", "no transport supplied");
  if (!limiter_) limiter_ = std::make_shared<RateLimiter>(config_.per_host_rate);
}

ResponseRecord Dispatcher::send(const BaseRequest& request) {
  const auto url = Url::parse(request.url);
  if (!url) throw ScopeRefusedError("refusing unparseable URL '" + request.url + "'");
  if (!scope_.host_allowed(*url)) {
    throw ScopeRefusedError("refusing out-of-scope host in '" + request.url + "'");
  }
  if (!scope_.path_allowed(*url)) {
    throw ScopeRefusedError("refusing denied path in '" + request.url + "'");
  }

  ResponseRecord response;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    // Reserve budget before touching the network.
    if (sent_.fetch_add(1) >= scope_.max_requests) {
      sent_.fetch_sub(1);
      throw ScopeRefusedError("request budget of " + std::to_string(scope_.max_requests) +
                              " exhausted");
    }
    limiter_->acquire(url->host_key());
    response = transport_->execute(request, config_);
    if (!response.failed()) break;
  }
  return response;
}

}  // namespace bacscan
