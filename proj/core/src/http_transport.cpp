#include <chrono>

#include <httplib.h>

#include "bacscan/dispatcher.hpp"
#include "bacscan/text.hpp"
#include "bacscan/url.hpp"

namespace bacscan {

namespace {

// Framing and encoding headers are recomputed by the client; replaying a
// captured Accept-Encoding would yield compressed bodies we cannot compare.
bool is_managed_header(std::string_view name) {
  for (const char* managed : {"content-length", "transfer-encoding", "connection", "keep-alive",
                              "accept-encoding", "upgrade", "te", "trailer"}) {
    if (text::iequals(name, managed)) return true;
  }
  return false;
}

class HttplibTransport final : public HttpTransport {
 public:
  ResponseRecord execute(const BaseRequest& request, const DispatchConfig& config) override {
    const auto start = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
      return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
          .count();
    };
    const auto url = Url::parse(request.url);
    if (!url) return ResponseRecord::transport_failure("invalid URL");

    const std::string host = url->host.find(':') != std::string::npos ? "[" + url->host + "]" : url->host;
    httplib::Client client(url->scheme + "://" + host + ":" + std::to_string(url->effective_port()));
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    client.set_follow_location(config.follow_redirects);
    client.set_keep_alive(false);
    client.set_url_encode(false);  // send the captured target verbatim
    client.enable_server_certificate_verification(config.verify_tls);

    httplib::Request req;
    req.method = request.method;
    req.path = url->target();
    for (const auto& h : request.headers) {
      if (!is_managed_header(h.name)) req.headers.emplace(h.name, h.value);
    }
    req.body = request.body;

    httplib::Result result = client.send(req);
    if (!result) {
      const auto err = result.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed() >= config.timeout.count());
      return ResponseRecord::transport_failure(timed_out ? "timeout" : httplib::to_string(err),
                                               elapsed());
    }
    ResponseRecord response;
    response.status = result->status;
    response.content_type = result->get_header_value("Content-Type");
    response.body = std::move(result->body);
    response.elapsed_ms = elapsed();
    return response;
  }
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport() { return std::make_unique<HttplibTransport>(); }

}  // namespace bacscan
