#include <filesystem>
#include <thread>

#include <httplib.h>

#include "bacscan/error.hpp"
#include "bacscan/service.hpp"
#include "bacscan/sim.hpp"

namespace bacscan {

namespace {

constexpr const char* kPlaceholder =
    "<!doctype html><title>bacscan</title>"
    "<p>bacscan triage API is running under <code>/api/v1/</code>.</p>";

}  // namespace

struct ServiceServer::Impl {
  httplib::Server http;
  std::thread thread;
};

ServiceServer::ServiceServer(std::shared_ptr<TriageService> service, const ServeOptions& options)
    : service_(std::move(service)), impl_(std::make_unique<Impl>()), bind_(options.bind) {
  if (!service_) throw ConfigError("service", "no service supplied");
  if (!options.allow_remote && !sim::is_loopback_address(options.bind)) {
    throw ConfigError("bind", "refusing to serve on non-loopback address '" + options.bind +
                                  "' without allow_remote");
  }
  if (options.port < 0 || options.port > 65535) throw ConfigError("port", "out of range");

  const auto api = [svc = service_](const httplib::Request& req, httplib::Response& res) {
    ApiRequest request;
    request.method = req.method;
    request.path = req.path;
    for (const auto& [k, v] : req.params) request.query.emplace(k, v);
    request.body = req.body;
    const ApiResponse response = svc->handle(request);
    res.status = response.status;
    res.set_content(response.body, response.content_type);
  };
  const char* pattern = "/api/.*";
  impl_->http.Get(pattern, api);
  impl_->http.Post(pattern, api);
  impl_->http.Put(pattern, api);
  impl_->http.Patch(pattern, api);
  impl_->http.Delete(pattern, api);

  if (!options.ui_dir.empty()) {
    if (!std::filesystem::is_directory(options.ui_dir)) {
      throw ConfigError("ui_dir", "not a directory: " + options.ui_dir);
    }
    impl_->http.set_mount_point("/", options.ui_dir);
  } else {
    impl_->http.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholder, "text/html");
    });
  }

  if (options.port == 0) {
    port_ = impl_->http.bind_to_any_port(options.bind);
  } else if (impl_->http.bind_to_port(options.bind, options.port)) {
    port_ = options.port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) {
    throw Error("cannot bind service to " + options.bind + ":" + std::to_string(options.port) +
                " (port busy or address unavailable)");
  }
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

ServiceServer::~ServiceServer() { stop(); }

std::string ServiceServer::origin() const { return "http://" + bind_ + ":" + std::to_string(port_); }

void ServiceServer::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void ServiceServer::wait() {
  if (impl_ && impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace bacscan
