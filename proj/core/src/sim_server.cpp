#include <thread>

#include <httplib.h>

#include "bacscan/error.hpp"
#include "bacscan/sim.hpp"

namespace bacscan::sim {

struct Server::Impl {
  httplib::Server http;
  std::thread thread;
};

Server::Server(std::shared_ptr<TargetSimulator> sim, const ServerOptions& options)
    : sim_(std::move(sim)), impl_(std::make_unique<Impl>()), bind_(options.bind) {
  if (!sim_) throw ConfigError("sim", "no simulator supplied");
  if (!options.allow_remote && !is_loopback_address(options.bind)) {
    throw ConfigError("bind", "refusing to serve on non-loopback address '" + options.bind +
                                  "' without allow_remote");
  }
  if (options.port < 0 || options.port > 65535) throw ConfigError("port", "out of range");

  const auto handler = [sim = sim_](const httplib::Request& req, httplib::Response& res) {
    SimRequest request;
    request.method = req.method;
    request.target = req.target;
    for (const auto& [name, value] : req.headers) {
      // httplib synthesizes these for the server side; they were not sent.
      if (name == "REMOTE_ADDR" || name == "REMOTE_PORT" || name == "LOCAL_ADDR" || name == "LOCAL_PORT") {
        continue;
      }
      request.headers.push_back({name, value});
    }
    request.body = req.body;
    request.host = req.get_header_value("Host");
    const SimResponse response = sim->handle(request);
    res.status = response.status;
    res.set_content(response.body, response.content_type);
  };
  impl_->http.Get(".*", handler);
  impl_->http.Post(".*", handler);
  impl_->http.Put(".*", handler);
  impl_->http.Patch(".*", handler);
  impl_->http.Delete(".*", handler);
  impl_->http.Options(".*", handler);

  if (options.port == 0) {
    port_ = impl_->http.bind_to_any_port(options.bind);
  } else if (impl_->http.bind_to_port(options.bind, options.port)) {
    port_ = options.port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) {
    throw Error("cannot bind simulator to " + options.bind + ":" + std::to_string(options.port) +
                " (port busy or address unavailable)");
  }
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

Server::~Server() { stop(); }

void Server::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void Server::wait() {
  if (impl_ && impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace bacscan::sim
