#pragma once

// HTTP API over the engine. Requests are handled by `Service::handle`, which
// does not depend on the transport; `serve` binds it to a socket.

#include <atomic>
#include <cstddef>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>

#include "polnarr/core_model.hpp"

namespace polnarr {

struct ServiceConfig {
  std::size_t max_body = 1 << 20;  // bytes
  long default_timeout_ms = 30000;
  std::string ui_dir;  // static files served under / when set
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

class Service {
 public:
  explicit Service(ServiceConfig config = {});

  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::string& body, const std::string& content_type = "");

  /// Register a policy directly; returns its id.
  std::string add_policy(PolicyModel model, std::string include_dir = "");

  /// Blocks until stop() is called. Returns false when the port cannot be bound.
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it (or -1); call listen_after_bind() next.
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  bool running() const;

  const ServiceConfig& config() const { return config_; }

  ~Service();

 private:
  struct Entry {
    std::shared_ptr<const PolicyModel> model;
    std::string include_dir;  // base for `include` in query text
  };

  ServiceConfig config_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Entry> registry_;

  struct Server;
  std::unique_ptr<Server> server_;

  std::shared_ptr<const PolicyModel> find(const std::string& id, std::string* include_dir) const;
  HttpResponse create_policy(const std::string& body, const std::string& content_type);
  HttpResponse get_policy(const std::string& id);
  HttpResponse solve(const std::string& id, const std::string& body, const std::string& content_type);
  HttpResponse audit(const std::string& id, const std::string& body);
  void setup_server();
};

/// Registry id of a model: hash of its canonical printed form.
std::string policy_id(const PolicyModel& model);

}  // namespace polnarr
