#include "polnarr/service.hpp"

#include <filesystem>
#include <mutex>
#include <regex>

#include <httplib.h>

#include "polnarr/dsl.hpp"
#include "polnarr/pack.hpp"
#include "polnarr/serialize.hpp"

namespace polnarr {

namespace {

HttpResponse json_response(int status, const Json& body) {
  return HttpResponse{status, body.dump(2) + "\n", "application/json"};
}

HttpResponse error_response(int status, const std::string& code, const std::string& message,
                            const std::vector<Diagnostic>* diags = nullptr) {
  Json err{{"code", code}, {"message", message}};
  if (diags) err["diagnostics"] = to_json(*diags);
  return json_response(status, Json{{"error", err}});
}

int status_for(const std::string& code) {
  if (code == "BadRequest") return 400;
  if (code == "NotFound" || code == "UnknownPack") return 404;
  return 422;
}

bool looks_like_json(const std::string& body, const std::string& content_type) {
  if (content_type.find("json") != std::string::npos) return true;
  auto pos = body.find_first_not_of(" \t\r\n");
  return pos != std::string::npos && body[pos] == '{';
}

std::string hex64(std::uint64_t h) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (int shift = 60; shift >= 0; shift -= 4) out += hex[(h >> shift) & 0xf];
  return out;
}

SolveOverrides overrides_from(const Json& j) {
  SolveOverrides o;
  auto get = [&](const char* section, const char* key) -> const Json* {
    auto s = j.find(section);
    if (s == j.end() || !s->is_object()) return nullptr;
    auto it = s->find(key);
    return it == s->end() ? nullptr : &*it;
  };
  auto integer = [&](const char* section, const char* key) -> std::optional<long> {
    const Json* v = get(section, key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) throw DocumentError("BadRequest", std::string(key) + " must be an integer");
    return v->get<long>();
  };
  auto boolean = [&](const char* key) -> std::optional<bool> {
    const Json* v = get("options", key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) throw DocumentError("BadRequest", std::string(key) + " must be a boolean");
    return v->get<bool>();
  };
  if (auto v = integer("limits", "max_narratives")) o.max_narratives = static_cast<std::size_t>(*v);
  if (auto v = integer("limits", "max_blocks")) o.max_blocks = static_cast<std::size_t>(*v);
  if (auto v = integer("limits", "timeout_ms")) o.timeout_ms = *v;
  if (auto it = j.find("horizon"); it != j.end()) {
    if (!it->is_number_integer()) throw DocumentError("BadRequest", "horizon must be an integer");
    o.horizon = it->get<int>();
  }
  if (auto v = boolean("require_compliant")) o.allow_noncompliant = !*v;
  o.report_blocked = boolean("report_blocked");
  o.intentionality = boolean("intentionality");
  if (auto it = j.find("combination"); it != j.end()) {
    if (!it->is_string()) throw DocumentError("BadRequest", "combination must be a string");
    try {
      o.combination = parse_combination(it->get<std::string>());
    } catch (const ModelError& e) {
      throw DocumentError("BadRequest", e.what());
    }
  }
  return o;
}

}  // namespace

std::string policy_id(const PolicyModel& model) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : print_policy(model)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return "p" + hex64(h);
}

struct Service::Server {
  httplib::Server http;
};

Service::Service(ServiceConfig config) : config_(std::move(config)) {}

Service::~Service() { stop(); }

std::string Service::add_policy(PolicyModel model, std::string include_dir) {
  std::string id = policy_id(model);
  std::unique_lock lock(mu_);
  registry_[id] = Entry{std::make_shared<const PolicyModel>(std::move(model)), std::move(include_dir)};
  return id;
}

std::shared_ptr<const PolicyModel> Service::find(const std::string& id,
                                                 std::string* include_dir) const {
  std::shared_lock lock(mu_);
  auto it = registry_.find(id);
  if (it == registry_.end()) return nullptr;
  if (include_dir) *include_dir = it->second.include_dir;
  return it->second.model;
}

HttpResponse Service::handle(const std::string& method, const std::string& path,
                             const std::string& body, const std::string& content_type) {
  if (body.size() > config_.max_body)
    return error_response(413, "PayloadTooLarge",
                          "request body exceeds " + std::to_string(config_.max_body) + " bytes");
  static const std::regex policy_re(R"(^/api/policies/([A-Za-z0-9_-]+)$)");
  static const std::regex action_re(R"(^/api/policies/([A-Za-z0-9_-]+)/(solve|audit)$)");
  std::smatch m;
  try {
    if (path == "/api/health") {
      if (method != "GET") return error_response(405, "MethodNotAllowed", "use GET");
      return json_response(200, Json{{"status", "ok"}});
    }
    if (path == "/api/policies") {
      if (method != "POST") return error_response(405, "MethodNotAllowed", "use POST");
      return create_policy(body, content_type);
    }
    if (std::regex_match(path, m, policy_re)) {
      if (method != "GET") return error_response(405, "MethodNotAllowed", "use GET");
      return get_policy(m[1]);
    }
    if (std::regex_match(path, m, action_re)) {
      if (method != "POST") return error_response(405, "MethodNotAllowed", "use POST");
      return m[2] == "solve" ? solve(m[1], body, content_type) : audit(m[1], body);
    }
    return error_response(404, "NotFound", "no route for " + method + " " + path);
  } catch (const Json::parse_error& e) {
    return error_response(400, "BadRequest", std::string("malformed JSON: ") + e.what());
  } catch (const DocumentError& e) {
    return error_response(status_for(e.code()), e.code(), e.what(),
                          e.diagnostics.empty() ? nullptr : &e.diagnostics);
  } catch (const ModelError& e) {
    return error_response(status_for(e.code()), e.code(), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "InternalError", e.what());
  }
}

HttpResponse Service::create_policy(const std::string& body, const std::string& content_type) {
  PolicyModel model;
  std::vector<Diagnostic> diags;
  std::string include_dir;
  if (looks_like_json(body, content_type)) {
    Json j = Json::parse(body);
    if (!j.is_object()) throw DocumentError("BadRequest", "expected {\"pack\": name} or {\"text\": policy}");
    if (auto it = j.find("pack"); it != j.end()) {
      if (!it->is_string()) throw DocumentError("BadRequest", "pack must be a string");
      const std::string name = it->get<std::string>();
      if (name.empty() || name.find('/') != std::string::npos || name.find("..") != std::string::npos)
        throw DocumentError("BadRequest", "invalid pack name");
      const std::string dir = pack_dir(name);
      if (!std::filesystem::is_directory(dir))
        throw DocumentError("UnknownPack", "no pack named '" + name + "'");
      Pack pack = load_pack(dir);
      model = std::move(pack.model);
      diags = std::move(pack.warnings);
      include_dir = dir;
    } else if (auto t = j.find("text"); t != j.end() && t->is_string()) {
      auto parsed = parse_policy(t->get<std::string>(), "<upload>", no_include_loader());
      if (!parsed) throw DocumentError("InvalidPolicy", "policy has errors", parsed.diagnostics);
      model = std::move(*parsed.value);
      diags = std::move(parsed.diagnostics);
    } else {
      throw DocumentError("BadRequest", "expected {\"pack\": name} or {\"text\": policy}");
    }
  } else {
    auto parsed = parse_policy(body, "<upload>", no_include_loader());
    if (!parsed) throw DocumentError("InvalidPolicy", "policy has errors", parsed.diagnostics);
    model = std::move(*parsed.value);
    diags = std::move(parsed.diagnostics);
  }
  std::string id = add_policy(std::move(model), include_dir);
  return json_response(200, Json{{"policy_id", id}, {"diagnostics", to_json(diags)}});
}

HttpResponse Service::get_policy(const std::string& id) {
  auto model = find(id, nullptr);
  if (!model) return error_response(404, "NotFound", "unknown policy '" + id + "'");
  Json j{{"policy_id", id}};
  const Json summary = model_summary(*model);
  for (auto& [k, v] : summary.items()) j[k] = v;
  return json_response(200, j);
}

HttpResponse Service::solve(const std::string& id, const std::string& body,
                            const std::string& content_type) {
  std::string include_dir;
  auto model = find(id, &include_dir);
  if (!model) return error_response(404, "NotFound", "unknown policy '" + id + "'");

  auto parse_text = [&](const std::string& text) {
    if (include_dir.empty()) return parse_query(text, *model, "<request>", no_include_loader());
    return parse_query(text, *model, (std::filesystem::path(include_dir) / "request.pq").string());
  };

  QuerySpec spec;
  SolveOverrides overrides;
  if (looks_like_json(body, content_type)) {
    Json j = Json::parse(body);
    if (!j.is_object()) throw DocumentError("BadRequest", "query must be a JSON object");
    if (auto q = j.find("query"); q != j.end()) {
      if (!q->is_string()) throw DocumentError("BadRequest", "query must be DSL text");
      auto parsed = parse_text(q->get<std::string>());
      if (!parsed) throw DocumentError("InvalidQuery", "query has errors", parsed.diagnostics);
      spec = std::move(*parsed.value);
      overrides = overrides_from(j);
    } else {
      spec = query_from_json(j, *model);
    }
  } else {
    auto parsed = parse_text(body);
    if (!parsed) throw DocumentError("InvalidQuery", "query has errors", parsed.diagnostics);
    spec = std::move(*parsed.value);
  }
  if (!spec.timeout_ms && !overrides.timeout_ms) overrides.timeout_ms = config_.default_timeout_ms;

  SolveRun run = run_solve(*model, spec, overrides);
  if (run.result.truncated) {
    Json j{{"error", {{"code", "timeout"}, {"message", "search timed out; results are partial"}}},
           {"result", run.document}};
    return json_response(408, j);
  }
  return json_response(200, run.document);
}

HttpResponse Service::audit(const std::string& id, const std::string& body) {
  auto model = find(id, nullptr);
  if (!model) return error_response(404, "NotFound", "unknown policy '" + id + "'");
  Json j = Json::parse(body);
  TraceFile trace = trace_from_json(j, *model);
  Combination mode = Combination::Strict;
  if (auto it = j.find("combination"); it != j.end() && it->is_string())
    mode = parse_combination(it->get<std::string>());
  TraceReport report = check_trace(*model, trace.domain, trace.events, mode);
  return json_response(200, to_json(report));
}

void Service::setup_server() {
  if (server_) return;
  server_ = std::make_unique<Server>();
  auto& http = server_->http;
  http.set_payload_max_length(config_.max_body);
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    HttpResponse r = handle(req.method, req.path, req.body, req.get_header_value("Content-Type"));
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  http.Get(R"(/api/.*)", route);
  http.Post(R"(/api/.*)", route);
  http.Put(R"(/api/.*)", route);
  http.Delete(R"(/api/.*)", route);
  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    HttpResponse r = res.status == 413
                         ? error_response(413, "PayloadTooLarge", "request body too large")
                         : error_response(res.status, res.status == 404 ? "NotFound" : "HttpError",
                                          "request failed with status " + std::to_string(res.status));
    res.set_content(r.body, r.content_type);
  });
  if (!config_.ui_dir.empty()) http.set_mount_point("/", config_.ui_dir);
}

bool Service::listen(const std::string& host, int port) {
  setup_server();
  return server_->http.listen(host, port);
}

int Service::bind_any_port(const std::string& host) {
  setup_server();
  return server_->http.bind_to_any_port(host);
}

bool Service::listen_after_bind() { return server_ && server_->http.listen_after_bind(); }

void Service::stop() {
  if (server_) server_->http.stop();
}

bool Service::running() const { return server_ && server_->http.is_running(); }

}  // namespace polnarr
