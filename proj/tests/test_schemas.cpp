#include <doctest.h>

#include "polnarr/service.hpp"
#include "support.hpp"

using namespace polnarr;
using namespace polnarr::testing;

namespace {

// Checks a document against the subset of JSON Schema used in docs/schemas:
// type, enum, properties, required, additionalProperties, items, oneOf, $ref.
class SchemaChecker {
 public:
  std::vector<std::string> errors;

  void check(const std::string& file, const Json& doc) {
    const Json& root = load(file);
    walk(file, root, doc, "$");
  }

 private:
  std::map<std::string, Json> files_;

  const Json& load(const std::string& file) {
    auto it = files_.find(file);
    if (it == files_.end())
      it = files_.emplace(file, Json::parse(read_text(std::string(POLNARR_SCHEMA_DIR) + "/" + file))).first;
    return it->second;
  }

  static bool has_type(const Json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "integer") return v.is_number_integer();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    return false;
  }

  bool matches(const std::string& file, const Json& s, const Json& v) {
    const std::size_t before = errors.size();
    walk(file, s, v, "");
    const bool ok = errors.size() == before;
    errors.resize(before);
    return ok;
  }

  void walk(const std::string& file, const Json& s, const Json& v, const std::string& at) {
    if (s.contains("$ref")) {
      const std::string ref = s["$ref"];
      const auto hash = ref.find('#');
      const std::string target = hash == 0 ? file : ref.substr(0, hash);
      const Json& root = load(target);
      const Json* sub = &root;
      if (hash != std::string::npos && hash + 1 < ref.size())
        sub = &root.at(Json::json_pointer(ref.substr(hash + 1)));
      walk(target, *sub, v, at);
      return;
    }
    if (s.contains("type")) {
      bool ok = false;
      if (s["type"].is_array())
        for (const auto& t : s["type"]) ok = ok || has_type(v, t);
      else
        ok = has_type(v, s["type"]);
      if (!ok) {
        errors.push_back(at + ": expected " + s["type"].dump() + ", got " + v.dump().substr(0, 80));
        return;
      }
    }
    if (s.contains("enum") && std::find(s["enum"].begin(), s["enum"].end(), v) == s["enum"].end())
      errors.push_back(at + ": " + v.dump() + " not in " + s["enum"].dump());
    if (s.contains("oneOf")) {
      int n = 0;
      for (const auto& alt : s["oneOf"]) n += matches(file, alt, v);
      if (n != 1) errors.push_back(at + ": matches " + std::to_string(n) + " alternatives");
    }
    if (v.is_object()) {
      if (s.contains("required"))
        for (const auto& k : s["required"])
          if (!v.contains(k)) errors.push_back(at + ": missing " + k.get<std::string>());
      const Json props = s.value("properties", Json::object());
      for (const auto& [k, child] : v.items()) {
        if (props.contains(k))
          walk(file, props[k], child, at + "." + k);
        else if (s.contains("additionalProperties")) {
          const Json& extra = s["additionalProperties"];
          if (extra.is_boolean()) {
            if (!extra.get<bool>()) errors.push_back(at + ": unexpected key " + k);
          } else {
            walk(file, extra, child, at + "." + k);
          }
        }
      }
    }
    if (v.is_array() && s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i) walk(file, s["items"], v[i], at + "[" + std::to_string(i) + "]");
  }
};

void conforms(const std::string& schema, const Json& doc) {
  SchemaChecker c;
  c.check(schema, doc);
  std::string all;
  for (const auto& e : c.errors) all += e + "\n";
  CHECK_MESSAGE(c.errors.empty(), schema, "\n", all);
}

Json call(Service& s, const std::string& method, const std::string& path, const std::string& body = "",
          const std::string& type = "", int* status = nullptr) {
  HttpResponse r = s.handle(method, path, body, type);
  if (status) *status = r.status;
  return Json::parse(r.body);
}

}  // namespace

TEST_SUITE("schemas") {

TEST_CASE("the checker rejects what the schemas exclude") {
  SchemaChecker c;
  c.check("health.schema.json", Json{{"status", "down"}});
  CHECK(c.errors.size() == 1);
  c.errors.clear();
  c.check("trace.schema.json", Json{{"events", Json::array({{{"t", "1"}, {"action", "a"}, {"args", Json::array()}}})}});
  CHECK(c.errors.size() == 1);
  c.errors.clear();
  c.check("error.schema.json", Json{{"error", {{"code", "x"}}}, {"extra", 1}});
  CHECK(c.errors.size() == 2);
}

TEST_CASE("solve documents conform") {
  for (const char* stem : {"q1", "q2", "q3"}) {
    CAPTURE(stem);
    conforms("solve.schema.json", run_solve(hipaa().model, hipaa_query(stem)).document);
  }
  conforms("solve.schema.json", Json::parse(read_text(hipaa().dir + "/golden/q1.json")));
  QuerySpec blocked = hipaa_query("q3");
  blocked.report_blocked = true;
  conforms("solve.schema.json", run_solve(hipaa().model, blocked).document);
}

TEST_CASE("query inputs conform") {
  for (const char* stem : {"q1", "q2", "q3"}) {
    conforms("query.schema.json", query_to_json(hipaa_query(stem)));
    conforms("solve_request.schema.json", query_to_json(hipaa_query(stem)));
  }
  conforms("solve_request.schema.json", Json(read_text(hipaa().dir + "/q1.pq")));
  conforms("solve_request.schema.json",
           Json{{"query", "horizon 2."}, {"limits", {{"max_narratives", 5}}}, {"options", {{"report_blocked", true}}}});
}

TEST_CASE("trace files and reports conform") {
  for (const char* name : {"unauthorized_sale.json", "q1_authorized.json"}) {
    const Json trace = Json::parse(read_text(hipaa().dir + "/traces/" + name));
    conforms("trace.schema.json", trace);
    TraceFile t = trace_from_json(trace, hipaa().model);
    conforms("trace_report.schema.json", to_json(check_trace(hipaa().model, t.domain, t.events)));
  }
  auto loaded = parse_policy_files({data_path("obligations.ppol")});
  REQUIRE(loaded);
  const Json late = Json::parse(read_text(data_path("late_notice.json")));
  conforms("trace.schema.json", late);
  TraceFile t = trace_from_json(late, *loaded.value);
  conforms("trace_report.schema.json", to_json(check_trace(*loaded.value, t.domain, t.events)));
}

TEST_CASE("service responses conform") {
  ServiceConfig config;
  config.max_body = 4096;
  Service s(config);
  int status = 0;
  conforms("health.schema.json", call(s, "GET", "/api/health"));
  Json created = call(s, "POST", "/api/policies", R"({"pack": "hipaa"})");
  conforms("policy_created.schema.json", created);
  const std::string id = created["policy_id"];
  conforms("policy_created.schema.json", call(s, "POST", "/api/policies", "role person.\n", "text/plain"));
  conforms("policy_summary.schema.json", call(s, "GET", "/api/policies/" + id));
  conforms("trace_report.schema.json",
           call(s, "POST", "/api/policies/" + id + "/audit", read_text(hipaa().dir + "/traces/unauthorized_sale.json")));

  const std::string solve = "/api/policies/" + id + "/solve";
  conforms("error.schema.json", call(s, "POST", solve, "{not json"));
  conforms("error.schema.json", call(s, "GET", "/api/policies/pdeadbeef"));
  conforms("error.schema.json", call(s, "GET", solve));
  conforms("error.schema.json", call(s, "POST", solve, std::string(5000, ' ')));
  conforms("error.schema.json", call(s, "POST", solve, "must nothing(alice).\n", "text/plain"));
  conforms("error.schema.json", call(s, "POST", "/api/policies", "role a < b.\nrole b < a.\n", "text/plain"));
  Json timeout = call(s, "POST", solve,
                      Json{{"query", read_text(hipaa().dir + "/q3.pq")}, {"horizon", 8}, {"limits", {{"timeout_ms", 1}}}}
                          .dump(),
                      "", &status);
  CHECK(status == 408);
  conforms("error.schema.json", timeout);
  conforms("solve.schema.json", timeout["result"]);
}

}
