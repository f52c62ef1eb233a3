#include "mchr/server.hpp"

#include <charconv>

#include <httplib.h>

#include "mchr/codec.hpp"
#include "mchr/metrics.hpp"

namespace mchr {

namespace {

std::optional<std::string> param(const ApiRequest& r, const std::string& key) {
  auto it = r.params.find(key);
  if (it == r.params.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

nlohmann::json parse_body(const ApiRequest& r) {
  nlohmann::json body = nlohmann::json::parse(r.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) throw Error(Errc::validation, "request body must be a JSON object");
  return body;
}

std::string string_field(const nlohmann::json& body, const char* key, bool required) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) {
    if (required) throw Error(Errc::validation, std::string("missing field '") + key + "'");
    return {};
  }
  if (!it->is_string()) throw Error(Errc::validation, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

nlohmann::json taxonomy_export(const RunState& s) {
  nlohmann::json j = s.taxonomy.to_json();
  j["open"] = s.task.is_open();
  if (s.task.labels) j["labels"] = *s.task.labels;
  return j;
}

}  // namespace

int http_status(Errc code) {
  switch (code) {
    case Errc::not_found: return 404;
    case Errc::conflict: return 409;
    case Errc::invalid_label:
    case Errc::label_out_of_space: return 422;
    case Errc::storage:
    case Errc::corruption: return 500;
    default: return 400;
  }
}

ApiResponse api_error(int status, std::string_view error_code, const std::string& message) {
  return {status, {{"status", status}, {"error_code", error_code}, {"message", message}}};
}

ApiServer::ApiServer(RunSession& session, ServerOptions options)
    : session_(session), options_(std::move(options)), http_(std::make_unique<httplib::Server>()) {
  auto adapt = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.params.emplace(k, v);
    r.body = req.body;
    r.reviewer_header = req.get_header_value("X-Reviewer-Name");
    const ApiResponse out = dispatch(r);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  http_->Get(".*", adapt);
  http_->Post(".*", adapt);
  http_->Put(".*", adapt);
  http_->Delete(".*", adapt);
  http_->Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  if (options_.cors) {
    http_->set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type, X-Reviewer-Name"}});
  }
  if (options_.ui_dir && !http_->set_mount_point("/", options_.ui_dir->string())) {
    throw Error(Errc::input, "cannot serve UI from " + options_.ui_dir->string());
  }
}

ApiServer::~ApiServer() { stop(); }

ApiResponse ApiServer::dispatch(const ApiRequest& r) {
  try {
    const std::string& p = r.path;
    const std::string cases = "/api/cases";
    if (p == cases || p == cases + "/") {
      if (r.method != "GET") return api_error(405, "method_not_allowed", r.method + " " + p);
      return list_cases(r);
    }
    if (p.rfind(cases + "/", 0) == 0) {
      std::string rest = p.substr(cases.size() + 1);
      const std::string suffix = "/decision";
      if (rest.size() > suffix.size() && rest.compare(rest.size() - suffix.size(), suffix.size(), suffix) == 0) {
        if (r.method != "POST") return api_error(405, "method_not_allowed", r.method + " " + p);
        return post_decision(rest.substr(0, rest.size() - suffix.size()), r);
      }
      if (rest.find('/') == std::string::npos) {
        if (r.method != "GET") return api_error(405, "method_not_allowed", r.method + " " + p);
        return get_case(rest);
      }
    }
    if (p == "/api/report") {
      if (r.method != "GET") return api_error(405, "method_not_allowed", r.method + " " + p);
      return get_report();
    }
    if (p == "/api/taxonomy") {
      if (r.method != "GET") return api_error(405, "method_not_allowed", r.method + " " + p);
      return get_taxonomy();
    }
    if (p == "/api/taxonomy/merge") {
      if (r.method != "POST") return api_error(405, "method_not_allowed", r.method + " " + p);
      return post_merge(r);
    }
    return api_error(404, "not_found", "no route for " + r.method + " " + p);
  } catch (const Error& e) {
    return api_error(http_status(e.code()), errc_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return api_error(500, "internal", e.what());
  }
}

ApiResponse ApiServer::list_cases(const ApiRequest& r) {
  CaseQuery q;
  if (auto s = param(r, "status")) q.status = parse_case_status(*s);
  if (auto s = param(r, "reason")) q.reason = parse_reason(*s);
  if (auto s = param(r, "cursor")) q.cursor = *s;
  if (auto s = param(r, "limit")) {
    std::size_t limit = 0;
    auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), limit);
    if (ec != std::errc() || ptr != s->data() + s->size() || limit == 0 || limit > 1000)
      throw Error(Errc::validation, "limit must be an integer in [1, 1000]");
    q.limit = limit;
  }
  return session_.read([&](const RunState& s) {
    const CasePage page = s.review.list(q);
    nlohmann::json items = nlohmann::json::array();
    for (const ReviewCase* c : page.cases) items.push_back(case_summary(*c));
    nlohmann::json body = {{"cases", std::move(items)}};
    body["next_cursor"] = page.next_cursor ? nlohmann::json(*page.next_cursor) : nlohmann::json(nullptr);
    return ApiResponse{200, std::move(body)};
  });
}

ApiResponse ApiServer::get_case(const std::string& id) {
  return session_.read([&](const RunState& s) {
    const ReviewCase* c = s.review.find(id);
    if (!c) throw Error(Errc::not_found, "unknown case '" + id + "'");
    return ApiResponse{200, case_payload(*c)};
  });
}

ApiResponse ApiServer::post_decision(const std::string& id, const ApiRequest& r) {
  const nlohmann::json body = parse_body(r);
  const std::string label = string_field(body, "label", true);
  std::string reviewer = string_field(body, "reviewer", false);
  if (reviewer.empty()) reviewer = r.reviewer_header;
  if (reviewer.empty()) throw Error(Errc::validation, "missing field 'reviewer'");
  const std::string rationale = string_field(body, "rationale", false);

  const DecisionResult result = session_.decide(id, label, reviewer, rationale);
  nlohmann::json out = record_to_json(result.record);
  out["case_id"] = id;
  if (result.qc_match) out["qc_match"] = *result.qc_match;
  return {200, std::move(out)};
}

ApiResponse ApiServer::get_report() {
  return session_.read([](const RunState& s) {
    return ApiResponse{200, report_to_json(build_report({&s}, true))};
  });
}

ApiResponse ApiServer::get_taxonomy() {
  return session_.read([](const RunState& s) { return ApiResponse{200, taxonomy_export(s)}; });
}

ApiResponse ApiServer::post_merge(const ApiRequest& r) {
  const nlohmann::json body = parse_body(r);
  const std::string from = string_field(body, "from", true);
  const std::string into = string_field(body, "into", true);
  std::string actor = string_field(body, "actor", false);
  if (actor.empty()) actor = r.reviewer_header.empty() ? "api" : r.reviewer_header;
  try {
    session_.merge(from, into, actor);
  } catch (const Error& e) {
    if (e.code() == Errc::not_found) return api_error(409, "conflict", e.what());
    throw;
  }
  return get_taxonomy();
}

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) return http_->bind_to_any_port(host);
  return http_->bind_to_port(host, port) ? port : -1;
}

void ApiServer::serve() { http_->listen_after_bind(); }

void ApiServer::stop() {
  if (http_) http_->stop();
}

bool ApiServer::running() const { return http_->is_running(); }

}  // namespace mchr
