#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mchr/error.hpp"
#include "mchr/session.hpp"

namespace httplib {
class Server;
}

namespace mchr {

struct ApiRequest {
  std::string method;  // "GET", "POST"
  std::string path;
  std::multimap<std::string, std::string> params;
  std::string body;
  std::string reviewer_header;  // X-Reviewer-Name
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

int http_status(Errc code);
ApiResponse api_error(int status, std::string_view error_code, const std::string& message);

struct ServerOptions {
  bool cors = false;
  std::string cors_origin = "*";
  std::optional<std::filesystem::path> ui_dir;
};

// The review API over one run. dispatch() is the whole API without the
// network; listen() wires it to an HTTP server.
class ApiServer {
 public:
  ApiServer(RunSession& session, ServerOptions options = {});
  ~ApiServer();

  ApiResponse dispatch(const ApiRequest& request);

  // Binds without serving. Returns the bound port (an ephemeral one when
  // port == 0), or -1 when the address is taken.
  int bind(const std::string& host, int port);
  // Serves until stop(); bind() first.
  void serve();
  void stop();
  bool running() const;

 private:
  ApiResponse list_cases(const ApiRequest& r);
  ApiResponse get_case(const std::string& id);
  ApiResponse post_decision(const std::string& id, const ApiRequest& r);
  ApiResponse get_report();
  ApiResponse get_taxonomy();
  ApiResponse post_merge(const ApiRequest& r);

  RunSession& session_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace mchr
