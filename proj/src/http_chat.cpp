#include <chrono>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mchr/error.hpp"
#include "mchr/gateway.hpp"

namespace mchr {

HttpChatAdapter::HttpChatAdapter(const ModelSpec& spec) {
  const std::string url = spec.settings.value("url", std::string());
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(Errc::config, "http-chat model '" + spec.id + "' needs settings.url");
  scheme_host_port_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/v1/chat/completions";
  model_name_ = spec.settings.value("model", spec.id);
  if (auto env = spec.settings.value("api_key_env", std::string()); !env.empty()) {
    if (const char* key = std::getenv(env.c_str())) api_key_ = key;
  }
  temperature_ = spec.settings.value("temperature", 0.0);
  if (const char* t = std::getenv("MCHR_HTTP_TIMEOUT_MS")) timeout_ms_ = std::atoi(t);
  timeout_ms_ = spec.settings.value("timeout_ms", timeout_ms_);
  if (timeout_ms_ <= 0) timeout_ms_ = 60000;
  retries_ = std::max(0, spec.settings.value("retries", retries_));
}

std::string HttpChatAdapter::complete(const ModelSpec& model, const RenderedPrompt& prompt, int) {
  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::milliseconds(timeout_ms_);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const nlohmann::json body = {
      {"model", model_name_},
      {"temperature", temperature_},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt.text}}})}};
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(100 << attempt));
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(Errc::adapter, "model '" + model.id + "' returned HTTP " + std::to_string(res->status));
    }
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception&) {
      throw Error(Errc::adapter, "model '" + model.id + "' returned an unexpected completion body");
    }
  }
  throw Error(Errc::adapter, "model '" + model.id + "' unreachable after " + std::to_string(retries_ + 1) +
                                 " tries: " + last_error);
}

}  // namespace mchr
