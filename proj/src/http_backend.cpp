#include <cstdlib>

#include "case_eval/errors.hpp"
#include "case_eval/judge.hpp"
#include "httplib.h"
#include "json.hpp"

namespace case_eval {

namespace {

bool is_transient_status(int status) {
  return status == 408 || status == 429 || status == 500 || status == 502 || status == 503 ||
         status == 504;
}

}  // namespace

HttpChatBackend::HttpChatBackend(std::string endpoint, std::optional<std::string> api_key)
    : api_key_(api_key ? std::move(api_key) : api_key_from_env()) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw InvalidInput("endpoint lacks a scheme: " + endpoint);
  const auto path_start = endpoint.find('/', scheme_end + 3);
  scheme_host_port_ = endpoint.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "" : endpoint.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  constexpr std::string_view kSuffix = "/chat/completions";
  if (path.size() < kSuffix.size() || path.compare(path.size() - kSuffix.size(), kSuffix.size(), kSuffix) != 0) {
    path += kSuffix;
  }
  path_ = path;
}

std::optional<std::string> HttpChatBackend::api_key_from_env() {
  const char* key = std::getenv("CASE_EVAL_API_KEY");
  if (key == nullptr || *key == '\0') return std::nullopt;
  return std::string(key);
}

std::string HttpChatBackend::complete(const ChatRequest& request) {
  nlohmann::json body{{"model", request.model},
                      {"temperature", request.temperature},
                      {"max_tokens", request.max_tokens},
                      {"messages",
                       nlohmann::json::array({{{"role", "system"}, {"content", request.system}},
                                              {{"role", "user"}, {"content", request.user}}})}};
  if (request.seed) body["seed"] = *request.seed;

  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);

  const auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw TransientError("transport failure contacting " + scheme_host_port_ + ": " +
                         httplib::to_string(res.error()));
  }
  if (is_transient_status(res->status)) {
    throw TransientError("endpoint returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + ": " +
                         res->body.substr(0, 200));
  }
  try {
    const auto reply = nlohmann::json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed chat-completions response: ") + e.what());
  }
}

}  // namespace case_eval
