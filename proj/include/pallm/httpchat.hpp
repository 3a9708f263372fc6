// Minimal chat-completion client for the external judge. Credentials come
// from the environment only (JUDGE_URL, JUDGE_API_KEY); they are never read
// from or written to config files.
#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>

#include "pallm/common.hpp"
#include "pallm/errors.hpp"

namespace pallm {

struct ChatConfig {
  std::string url;      // full endpoint, e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string api_key;  // bearer token
  int max_retries = 3;
  double backoff_base_s = 0.5;
  int timeout_s = 30;
};

inline ChatConfig chat_config_from_env() {
  ChatConfig c;
  const char* url = std::getenv("JUDGE_URL");
  const char* key = std::getenv("JUDGE_API_KEY");
  if (!url || !*url)
    throw InvalidConfig("JUDGE_URL is not set; external judge unavailable");
  if (!key || !*key)
    throw InvalidConfig("JUDGE_API_KEY is not set; external judge unavailable");
  c.url = url;
  c.api_key = key;
  return c;
}

// Abstract so tests and the oracle path can stub the transport.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // messages: [{"role": ..., "content": ...}, ...]; returns assistant text.
  virtual std::string complete(const json& messages) = 0;
};

class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(ChatConfig cfg) : cfg_(std::move(cfg)) {
    split_url(cfg_.url, base_, path_);
  }

  std::string complete(const json& messages) override {
    json body{{"messages", messages}, {"temperature", 0}};
    const std::string payload = body.dump();
    httplib::Headers headers{{"Authorization", "Bearer " + cfg_.api_key}};
    std::string last_err;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        auto delay = std::chrono::duration<double>(
            cfg_.backoff_base_s * static_cast<double>(1 << (attempt - 1)));
        std::this_thread::sleep_for(
            std::chrono::duration_cast<std::chrono::milliseconds>(delay));
      }
      httplib::Client cli(base_);
      cli.set_connection_timeout(cfg_.timeout_s);
      cli.set_read_timeout(cfg_.timeout_s);
      auto res = cli.Post(path_, headers, payload, "application/json");
      if (!res) {
        last_err = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_err = "http status " + std::to_string(res->status);
        continue;
      }
      return extract_content(res->body);
    }
    throw ExternalUnavailable("judge unreachable after " +
                              std::to_string(cfg_.max_retries + 1) + " attempts (" +
                              last_err + ")");
  }

  // Pulls the assistant text out of an OpenAI-style reply; falls back to a
  // bare {"content": ...} object or the raw body.
  static std::string extract_content(const std::string& body) {
    try {
      json j = json::parse(body);
      if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const json& msg = j["choices"][0];
        if (msg.contains("message") && msg["message"].contains("content"))
          return msg["message"]["content"].get<std::string>();
        if (msg.contains("text")) return msg["text"].get<std::string>();
      }
      if (j.contains("content") && j["content"].is_string())
        return j["content"].get<std::string>();
    } catch (const json::exception&) {
    }
    return body;
  }

  static void split_url(const std::string& url, std::string& base, std::string& path) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
      throw InvalidConfig("judge url must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      base = url;
      path = "/";
    } else {
      base = url.substr(0, path_start);
      path = url.substr(path_start);
    }
  }

 private:
  ChatConfig cfg_;
  std::string base_, path_;
};

}  // namespace pallm
