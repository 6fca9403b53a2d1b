// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "trajaudit/core/digest.hpp"
#include "trajaudit/core/errors.hpp"
#include "trajaudit/core/jsonl.hpp"

namespace trajaudit::gateway {

enum class GatewayMode { Live, Record, Replay };

inline std::string_view to_string(GatewayMode m) {
  switch (m) {
  case GatewayMode::Live: return "live";
  case GatewayMode::Record: return "record";
  case GatewayMode::Replay: return "replay";
  }
  return "?";
}

class GatewayError : public Error {
public:
  enum class Kind { Transport, RateLimited, MissingRecording, Config };

  GatewayError(Kind kind, const std::string& message, int attempts = 0)
      : Error(code_for(kind), message), kind_(kind), attempts_(attempts) {}

  Kind kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }

private:
  static std::string code_for(Kind k) {
    switch (k) {
    case Kind::Transport: return "GatewayError.Transport";
    case Kind::RateLimited: return "GatewayError.RateLimited";
    case Kind::MissingRecording: return "GatewayError.MissingRecording";
    case Kind::Config: return "GatewayError.Config";
    }
    return "GatewayError";
  }

  Kind kind_;
  int attempts_;
};

struct GatewayConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080/v1
  std::string model_name;
  std::string auth_token_env_var = "TRAJAUDIT_GATEWAY_TOKEN";
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  int concurrency_budget = 4;
  GatewayMode mode = GatewayMode::Replay;
  std::string recording_path;

  void validate() const {
    if (max_retries < 0) throw GatewayError(GatewayError::Kind::Config, "max_retries must be >= 0");
    if (concurrency_budget < 1) throw GatewayError(GatewayError::Kind::Config, "concurrency_budget must be >= 1");
    if (mode != GatewayMode::Live && recording_path.empty()) {
      throw GatewayError(GatewayError::Kind::Config, std::string(to_string(mode)) + " mode needs a recording path");
    }
    if (mode != GatewayMode::Replay && base_url.empty()) {
      throw GatewayError(GatewayError::Kind::Config, "base_url is required outside replay mode");
    }
  }
};

struct ChatMessage {
  std::string role;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct ChatExchange {
  ChatRequest request;
  std::string response;
  std::chrono::milliseconds latency{0};
  int attempt_count = 0;
};

inline ojson request_json(const ChatRequest& r) {
  ojson o = ojson::object();
  ojson msgs = ojson::array();
  for (const ChatMessage& m : r.messages) msgs.push_back(ojson{{"role", m.role}, {"content", m.content}});
  o["messages"] = std::move(msgs);
  o["temperature"] = r.temperature;
  o["max_tokens"] = r.max_tokens;
  return o;
}

inline ChatRequest request_from_json(const json& j) {
  ChatRequest r;
  for (const json& m : j.at("messages")) r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  r.temperature = j.at("temperature").get<double>();
  r.max_tokens = j.at("max_tokens").get<int>();
  return r;
}

// Recordings are keyed by this digest, so the order of calls does not matter.
inline std::string request_digest(const ChatRequest& r) {
  return sha256_hex(request_json(r).dump(-1, ' ', false, json::error_handler_t::replace));
}

inline std::string exchange_line(const ChatExchange& e) {
  ojson o = ojson::object();
  o["digest"] = request_digest(e.request);
  o["request"] = request_json(e.request);
  o["response"] = e.response;
  o["latency_ms"] = e.latency.count();
  o["attempt_count"] = e.attempt_count;
  return o.dump(-1, ' ', false, json::error_handler_t::replace);
}

inline std::map<std::string, ChatExchange> load_recording(const std::string& path) {
  std::map<std::string, ChatExchange> out;
  std::ifstream probe(path);
  if (!probe) throw GatewayError(GatewayError::Kind::MissingRecording, "cannot open recording " + path);
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      ChatExchange e;
      e.request = request_from_json(j.at("request"));
      e.response = j.at("response").get<std::string>();
      e.latency = std::chrono::milliseconds(j.value("latency_ms", 0));
      e.attempt_count = j.value("attempt_count", 1);
      out[request_digest(e.request)] = std::move(e);
    } catch (const json::exception& ex) {
      throw SchemaError(path + ":" + std::to_string(lineno) + ": bad exchange: " + ex.what());
    }
  }
  return out;
}

namespace detail {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path prefix with no trailing slash
};

inline Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw GatewayError(GatewayError::Kind::Config, "base_url needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  Endpoint e{slash == std::string::npos ? url : url.substr(0, slash), slash == std::string::npos ? "" : url.substr(slash)};
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  return e;
}

} // namespace detail

// Chat-completions client. Safe to share between threads; at most
// concurrency_budget requests are in flight at once.
class ChatGateway {
public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit ChatGateway(GatewayConfig config)
      : config_(std::move(config)), slots_(std::max(config_.concurrency_budget, 1)) {
    config_.validate();
    if (config_.mode == GatewayMode::Replay) recorded_ = load_recording(config_.recording_path);
    sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }

  const GatewayConfig& config() const { return config_; }

  // Replaces the backoff wait; tests use it to observe delays without sleeping.
  void set_sleeper(Sleeper s) { sleep_ = std::move(s); }

  std::string complete(const ChatRequest& request) { return exchange(request).response; }

  ChatExchange exchange(const ChatRequest& request) {
    if (config_.mode == GatewayMode::Replay) {
      auto it = recorded_.find(request_digest(request));
      if (it == recorded_.end()) {
        throw GatewayError(GatewayError::Kind::MissingRecording,
                           "no recorded exchange for request " + request_digest(request).substr(0, 16));
      }
      return it->second;
    }
    ChatExchange e = live_call(request);
    if (config_.mode == GatewayMode::Record) {
      std::lock_guard lock(record_mutex_);
      std::ofstream out(config_.recording_path, std::ios::app | std::ios::binary);
      if (!out) throw Error("IoError", "cannot append to recording " + config_.recording_path);
      out << exchange_line(e) << "\n";
    }
    return e;
  }

private:
  ChatExchange live_call(const ChatRequest& request) {
    struct Slot {
      std::counting_semaphore<>& s;
      explicit Slot(std::counting_semaphore<>& sem) : s(sem) { s.acquire(); }
      ~Slot() { s.release(); }
    } slot(slots_);

    const detail::Endpoint ep = detail::split_url(config_.base_url);
    httplib::Client client(ep.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (const char* token = std::getenv(config_.auth_token_env_var.c_str()); token != nullptr && *token != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    ojson body = request_json(request);
    body["model"] = config_.model_name;
    const std::string payload = body.dump(-1, ' ', false, json::error_handler_t::replace);

    const auto start = std::chrono::steady_clock::now();
    std::string last_problem;
    bool rate_limited = false;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) sleep_(config_.backoff_base * (1LL << std::min(attempt - 1, 20)));
      auto res = client.Post(ep.path + "/chat/completions", headers, payload, "application/json");
      if (!res) {
        last_problem = "transport failure: " + httplib::to_string(res.error());
        rate_limited = false;
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_problem = "HTTP " + std::to_string(res->status);
        rate_limited = res->status == 429;
        continue;
      }
      if (res->status != 200) {
        throw GatewayError(GatewayError::Kind::Transport, "HTTP " + std::to_string(res->status) + ": " + res->body,
                           attempt + 1);
      }
      const json j = json::parse(res->body, nullptr, false);
      if (j.is_discarded() || !j.contains("choices") || j["choices"].empty() ||
          !j["choices"][0].contains("message") || !j["choices"][0]["message"].value("content", json()).is_string()) {
        throw GatewayError(GatewayError::Kind::Transport, "response has no choices[0].message.content", attempt + 1);
      }
      ChatExchange e;
      e.request = request;
      e.response = j["choices"][0]["message"]["content"].get<std::string>();
      e.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
      e.attempt_count = attempt + 1;
      return e;
    }
    throw GatewayError(rate_limited ? GatewayError::Kind::RateLimited : GatewayError::Kind::Transport,
                       last_problem + " after " + std::to_string(config_.max_retries + 1) + " attempts",
                       config_.max_retries + 1);
  }

  GatewayConfig config_;
  std::counting_semaphore<> slots_;
  std::map<std::string, ChatExchange> recorded_;
  std::mutex record_mutex_;
  Sleeper sleep_;
};

} // namespace trajaudit::gateway
