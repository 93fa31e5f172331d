#pragma once

// Chat backends. Everything upstream (structuring, judging) talks to the
// ChatBackend interface; the HTTP implementation targets an OpenAI-style
// chat-completions endpoint and the mock implementation replays scripted
// responses keyed by request fingerprints, so batch runs are reproducible
// without network access.

#include <chrono>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vge/errors.hpp"

namespace vge {

struct ChatImage {
  std::string media_type = "image/png";
  std::string bytes;  // raw encoded image (e.g. PNG), not yet base64
  std::string caption;
};

struct ChatMessage {
  std::string role;  // "system" | "user"
  std::string text;
  std::vector<ChatImage> images;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 4096;
  // Stable identity of the request's intent (e.g. "judge:<video>:<dims>").
  // The mock backend keys its script on this; real backends ignore it.
  std::string fingerprint;
};

struct ChatResponse {
  std::string text;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Rate limiting
// ---------------------------------------------------------------------------

// Sliding-window limiter: at most `requests_per_minute` acquisitions within
// any 60s span. Clock and sleep are injectable so tests can drive simulated
// time instead of waiting.
class RateLimiter {
 public:
  using Clock = std::function<double()>;         // seconds, monotonic
  using Sleeper = std::function<void(double)>;   // seconds

  explicit RateLimiter(int requests_per_minute, Clock clock = {}, Sleeper sleep = {})
      : limit_(requests_per_minute),
        clock_(clock ? std::move(clock) : default_clock()),
        sleep_(sleep ? std::move(sleep) : default_sleeper()) {}

  // Blocks (via the sleeper) until a slot is free, then claims it.
  void acquire() {
    if (limit_ <= 0) return;  // unlimited
    for (;;) {
      double wait = 0.0;
      {
        std::lock_guard<std::mutex> lock(mu_);
        double now = clock_();
        while (!stamps_.empty() && stamps_.front() <= now - kWindowSeconds) {
          stamps_.pop_front();
        }
        if (static_cast<int>(stamps_.size()) < limit_) {
          stamps_.push_back(now);
          return;
        }
        wait = stamps_.front() + kWindowSeconds - now;
      }
      sleep_(wait > 0.0 ? wait : 1e-3);
    }
  }

  int in_window() {
    std::lock_guard<std::mutex> lock(mu_);
    double now = clock_();
    while (!stamps_.empty() && stamps_.front() <= now - kWindowSeconds) stamps_.pop_front();
    return static_cast<int>(stamps_.size());
  }

  static constexpr double kWindowSeconds = 60.0;

 private:
  static Clock default_clock() {
    return [] {
      return std::chrono::duration<double>(
                 std::chrono::steady_clock::now().time_since_epoch())
          .count();
    };
  }
  static Sleeper default_sleeper() {
    return [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }

  int limit_;
  Clock clock_;
  Sleeper sleep_;
  std::mutex mu_;
  std::deque<double> stamps_;
};

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

// Replays canned responses from a script. Script format:
//   { "responses": { "<fingerprint>": "text" | ["first", "second", ...] },
//     "fallback": "text" }           (fallback optional)
// A list is served in order (repeating its last entry), which lets tests
// script a malformed response followed by a good one to exercise retries.
class MockBackend : public ChatBackend {
 public:
  MockBackend() = default;
  explicit MockBackend(const nlohmann::json& script) { load(script); }

  // Factories return prvalues: the mutex member makes this class immovable.
  static MockBackend from_json(const nlohmann::json& script) { return MockBackend(script); }

  static MockBackend from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mock script: " + path);
    nlohmann::json script;
    try {
      in >> script;
    } catch (const nlohmann::json::exception& e) {
      throw MalformedJson(std::string("mock script: ") + e.what());
    }
    return MockBackend(script);
  }

  void add_response(const std::string& fingerprint, std::string text) {
    scripts_[fingerprint] = {std::move(text)};
  }
  void add_responses(const std::string& fingerprint, std::vector<std::string> seq) {
    if (seq.empty()) throw MalformedJson("mock script: empty response list");
    scripts_[fingerprint] = std::move(seq);
  }
  void set_fallback(std::string text) {
    fallback_ = std::move(text);
    has_fallback_ = true;
  }

  ChatResponse complete(const ChatRequest& request) override {
    std::lock_guard<std::mutex> lock(mu_);
    served_.push_back(request.fingerprint);
    auto it = scripts_.find(request.fingerprint);
    if (it == scripts_.end()) {
      if (has_fallback_) return {fallback_};
      throw BackendFailure("mock backend: no scripted response for '" + request.fingerprint +
                           "'");
    }
    size_t& cursor = cursors_[request.fingerprint];
    const std::vector<std::string>& seq = it->second;
    const std::string& text = seq[std::min(cursor, seq.size() - 1)];
    ++cursor;
    return {text};
  }

  std::string name() const override { return "mock"; }

  // Fingerprints in the order served; lets tests assert on retry traffic.
  std::vector<std::string> served() const {
    std::lock_guard<std::mutex> lock(mu_);
    return served_;
  }

 private:
  void load(const nlohmann::json& script) {
    if (!script.is_object()) throw MalformedJson("mock script must be a JSON object");
    if (script.contains("responses")) {
      const auto& responses = script.at("responses");
      if (!responses.is_object()) {
        throw MalformedJson("mock script: responses must be an object");
      }
      for (const auto& [key, value] : responses.items()) {
        if (value.is_string()) {
          add_response(key, value.get<std::string>());
        } else if (value.is_array()) {
          std::vector<std::string> seq;
          for (const auto& item : value) {
            if (!item.is_string()) {
              throw MalformedJson("mock script: response list entries must be strings");
            }
            seq.push_back(item.get<std::string>());
          }
          add_responses(key, std::move(seq));
        } else {
          throw MalformedJson("mock script: response must be a string or list of strings");
        }
      }
    }
    if (script.contains("fallback")) {
      if (!script.at("fallback").is_string()) {
        throw MalformedJson("mock script: fallback must be a string");
      }
      fallback_ = script.at("fallback").get<std::string>();
      has_fallback_ = true;
    }
  }

  std::map<std::string, std::vector<std::string>> scripts_;
  std::map<std::string, size_t> cursors_;
  std::string fallback_;
  bool has_fallback_ = false;
  mutable std::mutex mu_;
  std::vector<std::string> served_;
};

// ---------------------------------------------------------------------------
// HTTP backend (OpenAI-style chat completions)
// ---------------------------------------------------------------------------

inline std::string base64_encode(const std::uint8_t* data, size_t len) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 2 < len; i += 3) {
    std::uint32_t n = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(alphabet[(n >> 18) & 63]);
    out.push_back(alphabet[(n >> 12) & 63]);
    out.push_back(alphabet[(n >> 6) & 63]);
    out.push_back(alphabet[n & 63]);
  }
  if (i + 1 == len) {
    std::uint32_t n = data[i] << 16;
    out.push_back(alphabet[(n >> 18) & 63]);
    out.push_back(alphabet[(n >> 12) & 63]);
    out.append("==");
  } else if (i + 2 == len) {
    std::uint32_t n = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(alphabet[(n >> 18) & 63]);
    out.push_back(alphabet[(n >> 12) & 63]);
    out.push_back(alphabet[(n >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

inline std::string base64_encode(const std::vector<std::uint8_t>& data) {
  return base64_encode(data.data(), data.size());
}

inline std::string base64_encode(const std::string& data) {
  return base64_encode(reinterpret_cast<const std::uint8_t*>(data.data()), data.size());
}

struct HttpBackendConfig {
  std::string endpoint;  // e.g. "http://localhost:8080"
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env = "VGE_API_KEY";
  int requests_per_minute = 60;
  int max_retries = 2;      // transport-level retries on 5xx / connect errors
  double retry_backoff = 1.0;  // seconds, doubled per retry
  double timeout_seconds = 120.0;
};

// Builds the chat-completions JSON body. Exposed separately so it can be
// tested without a live server. Images travel as base64 data URLs.
inline nlohmann::json chat_request_to_json(const ChatRequest& request,
                                           const std::string& model) {
  nlohmann::json body;
  body["model"] = model.empty() ? request.model : model;
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  nlohmann::json messages = nlohmann::json::array();
  for (const ChatMessage& msg : request.messages) {
    nlohmann::json m;
    m["role"] = msg.role;
    if (msg.images.empty()) {
      m["content"] = msg.text;
    } else {
      nlohmann::json parts = nlohmann::json::array();
      if (!msg.text.empty()) parts.push_back({{"type", "text"}, {"text", msg.text}});
      for (const ChatImage& image : msg.images) {
        if (!image.caption.empty()) {
          parts.push_back({{"type", "text"}, {"text", image.caption}});
        }
        parts.push_back(
            {{"type", "image_url"},
             {"image_url",
              {{"url", "data:" + image.media_type + ";base64," + base64_encode(image.bytes)}}}});
      }
      m["content"] = std::move(parts);
    }
    messages.push_back(std::move(m));
  }
  body["messages"] = std::move(messages);
  return body;
}

inline std::string parse_chat_completion(const std::string& body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendFailure(std::string("chat completion response is not JSON: ") + e.what());
  }
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw BackendFailure("chat completion response has no choices");
  }
  const nlohmann::json& message = doc["choices"][0].value("message", nlohmann::json::object());
  if (!message.contains("content") || !message["content"].is_string()) {
    throw BackendFailure("chat completion response has no message content");
  }
  return message["content"].get<std::string>();
}

// Transport function so tests can swap out the network: takes (path, body,
// headers) and returns (status, response body).
using HttpTransport = std::function<std::pair<int, std::string>(
    const std::string& path, const std::string& body,
    const std::vector<std::pair<std::string, std::string>>& headers)>;

inline HttpTransport make_httplib_transport(const HttpBackendConfig& config);  // http_transport.hpp

class HttpBackend : public ChatBackend {
 public:
  HttpBackend(HttpBackendConfig config, HttpTransport transport,
              RateLimiter::Clock clock = {}, RateLimiter::Sleeper sleep = {})
      : config_(std::move(config)),
        transport_(std::move(transport)),
        limiter_(config_.requests_per_minute, clock, sleep),
        sleep_(sleep ? std::move(sleep) : [](double s) {
          std::this_thread::sleep_for(std::chrono::duration<double>(s));
        }) {
    if (!transport_) throw BackendUnavailable("http backend: no transport");
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key != nullptr && key[0] != '\0') api_key_ = key;
  }

  ChatResponse complete(const ChatRequest& request) override {
    std::string body = chat_request_to_json(request, config_.model).dump();
    std::vector<std::pair<std::string, std::string>> headers = {
        {"Content-Type", "application/json"}};
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);

    double backoff = config_.retry_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        sleep_(backoff);
        backoff *= 2.0;
      }
      limiter_.acquire();
      int status = 0;
      std::string response;
      try {
        std::tie(status, response) = transport_(config_.path, body, headers);
      } catch (const std::exception& e) {
        last_error = e.what();
        continue;
      }
      if (status == 200) return {parse_chat_completion(response)};
      last_error = "HTTP " + std::to_string(status) + ": " + response.substr(0, 200);
      if (status >= 400 && status < 500 && status != 429) break;  // not retryable
    }
    throw BackendFailure("http backend: " + last_error);
  }

  std::string name() const override { return "http:" + config_.model; }

 private:
  HttpBackendConfig config_;
  HttpTransport transport_;
  RateLimiter limiter_;
  RateLimiter::Sleeper sleep_;
  std::string api_key_;
};

}  // namespace vge
