#pragma once

// Real network transport for HttpBackend, kept in its own header so test
// binaries that stub the transport never pull in httplib/sockets.

#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

#include <httplib.h>

#include "vge/chat.hpp"

namespace vge {

inline HttpTransport make_httplib_transport(const HttpBackendConfig& config) {
  if (config.endpoint.empty()) throw BackendUnavailable("http backend: empty endpoint");
  auto client = std::make_shared<httplib::Client>(config.endpoint);
  auto seconds = static_cast<time_t>(config.timeout_seconds);
  client->set_connection_timeout(seconds, 0);
  client->set_read_timeout(seconds, 0);
  client->set_write_timeout(seconds, 0);
  auto mu = std::make_shared<std::mutex>();  // httplib clients are not thread-safe
  return [client, mu](const std::string& path, const std::string& body,
                      const std::vector<std::pair<std::string, std::string>>& header_list)
             -> std::pair<int, std::string> {
    std::lock_guard<std::mutex> lock(*mu);
    httplib::Headers headers(header_list.begin(), header_list.end());
    httplib::Result result = client->Post(path, headers, body, "application/json");
    if (!result) {
      throw std::runtime_error("connection failed: " + httplib::to_string(result.error()));
    }
    return {result->status, result->body};
  };
}

}  // namespace vge
