// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>

#include "optic/backend_types.hpp"
#include "optic/backends.hpp"
#include "optic/http.hpp"

namespace optic {

struct EndpointConfig {
  std::string base_url;
  std::string api_key;
  std::string model;  // used when a request leaves model_name empty
  std::chrono::milliseconds timeout{120'000};
  int max_concurrency = 4;
};

namespace detail {

inline constexpr std::ptrdiff_t kMaxEndpointConcurrency = 256;

/// Bounds the number of in-flight requests per endpoint.
class RequestLimiter {
 public:
  explicit RequestLimiter(int limit)
      : sem_(std::clamp<std::ptrdiff_t>(limit, 1, kMaxEndpointConcurrency)) {}

  class Permit {
   public:
    explicit Permit(std::counting_semaphore<kMaxEndpointConcurrency>& s) : s_(s) { s_.acquire(); }
    ~Permit() { s_.release(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    std::counting_semaphore<kMaxEndpointConcurrency>& s_;
  };

  Permit acquire() { return Permit(sem_); }

 private:
  std::counting_semaphore<kMaxEndpointConcurrency> sem_;
};

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace detail

/// OpenAI-compatible chat-completions client. Sends exactly one request per
/// call; retries are the caller's decision.
class OpenAIChatClient final : public ChatBackend {
 public:
  OpenAIChatClient(EndpointConfig config, std::shared_ptr<HttpTransport> transport)
      : config_(std::move(config)),
        transport_(std::move(transport)),
        limiter_(config_.max_concurrency) {}

  Result<ChatReply, BackendError> chat(const ChatRequest& request) override {
    if (config_.base_url.empty())
      return fail(BackendError{BackendErrorKind::invalid_request, 0, "chat base URL not configured"});
    if (!request.valid())
      return fail(BackendError{BackendErrorKind::invalid_request, 0,
                               "chat request needs a user message and temperature >= 0"});
    auto body = to_wire_json(request);
    if (request.model_name.empty()) body["model"] = config_.model;

    HttpRequest http;
    http.url = join_url(config_.base_url, "/chat/completions");
    if (!config_.api_key.empty()) http.headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    http.body = body.dump();
    http.timeout = config_.timeout;

    auto permit = limiter_.acquire();
    const auto started = std::chrono::steady_clock::now();
    auto res = transport_->post(http);
    if (!res) return fail(res.error());
    if (auto err = status_error(*res)) return fail(std::move(*err));
    auto reply = parse_chat_reply_body(res->body);
    if (!reply) return fail(reply.error());
    reply->latency_ms = detail::elapsed_ms(started);
    return reply;
  }

  const EndpointConfig& config() const noexcept { return config_; }

 private:
  EndpointConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  detail::RequestLimiter limiter_;
};

/// Client for the detector sidecar's POST /detect.
class DetectorClient final : public DetectorBackend {
 public:
  DetectorClient(EndpointConfig config, std::shared_ptr<HttpTransport> transport)
      : config_(std::move(config)),
        transport_(std::move(transport)),
        limiter_(config_.max_concurrency) {}

  Result<DetectionResponse, BackendError> detect(const DetectionRequest& request) override {
    if (request.phrases.empty())
      return fail(BackendError{BackendErrorKind::invalid_request, 0, "no phrases to detect"});
    if (!request.valid())
      return fail(BackendError{BackendErrorKind::invalid_request, 0,
                               "detection request needs an image and thresholds in [0, 1]"});
    if (config_.base_url.empty())
      return fail(BackendError{BackendErrorKind::invalid_request, 0, "detector URL not configured"});

    HttpRequest http;
    http.url = join_url(config_.base_url, "/detect");
    if (!config_.api_key.empty()) http.headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    http.body = to_wire_json(request).dump();
    http.timeout = config_.timeout;

    auto permit = limiter_.acquire();
    auto res = transport_->post(http);
    if (!res) return fail(res.error());
    if (auto err = status_error(*res)) return fail(std::move(*err));
    return parse_detection_response(std::string_view(res->body));
  }

  const EndpointConfig& config() const noexcept { return config_; }

 private:
  EndpointConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  detail::RequestLimiter limiter_;
};

}  // namespace optic
