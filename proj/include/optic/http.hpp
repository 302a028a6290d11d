// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <httplib.h>

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "optic/backend_types.hpp"
#include "optic/result.hpp"

namespace optic {

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::string content_type = "application/json";
  std::chrono::milliseconds timeout{120'000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Seam between the model clients and the network. Transport failures come
/// back as BackendError; any HTTP status, including errors, is a response.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual Result<HttpResponse, BackendError> post(const HttpRequest& request) = 0;
};

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/', or empty
};

inline Result<SplitUrl, BackendError> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || scheme_end == 0)
    return fail(BackendError{BackendErrorKind::invalid_request, 0, "URL lacks a scheme: " + url});
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    return fail(BackendError{BackendErrorKind::invalid_request, 0, "unsupported scheme: " + scheme});
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) out.path = url.substr(path_start);
  if (out.origin.size() <= scheme_end + 3)
    return fail(BackendError{BackendErrorKind::invalid_request, 0, "URL lacks a host: " + url});
  return out;
}

/// Joins a base URL and an endpoint path with exactly one slash between.
inline std::string join_url(std::string base, std::string_view path) {
  while (!base.empty() && base.back() == '/') base.pop_back();
  if (!path.empty() && path.front() != '/') base += '/';
  base += path;
  return base;
}

/// cpp-httplib transport. A fresh connection per request, so one instance
/// can be shared by any number of threads.
class HttplibTransport final : public HttpTransport {
 public:
  Result<HttpResponse, BackendError> post(const HttpRequest& request) override {
    auto parts = split_url(request.url);
    if (!parts) return fail(parts.error());
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (parts->origin.starts_with("https://"))
      return fail(BackendError{BackendErrorKind::invalid_request, 0,
                               "built without TLS support; cannot reach " + parts->origin});
#endif
    httplib::Client client(parts->origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    const std::string path = parts->path.empty() ? "/" : parts->path;

    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, request.body, request.content_type);
    if (!res) {
      const auto err = res.error();
      const auto elapsed = std::chrono::steady_clock::now() - started;
      const std::string detail = httplib::to_string(err);
      if (err == httplib::Error::ConnectionTimeout ||
          ((err == httplib::Error::Read || err == httplib::Error::Write) &&
           elapsed >= request.timeout)) {
        return fail(BackendError{BackendErrorKind::timeout, 0, detail});
      }
      return fail(BackendError{BackendErrorKind::network, 0, detail});
    }
    return HttpResponse{res->status, res->body};
  }
};

/// Maps a non-2xx status onto the backend error taxonomy.
inline std::optional<BackendError> status_error(const HttpResponse& res) {
  if (res.status >= 200 && res.status < 300) return std::nullopt;
  std::string detail = "HTTP " + std::to_string(res.status);
  if (!res.body.empty()) detail += ": " + res.body.substr(0, 200);
  if (res.status == 429) return BackendError{BackendErrorKind::rate_limited, 429, detail};
  return BackendError{BackendErrorKind::http_status, res.status, detail};
}

}  // namespace optic
