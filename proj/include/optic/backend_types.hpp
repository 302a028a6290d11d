// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "optic/geometry.hpp"
#include "optic/image.hpp"
#include "optic/result.hpp"

namespace optic {

enum class BackendErrorKind {
  network,
  http_status,
  rate_limited,
  malformed_reply,
  timeout,
  invalid_request,  // rejected client-side, nothing was sent
};

inline std::string_view to_string(BackendErrorKind k) noexcept {
  switch (k) {
    case BackendErrorKind::network: return "network";
    case BackendErrorKind::http_status: return "http_status";
    case BackendErrorKind::rate_limited: return "rate_limited";
    case BackendErrorKind::malformed_reply: return "malformed_reply";
    case BackendErrorKind::timeout: return "timeout";
    case BackendErrorKind::invalid_request: return "invalid_request";
  }
  return "unknown";
}

inline std::optional<BackendErrorKind> backend_error_kind_from(std::string_view s) {
  for (auto k : {BackendErrorKind::network, BackendErrorKind::http_status,
                 BackendErrorKind::rate_limited, BackendErrorKind::malformed_reply,
                 BackendErrorKind::timeout, BackendErrorKind::invalid_request}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct BackendError {
  BackendErrorKind kind = BackendErrorKind::network;
  int status = 0;  // HTTP status for http_status and rate_limited
  std::string detail;

  friend bool operator==(const BackendError&, const BackendError&) = default;
};

// --- chat ---

enum class ChatRole { system, user };

struct TextPart {
  std::string text;
  friend bool operator==(const TextPart&, const TextPart&) = default;
};

struct ImagePart {
  MediaType media_type = MediaType::png;
  std::string base64;
  friend bool operator==(const ImagePart&, const ImagePart&) = default;
};

using ContentPart = std::variant<TextPart, ImagePart>;

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::vector<ContentPart> parts;
};

struct ChatRequest {
  std::string model_name;
  double temperature = 0.75;
  std::optional<std::int64_t> seed;
  std::vector<ChatMessage> messages;

  bool valid() const noexcept {
    if (!(temperature >= 0.0)) return false;
    for (const auto& m : messages)
      if (m.role == ChatRole::user) return true;
    return false;
  }

  /// Concatenated text of every user message, for logging and keyed mocks.
  std::string user_text() const {
    std::string out;
    for (const auto& m : messages) {
      if (m.role != ChatRole::user) continue;
      for (const auto& p : m.parts) {
        if (const auto* t = std::get_if<TextPart>(&p)) {
          if (!out.empty()) out += '\n';
          out += t->text;
        }
      }
    }
    return out;
  }
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatReply {
  std::string text;
  double latency_ms = 0.0;
  std::optional<TokenUsage> usage;
};

/// OpenAI-compatible chat-completions request body.
inline nlohmann::json to_wire_json(const ChatRequest& req) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : req.messages) {
    nlohmann::json content = nlohmann::json::array();
    for (const auto& part : m.parts) {
      if (const auto* t = std::get_if<TextPart>(&part)) {
        content.push_back({{"type", "text"}, {"text", t->text}});
      } else {
        const auto& img = std::get<ImagePart>(part);
        std::string url = "data:";
        url += mime(img.media_type);
        url += ";base64,";
        url += img.base64;
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", std::move(url)}}}});
      }
    }
    messages.push_back(
        {{"role", m.role == ChatRole::system ? "system" : "user"}, {"content", std::move(content)}});
  }
  nlohmann::json body = {
      {"model", req.model_name}, {"temperature", req.temperature}, {"messages", messages}};
  if (req.seed) body["seed"] = *req.seed;
  return body;
}

/// Pulls choices[0].message.content out of a chat-completions reply body.
inline Result<ChatReply, BackendError> parse_chat_reply_body(std::string_view body) {
  auto malformed = [](std::string why) {
    return fail(BackendError{BackendErrorKind::malformed_reply, 0, std::move(why)});
  };
  const auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return malformed("reply body is not a JSON object");
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty())
    return malformed("reply has no choices");
  const auto& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object())
    return malformed("choices[0] has no message");
  const auto& msg = first["message"];
  ChatReply reply;
  const auto content = msg.find("content");
  if (content == msg.end()) return malformed("choices[0].message has no content");
  if (content->is_string()) {
    reply.text = content->get<std::string>();
  } else if (content->is_array()) {
    for (const auto& part : *content) {
      if (part.is_object() && part.value("type", "") == "text" && part.contains("text") &&
          part["text"].is_string())
        reply.text += part["text"].get<std::string>();
    }
  } else {
    return malformed("choices[0].message.content is neither text nor parts");
  }
  if (const auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
    TokenUsage u;
    if (usage->contains("prompt_tokens") && (*usage)["prompt_tokens"].is_number_integer())
      u.prompt_tokens = (*usage)["prompt_tokens"].get<int>();
    if (usage->contains("completion_tokens") && (*usage)["completion_tokens"].is_number_integer())
      u.completion_tokens = (*usage)["completion_tokens"].get<int>();
    reply.usage = u;
  }
  return reply;
}

// --- detection ---

struct DetectionRequest {
  std::string image_b64;
  std::vector<std::string> phrases;
  double box_threshold = 0.35;
  double text_threshold = 0.25;

  bool valid() const noexcept {
    return !phrases.empty() && !image_b64.empty() && box_threshold >= 0.0 &&
           box_threshold <= 1.0 && text_threshold >= 0.0 && text_threshold <= 1.0;
  }
};

/// One detection as it travels on the wire: normalized [cx, cy, w, h].
struct WireDetection {
  std::array<double, 4> bbox{};
  double score = 0.0;
  std::string phrase;
};

struct DetectionResponse {
  ImageDims image_dims;
  std::vector<WireDetection> detections;
};

inline nlohmann::json to_wire_json(const DetectionRequest& req) {
  return {{"image_b64", req.image_b64},
          {"phrases", req.phrases},
          {"box_threshold", req.box_threshold},
          {"text_threshold", req.text_threshold}};
}

inline nlohmann::json to_wire_json(const DetectionResponse& resp) {
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : resp.detections)
    dets.push_back({{"bbox", d.bbox}, {"score", d.score}, {"phrase", d.phrase}});
  return {{"image_width", resp.image_dims.width},
          {"image_height", resp.image_dims.height},
          {"detections", std::move(dets)}};
}

/// Validates a detector reply against the wire schema: positive integer
/// dimensions, every bbox component and score a number in [0, 1].
inline Result<DetectionResponse, BackendError> parse_detection_response(
    const nlohmann::json& doc) {
  auto malformed = [](std::string why) {
    return fail(BackendError{BackendErrorKind::malformed_reply, 0, std::move(why)});
  };
  auto unit = [](const nlohmann::json& v) {
    if (!v.is_number()) return false;
    const double d = v.get<double>();
    return std::isfinite(d) && d >= 0.0 && d <= 1.0;
  };
  if (!doc.is_object()) return malformed("detector reply is not a JSON object");
  DetectionResponse resp;
  for (auto [key, field] : {std::pair{"image_width", &resp.image_dims.width},
                            std::pair{"image_height", &resp.image_dims.height}}) {
    const auto it = doc.find(key);
    if (it == doc.end() || !it->is_number_integer() || it->get<long long>() < 1)
      return malformed(std::string(key) + " must be a positive integer");
    *field = it->get<int>();
  }
  const auto dets = doc.find("detections");
  if (dets == doc.end() || !dets->is_array()) return malformed("detections must be an array");
  for (std::size_t i = 0; i < dets->size(); ++i) {
    const auto& d = (*dets)[i];
    const std::string where = "detections[" + std::to_string(i) + "]";
    if (!d.is_object()) return malformed(where + " is not an object");
    const auto bbox = d.find("bbox");
    if (bbox == d.end() || !bbox->is_array() || bbox->size() != 4)
      return malformed(where + ".bbox must have 4 components");
    WireDetection w;
    for (std::size_t k = 0; k < 4; ++k) {
      if (!unit((*bbox)[k])) return malformed(where + ".bbox component outside [0, 1]");
      w.bbox[k] = (*bbox)[k].get<double>();
    }
    const auto score = d.find("score");
    if (score == d.end() || !unit(*score)) return malformed(where + ".score outside [0, 1]");
    w.score = score->get<double>();
    const auto phrase = d.find("phrase");
    if (phrase == d.end() || !phrase->is_string()) return malformed(where + ".phrase must be text");
    w.phrase = phrase->get<std::string>();
    resp.detections.push_back(std::move(w));
  }
  return resp;
}

inline Result<DetectionResponse, BackendError> parse_detection_response(std::string_view body) {
  const auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded())
    return fail(BackendError{BackendErrorKind::malformed_reply, 0, "detector reply is not JSON"});
  return parse_detection_response(doc);
}

}  // namespace optic
