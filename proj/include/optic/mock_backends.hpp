// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "optic/backend_types.hpp"
#include "optic/backends.hpp"
#include "optic/result.hpp"

namespace optic {

/// Ordered record of backend calls, shared between mocks so that tests can
/// assert on the cross-backend call sequence.
class CallLog {
 public:
  void record(std::string entry) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(entry));
  }
  std::vector<std::string> entries() const {
    std::lock_guard lock(mu_);
    return entries_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> entries_;
};

template <typename Reply>
using ScriptEntry = std::variant<Reply, BackendError>;

/// Replays a fixed script. Each call consumes the next entry; once the
/// script runs out the last entry repeats.
template <typename Reply>
class Script {
 public:
  explicit Script(std::vector<ScriptEntry<Reply>> entries) : entries_(std::move(entries)) {}

  bool empty() const noexcept { return entries_.empty(); }

  ScriptEntry<Reply> next() {
    std::lock_guard lock(mu_);
    const std::size_t i = std::min(cursor_, entries_.size() - 1);
    ++cursor_;
    return entries_[i];
  }

 private:
  std::mutex mu_;
  std::vector<ScriptEntry<Reply>> entries_;
  std::size_t cursor_ = 0;
};

/// Chat mock. Scripts may be keyed: the first key that occurs in the
/// request's user text selects its script, otherwise the default script
/// answers.
class ScriptedChatBackend final : public ChatBackend {
 public:
  using Entry = ScriptEntry<std::string>;

  ScriptedChatBackend(std::vector<Entry> script, std::shared_ptr<CallLog> log = nullptr,
                      std::string label = "chat")
      : log_(std::move(log)), label_(std::move(label)) {
    if (!script.empty()) default_ = std::make_unique<Script<std::string>>(std::move(script));
  }

  void add_keyed(std::string key, std::vector<Entry> script) {
    if (script.empty()) return;
    keyed_.emplace_back(std::move(key), std::make_unique<Script<std::string>>(std::move(script)));
  }

  Result<ChatReply, BackendError> chat(const ChatRequest& request) override {
    {
      std::lock_guard lock(mu_);
      transcript_.push_back(request);
    }
    if (log_) log_->record(label_);
    Script<std::string>* script = default_.get();
    const std::string text = request.user_text();
    for (auto& [key, s] : keyed_) {
      if (text.find(key) != std::string::npos) {
        script = s.get();
        break;
      }
    }
    if (script == nullptr)
      return fail(BackendError{BackendErrorKind::malformed_reply, 0, "no scripted reply for request"});
    auto entry = script->next();
    if (auto* err = std::get_if<BackendError>(&entry)) return fail(*err);
    return ChatReply{std::get<std::string>(std::move(entry)), 0.0, std::nullopt};
  }

  std::vector<ChatRequest> transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
  }

 private:
  std::shared_ptr<CallLog> log_;
  std::string label_;
  std::unique_ptr<Script<std::string>> default_;
  std::vector<std::pair<std::string, std::unique_ptr<Script<std::string>>>> keyed_;
  mutable std::mutex mu_;
  std::vector<ChatRequest> transcript_;
};

/// Detector mock; keys are matched against the requested phrases joined
/// with " . ".
class ScriptedDetectorBackend final : public DetectorBackend {
 public:
  using Entry = ScriptEntry<DetectionResponse>;

  ScriptedDetectorBackend(std::vector<Entry> script, std::shared_ptr<CallLog> log = nullptr,
                          std::string label = "detect")
      : log_(std::move(log)), label_(std::move(label)) {
    if (!script.empty()) default_ = std::make_unique<Script<DetectionResponse>>(std::move(script));
  }

  void add_keyed(std::string key, std::vector<Entry> script) {
    if (script.empty()) return;
    keyed_.emplace_back(std::move(key),
                        std::make_unique<Script<DetectionResponse>>(std::move(script)));
  }

  Result<DetectionResponse, BackendError> detect(const DetectionRequest& request) override {
    if (request.phrases.empty())
      return fail(BackendError{BackendErrorKind::invalid_request, 0, "no phrases to detect"});
    {
      std::lock_guard lock(mu_);
      transcript_.push_back(request);
    }
    if (log_) log_->record(label_);
    std::string joined;
    for (const auto& p : request.phrases) {
      if (!joined.empty()) joined += " . ";
      joined += p;
    }
    Script<DetectionResponse>* script = default_.get();
    for (auto& [key, s] : keyed_) {
      if (joined.find(key) != std::string::npos) {
        script = s.get();
        break;
      }
    }
    if (script == nullptr)
      return fail(BackendError{BackendErrorKind::malformed_reply, 0, "no scripted detections"});
    auto entry = script->next();
    if (auto* err = std::get_if<BackendError>(&entry)) return fail(*err);
    return std::get<DetectionResponse>(std::move(entry));
  }

  std::vector<DetectionRequest> transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
  }

 private:
  std::shared_ptr<CallLog> log_;
  std::string label_;
  std::unique_ptr<Script<DetectionResponse>> default_;
  std::vector<std::pair<std::string, std::unique_ptr<Script<DetectionResponse>>>> keyed_;
  mutable std::mutex mu_;
  std::vector<DetectionRequest> transcript_;
};

// --- mock script files ---
//
// {
//   "text_grounder":   [<chat entry>, ...] | {"by_key": {"<substring>": [...]}, "default": [...]},
//   "detector":        same shape with <detector entry>,
//   "visual_grounder": same shape with <chat entry>
// }
// chat entry:     "reply text" | {"reply": "reply text"} | <error>
// detector entry: {"image_width": W, "image_height": H, "detections": [...]} | <error>
// error:          {"error": "rate_limited", "status": 429, "detail": "..."}

struct MockScriptError {
  std::string message;
};

struct MockBackends {
  std::shared_ptr<ScriptedChatBackend> text_grounder;
  std::shared_ptr<ScriptedDetectorBackend> detector;
  std::shared_ptr<ScriptedChatBackend> visual_grounder;
  std::shared_ptr<CallLog> log;

  BackendRoles roles() const { return {text_grounder, detector, visual_grounder}; }
};

namespace detail {

inline Result<BackendError, MockScriptError> parse_scripted_error(const nlohmann::json& j,
                                                                  const std::string& where) {
  const auto kind = backend_error_kind_from(j["error"].is_string() ? j["error"].get<std::string>() : "");
  if (!kind) return fail(MockScriptError{where + ": unknown error kind"});
  BackendError err{*kind, 0, j.value("detail", std::string("scripted ") + std::string(to_string(*kind)))};
  if (j.contains("status") && j["status"].is_number_integer()) err.status = j["status"].get<int>();
  if (*kind == BackendErrorKind::rate_limited && err.status == 0) err.status = 429;
  return err;
}

inline Result<ScriptEntry<std::string>, MockScriptError> parse_chat_entry(const nlohmann::json& j,
                                                                          const std::string& where) {
  if (j.is_string()) return ScriptEntry<std::string>{j.get<std::string>()};
  if (j.is_object() && j.contains("reply") && j["reply"].is_string())
    return ScriptEntry<std::string>{j["reply"].get<std::string>()};
  if (j.is_object() && j.contains("error")) {
    auto err = parse_scripted_error(j, where);
    if (!err) return fail(err.error());
    return ScriptEntry<std::string>{*err};
  }
  return fail(MockScriptError{where + ": expected a reply string or an error object"});
}

inline Result<ScriptEntry<DetectionResponse>, MockScriptError> parse_detector_entry(
    const nlohmann::json& j, const std::string& where) {
  if (j.is_object() && j.contains("error")) {
    auto err = parse_scripted_error(j, where);
    if (!err) return fail(err.error());
    return ScriptEntry<DetectionResponse>{*err};
  }
  // Scripted replies bypass wire validation on purpose: a mock may play a
  // misbehaving detector. Only the shape has to be right.
  if (!j.is_object() || !j.contains("detections") || !j["detections"].is_array())
    return fail(MockScriptError{where + ": expected a detector reply or an error object"});
  DetectionResponse resp;
  resp.image_dims = {j.value("image_width", 1), j.value("image_height", 1)};
  for (const auto& d : j["detections"]) {
    if (!d.is_object() || !d.contains("bbox") || !d["bbox"].is_array() || d["bbox"].size() != 4)
      return fail(MockScriptError{where + ": detection needs a 4-element bbox"});
    WireDetection w;
    for (std::size_t k = 0; k < 4; ++k) w.bbox[k] = d["bbox"][k].get<double>();
    w.score = d.value("score", 0.0);
    w.phrase = d.value("phrase", std::string());
    resp.detections.push_back(std::move(w));
  }
  return ScriptEntry<DetectionResponse>{std::move(resp)};
}

template <typename Entry, typename ParseFn>
Result<std::vector<Entry>, MockScriptError> parse_entry_list(const nlohmann::ordered_json& j,
                                                             const std::string& where,
                                                             ParseFn parse) {
  if (!j.is_array() || j.empty())
    return fail(MockScriptError{where + ": script must be a non-empty array"});
  std::vector<Entry> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    auto e = parse(nlohmann::json(j[i]), where + "[" + std::to_string(i) + "]");
    if (!e) return fail(e.error());
    out.push_back(std::move(e).value());
  }
  return out;
}

template <typename Backend, typename ParseFn>
Result<std::shared_ptr<Backend>, MockScriptError> build_scripted(
    const nlohmann::ordered_json& section, const std::string& role, std::shared_ptr<CallLog> log,
    std::string label, ParseFn parse) {
  using Entry = typename Backend::Entry;
  if (section.is_array()) {
    auto entries = parse_entry_list<Entry>(section, role, parse);
    if (!entries) return fail(entries.error());
    return std::make_shared<Backend>(std::move(entries).value(), log, std::move(label));
  }
  if (!section.is_object()) return fail(MockScriptError{role + ": expected an array or an object"});
  std::vector<Entry> fallback;
  if (section.contains("default")) {
    auto entries = parse_entry_list<Entry>(section["default"], role + ".default", parse);
    if (!entries) return fail(entries.error());
    fallback = std::move(entries).value();
  }
  auto backend = std::make_shared<Backend>(std::move(fallback), log, std::move(label));
  if (section.contains("by_key")) {
    if (!section["by_key"].is_object())
      return fail(MockScriptError{role + ".by_key must be an object"});
    for (const auto& [key, list] : section["by_key"].items()) {
      auto entries = parse_entry_list<Entry>(list, role + ".by_key." + key, parse);
      if (!entries) return fail(entries.error());
      backend->add_keyed(key, std::move(entries).value());
    }
  }
  return backend;
}

}  // namespace detail

/// Builds scripted backends for every role present in the script. The
/// shared CallLog labels calls "chat(text)", "detect" and "chat(visual)".
inline Result<MockBackends, MockScriptError> make_mock_backends(const nlohmann::ordered_json& script) try {
  if (!script.is_object()) return fail(MockScriptError{"mock script must be a JSON object"});
  MockBackends out;
  out.log = std::make_shared<CallLog>();
  for (const auto& [key, _] : script.items()) {
    if (key != "text_grounder" && key != "detector" && key != "visual_grounder")
      return fail(MockScriptError{"unknown role in mock script: " + key});
  }
  if (script.contains("text_grounder")) {
    auto b = detail::build_scripted<ScriptedChatBackend>(script["text_grounder"], "text_grounder",
                                                         out.log, "chat(text)",
                                                         detail::parse_chat_entry);
    if (!b) return fail(b.error());
    out.text_grounder = std::move(b).value();
  }
  if (script.contains("detector")) {
    auto b = detail::build_scripted<ScriptedDetectorBackend>(script["detector"], "detector", out.log,
                                                             "detect", detail::parse_detector_entry);
    if (!b) return fail(b.error());
    out.detector = std::move(b).value();
  }
  if (script.contains("visual_grounder")) {
    auto b = detail::build_scripted<ScriptedChatBackend>(script["visual_grounder"],
                                                         "visual_grounder", out.log, "chat(visual)",
                                                         detail::parse_chat_entry);
    if (!b) return fail(b.error());
    out.visual_grounder = std::move(b).value();
  }
  return out;
} catch (const nlohmann::json::exception& e) {
  return fail(MockScriptError{std::string("mock script: ") + e.what()});
}

}  // namespace optic
