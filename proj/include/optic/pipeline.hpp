// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "optic/backends.hpp"
#include "optic/geometry.hpp"
#include "optic/image.hpp"
#include "optic/marking.hpp"
#include "optic/protocol.hpp"

#include <nlohmann/json.hpp>

namespace optic {

struct PipelineConfig {
  double temperature = 0.75;
  std::optional<std::int64_t> seed = 42;
  double box_threshold = 0.35;
  double text_threshold = 0.25;
  MarkStyle mark_style;
  bool ambiguity_suffix_enabled = false;
  int retry_count = 0;
  /// Call the visual grounder even when the detector finds nothing.
  bool force_visual_on_empty = false;
  /// Longest side of the marked image sent to the visual grounder; 0 keeps
  /// the original resolution.
  int max_side = 0;
  PromptPlacement placement = PromptPlacement::system_message;
  std::string text_model;
  std::string visual_model;
  PromptTemplate text_prompt = PromptTemplate::builtin(PromptRole::text_grounder);
  PromptTemplate visual_prompt = PromptTemplate::builtin(PromptRole::visual_grounder);
  PromptTemplate baseline_prompt = PromptTemplate::builtin(PromptRole::direct_baseline);
};

struct GroundingRequest {
  LoadedImage image;
  std::string query;
  PipelineConfig config;
};

enum class Stage { text_ground = 0, detect = 1, visual_ground = 2 };

inline std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::text_ground: return "text_ground";
    case Stage::detect: return "detect";
    case Stage::visual_ground: return "visual_ground";
  }
  return "unknown";
}

using FailureReason = std::variant<BackendError, ParseFailure>;

struct StageFailure {
  Stage stage = Stage::text_ground;
  FailureReason reason;

  std::string describe() const {
    if (const auto* e = std::get_if<BackendError>(&reason))
      return std::string(to_string(e->kind)) + ": " + e->detail;
    return "parse_failure: " + std::get<ParseFailure>(reason).message;
  }
};

struct StageTrace {
  std::optional<RefinedQuery> refined_query;
  std::optional<MarkSheet> mark_sheet;
  Bytes marked_png;
  std::optional<std::string> text_reply;
  std::optional<std::string> visual_reply;
  std::array<std::optional<double>, 3> latency_ms{};
  std::vector<std::string> warnings;
  bool visual_skipped = false;
};

struct GroundingOutcome {
  enum class Kind { found, no_target, failed };

  Kind kind = Kind::failed;
  std::vector<Candidate> selected;
  std::optional<StageFailure> failure;
  StageTrace trace;
};

inline std::string_view to_string(GroundingOutcome::Kind k) noexcept {
  switch (k) {
    case GroundingOutcome::Kind::found: return "found";
    case GroundingOutcome::Kind::no_target: return "no_target";
    case GroundingOutcome::Kind::failed: return "failed";
  }
  return "unknown";
}

namespace detail {

template <typename Call>
auto with_retries(int retry_count, Call&& call) {
  auto result = call();
  for (int attempt = 0; attempt < retry_count && !result.has_value(); ++attempt) result = call();
  return result;
}

inline GroundingOutcome failed(StageTrace trace, Stage stage, FailureReason reason) {
  GroundingOutcome out;
  out.kind = GroundingOutcome::Kind::failed;
  out.failure = StageFailure{stage, std::move(reason)};
  out.trace = std::move(trace);
  return out;
}

class StageTimer {
 public:
  StageTimer(StageTrace& trace, Stage stage)
      : trace_(trace), stage_(stage), started_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    trace_.latency_ms[static_cast<std::size_t>(stage_)] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started_)
            .count();
  }
  StageTimer(const StageTimer&) = delete;
  StageTimer& operator=(const StageTimer&) = delete;

 private:
  StageTrace& trace_;
  Stage stage_;
  std::chrono::steady_clock::time_point started_;
};

inline ChatOptions chat_options(const PipelineConfig& config, const std::string& model) {
  return {model, config.temperature, config.seed, config.placement};
}

/// Converts wire detections to pixel boxes on the request image. Normalized
/// coordinates are resolution independent, so the decoded image size wins
/// over whatever size the detector reports.
inline Result<std::vector<Detection>, BackendError> to_pixel_detections(
    const DetectionResponse& resp, const ImageDims& dims, std::vector<std::string>& warnings) {
  if (resp.image_dims != dims) {
    warnings.push_back("detector reported " + std::to_string(resp.image_dims.width) + "x" +
                       std::to_string(resp.image_dims.height) + " for a " +
                       std::to_string(dims.width) + "x" + std::to_string(dims.height) + " image");
  }
  std::vector<Detection> out;
  out.reserve(resp.detections.size());
  for (const auto& d : resp.detections) {
    auto box = from_normalized_center(d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3], dims);
    if (!box) return fail(BackendError{BackendErrorKind::malformed_reply, 0, box.error().message});
    if (!(d.score >= 0.0 && d.score <= 1.0))
      return fail(BackendError{BackendErrorKind::malformed_reply, 0, "detection score outside [0, 1]"});
    out.push_back({*box, d.score, d.phrase});
  }
  return out;
}

inline EncodedImage original_image(const LoadedImage& image) {
  return {image.encoded, image.media_type};
}

}  // namespace detail

/// Full three-stage grounding: text grounder, detection plus marking, visual
/// grounder. Never throws for backend or reply problems; those become a
/// failed outcome tagged with the stage.
inline GroundingOutcome ground(const GroundingRequest& request, const BackendRoles& backends) {
  const auto& config = request.config;
  const ImageDims dims = request.image.raster.dims();
  StageTrace trace;
  std::optional<detail::StageTimer> timer;
  auto failed = [&](Stage stage, FailureReason reason) {
    timer.reset();
    return detail::failed(std::move(trace), stage, std::move(reason));
  };
  auto invalid = [&](Stage stage, std::string why) {
    return failed(stage, BackendError{BackendErrorKind::invalid_request, 0, std::move(why)});
  };
  auto finish = [&](GroundingOutcome out) {
    timer.reset();
    out.trace = std::move(trace);
    return out;
  };

  // Stage 1: refine the query.
  timer.emplace(trace, Stage::text_ground);
  if (request.query.empty()) return invalid(Stage::text_ground, "empty query");
  if (!backends.text_grounder) return invalid(Stage::text_ground, "no text grounder");
  PromptTemplate text_prompt = config.text_prompt;
  text_prompt.ambiguity_suffix_enabled = config.ambiguity_suffix_enabled;
  auto text_req = build_messages(text_prompt, request.query, std::nullopt,
                                 detail::chat_options(config, config.text_model));
  if (!text_req) return invalid(Stage::text_ground, text_req.error().message);
  auto text_reply = detail::with_retries(
      config.retry_count, [&] { return backends.text_grounder->chat(*text_req); });
  if (!text_reply) return failed(Stage::text_ground, text_reply.error());
  trace.text_reply = text_reply->text;
  auto refined = parse_subjects(text_reply->text);
  if (!refined) return failed(Stage::text_ground, refined.error());
  trace.refined_query = *refined;

  // Stage 2: detect every subject in one call, then mark.
  timer.emplace(trace, Stage::detect);
  if (!backends.detector) return invalid(Stage::detect, "no detector");
  const DetectionRequest det_req{base64_encode(request.image.encoded), refined->subjects,
                                 config.box_threshold, config.text_threshold};
  auto resp = detail::with_retries(config.retry_count,
                                   [&] { return backends.detector->detect(det_req); });
  if (!resp) return failed(Stage::detect, resp.error());
  auto detections = detail::to_pixel_detections(*resp, dims, trace.warnings);
  if (!detections) return failed(Stage::detect, detections.error());
  auto sheet = assign_marks(std::move(detections).value(), dims);
  if (!sheet)
    return failed(Stage::detect,
                  BackendError{BackendErrorKind::malformed_reply, 0, sheet.error().message});
  trace.mark_sheet = std::move(sheet).value();
  if (trace.mark_sheet->empty() && !config.force_visual_on_empty) {
    trace.visual_skipped = true;
    trace.warnings.push_back("detector returned no candidates; visual grounder skipped");
    GroundingOutcome out;
    out.kind = GroundingOutcome::Kind::no_target;
    return finish(std::move(out));
  }

  // Stage 3: let the multimodal model pick marks on the annotated image.
  timer.emplace(trace, Stage::visual_ground);
  if (!backends.visual_grounder) return invalid(Stage::visual_ground, "no visual grounder");
  const RasterImage marked =
      render_marked(request.image.raster, *trace.mark_sheet, config.mark_style);
  auto png = encode_png(downscale_to_max_side(marked, config.max_side));
  if (!png) return invalid(Stage::visual_ground, png.error().message);
  trace.marked_png = std::move(png).value();
  auto vis_req = build_messages(config.visual_prompt, request.query,
                                EncodedImage{trace.marked_png, MediaType::png},
                                detail::chat_options(config, config.visual_model));
  if (!vis_req) return invalid(Stage::visual_ground, vis_req.error().message);
  auto vis_reply = detail::with_retries(
      config.retry_count, [&] { return backends.visual_grounder->chat(*vis_req); });
  if (!vis_reply) return failed(Stage::visual_ground, vis_reply.error());
  trace.visual_reply = vis_reply->text;
  auto selection = parse_selection(vis_reply->text);
  if (!selection) return failed(Stage::visual_ground, selection.error());

  GroundingOutcome out;
  if (selection->kind == SelectionReply::Kind::no_target) {
    out.kind = GroundingOutcome::Kind::no_target;
    return finish(std::move(out));
  }
  for (int id : selection->ids) {
    if (auto c = lookup(*trace.mark_sheet, id)) {
      out.selected.push_back(std::move(*c));
    } else {
      trace.warnings.push_back("visual grounder returned unknown mark " + std::to_string(id));
    }
  }
  if (out.selected.empty())
    return failed(Stage::visual_ground, ParseFailure{"every returned mark id is unknown"});
  out.kind = GroundingOutcome::Kind::found;
  return finish(std::move(out));
}

/// Asks the multimodal model for a box directly, without marks.
inline GroundingOutcome ground_baseline_direct(const GroundingRequest& request,
                                               ChatBackend& chat_backend) {
  const auto& config = request.config;
  StageTrace trace;
  std::optional<detail::StageTimer> timer(std::in_place, trace, Stage::visual_ground);
  auto failed = [&](FailureReason reason) {
    timer.reset();
    return detail::failed(std::move(trace), Stage::visual_ground, std::move(reason));
  };
  if (request.query.empty())
    return failed(BackendError{BackendErrorKind::invalid_request, 0, "empty query"});
  auto req = build_messages(config.baseline_prompt, request.query,
                            detail::original_image(request.image),
                            detail::chat_options(config, config.visual_model));
  if (!req) return failed(BackendError{BackendErrorKind::invalid_request, 0, req.error().message});
  auto reply = detail::with_retries(config.retry_count, [&] { return chat_backend.chat(*req); });
  if (!reply) return failed(reply.error());
  trace.visual_reply = reply->text;
  auto parsed = parse_baseline_box(reply->text, request.image.raster.dims());
  if (!parsed) return failed(parsed.error());

  Candidate only{1, parsed->box, 1.0, ""};
  trace.mark_sheet = MarkSheet{{only}, request.image.raster.dims()};
  timer.reset();
  GroundingOutcome out;
  out.kind = GroundingOutcome::Kind::found;
  out.selected = {std::move(only)};
  out.trace = std::move(trace);
  return out;
}

/// Detector alone: the raw query is the phrase and the most confident box is
/// the answer.
inline GroundingOutcome ground_detector_only(const GroundingRequest& request,
                                             DetectorBackend& detector) {
  const auto& config = request.config;
  const ImageDims dims = request.image.raster.dims();
  StageTrace trace;
  std::optional<detail::StageTimer> timer(std::in_place, trace, Stage::detect);
  auto failed = [&](BackendError error) {
    timer.reset();
    return detail::failed(std::move(trace), Stage::detect, std::move(error));
  };
  if (request.query.empty())
    return failed(BackendError{BackendErrorKind::invalid_request, 0, "empty query"});
  const DetectionRequest req{base64_encode(request.image.encoded), {request.query},
                             config.box_threshold, config.text_threshold};
  auto resp = detail::with_retries(config.retry_count, [&] { return detector.detect(req); });
  if (!resp) return failed(resp.error());
  auto detections = detail::to_pixel_detections(*resp, dims, trace.warnings);
  if (!detections) return failed(detections.error());
  auto sheet = assign_marks(std::move(detections).value(), dims);
  if (!sheet) return failed(BackendError{BackendErrorKind::malformed_reply, 0, sheet.error().message});
  trace.mark_sheet = std::move(sheet).value();
  timer.reset();
  GroundingOutcome out;
  if (trace.mark_sheet->empty()) {
    out.kind = GroundingOutcome::Kind::no_target;
  } else {
    out.kind = GroundingOutcome::Kind::found;
    out.selected = {trace.mark_sheet->candidates.front()};
  }
  out.trace = std::move(trace);
  return out;
}

/// The most probable selected box: highest detector score, ties to the
/// lowest mark id.
inline std::optional<Candidate> select_primary(const GroundingOutcome& outcome) {
  if (outcome.kind != GroundingOutcome::Kind::found || outcome.selected.empty()) return std::nullopt;
  const Candidate* best = &outcome.selected.front();
  for (const auto& c : outcome.selected) {
    if (c.score > best->score || (c.score == best->score && c.mark_id < best->mark_id)) best = &c;
  }
  return *best;
}

inline nlohmann::ordered_json candidate_json(const Candidate& c) {
  const auto xywh = to_xywh(c.box);
  return {{"mark_id", c.mark_id},
          {"box", {c.box.x_min, c.box.y_min, c.box.x_max, c.box.y_max}},
          {"box_xywh", xywh},
          {"score", c.score},
          {"phrase", c.phrase}};
}

/// JSON record of an outcome. Latencies are only included on request so
/// that the default output is reproducible byte for byte.
inline nlohmann::ordered_json outcome_json(const GroundingOutcome& outcome,
                                           bool include_timing = false) {
  nlohmann::ordered_json j;
  j["outcome"] = to_string(outcome.kind);
  auto& selected = j["selected"] = nlohmann::ordered_json::array();
  for (const auto& c : outcome.selected) selected.push_back(candidate_json(c));
  if (outcome.failure) {
    nlohmann::ordered_json f;
    f["stage"] = to_string(outcome.failure->stage);
    if (const auto* e = std::get_if<BackendError>(&outcome.failure->reason)) {
      f["kind"] = to_string(e->kind);
      f["status"] = e->status;
      f["detail"] = e->detail;
    } else {
      f["kind"] = "parse_failure";
      f["detail"] = std::get<ParseFailure>(outcome.failure->reason).message;
    }
    j["failure"] = std::move(f);
  } else {
    j["failure"] = nullptr;
  }
  const auto& t = outcome.trace;
  nlohmann::ordered_json trace;
  trace["refined_query"] =
      t.refined_query ? nlohmann::ordered_json(t.refined_query->subjects) : nlohmann::ordered_json(nullptr);
  if (t.mark_sheet) {
    auto& cands = trace["candidates"] = nlohmann::ordered_json::array();
    for (const auto& c : t.mark_sheet->candidates) cands.push_back(candidate_json(c));
  } else {
    trace["candidates"] = nullptr;
  }
  trace["text_reply"] = t.text_reply ? nlohmann::ordered_json(*t.text_reply) : nlohmann::ordered_json(nullptr);
  trace["visual_reply"] = t.visual_reply ? nlohmann::ordered_json(*t.visual_reply) : nlohmann::ordered_json(nullptr);
  trace["visual_skipped"] = t.visual_skipped;
  trace["warnings"] = t.warnings;
  j["trace"] = std::move(trace);
  if (include_timing) {
    nlohmann::ordered_json timing = nlohmann::ordered_json::object();
    for (Stage s : {Stage::text_ground, Stage::detect, Stage::visual_ground}) {
      const auto& ms = t.latency_ms[static_cast<std::size_t>(s)];
      timing[std::string(to_string(s))] = ms ? nlohmann::ordered_json(*ms) : nlohmann::ordered_json(nullptr);
    }
    j["timing_ms"] = std::move(timing);
  }
  return j;
}

}  // namespace optic
