// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

// optic: ground a query in an image, evaluate on a dataset, or render marks.
//
// Exit codes: 0 success (including a no-target verdict), 2 grounding failed,
// 64 usage or configuration error, 65 bad input data, 74 I/O error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "optic/optic.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 2;
constexpr int kExitUsage = 64;
constexpr int kExitData = 65;
constexpr int kExitIo = 74;

struct CliError {
  int code;
  std::string message;
};

// Values given on the command line; unset means "not overridden".
struct Flags {
  std::optional<std::string> config_path;
  std::optional<std::string> chat_base_url;
  std::optional<std::string> chat_api_key;
  std::optional<std::string> text_base_url;
  std::optional<std::string> visual_base_url;
  std::optional<std::string> text_model;
  std::optional<std::string> visual_model;
  std::optional<std::string> detector_url;
  std::optional<double> temperature;
  std::optional<std::int64_t> llm_seed;
  std::optional<double> box_threshold;
  std::optional<double> text_threshold;
  bool ambiguity_suffix = false;
  std::optional<int> retry_count;
  std::optional<int> concurrency;
  std::optional<double> timeout_s;
  std::optional<int> mark_scale;
  std::optional<int> stroke_width;
  bool no_outlines = false;
  bool force_visual = false;
  std::optional<int> max_side;
  std::optional<std::string> prompt_dir;
  std::optional<std::string> prompt_placement;
  std::optional<std::string> mock_script;
  bool show_config = false;
};

/// Fully resolved configuration: defaults < config file < environment < flags.
struct CliConfig {
  optic::EndpointConfig text_endpoint;
  optic::EndpointConfig visual_endpoint;
  optic::EndpointConfig detector_endpoint;
  optic::PipelineConfig pipeline;
  std::string prompt_dir;
  int concurrency = 4;
  std::optional<std::string> mock_script;
};

template <typename T>
void take(const ordered_json& obj, const char* key, T& out) {
  if (obj.is_object() && obj.contains(key) && !obj[key].is_null()) out = obj[key].get<T>();
}

optic::Result<CliConfig, CliError> resolve_config(const Flags& flags) {
  CliConfig cfg;
  std::string placement = "system";
  double timeout_s = 120.0;

  if (flags.config_path) {
    std::ifstream in(*flags.config_path);
    if (!in) return optic::fail(CliError{kExitIo, "cannot open config " + *flags.config_path});
    const auto doc = ordered_json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
      return optic::fail(CliError{kExitUsage, "config " + *flags.config_path + " is not a JSON object"});
    try {
      if (doc.contains("chat")) {
        std::string base, key;
        take(doc["chat"], "base_url", base);
        take(doc["chat"], "api_key", key);
        cfg.text_endpoint.base_url = cfg.visual_endpoint.base_url = base;
        cfg.text_endpoint.api_key = cfg.visual_endpoint.api_key = key;
      }
      for (auto [key, ep] : {std::pair{"text_grounder", &cfg.text_endpoint},
                             std::pair{"visual_grounder", &cfg.visual_endpoint}}) {
        if (!doc.contains(key)) continue;
        take(doc[key], "base_url", ep->base_url);
        take(doc[key], "api_key", ep->api_key);
        take(doc[key], "model", ep->model);
      }
      if (doc.contains("detector")) {
        take(doc["detector"], "url", cfg.detector_endpoint.base_url);
        take(doc["detector"], "api_key", cfg.detector_endpoint.api_key);
      }
      take(doc, "concurrency", cfg.concurrency);
      take(doc, "timeout_s", timeout_s);
      if (doc.contains("pipeline")) {
        const auto& p = doc["pipeline"];
        auto& pc = cfg.pipeline;
        take(p, "temperature", pc.temperature);
        if (p.contains("seed")) {
          pc.seed = p["seed"].is_null() ? std::nullopt
                                        : std::optional<std::int64_t>(p["seed"].get<std::int64_t>());
        }
        take(p, "box_threshold", pc.box_threshold);
        take(p, "text_threshold", pc.text_threshold);
        take(p, "ambiguity_suffix", pc.ambiguity_suffix_enabled);
        take(p, "retry_count", pc.retry_count);
        take(p, "force_visual_on_empty", pc.force_visual_on_empty);
        take(p, "max_side", pc.max_side);
        take(p, "prompt_placement", placement);
        take(p, "prompt_dir", cfg.prompt_dir);
        take(p, "mark_scale", pc.mark_style.scale);
        take(p, "stroke_width", pc.mark_style.stroke_width);
        take(p, "outlines", pc.mark_style.draw_outlines);
      }
    } catch (const nlohmann::json::exception& e) {
      return optic::fail(CliError{kExitUsage, "config " + *flags.config_path + ": " + e.what()});
    }
  }

  if (const char* v = std::getenv("OPTIC_CHAT_BASE_URL"); v && *v)
    cfg.text_endpoint.base_url = cfg.visual_endpoint.base_url = v;
  if (const char* v = std::getenv("OPTIC_CHAT_API_KEY"); v && *v)
    cfg.text_endpoint.api_key = cfg.visual_endpoint.api_key = v;
  if (const char* v = std::getenv("OPTIC_DETECTOR_URL"); v && *v) cfg.detector_endpoint.base_url = v;

  if (flags.chat_base_url) cfg.text_endpoint.base_url = cfg.visual_endpoint.base_url = *flags.chat_base_url;
  if (flags.chat_api_key) cfg.text_endpoint.api_key = cfg.visual_endpoint.api_key = *flags.chat_api_key;
  if (flags.text_base_url) cfg.text_endpoint.base_url = *flags.text_base_url;
  if (flags.visual_base_url) cfg.visual_endpoint.base_url = *flags.visual_base_url;
  if (flags.text_model) cfg.text_endpoint.model = *flags.text_model;
  if (flags.visual_model) cfg.visual_endpoint.model = *flags.visual_model;
  if (flags.detector_url) cfg.detector_endpoint.base_url = *flags.detector_url;
  auto& pc = cfg.pipeline;
  if (flags.temperature) pc.temperature = *flags.temperature;
  if (flags.llm_seed) pc.seed = *flags.llm_seed;
  if (flags.box_threshold) pc.box_threshold = *flags.box_threshold;
  if (flags.text_threshold) pc.text_threshold = *flags.text_threshold;
  if (flags.ambiguity_suffix) pc.ambiguity_suffix_enabled = true;
  if (flags.retry_count) pc.retry_count = *flags.retry_count;
  if (flags.concurrency) cfg.concurrency = *flags.concurrency;
  if (flags.timeout_s) timeout_s = *flags.timeout_s;
  if (flags.mark_scale) pc.mark_style.scale = *flags.mark_scale;
  if (flags.stroke_width) pc.mark_style.stroke_width = *flags.stroke_width;
  if (flags.no_outlines) pc.mark_style.draw_outlines = false;
  if (flags.force_visual) pc.force_visual_on_empty = true;
  if (flags.max_side) pc.max_side = *flags.max_side;
  if (flags.prompt_dir) cfg.prompt_dir = *flags.prompt_dir;
  if (flags.prompt_placement) placement = *flags.prompt_placement;
  cfg.mock_script = flags.mock_script;

  if (placement == "system") {
    pc.placement = optic::PromptPlacement::system_message;
  } else if (placement == "user") {
    pc.placement = optic::PromptPlacement::user_prefix;
  } else {
    return optic::fail(CliError{kExitUsage, "prompt placement must be \"system\" or \"user\""});
  }
  if (!(pc.temperature >= 0.0)) return optic::fail(CliError{kExitUsage, "temperature must be >= 0"});
  for (double t : {pc.box_threshold, pc.text_threshold}) {
    if (!(t >= 0.0 && t <= 1.0))
      return optic::fail(CliError{kExitUsage, "detector thresholds must lie in [0, 1]"});
  }
  if (pc.retry_count < 0) return optic::fail(CliError{kExitUsage, "retry count must be >= 0"});
  if (cfg.concurrency < 1) return optic::fail(CliError{kExitUsage, "concurrency must be >= 1"});
  if (pc.mark_style.scale < 1 || pc.mark_style.stroke_width < 1)
    return optic::fail(CliError{kExitUsage, "mark scale and stroke width must be >= 1"});
  if (!(timeout_s > 0.0)) return optic::fail(CliError{kExitUsage, "timeout must be positive"});

  const auto timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));
  for (auto* ep : {&cfg.text_endpoint, &cfg.visual_endpoint, &cfg.detector_endpoint}) {
    ep->timeout = timeout;
    ep->max_concurrency = cfg.concurrency;
  }
  pc.text_model = cfg.text_endpoint.model;
  pc.visual_model = cfg.visual_endpoint.model;

  if (!cfg.prompt_dir.empty()) {
    for (auto [role, slot] : {std::pair{optic::PromptRole::text_grounder, &pc.text_prompt},
                              std::pair{optic::PromptRole::visual_grounder, &pc.visual_prompt},
                              std::pair{optic::PromptRole::direct_baseline, &pc.baseline_prompt}}) {
      auto loaded = optic::load_prompt(cfg.prompt_dir, role);
      if (!loaded) return optic::fail(CliError{kExitIo, loaded.error().message});
      *slot = std::move(loaded).value();
    }
  }
  return cfg;
}

ordered_json show_config(const CliConfig& cfg) {
  auto endpoint = [](const optic::EndpointConfig& ep) {
    return ordered_json{{"base_url", ep.base_url},
                        {"api_key", ep.api_key.empty() ? "" : "***"},
                        {"model", ep.model},
                        {"timeout_s", ep.timeout.count() / 1000.0},
                        {"max_concurrency", ep.max_concurrency}};
  };
  const auto& pc = cfg.pipeline;
  return {{"text_grounder", endpoint(cfg.text_endpoint)},
          {"visual_grounder", endpoint(cfg.visual_endpoint)},
          {"detector", endpoint(cfg.detector_endpoint)},
          {"pipeline",
           {{"temperature", pc.temperature},
            {"seed", pc.seed ? ordered_json(*pc.seed) : ordered_json(nullptr)},
            {"box_threshold", pc.box_threshold},
            {"text_threshold", pc.text_threshold},
            {"ambiguity_suffix", pc.ambiguity_suffix_enabled},
            {"retry_count", pc.retry_count},
            {"force_visual_on_empty", pc.force_visual_on_empty},
            {"max_side", pc.max_side},
            {"prompt_placement",
             pc.placement == optic::PromptPlacement::system_message ? "system" : "user"},
            {"prompt_dir", cfg.prompt_dir},
            {"mark_scale", pc.mark_style.scale},
            {"stroke_width", pc.mark_style.stroke_width},
            {"outlines", pc.mark_style.draw_outlines}}},
          {"concurrency", cfg.concurrency},
          {"mock_script", cfg.mock_script ? ordered_json(*cfg.mock_script) : ordered_json(nullptr)}};
}

struct Backends {
  optic::BackendRoles roles;
};

optic::Result<Backends, CliError> make_backends(const CliConfig& cfg, bool need_text,
                                               bool need_detector, bool need_visual) {
  if (cfg.mock_script) {
    std::ifstream in(*cfg.mock_script);
    if (!in) return optic::fail(CliError{kExitIo, "cannot open mock script " + *cfg.mock_script});
    const auto doc = ordered_json::parse(in, nullptr, false);
    if (doc.is_discarded())
      return optic::fail(CliError{kExitData, "mock script " + *cfg.mock_script + " is not JSON"});
    auto mocks = optic::make_mock_backends(doc);
    if (!mocks) return optic::fail(CliError{kExitData, mocks.error().message});
    return Backends{mocks->roles()};
  }
  if ((need_text && cfg.text_endpoint.base_url.empty()) ||
      (need_visual && cfg.visual_endpoint.base_url.empty()))
    return optic::fail(CliError{kExitUsage,
                                "no chat endpoint configured (set --chat-base-url, "
                                "OPTIC_CHAT_BASE_URL, or use --mock-script)"});
  if (need_detector && cfg.detector_endpoint.base_url.empty())
    return optic::fail(CliError{kExitUsage,
                                "no detector endpoint configured (set --detector-url, "
                                "OPTIC_DETECTOR_URL, or use --mock-script)"});
  auto transport = std::make_shared<optic::HttplibTransport>();
  Backends b;
  if (need_text) b.roles.text_grounder = std::make_shared<optic::OpenAIChatClient>(cfg.text_endpoint, transport);
  if (need_visual)
    b.roles.visual_grounder = std::make_shared<optic::OpenAIChatClient>(cfg.visual_endpoint, transport);
  if (need_detector)
    b.roles.detector = std::make_shared<optic::DetectorClient>(cfg.detector_endpoint, transport);
  return b;
}

optic::Result<bool, CliError> write_text(const std::optional<std::string>& path, const std::string& text) {
  if (!path) {
    std::cout << text;
    return true;
  }
  std::ofstream out(*path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) return optic::fail(CliError{kExitIo, "cannot write " + *path});
  return true;
}

optic::Result<bool, CliError> write_png(const std::string& path, const optic::RasterImage& img) {
  auto png = optic::encode_png(img);
  if (!png) return optic::fail(CliError{kExitIo, png.error().message});
  auto ok = optic::write_file(path, *png);
  if (!ok) return optic::fail(CliError{kExitIo, ok.error().message});
  return true;
}

optic::Result<optic::LoadedImage, CliError> read_image(const std::string& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec))
    return optic::fail(CliError{kExitIo, "cannot read image " + path + ": no such file"});
  auto img = optic::load_image(path);
  if (!img) return optic::fail(CliError{kExitData, img.error().message});
  return std::move(img).value();
}

optic::Result<optic::EvalMethod, CliError> parse_method(const std::string& name) {
  if (name == "pipeline") return optic::EvalMethod::pipeline;
  if (name == "baseline-direct") return optic::EvalMethod::baseline_direct;
  if (name == "detector-only") return optic::EvalMethod::detector_only;
  return optic::fail(CliError{kExitUsage, "unknown method " + name});
}

// --- subcommands ---

struct GroundArgs {
  std::string image;
  std::string query;
  std::string method = "pipeline";
  std::optional<std::string> out;
  std::optional<std::string> save_marked;
  std::optional<std::string> save_result;
  bool timings = false;
};

int cmd_ground(const GroundArgs& args, const CliConfig& cfg) {
  auto image = read_image(args.image);
  if (!image) throw image.error();
  auto method = parse_method(args.method);
  if (!method) throw method.error();
  const bool pipeline = *method == optic::EvalMethod::pipeline;
  auto backends = make_backends(cfg, pipeline, *method != optic::EvalMethod::baseline_direct,
                                *method != optic::EvalMethod::detector_only);
  if (!backends) throw backends.error();

  optic::GroundingRequest request{std::move(image).value(), args.query, cfg.pipeline};
  const auto outcome = optic::run_method(*method, request, backends->roles);

  if (auto ok = write_text(args.out, outcome_json(outcome, args.timings).dump(2) + "\n"); !ok)
    throw ok.error();
  if (args.save_marked && outcome.trace.mark_sheet) {
    const auto marked =
        optic::render_marked(request.image.raster, *outcome.trace.mark_sheet, cfg.pipeline.mark_style);
    if (auto ok = write_png(*args.save_marked, marked); !ok) throw ok.error();
  }
  if (args.save_result && outcome.kind != optic::GroundingOutcome::Kind::failed) {
    optic::MarkSheet chosen{outcome.selected, request.image.raster.dims()};
    const auto result = optic::render_boxes(request.image.raster, chosen, cfg.pipeline.mark_style);
    if (auto ok = write_png(*args.save_result, result); !ok) throw ok.error();
  }
  if (outcome.kind == optic::GroundingOutcome::Kind::failed) {
    std::cerr << "grounding failed at " << to_string(outcome.failure->stage) << ": "
              << outcome.failure->describe() << "\n";
    return kExitFailed;
  }
  return kExitOk;
}

struct EvalArgs {
  std::string dataset;
  std::optional<std::string> image_root;
  std::string method = "pipeline";
  std::string label;
  std::size_t n = 200;
  std::uint64_t seed = 42;
  std::string format = "markdown";
  std::optional<std::string> out;
  std::optional<std::string> timings;
};

int cmd_eval(const EvalArgs& args, const CliConfig& cfg) {
  auto method = parse_method(args.method);
  if (!method) throw method.error();
  optic::ReportFormat format = optic::ReportFormat::markdown;
  if (args.format == "csv") {
    format = optic::ReportFormat::csv;
  } else if (args.format == "json") {
    format = optic::ReportFormat::json;
  } else if (args.format != "markdown") {
    throw CliError{kExitUsage, "unknown report format " + args.format};
  }
  std::error_code ec;
  if (!fs::is_regular_file(args.dataset, ec))
    throw CliError{kExitIo, "cannot read dataset " + args.dataset};
  auto records = optic::load_dataset(fs::path(args.dataset));
  if (!records) throw CliError{kExitData, records.error().message};

  const bool pipeline = *method == optic::EvalMethod::pipeline;
  auto backends = make_backends(cfg, pipeline, *method != optic::EvalMethod::baseline_direct,
                                *method != optic::EvalMethod::detector_only);
  if (!backends) throw backends.error();

  optic::EvalOptions options;
  options.method = *method;
  options.label = args.label;
  options.n = args.n;
  options.seed = args.seed;
  options.image_root =
      args.image_root ? fs::path(*args.image_root) : fs::path(args.dataset).parent_path();
  options.concurrency = cfg.concurrency;

  auto report = optic::run_eval(*records, options, backends->roles, cfg.pipeline);
  if (!report) throw CliError{kExitData, report.error().message};
  if (auto ok = write_text(args.out, optic::emit_report(*report, format)); !ok) throw ok.error();
  if (args.timings) {
    if (auto ok = write_text(args.timings, optic::timing_json(*report).dump(2) + "\n"); !ok)
      throw ok.error();
  }
  return kExitOk;
}

struct RenderArgs {
  std::string image;
  std::string boxes;
  std::optional<std::string> boxes_out;
  std::optional<std::string> marked_out;
};

optic::Result<std::vector<optic::Detection>, CliError> parse_render_boxes(const std::string& path) {
  std::ifstream in(path);
  if (!in) return optic::fail(CliError{kExitIo, "cannot open boxes file " + path});
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_array())
    return optic::fail(CliError{kExitData, path + ": expected a JSON array of boxes"});
  std::vector<optic::Detection> out;
  auto numbers4 = [](const nlohmann::json& a) {
    return a.is_array() && a.size() == 4 &&
           std::all_of(a.begin(), a.end(), [](const auto& v) { return v.is_number(); });
  };
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    const std::string where = path + "[" + std::to_string(i) + "]";
    optic::Detection d{{}, 1.0, ""};
    nlohmann::json xywh;
    if (numbers4(e)) {
      xywh = e;
    } else if (e.is_object() && e.contains("xywh") && numbers4(e["xywh"])) {
      xywh = e["xywh"];
    } else if (e.is_object() && e.contains("box") && numbers4(e["box"])) {
      const auto& b = e["box"];
      d.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      if (!d.box.valid()) return optic::fail(CliError{kExitData, where + ": corners out of order"});
    } else {
      return optic::fail(CliError{kExitData, where + ": expected [x, y, w, h] or {\"xywh\"|\"box\": [...]}"});
    }
    if (!xywh.is_null()) {
      auto box = optic::from_xywh(xywh[0].get<double>(), xywh[1].get<double>(), xywh[2].get<double>(),
                                  xywh[3].get<double>());
      if (!box) return optic::fail(CliError{kExitData, where + ": " + box.error().message});
      d.box = *box;
    }
    if (e.is_object()) {
      if (e.contains("score")) {
        if (!e["score"].is_number()) return optic::fail(CliError{kExitData, where + ": score must be a number"});
        d.score = e["score"].get<double>();
      }
      if (e.contains("phrase") && e["phrase"].is_string()) d.phrase = e["phrase"].get<std::string>();
    }
    out.push_back(std::move(d));
  }
  return out;
}

int cmd_render(const RenderArgs& args, const CliConfig& cfg) {
  if (!args.boxes_out && !args.marked_out)
    throw CliError{kExitUsage, "nothing to write: pass --boxes-out and/or --marked-out"};
  auto image = read_image(args.image);
  if (!image) throw image.error();
  auto boxes = parse_render_boxes(args.boxes);
  if (!boxes) throw boxes.error();
  const auto dims = image->raster.dims();
  for (const auto& d : *boxes) {
    if (!optic::inside(d.box, dims)) throw CliError{kExitData, "box lies outside the image"};
  }
  auto sheet = optic::assign_marks(*boxes, dims);
  if (!sheet) throw CliError{kExitData, sheet.error().message};
  if (args.boxes_out) {
    if (auto ok = write_png(*args.boxes_out, optic::render_boxes(image->raster, *sheet, cfg.pipeline.mark_style)); !ok)
      throw ok.error();
  }
  if (args.marked_out) {
    if (auto ok = write_png(*args.marked_out,
                            optic::render_marked(image->raster, *sheet, cfg.pipeline.mark_style));
        !ok)
      throw ok.error();
  }
  ordered_json listing = ordered_json::array();
  for (const auto& c : sheet->candidates) listing.push_back(optic::candidate_json(c));
  std::cout << listing.dump(2) << "\n";
  return kExitOk;
}

void add_common_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--config", f.config_path, "JSON config file");
  cmd.add_option("--chat-base-url", f.chat_base_url, "Chat endpoint base URL for both chat roles");
  cmd.add_option("--chat-api-key", f.chat_api_key, "Bearer token for the chat endpoint(s)");
  cmd.add_option("--text-base-url", f.text_base_url, "Chat endpoint for the text grounder only");
  cmd.add_option("--visual-base-url", f.visual_base_url, "Chat endpoint for the visual grounder only");
  cmd.add_option("--text-model", f.text_model, "Model name for the text grounder");
  cmd.add_option("--visual-model", f.visual_model, "Model name for the visual grounder");
  cmd.add_option("--detector-url", f.detector_url, "Detector sidecar base URL");
  cmd.add_option("--temperature", f.temperature, "Sampling temperature (default 0.75)");
  cmd.add_option("--llm-seed", f.llm_seed, "Seed forwarded to chat endpoints (default 42)");
  cmd.add_option("--box-threshold", f.box_threshold, "Detector box threshold (default 0.35)");
  cmd.add_option("--text-threshold", f.text_threshold, "Detector text threshold (default 0.25)");
  cmd.add_flag("--ambiguity-suffix", f.ambiguity_suffix,
               "Tell the text grounder to keep ambiguous descriptions unchanged");
  cmd.add_option("--retry", f.retry_count, "Extra attempts per failed backend call (default 0)");
  cmd.add_option("--concurrency", f.concurrency, "Parallel requests per endpoint (default 4)");
  cmd.add_option("--timeout", f.timeout_s, "Per-request timeout in seconds (default 120)");
  cmd.add_option("--mark-scale", f.mark_scale, "Badge font scale in pixels per cell (default 2)");
  cmd.add_option("--stroke-width", f.stroke_width, "Box outline width in pixels (default 2)");
  cmd.add_flag("--no-outlines", f.no_outlines, "Draw id badges without box outlines");
  cmd.add_flag("--force-visual", f.force_visual,
               "Call the visual grounder even when nothing was detected");
  cmd.add_option("--max-side", f.max_side, "Downscale the marked image to this longest side");
  cmd.add_option("--prompt-dir", f.prompt_dir, "Directory with <role>.txt prompt overrides");
  cmd.add_option("--prompt-placement", f.prompt_placement,
                 "Send prompts as a system message or prefix them to the user turn")
      ->check(CLI::IsMember({"system", "user"}));
  cmd.add_option("--mock-script", f.mock_script, "Serve every backend from a scripted JSON file");
  cmd.add_flag("--show-config", f.show_config, "Print the resolved configuration and exit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optic: visual grounding with marked candidates"};
  app.require_subcommand(1);

  Flags flags;
  GroundArgs ground_args;
  EvalArgs eval_args;
  RenderArgs render_args;

  auto* ground = app.add_subcommand("ground", "Ground one query in one image");
  ground->add_option("image", ground_args.image, "PNG or JPEG image")->required();
  ground->add_option("query", ground_args.query, "Referring expression")->required();
  ground->add_option("--method", ground_args.method, "pipeline, baseline-direct or detector-only")
      ->check(CLI::IsMember({"pipeline", "baseline-direct", "detector-only"}));
  ground->add_option("--out", ground_args.out, "Write the outcome JSON here instead of stdout");
  ground->add_option("--save-marked", ground_args.save_marked, "Write the marked image (PNG)");
  ground->add_option("--save-result", ground_args.save_result,
                     "Write the image with only the selected boxes (PNG)");
  ground->add_flag("--timings", ground_args.timings, "Include per-stage latency in the output");
  add_common_flags(*ground, flags);

  auto* eval = app.add_subcommand("eval", "Score a method on a JSONL dataset");
  eval->add_option("dataset", eval_args.dataset, "JSONL dataset")->required();
  eval->add_option("--image-root", eval_args.image_root,
                   "Directory image paths are relative to (default: dataset directory)");
  eval->add_option("--method", eval_args.method, "pipeline, baseline-direct or detector-only")
      ->check(CLI::IsMember({"pipeline", "baseline-direct", "detector-only"}));
  eval->add_option("--label", eval_args.label, "Method column in the report");
  eval->add_option("--n", eval_args.n, "Records sampled per split (default 200)")
      ->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_args.seed, "Sampling seed (default 42)");
  eval->add_option("--report-format", eval_args.format, "markdown, csv or json")
      ->check(CLI::IsMember({"markdown", "csv", "json"}));
  eval->add_option("--out", eval_args.out, "Write the report here instead of stdout");
  eval->add_option("--timings", eval_args.timings, "Write mean stage latencies (JSON) here");
  add_common_flags(*eval, flags);

  auto* render = app.add_subcommand("render", "Draw boxes and id marks onto an image");
  render->add_option("image", render_args.image, "PNG or JPEG image")->required();
  render->add_option("boxes", render_args.boxes, "JSON array of [x, y, w, h] boxes")->required();
  render->add_option("--boxes-out", render_args.boxes_out, "Write the outlined image (PNG)");
  render->add_option("--marked-out", render_args.marked_out, "Write the marked image (PNG)");
  add_common_flags(*render, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    auto cfg = resolve_config(flags);
    if (!cfg) throw cfg.error();
    if (flags.show_config) {
      std::cout << show_config(*cfg).dump(2) << "\n";
      return kExitOk;
    }
    if (ground->parsed()) return cmd_ground(ground_args, *cfg);
    if (eval->parsed()) return cmd_eval(eval_args, *cfg);
    return cmd_render(render_args, *cfg);
  } catch (const CliError& e) {
    std::cerr << "optic: " << e.message << "\n";
    return e.code;
  }
}
