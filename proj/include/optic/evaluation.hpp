// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "optic/backends.hpp"
#include "optic/geometry.hpp"
#include "optic/image.hpp"
#include "optic/pipeline.hpp"
#include "optic/result.hpp"

namespace optic {

// --- dataset ---

struct DatasetRecord {
  std::string record_id;
  std::string image_path;  // relative to the image root
  std::string query;
  std::vector<BoundingBox> ground_truth;  // empty for zero-object records
  std::string split;
};

struct EvalError {
  std::string message;
};

namespace detail {

inline Result<DatasetRecord, std::string> parse_dataset_line(std::string_view line) {
  const auto doc = nlohmann::json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return fail(std::string("not a JSON object"));
  DatasetRecord r;
  for (auto [key, field] : {std::pair{"id", &r.record_id}, std::pair{"image", &r.image_path},
                            std::pair{"query", &r.query}, std::pair{"split", &r.split}}) {
    const auto it = doc.find(key);
    if (it == doc.end()) return fail("missing \"" + std::string(key) + "\"");
    if (!it->is_string()) return fail("\"" + std::string(key) + "\" must be a string");
    *field = it->get<std::string>();
    if (field->empty()) return fail("\"" + std::string(key) + "\" is empty");
  }
  const auto gt = doc.find("gt");
  if (gt == doc.end()) return fail(std::string("missing \"gt\""));
  if (!gt->is_array()) return fail(std::string("\"gt\" must be an array of [x, y, w, h]"));
  for (const auto& b : *gt) {
    if (!b.is_array() || b.size() != 4 ||
        !std::all_of(b.begin(), b.end(), [](const auto& v) { return v.is_number(); }))
      return fail(std::string("\"gt\" entries must be [x, y, w, h] numbers"));
    auto box = from_xywh(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                         b[3].get<double>());
    if (!box) return fail("bad ground-truth box: " + box.error().message);
    r.ground_truth.push_back(*box);
  }
  return r;
}

}  // namespace detail

/// Reads the JSONL dataset. Blank lines are skipped; every malformed line
/// is reported with its 1-based number.
inline Result<std::vector<DatasetRecord>, EvalError> load_dataset(std::istream& in) {
  std::vector<DatasetRecord> records;
  std::vector<std::string> problems;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto rec = detail::parse_dataset_line(line);
    if (!rec) {
      problems.push_back("line " + std::to_string(number) + ": " + rec.error());
      continue;
    }
    if (!ids.insert(rec->record_id).second) {
      problems.push_back("line " + std::to_string(number) + ": duplicate id \"" + rec->record_id +
                         "\"");
      continue;
    }
    records.push_back(std::move(rec).value());
  }
  if (!problems.empty()) {
    std::string msg = "dataset has " + std::to_string(problems.size()) + " invalid line(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    return fail(EvalError{msg});
  }
  return records;
}

inline Result<std::vector<DatasetRecord>, EvalError> load_dataset(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return fail(EvalError{"cannot open dataset " + path.string()});
  return load_dataset(in);
}

// --- sampling ---

/// PCG32 (XSH-RR, 64-bit state), matching the reference pcg32_random_r.
class Pcg32 {
 public:
  Pcg32(std::uint64_t seed, std::uint64_t stream = 54) {
    inc_ = (stream << 1u) | 1u;
    next();
    state_ += seed;
    next();
  }

  std::uint32_t next() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  /// Uniform in [0, bound) without modulo bias.
  std::uint32_t bounded(std::uint32_t bound) {
    const std::uint32_t threshold = (-bound) % bound;
    for (;;) {
      const std::uint32_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
};

/// n records without replacement, in draw order (partial Fisher-Yates).
inline Result<std::vector<DatasetRecord>, EvalError> sample(const std::vector<DatasetRecord>& records,
                                                            std::size_t n, std::uint64_t seed) {
  if (n > records.size())
    return fail(EvalError{"cannot sample " + std::to_string(n) + " records from " +
                          std::to_string(records.size())});
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Pcg32 rng(seed);
  std::vector<DatasetRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.bounded(static_cast<std::uint32_t>(order.size() - i));
    std::swap(order[i], order[j]);
    out.push_back(records[order[i]]);
  }
  return out;
}

/// Draws n records from each split, splits taken in order of first
/// appearance, each with its own generator seeded identically.
inline Result<std::vector<DatasetRecord>, EvalError> sample_per_split(
    const std::vector<DatasetRecord>& records, std::size_t n, std::uint64_t seed) {
  std::vector<std::string> splits;
  std::map<std::string, std::vector<DatasetRecord>> by_split;
  for (const auto& r : records) {
    auto [it, inserted] = by_split.try_emplace(r.split);
    if (inserted) splits.push_back(r.split);
    it->second.push_back(r);
  }
  std::vector<DatasetRecord> out;
  for (const auto& split : splits) {
    auto drawn = sample(by_split[split], n, seed);
    if (!drawn) return fail(EvalError{"split \"" + split + "\": " + drawn.error().message});
    for (auto& r : *drawn) out.push_back(std::move(r));
  }
  return out;
}

// --- scoring ---

inline constexpr double kLooseThreshold = 0.25;
inline constexpr double kStrictThreshold = 0.5;

struct EvalRecord {
  std::string record_id;
  std::string split;
  GroundingOutcome::Kind outcome_kind = GroundingOutcome::Kind::failed;
  double iou = 0.0;
  bool correct_at_25 = false;
  bool correct_at_50 = false;
  std::optional<Stage> failure_stage;
  std::array<std::optional<double>, 3> latency_ms{};
};

/// Mean IoU over ground-truth boxes after greedily pairing predictions and
/// ground truth by descending IoU, one-to-one. Unmatched ground truth
/// contributes zero.
inline double greedy_match_iou(const std::vector<BoundingBox>& predicted,
                               const std::vector<BoundingBox>& truth) {
  if (truth.empty()) return 0.0;
  struct Pair {
    double iou;
    std::size_t p, t;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < predicted.size(); ++p)
    for (std::size_t t = 0; t < truth.size(); ++t)
      pairs.push_back({iou(predicted[p], truth[t]), p, t});
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.iou > b.iou; });
  std::vector<bool> used_p(predicted.size()), used_t(truth.size());
  double total = 0.0;
  for (const auto& pr : pairs) {
    if (used_p[pr.p] || used_t[pr.t]) continue;
    used_p[pr.p] = used_t[pr.t] = true;
    total += pr.iou;
  }
  return total / static_cast<double>(truth.size());
}

/// Scores one outcome. Failures score 0. With no ground truth the correct
/// answer is an explicit no-target verdict (scores 1); any box scores 0.
inline EvalRecord score_record(const DatasetRecord& record, const GroundingOutcome& outcome) {
  EvalRecord r;
  r.record_id = record.record_id;
  r.split = record.split;
  r.outcome_kind = outcome.kind;
  r.latency_ms = outcome.trace.latency_ms;
  if (outcome.kind == GroundingOutcome::Kind::failed) {
    if (outcome.failure) r.failure_stage = outcome.failure->stage;
    return r;
  }
  if (record.ground_truth.empty()) {
    const bool hit = outcome.kind == GroundingOutcome::Kind::no_target;
    r.iou = hit ? 1.0 : 0.0;
    r.correct_at_25 = r.correct_at_50 = hit;
    return r;
  }
  if (record.ground_truth.size() == 1) {
    if (const auto primary = select_primary(outcome))
      r.iou = iou(primary->box, record.ground_truth.front());
  } else if (outcome.kind == GroundingOutcome::Kind::found) {
    std::vector<BoundingBox> boxes;
    for (const auto& c : outcome.selected) boxes.push_back(c.box);
    r.iou = greedy_match_iou(boxes, record.ground_truth);
  }
  r.correct_at_25 = r.iou > kLooseThreshold;
  r.correct_at_50 = r.iou > kStrictThreshold;
  return r;
}

// --- aggregation and reports ---

struct ReportRow {
  std::string method;
  std::string split;
  double miou = 0.0;
  double acc25 = 0.0;
  double acc50 = 0.0;
  std::size_t n = 0;
};

inline Result<ReportRow, EvalError> aggregate(const std::vector<EvalRecord>& records,
                                              std::string method = {}, std::string split = {}) {
  if (records.empty()) return fail(EvalError{"cannot aggregate zero records"});
  double sum = 0.0;
  std::size_t hits25 = 0, hits50 = 0;
  for (const auto& r : records) {
    sum += r.iou;
    hits25 += r.correct_at_25 ? 1 : 0;
    hits50 += r.correct_at_50 ? 1 : 0;
  }
  const auto n = static_cast<double>(records.size());
  return ReportRow{std::move(method), std::move(split), sum / n,
                   static_cast<double>(hits25) / n, static_cast<double>(hits50) / n,
                   records.size()};
}

struct EvalReport {
  std::vector<ReportRow> rows;
  std::vector<EvalRecord> records;
  std::map<std::string, std::size_t> failure_stages;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::uint64_t seed = 42;
};

enum class ReportFormat { markdown, csv, json };

namespace detail {

inline std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace detail

/// Report body without timings; byte-identical across reruns with the same
/// inputs.
inline nlohmann::ordered_json canonical_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["seed"] = report.seed;
  j["config"] = report.config;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"method", r.method},
                    {"split", r.split},
                    {"miou", r.miou},
                    {"acc25", r.acc25},
                    {"acc50", r.acc50},
                    {"n", r.n}});
  }
  j["failure_stages"] = report.failure_stages;
  auto& recs = j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : report.records) {
    nlohmann::ordered_json rec = {{"id", r.record_id},
                                  {"split", r.split},
                                  {"outcome", to_string(r.outcome_kind)},
                                  {"iou", r.iou},
                                  {"correct_at_25", r.correct_at_25},
                                  {"correct_at_50", r.correct_at_50}};
    rec["failure_stage"] =
        r.failure_stage ? nlohmann::ordered_json(to_string(*r.failure_stage)) : nlohmann::ordered_json(nullptr);
    recs.push_back(std::move(rec));
  }
  return j;
}

/// Mean latency per stage over the records that reached it.
inline nlohmann::ordered_json timing_json(const EvalReport& report) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (Stage s : {Stage::text_ground, Stage::detect, Stage::visual_ground}) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& r : report.records) {
      if (const auto& ms = r.latency_ms[static_cast<std::size_t>(s)]) {
        total += *ms;
        ++n;
      }
    }
    j[std::string(to_string(s))] = {{"mean_ms", n ? total / n : 0.0}, {"calls", n}};
  }
  return j;
}

/// Renders the metric table: Method, Split, mIoU, Acc@0.25, Acc@0.5, N with
/// three decimals. The json format is the canonical report body.
inline std::string emit_report(const EvalReport& report, ReportFormat format) {
  std::string out;
  switch (format) {
    case ReportFormat::markdown:
      out += "| Method | Split | mIoU | Acc@0.25 | Acc@0.5 | N |\n";
      out += "|---|---|---|---|---|---|\n";
      for (const auto& r : report.rows) {
        out += "| " + detail::md_cell(r.method) + " | " + detail::md_cell(r.split) + " | " +
               detail::fixed3(r.miou) + " | " + detail::fixed3(r.acc25) + " | " +
               detail::fixed3(r.acc50) + " | " + std::to_string(r.n) + " |\n";
      }
      break;
    case ReportFormat::csv:
      out += "Method,Split,mIoU,Acc@0.25,Acc@0.5,N\r\n";
      for (const auto& r : report.rows) {
        out += detail::csv_field(r.method) + "," + detail::csv_field(r.split) + "," +
               detail::fixed3(r.miou) + "," + detail::fixed3(r.acc25) + "," +
               detail::fixed3(r.acc50) + "," + std::to_string(r.n) + "\r\n";
      }
      break;
    case ReportFormat::json:
      out = canonical_json(report).dump(2) + "\n";
      break;
  }
  return out;
}

// --- running ---

enum class EvalMethod { pipeline, baseline_direct, detector_only };

inline std::string_view to_string(EvalMethod m) noexcept {
  switch (m) {
    case EvalMethod::pipeline: return "pipeline";
    case EvalMethod::baseline_direct: return "baseline-direct";
    case EvalMethod::detector_only: return "detector-only";
  }
  return "unknown";
}

struct EvalOptions {
  EvalMethod method = EvalMethod::pipeline;
  std::string label;  // Method column; defaults to the method name
  std::size_t n = 200;
  std::uint64_t seed = 42;
  std::filesystem::path image_root;
  int concurrency = 4;
};

/// Runs one grounding method on a single record.
inline GroundingOutcome run_method(EvalMethod method, const GroundingRequest& request,
                                   const BackendRoles& backends) {
  auto missing = [](Stage stage, const char* what) {
    return detail::failed({}, stage,
                          BackendError{BackendErrorKind::invalid_request, 0,
                                       std::string(what) + " backend not configured"});
  };
  switch (method) {
    case EvalMethod::pipeline:
      return ground(request, backends);
    case EvalMethod::baseline_direct:
      if (!backends.visual_grounder) return missing(Stage::visual_ground, "visual grounder");
      return ground_baseline_direct(request, *backends.visual_grounder);
    case EvalMethod::detector_only:
      if (!backends.detector) return missing(Stage::detect, "detector");
      return ground_detector_only(request, *backends.detector);
  }
  return missing(Stage::text_ground, "unknown method");
}

/// Samples n records per split, grounds them on a bounded worker pool and
/// scores them. Backend and reply failures only ever score 0; an image that
/// cannot be loaded aborts the run.
inline Result<EvalReport, EvalError> run_eval(const std::vector<DatasetRecord>& dataset,
                                              const EvalOptions& options,
                                              const BackendRoles& backends,
                                              const PipelineConfig& config) {
  auto sampled = sample_per_split(dataset, options.n, options.seed);
  if (!sampled) return fail(sampled.error());
  const auto& records = *sampled;

  std::vector<std::optional<EvalRecord>> scored(records.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::optional<EvalError> first_error;

  auto worker = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      {
        std::lock_guard lock(error_mu);
        if (first_error) return;
      }
      const auto& rec = records[i];
      auto image = load_image(options.image_root / rec.image_path);
      if (!image) {
        std::lock_guard lock(error_mu);
        if (!first_error)
          first_error = EvalError{"record \"" + rec.record_id + "\": " + image.error().message};
        return;
      }
      GroundingRequest request{std::move(image).value(), rec.query, config};
      const auto outcome = run_method(options.method, request, backends);
      scored[i] = score_record(rec, outcome);
    }
  };
  const int workers =
      std::clamp(options.concurrency, 1, static_cast<int>(std::max<std::size_t>(records.size(), 1)));
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) return fail(*first_error);

  EvalReport report;
  report.seed = options.seed;
  const std::string label =
      options.label.empty() ? std::string(to_string(options.method)) : options.label;
  for (Stage s : {Stage::text_ground, Stage::detect, Stage::visual_ground})
    report.failure_stages[std::string(to_string(s))] = 0;

  std::vector<std::string> splits;
  std::map<std::string, std::vector<EvalRecord>> by_split;
  for (auto& r : scored) {
    if (r->failure_stage) ++report.failure_stages[std::string(to_string(*r->failure_stage))];
    auto [it, inserted] = by_split.try_emplace(r->split);
    if (inserted) splits.push_back(r->split);
    it->second.push_back(*r);
    report.records.push_back(std::move(*r));
  }
  for (const auto& split : splits) {
    auto row = aggregate(by_split[split], label, split);
    if (!row) return fail(row.error());
    report.rows.push_back(std::move(row).value());
  }

  report.config = {{"method", to_string(options.method)},
                   {"label", label},
                   {"n_per_split", options.n},
                   {"seed", options.seed},
                   {"temperature", config.temperature},
                   {"llm_seed", config.seed ? nlohmann::ordered_json(*config.seed) : nlohmann::ordered_json(nullptr)},
                   {"box_threshold", config.box_threshold},
                   {"text_threshold", config.text_threshold},
                   {"ambiguity_suffix", config.ambiguity_suffix_enabled},
                   {"retry_count", config.retry_count},
                   {"force_visual_on_empty", config.force_visual_on_empty},
                   {"max_side", config.max_side},
                   {"text_model", config.text_model},
                   {"visual_model", config.visual_model}};
  return report;
}

}  // namespace optic
