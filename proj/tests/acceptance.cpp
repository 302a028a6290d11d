// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails or overruns its time limit.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "test_support.hpp"

namespace optic {
namespace {

using nlohmann::ordered_json;
using Kind = GroundingOutcome::Kind;

struct Failed {
  std::string what;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failed{what};
}

const std::vector<std::string> kFullRun = {"chat(text)", "detect", "chat(visual)"};

void iou_oracle() {
  std::mt19937 rng(2026);
  std::uniform_int_distribution<int> coord(0, 64);
  auto random_box = [&](int& x0, int& y0, int& x1, int& y1) {
    do {
      x0 = coord(rng), x1 = coord(rng), y0 = coord(rng), y1 = coord(rng);
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
    } while (x0 == x1 || y0 == y1);
  };
  for (int i = 0; i < 10000; ++i) {
    int a[4], b[4];
    random_box(a[0], a[1], a[2], a[3]);
    random_box(b[0], b[1], b[2], b[3]);
    const double got = iou({double(a[0]), double(a[1]), double(a[2]), double(a[3])},
                           {double(b[0]), double(b[1]), double(b[2]), double(b[3])});
    const double want = testing::grid_iou(a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]);
    require(std::abs(got - want) <= 1e-12, "pair " + std::to_string(i) + " differs from grid count");
  }
}

GroundingOutcome found_with(const BoundingBox& box) {
  GroundingOutcome out;
  out.kind = Kind::found;
  out.selected = {{1, box, 1.0, ""}};
  return out;
}

void metric_definitions() {
  std::vector<EvalRecord> records;
  for (double v : {0.6, 0.3, 0.0, 0.9}) {
    EvalRecord r;
    r.iou = v;
    r.correct_at_25 = v > 0.25;
    r.correct_at_50 = v > 0.5;
    records.push_back(r);
  }
  const auto row = aggregate(records).value();
  require(std::abs(row.miou - 0.45) <= 1e-12, "mIoU " + std::to_string(row.miou));
  require(row.acc25 == 0.75, "acc25 " + std::to_string(row.acc25));
  require(row.acc50 == 0.5, "acc50 " + std::to_string(row.acc50));

  // Prediction covering a quarter of the ground truth.
  const DatasetRecord rec{"b", "img.png", "q", {{0, 0, 4, 4}}, "val"};
  const auto scored = score_record(rec, found_with({0, 0, 1, 4}));
  require(scored.iou == 0.25, "boundary iou " + std::to_string(scored.iou));
  require(!scored.correct_at_25, "iou 0.25 counted correct at 0.25");
  require(!scored.correct_at_50, "iou 0.25 counted correct at 0.5");
}

void parser_fixtures() {
  require(parse_subjects(R"({"Subject": "Picture"})").value().subjects == std::vector<std::string>{"Picture"},
          "single subject");
  require(parse_subjects(R"({"Subject": "chair . person . dog ."})").value().subjects ==
              std::vector<std::string>{"chair", "person", "dog"},
          "dot-separated subjects");
  const auto two = parse_selection(R"({"Subject": [2]})").value();
  require(two.kind == SelectionReply::Kind::ids && two.ids == std::vector<int>{2}, "ids [2]");
  require(parse_selection(R"({"Subject": [1,2,3]})").value().ids == std::vector<int>{1, 2, 3}, "ids [1,2,3]");
  require(parse_selection("There are no targets that fit the description.").value().kind ==
              SelectionReply::Kind::no_target,
          "sentinel");
  require(parse_baseline_box(R"({"Subject": "[10,20,30,40]"})", {640, 480}).value().box ==
              BoundingBox{10, 20, 40, 60},
          "baseline box");
}

void fig4_walkthrough() {
  auto mocks = make_mock_backends(testing::fig4_script()).value();
  const auto request = testing::fig4_request();
  const auto out = ground(request, mocks.roles());
  require(out.kind == Kind::found && out.selected.size() == 1 && out.selected[0].mark_id == 2,
          "expected found(2)");
  require(mocks.log->entries() == kFullRun, "transcript is not chat(text), detect, chat(visual)");
  const auto vis = mocks.visual_grounder->transcript();
  require(vis.size() == 1, "one visual call");
  require(vis[0].user_text().find(request.query) != std::string::npos, "query missing from visual request");
  const auto& image = std::get<ImagePart>(vis[0].messages.back().parts.back());
  const Bytes sent = base64_decode(image.base64).value();
  const Bytes expected = encode_png(render_marked(request.image.raster, *out.trace.mark_sheet)).value();
  require(sent == expected && sent == out.trace.marked_png, "visual request lacks the marked PNG bytes");
}

void fig6_scenarios() {
  auto zero = make_mock_backends(testing::fig4_script("There are no targets that fit the description.")).value();
  const auto none = ground(testing::fig4_request("helicopter not flying in the air"), zero.roles());
  require(none.kind == Kind::no_target, "zero-object query not no_target");
  const DatasetRecord empty_gt{"z", "img.png", "helicopter not flying in the air", {}, "val"};
  require(score_record(empty_gt, none).iou == 1.0, "empty-GT record does not score 1");

  auto script = testing::fig4_script(R"({"Subject": [1,2,3]})");
  script["detector"] = {{{"image_width", 640},
                         {"image_height", 480},
                         {"detections",
                          {{{"bbox", {0.2, 0.5, 0.1, 0.4}}, {"score", 0.9}, {"phrase", "person"}},
                           {{"bbox", {0.5, 0.5, 0.1, 0.4}}, {"score", 0.8}, {"phrase", "person"}},
                           {{"bbox", {0.8, 0.5, 0.1, 0.4}}, {"score", 0.7}, {"phrase", "person"}}}}}};
  auto multi = make_mock_backends(script).value();
  const auto many = ground(testing::fig4_request("all people"), multi.roles());
  require(many.kind == Kind::found && many.selected.size() == 3, "multi-object reply not found(3)");
}

void error_policy() {
  const char* roles[] = {"text_grounder", "detector", "visual_grounder"};
  for (int s = 0; s < 3; ++s) {
    auto script = testing::fig4_script();
    script[roles[s]] = {{{"error", "rate_limited"}, {"status", 429}}};
    auto mocks = make_mock_backends(script).value();
    const auto out = ground(testing::fig4_request(), mocks.roles());
    require(out.kind == Kind::failed && out.failure->stage == static_cast<Stage>(s),
            std::string("no failure at ") + roles[s]);
    const DatasetRecord rec{"r", "img.png", "q", {{96, 192, 224, 384}}, "val"};
    require(score_record(rec, out).iou == 0.0, std::string("nonzero iou after failure at ") + roles[s]);
  }
}

int run_cli(const std::string& args) {
  const std::string cmd = "env -u OPTIC_CHAT_BASE_URL -u OPTIC_CHAT_API_KEY -u OPTIC_DETECTOR_URL '" +
                          std::string(OPTIC_CLI_PATH) + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void determinism() {
  const auto dir = testing::temp_dir("acceptance");
  const auto eval_dir = testing::kFixtureDir / "eval";
  auto eval = [&](const std::string& seed, const std::string& name) {
    const auto out = dir / name;
    const int code = run_cli("eval '" + (eval_dir / "dataset.jsonl").string() + "' --mock-script '" +
                             (testing::kFixtureDir / "mock" / "eval.json").string() + "' --n 5 --seed " +
                             seed + " --report-format json --out '" + out.string() + "'");
    require(code == 0, "eval exited " + std::to_string(code));
    return testing::read_text(out);
  };
  const auto a = eval("42", "a.json");
  const auto b = eval("42", "b.json");
  const auto c = eval("43", "c.json");
  std::filesystem::remove_all(dir);
  require(!a.empty() && a == b, "seed 42 reports differ");
  auto ids = [](const std::string& text) {
    const auto doc = ordered_json::parse(text);
    std::vector<std::string> out;
    for (const auto& r : doc["records"]) out.push_back(r["id"]);
    return out;
  };
  require(ids(a) == std::vector<std::string>{"e3", "e4", "e2", "e0", "e5"}, "seed 42 sample changed");
  require(ids(c) == std::vector<std::string>{"e7", "e1", "e0", "e3", "e2"}, "seed 43 sample changed");
}

void most_probable_box() {
  const double levels[] = {0.2, 0.5, 0.8};
  auto by_id = [](const Candidate& x, const Candidate& y) { return x.mark_id < y.mark_id; };
  for (int n = 1; n <= 4; ++n) {
    int combos = 1;
    for (int i = 0; i < n; ++i) combos *= 3;
    for (int code = 0; code < combos; ++code) {
      std::vector<Candidate> cs;
      for (int i = 0, c = code; i < n; ++i, c /= 3)
        cs.push_back({i + 1, {0, 0, double(i + 1), double(i + 1)}, levels[c % 3], ""});
      double best = 0;
      for (const auto& c : cs) best = std::max(best, c.score);
      int want = 99;
      for (const auto& c : cs)
        if (c.score == best) want = std::min(want, c.mark_id);
      do {
        GroundingOutcome out;
        out.kind = Kind::found;
        out.selected = cs;
        require(select_primary(out)->mark_id == want, "wrong primary candidate");
      } while (std::next_permutation(cs.begin(), cs.end(), by_id));
    }
  }
}

std::vector<Detection> random_detections(std::mt19937& rng, const ImageDims& dims, int max_n) {
  std::uniform_int_distribution<int> count(0, max_n);
  std::uniform_real_distribution<double> ux(0.0, dims.width), uy(0.0, dims.height);
  std::uniform_int_distribution<int> score_step(0, 10);
  std::vector<Detection> out;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const double x0 = ux(rng), x1 = ux(rng), y0 = uy(rng), y1 = uy(rng);
    out.push_back({{std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)},
                   score_step(rng) / 10.0,
                   "p"});
  }
  return out;
}

void marks_and_render() {
  std::mt19937 rng(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    const ImageDims dims{48 + trial % 23, 36 + trial % 13};
    auto dets = random_detections(rng, dims, 8);
    const auto sheet = assign_marks(dets, dims).value();
    const int n = static_cast<int>(sheet.size());
    require(n == static_cast<int>(dets.size()), "sheet size differs from detections");
    for (int i = 0; i <= n + 1; ++i) {
      const auto c = lookup(sheet, i);
      require(c.has_value() == (i >= 1 && i <= n), "lookup domain is not 1..n");
      if (c) require(c->mark_id == i, "lookup returned the wrong mark");
    }
    std::shuffle(dets.begin(), dets.end(), rng);
    require(assign_marks(dets, dims).value().candidates == sheet.candidates, "marks depend on input order");

    const auto img = testing::gradient_image(dims.width, dims.height);
    const auto copy = img;
    const auto a = render_marked(img, sheet);
    require(img == copy, "render mutated its input");
    require(a == render_marked(img, sheet), "render is not deterministic");
    require(a.dims().width == dims.width && a.dims().height == dims.height, "render changed dimensions");
    if (n == 0) require(a == img, "empty sheet altered the image");
  }
}

void table_layout() {
  EvalReport report;
  report.rows = {{"Optic", "RefCOCOg-Val", 0.620, 0.645, 0.725, 200}};
  const auto md = emit_report(report, ReportFormat::markdown);
  require(md.find("| Optic | RefCOCOg-Val | 0.620 | 0.645 | 0.725 | 200 |\n") != std::string::npos,
          "row not rendered: " + md);
}

struct Criterion {
  const char* name;
  double limit_s;
  std::function<void()> run;
};

}  // namespace
}  // namespace optic

int main() {
  using namespace optic;
  const std::vector<Criterion> criteria = {
      {"iou-oracle: 10000 pairs on 64x64 grid within 1e-12", 5.0, iou_oracle},
      {"metrics: aggregate and strict 0.25 boundary", 1.0, metric_definitions},
      {"parser: reply fixtures", 1.0, parser_fixtures},
      {"left-chair walkthrough: found(2), full transcript, marked PNG", 1.0, fig4_walkthrough},
      {"zero-object and multi-object scenarios", 1.0, fig6_scenarios},
      {"error policy: rate_limited at each stage scores 0", 1.0, error_policy},
      {"determinism: eval seed 42 twice, seed 43 differs", 5.0, determinism},
      {"most-probable-box: exhaustive up to 4 candidates", 1.0, most_probable_box},
      {"marks: bijection and render purity over 1000 sheets", 10.0, marks_and_render},
      {"report layout: Optic RefCOCOg-Val row", 1.0, table_layout},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    try {
      c.run();
    } catch (const Failed& f) {
      detail = f.what;
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (detail.empty() && secs >= c.limit_s) detail = "over time limit";
    failures += !detail.empty();
    std::printf("%s  %s  (%.3f s, limit %.0f s)%s%s\n", detail.empty() ? "PASS" : "FAIL", c.name, secs,
                c.limit_s, detail.empty() ? "" : ": ", detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
