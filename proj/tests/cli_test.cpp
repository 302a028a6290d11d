// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>

#include "test_support.hpp"

namespace optic {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Run {
  int code = -1;
  std::string out;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

Run optic_cli(const std::vector<std::string>& args, const std::string& env = "") {
  std::string cmd = "env -u OPTIC_CHAT_BASE_URL -u OPTIC_CHAT_API_KEY -u OPTIC_DETECTOR_URL " + env +
                    " " + quote(OPTIC_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testing::temp_dir("cli");
    image_ = (dir_ / "chairs.png").string();
    ASSERT_TRUE(write_file(image_, encode_png(testing::gradient_image(640, 480)).value()));
  }
  void TearDown() override { fs::remove_all(dir_); }
  static std::string mock(const std::string& name) {
    return (testing::kFixtureDir / "mock" / name).string();
  }
  static std::string eval_fixture(const std::string& name) {
    return (testing::kFixtureDir / "eval" / name).string();
  }

  fs::path dir_;
  std::string image_;
};

TEST_F(Cli, GroundLeftChair) {
  const auto r = optic_cli({"ground", image_, "Please help me find the left chair.", "--mock-script",
                            mock("fig4.json"), "--save-marked", (dir_ / "marked.png").string(),
                            "--save-result", (dir_ / "result.png").string()});
  ASSERT_EQ(r.code, 0) << r.out;
  const auto doc = ordered_json::parse(r.out);
  EXPECT_EQ(doc["outcome"], "found");
  EXPECT_EQ(doc["selected"][0]["mark_id"], 2);
  EXPECT_TRUE(fs::exists(dir_ / "marked.png"));
  EXPECT_TRUE(fs::exists(dir_ / "result.png"));
  EXPECT_FALSE(doc.contains("timing_ms"));
}

TEST_F(Cli, GroundZeroObject) {
  const auto r = optic_cli({"ground", image_, "helicopter not flying in the air", "--mock-script",
                            mock("zero.json")});
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(ordered_json::parse(r.out)["outcome"], "no_target");
}

TEST_F(Cli, GroundFailureExitsTwo) {
  const auto r = optic_cli({"ground", image_, "q", "--mock-script", mock("rate_limited.json")});
  EXPECT_EQ(r.code, 2);
  const auto doc = ordered_json::parse(r.out);
  EXPECT_EQ(doc["outcome"], "failed");
  EXPECT_EQ(doc["failure"]["stage"], "text_ground");
  EXPECT_EQ(doc["failure"]["kind"], "rate_limited");
}

TEST_F(Cli, GroundMissingImage) {
  EXPECT_EQ(optic_cli({"ground", (dir_ / "nope.png").string(), "q", "--mock-script", mock("fig4.json")}).code,
            74);
}

TEST_F(Cli, GroundUndecodableImage) {
  testing::write_text(dir_ / "junk.png", "not an image");
  EXPECT_EQ(optic_cli({"ground", (dir_ / "junk.png").string(), "q", "--mock-script", mock("fig4.json")}).code,
            65);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(optic_cli({}).code, 64);
  EXPECT_EQ(optic_cli({"ground", image_}).code, 64);
  EXPECT_EQ(optic_cli({"ground", image_, "q", "--bogus"}).code, 64);
  EXPECT_EQ(optic_cli({"ground", image_, "q", "--temperature", "-1", "--mock-script", mock("fig4.json")}).code,
            64);
  EXPECT_EQ(optic_cli({"ground", image_, "q"}).code, 64) << "no endpoints configured";
  EXPECT_EQ(optic_cli({"--help"}).code, 0);
}

TEST_F(Cli, ShowConfigPrecedenceAndRedaction) {
  testing::write_text(dir_ / "cfg.json",
                      R"({"chat": {"base_url": "http://file", "api_key": "file-key"},
                          "detector": {"url": "http://file-det"},
                          "pipeline": {"temperature": 0.2, "retry_count": 3}})");
  const auto r = optic_cli({"ground", image_, "q", "--config", (dir_ / "cfg.json").string(),
                            "--temperature", "0.5", "--show-config"},
                           "OPTIC_CHAT_BASE_URL=http://env");
  ASSERT_EQ(r.code, 0);
  const auto doc = ordered_json::parse(r.out);
  EXPECT_EQ(doc["text_grounder"]["base_url"], "http://env");
  EXPECT_EQ(doc["text_grounder"]["api_key"], "***");
  EXPECT_EQ(doc["detector"]["base_url"], "http://file-det");
  EXPECT_EQ(doc["pipeline"]["temperature"], 0.5);
  EXPECT_EQ(doc["pipeline"]["retry_count"], 3);
  EXPECT_EQ(r.out.find("file-key"), std::string::npos);
}

TEST_F(Cli, EvalPipelineFrozenReport) {
  const auto r = optic_cli({"eval", eval_fixture("dataset.jsonl"), "--mock-script", mock("eval.json"),
                            "--n", "10", "--label", "Optic"});
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out,
            "| Method | Split | mIoU | Acc@0.25 | Acc@0.5 | N |\n"
            "|---|---|---|---|---|---|\n"
            "| Optic | val | 0.650 | 0.800 | 0.500 | 10 |\n");
}

TEST_F(Cli, EvalDetectorOnlyFrozenReport) {
  const auto r = optic_cli({"eval", eval_fixture("dataset.jsonl"), "--mock-script", mock("eval.json"),
                            "--n", "10", "--method", "detector-only", "--report-format", "csv"});
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out,
            "Method,Split,mIoU,Acc@0.25,Acc@0.5,N\r\n"
            "detector-only,val,0.300,0.400,0.200,10\r\n");
}

TEST_F(Cli, EvalDeterministicJson) {
  auto run = [&](const std::string& seed, const std::string& out) {
    return optic_cli({"eval", eval_fixture("dataset.jsonl"), "--mock-script", mock("eval.json"),
                      "--n", "5", "--seed", seed, "--report-format", "json", "--out",
                      (dir_ / out).string(), "--timings", (dir_ / (out + ".timing")).string()})
        .code;
  };
  ASSERT_EQ(run("42", "a.json"), 0);
  ASSERT_EQ(run("42", "b.json"), 0);
  ASSERT_EQ(run("43", "c.json"), 0);
  const auto a = testing::read_text(dir_ / "a.json");
  EXPECT_EQ(a, testing::read_text(dir_ / "b.json"));
  auto ids = [](const std::string& text) {
    std::vector<std::string> out;
    const auto doc = ordered_json::parse(text);
    for (const auto& r : doc["records"]) out.push_back(r["id"]);
    return out;
  };
  EXPECT_EQ(ids(a), (std::vector<std::string>{"e3", "e4", "e2", "e0", "e5"}));
  EXPECT_EQ(ids(testing::read_text(dir_ / "c.json")),
            (std::vector<std::string>{"e7", "e1", "e0", "e3", "e2"}));
  EXPECT_TRUE(fs::exists(dir_ / "a.json.timing"));
}

TEST_F(Cli, EvalSampleTooLarge) {
  EXPECT_EQ(optic_cli({"eval", eval_fixture("dataset.jsonl"), "--mock-script", mock("eval.json"),
                       "--n", "500"})
                .code,
            65);
}

TEST_F(Cli, EvalBadDataset) {
  testing::write_text(dir_ / "bad.jsonl", "{\"id\": \"x\"}\n");
  EXPECT_EQ(optic_cli({"eval", (dir_ / "bad.jsonl").string(), "--mock-script", mock("eval.json")}).code, 65);
  EXPECT_EQ(optic_cli({"eval", (dir_ / "none.jsonl").string(), "--mock-script", mock("eval.json")}).code, 74);
}

TEST_F(Cli, RenderMatchesGolden) {
  const auto out = dir_ / "marked.png";
  const auto r = optic_cli({"render", eval_fixture("scene.png"), eval_fixture("boxes.json"),
                            "--marked-out", out.string(), "--boxes-out", (dir_ / "boxes.png").string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(ordered_json::parse(r.out).size(), 3u);
  const auto golden = testing::kFixtureDir / "golden" / "three_marks.png";
  if (std::getenv("OPTIC_UPDATE_GOLDEN")) fs::copy_file(out, golden, fs::copy_options::overwrite_existing);
  EXPECT_EQ(load_image(out).value().raster, load_image(golden).value().raster);
}

TEST_F(Cli, RenderNoBoxesCopiesInput) {
  testing::write_text(dir_ / "empty.json", "[]");
  const auto out = dir_ / "copy.png";
  ASSERT_EQ(optic_cli({"render", eval_fixture("scene.png"), (dir_ / "empty.json").string(),
                       "--marked-out", out.string()})
                .code,
            0);
  EXPECT_EQ(load_image(out).value().raster, load_image(eval_fixture("scene.png")).value().raster);
}

TEST_F(Cli, RenderBoxOutsideImage) {
  testing::write_text(dir_ / "outside.json", "[[90, 90, 20, 20]]");
  EXPECT_EQ(optic_cli({"render", eval_fixture("scene.png"), (dir_ / "outside.json").string(),
                       "--marked-out", (dir_ / "x.png").string()})
                .code,
            65);
}

}  // namespace
}  // namespace optic
