// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace optic {
namespace {

using Kind = SelectionReply::Kind;

TEST(ExtractJsonObject, StripsFences) {
  EXPECT_EQ(extract_json_object("```json\n{\"Subject\": \"Picture\"}\n```").value(),
            R"({"Subject": "Picture"})");
}

TEST(ExtractJsonObject, FirstBalancedObject) {
  EXPECT_EQ(extract_json_object(R"(Sure! {"Subject": [2]} hope that helps)").value(),
            R"({"Subject": [2]})");
  EXPECT_EQ(extract_json_object(R"(x {"a": {"b": "}"}} {"c": 1})").value(), R"({"a": {"b": "}"}})");
}

TEST(ExtractJsonObject, NoBraces) { EXPECT_FALSE(extract_json_object("no braces here")); }

TEST(ParseSubjects, SingleSubject) {
  const auto q = parse_subjects(R"({"Subject": "Picture"})").value();
  EXPECT_EQ(q.subjects, std::vector<std::string>{"Picture"});
}

TEST(ParseSubjects, DotSeparated) {
  const auto q = parse_subjects(R"({"Subject": "chair . person . dog ."})").value();
  EXPECT_EQ(q.subjects, (std::vector<std::string>{"chair", "person", "dog"}));
}

TEST(ParseSubjects, Failures) {
  EXPECT_FALSE(parse_subjects(R"({"Subject": ""})"));
  EXPECT_FALSE(parse_subjects(R"({"Subject": " . . "})"));
  EXPECT_FALSE(parse_subjects(R"({"Subject": 3})"));
  EXPECT_FALSE(parse_subjects(R"({"Object": "chair"})"));
  EXPECT_FALSE(parse_subjects("cannot comply"));
}

TEST(ParseSubjects, KeepsRawReplyAndAcceptsLooseForms) {
  const std::string raw = "```json\n{\"Subject\": \"Chair\"}\n```";
  EXPECT_EQ(parse_subjects(raw).value().raw_reply, raw);
  EXPECT_EQ(parse_subjects(R"("Subject": Picture.)").value().subjects,
            std::vector<std::string>{"Picture"});
}

TEST(ParseSelection, Ids) {
  EXPECT_EQ(parse_selection(R"({"Subject": [2]})").value().ids, std::vector<int>{2});
  const auto multi = parse_selection(R"({"Subject": [1,2,3]})").value();
  EXPECT_EQ(multi.kind, Kind::ids);
  EXPECT_EQ(multi.ids, (std::vector<int>{1, 2, 3}));
}

TEST(ParseSelection, Sentinel) {
  const auto r = parse_selection("There are no targets that fit the description.").value();
  EXPECT_EQ(r.kind, Kind::no_target);
  EXPECT_TRUE(r.ids.empty());
  EXPECT_EQ(parse_selection(R"({"Subject": "there are NO targets that fit the description"})")
                .value()
                .kind,
            Kind::no_target);
}

TEST(ParseSelection, ArrayWinsOverSentinel) {
  const auto r =
      parse_selection(R"(There are no targets that fit the description. {"Subject": [3]})").value();
  EXPECT_EQ(r.kind, Kind::ids);
  EXPECT_EQ(r.ids, std::vector<int>{3});
}

TEST(ParseSelection, DeduplicatesPreservingOrder) {
  EXPECT_EQ(parse_selection(R"({"Subject": [3, 1, 3, 1]})").value().ids, (std::vector<int>{3, 1}));
}

TEST(ParseSelection, Failures) {
  EXPECT_FALSE(parse_selection("cannot comply"));
  EXPECT_FALSE(parse_selection(R"({"Subject": [0]})"));
  EXPECT_FALSE(parse_selection(R"({"Subject": [1.5]})"));
  EXPECT_FALSE(parse_selection(R"({"Subject": ["a"]})"));
  EXPECT_FALSE(parse_selection(R"({"Subject": []})"));
}

TEST(ParseSelection, NeverThrowsOnArbitraryBytes) {
  std::mt19937 rng(17);
  const std::string alphabet = "{}[]\",:0123456789 Subject.\\\n`-";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 40);
  for (int i = 0; i < 3000; ++i) {
    std::string s;
    for (std::size_t k = len(rng); k > 0; --k) s += alphabet[pick(rng)];
    EXPECT_NO_THROW({
      (void)parse_selection(s);
      (void)parse_subjects(s);
      (void)parse_baseline_box(s, {640, 480});
    });
  }
}

TEST(SelectionProperty, FormatThenParseRoundTrips) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<int> subset;
    for (int id = 1; id <= n; ++id)
      if (rng() % 2) subset.push_back(id);
    if (subset.empty()) subset.push_back(1 + static_cast<int>(rng() % n));
    std::shuffle(subset.begin(), subset.end(), rng);
    const auto parsed = parse_selection(format_selection_reply(subset)).value();
    ASSERT_EQ(parsed.kind, Kind::ids);
    ASSERT_EQ(parsed.ids, subset);
  }
}

TEST(ParseBaselineBox, Examples) {
  EXPECT_EQ(parse_baseline_box(R"({"Subject": "[10, 20, 30, 40]"})", {640, 480}).value().box,
            (BoundingBox{10, 20, 40, 60}));
  EXPECT_EQ(parse_baseline_box(R"({"Subject": "[0,0,0,0]"})", {640, 480}).value().box,
            (BoundingBox{0, 0, 0, 0}));
  EXPECT_EQ(parse_baseline_box("I think [5, 5, 700, 10] fits", {640, 480}).value().box,
            (BoundingBox{5, 5, 640, 15}));
  EXPECT_EQ(parse_baseline_box(R"({"Subject": [1, 2, 3, 4]})", {640, 480}).value().box,
            (BoundingBox{1, 2, 4, 6}));
}

TEST(ParseBaselineBox, Failures) {
  EXPECT_FALSE(parse_baseline_box(R"({"Subject": "[1, 2, 3]"})", {640, 480}));
  EXPECT_FALSE(parse_baseline_box(R"({"Subject": "[1, 2, 3, 4, 5]"})", {640, 480}));
  EXPECT_FALSE(parse_baseline_box(R"({"Subject": "[10, 20, -5, 40]"})", {640, 480}));
  EXPECT_FALSE(parse_baseline_box("cannot comply", {640, 480}));
}

std::string file_text(const std::filesystem::path& p) { return testing::read_text(p); }

TEST(Templates, BuiltinsMatchCheckedInPromptFiles) {
  for (auto role : {PromptRole::text_grounder, PromptRole::visual_grounder,
                    PromptRole::direct_baseline}) {
    const auto path = testing::kSourceDir / "prompts" / prompts::file_name(role);
    EXPECT_EQ(std::string(prompts::builtin(role)), file_text(path)) << path;
    const auto loaded = load_prompt(testing::kSourceDir / "prompts", role).value();
    EXPECT_EQ(loaded.body, prompts::builtin(role));
  }
}

TEST(Templates, KeyPhrasesPresent) {
  EXPECT_NE(prompts::kTextGrounder.find("chair . person . dog ."), std::string_view::npos);
  EXPECT_NE(prompts::kVisualGrounder.find("[1, 3, 4]"), std::string_view::npos);
  EXPECT_NE(prompts::kVisualGrounder.find(prompts::kNoTargetSentinel), std::string_view::npos);
  EXPECT_NE(prompts::kDirectBaseline.find("[x, y, w, h]"), std::string_view::npos);
  EXPECT_EQ(prompts::kTextGrounder.find("\\{"), std::string_view::npos);
}

TEST(Templates, LoadPromptDropsOneTrailingNewline) {
  const auto dir = testing::temp_dir("prompts");
  testing::write_text(dir / "visual_grounder.txt", "custom body\n");
  EXPECT_EQ(load_prompt(dir, PromptRole::visual_grounder).value().body, "custom body");
  EXPECT_FALSE(load_prompt(dir, PromptRole::text_grounder));
  std::filesystem::remove_all(dir);
}

TEST(BuildMessages, TextGrounderSystemPlacement) {
  const auto req = build_messages(PromptTemplate::builtin(PromptRole::text_grounder),
                                  "Please help me find the left chair.", std::nullopt, {})
                       .value();
  ASSERT_EQ(req.messages.size(), 2u);
  EXPECT_EQ(req.messages[0].role, ChatRole::system);
  EXPECT_EQ(std::get<TextPart>(req.messages[0].parts[0]).text, prompts::kTextGrounder);
  EXPECT_EQ(req.messages[1].role, ChatRole::user);
  EXPECT_EQ(std::get<TextPart>(req.messages[1].parts[0]).text, "Please help me find the left chair.");
  EXPECT_EQ(req.temperature, 0.75);
  EXPECT_EQ(req.seed, 42);
}

TEST(BuildMessages, VisualGrounderCarriesOneTextAndOneImagePart) {
  const Bytes png = encode_png(testing::gradient_image(8, 8)).value();
  const auto req = build_messages(PromptTemplate::builtin(PromptRole::visual_grounder), "the dog",
                                  EncodedImage{png, MediaType::png}, {})
                       .value();
  const auto& user = req.messages.back();
  ASSERT_EQ(user.parts.size(), 2u);
  EXPECT_EQ(std::get<TextPart>(user.parts[0]).text, "the dog");
  EXPECT_EQ(base64_decode(std::get<ImagePart>(user.parts[1]).base64).value(), png);
}

TEST(BuildMessages, AmbiguitySuffix) {
  const auto req = build_messages(PromptTemplate::builtin(PromptRole::text_grounder, true), "q",
                                  std::nullopt, {})
                       .value();
  const auto& system = std::get<TextPart>(req.messages[0].parts[0]).text;
  EXPECT_TRUE(system.ends_with(prompts::kAmbiguitySuffix));
  EXPECT_TRUE(system.starts_with(prompts::kTextGrounder));
  // The suffix is a text-grounder option only.
  PromptTemplate visual = PromptTemplate::builtin(PromptRole::visual_grounder, true);
  EXPECT_EQ(visual.instruction(), prompts::kVisualGrounder);
}

TEST(BuildMessages, UserPrefixPlacement) {
  ChatOptions options;
  options.placement = PromptPlacement::user_prefix;
  const auto req =
      build_messages(PromptTemplate::builtin(PromptRole::text_grounder), "q", std::nullopt, options)
          .value();
  ASSERT_EQ(req.messages.size(), 1u);
  EXPECT_EQ(std::get<TextPart>(req.messages[0].parts[0]).text,
            std::string(prompts::kTextGrounder) + "\n\nq");
}

TEST(BuildMessages, RoleAndPayloadMustAgree) {
  EXPECT_FALSE(build_messages(PromptTemplate::builtin(PromptRole::visual_grounder), "q",
                              std::nullopt, {}));
  EXPECT_FALSE(build_messages(PromptTemplate::builtin(PromptRole::direct_baseline), "q",
                              std::nullopt, {}));
  EXPECT_FALSE(build_messages(PromptTemplate::builtin(PromptRole::text_grounder), "q",
                              EncodedImage{{1, 2}, MediaType::png}, {}));
}

}  // namespace
}  // namespace optic
