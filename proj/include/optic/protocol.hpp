// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "optic/backend_types.hpp"
#include "optic/geometry.hpp"
#include "optic/image.hpp"
#include "optic/result.hpp"

namespace optic {

enum class PromptRole { text_grounder, visual_grounder, direct_baseline };

inline std::string_view to_string(PromptRole r) noexcept {
  switch (r) {
    case PromptRole::text_grounder: return "text_grounder";
    case PromptRole::visual_grounder: return "visual_grounder";
    case PromptRole::direct_baseline: return "direct_baseline";
  }
  return "unknown";
}

namespace prompts {

inline constexpr std::string_view kTextGrounder =
    R"(You are a subject extractor, and you need to extract the subject from the object positioning description I give you. For example, "the painting hanging on the laptop", you need to return to me the real target subject of the sentence "painting". Your answer must be in JSON format. The fixed template is: {"Subject": "Write answer here, If there are multiple objects, you can use . to divide them. For example chair . person . dog ."})";

inline constexpr std::string_view kVisualGrounder =
    R"(You are a target detector. I have marked several candidate targets with boxes and numbers on the input image. I will give you a description and you will choose the target that best fits the description. Your answer must be in JSON format. Answer the number that meets the requirements, that is, the numerical label of the target object. The fixed template is: {"Subject": "Please provide your answer in the form of an array, for example, [1]. If there are multiple objects, use a comma-separated list within the brackets, such as [1, 3, 4]. If there are no objects in the image that fit the description, return: There are no targets that fit the description."})";

inline constexpr std::string_view kDirectBaseline =
    R"(Please help me find objects that match the description and return the Bounding box in the format of [x, y, w, h]. The format of [x, y, w, h] refers to boxes represented via corner, width, and height, x1, y2 being top left, w, h being width and height. The template for your answer is {"Subject": "[x, y, w, h]. If you do not answer according to this format, you will be deemed failed."})";

/// Appended to the text-grounder prompt for ambiguous queries.
inline constexpr std::string_view kAmbiguitySuffix =
    "If there is no obvious object, keep the original description unchanged";

/// Free-text verdict the visual grounder uses when nothing matches.
inline constexpr std::string_view kNoTargetSentinel =
    "There are no targets that fit the description";

inline std::string_view builtin(PromptRole role) noexcept {
  switch (role) {
    case PromptRole::text_grounder: return kTextGrounder;
    case PromptRole::visual_grounder: return kVisualGrounder;
    case PromptRole::direct_baseline: return kDirectBaseline;
  }
  return {};
}

/// File name of each role's prompt inside a prompt directory.
inline std::string file_name(PromptRole role) { return std::string(to_string(role)) + ".txt"; }

}  // namespace prompts

struct PromptTemplate {
  PromptRole role = PromptRole::text_grounder;
  std::string body;
  bool ambiguity_suffix_enabled = false;

  static PromptTemplate builtin(PromptRole role, bool ambiguity_suffix = false) {
    return {role, std::string(prompts::builtin(role)), ambiguity_suffix};
  }

  /// The instruction text actually sent. The ambiguity suffix only ever
  /// applies to the text grounder.
  std::string instruction() const {
    if (role == PromptRole::text_grounder && ambiguity_suffix_enabled)
      return body + " " + std::string(prompts::kAmbiguitySuffix);
    return body;
  }
};

struct PromptError {
  std::string message;
};

/// Reads <dir>/<role>.txt. One trailing newline is dropped so that files
/// saved by ordinary editors still match the built-in text.
inline Result<PromptTemplate, PromptError> load_prompt(const std::filesystem::path& dir,
                                                       PromptRole role,
                                                       bool ambiguity_suffix = false) {
  const auto path = dir / prompts::file_name(role);
  auto data = read_file(path);
  if (!data) return fail(PromptError{data.error().message});
  std::string body(data->begin(), data->end());
  if (body.ends_with("\r\n")) {
    body.resize(body.size() - 2);
  } else if (body.ends_with('\n')) {
    body.pop_back();
  }
  if (body.empty()) return fail(PromptError{path.string() + " is empty"});
  return PromptTemplate{role, std::move(body), ambiguity_suffix};
}

// --- reply parsing ---

struct ParseFailure {
  std::string message;
  friend bool operator==(const ParseFailure&, const ParseFailure&) = default;
};

struct RefinedQuery {
  std::vector<std::string> subjects;
  std::string raw_reply;
};

struct SelectionReply {
  enum class Kind { ids, no_target };
  Kind kind = Kind::no_target;
  std::vector<int> ids;
  std::string raw_reply;
};

struct BaselineBoxReply {
  BoundingBox box;
  std::string raw_reply;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(first, last - first + 1));
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string strip_code_fences(std::string_view reply) {
  std::string out;
  out.reserve(reply.size());
  std::size_t i = 0;
  while (i < reply.size()) {
    if (reply.compare(i, 3, "```") == 0) {
      i += 3;
      // An info string such as "json" may follow an opening fence.
      while (i < reply.size() && std::isalnum(static_cast<unsigned char>(reply[i]))) ++i;
      continue;
    }
    out += reply[i++];
  }
  return out;
}

/// Parses a bracket body such as "10, 20, 30.5" into numbers; nullopt when
/// any element is not a number.
inline std::optional<std::vector<double>> parse_number_list(std::string_view body) {
  std::vector<double> out;
  const std::string text = trim(body);
  if (text.empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item =
        trim(std::string_view(text).substr(start, comma == std::string::npos ? std::string::npos
                                                                             : comma - start));
    if (item.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end != item.c_str() + item.size() || !std::isfinite(v)) return std::nullopt;
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<nlohmann::json> subject_value(std::string_view reply);

}  // namespace detail

/// First balanced {...} in the reply after code fences are removed. Braces
/// inside JSON strings do not count.
inline Result<std::string, ParseFailure> extract_json_object(std::string_view reply) {
  const std::string text = detail::strip_code_fences(reply);
  for (std::size_t open = text.find('{'); open != std::string::npos;
       open = text.find('{', open + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        return text.substr(open, i - open + 1);
      }
    }
  }
  return fail(ParseFailure{"no balanced JSON object in reply"});
}

namespace detail {

/// The "Subject" value of the reply's JSON object, if it has one.
inline std::optional<nlohmann::json> subject_value(std::string_view reply) {
  auto object = extract_json_object(reply);
  if (!object) return std::nullopt;
  const auto doc = nlohmann::json::parse(*object, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  if (const auto it = doc.find("Subject"); it != doc.end()) return nlohmann::json(*it);
  for (const auto& [key, value] : doc.items()) {
    if (lower(key) == "subject") return nlohmann::json(value);
  }
  return std::nullopt;
}

/// Models sometimes drop the braces and write `"Subject": Picture.`.
inline std::optional<std::string> bare_subject_text(std::string_view reply) {
  static const std::regex re(R"re("?[Ss]ubject"?\s*:\s*"?([^"{}\[\]\r\n]*))re");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(reply.begin(), reply.end(), m, re)) return std::nullopt;
  return m[1].str();
}

inline std::optional<std::string> bare_subject_array(std::string_view reply) {
  static const std::regex re(R"re("?[Ss]ubject"?\s*:\s*"?\[([^\[\]]*)\])re");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(reply.begin(), reply.end(), m, re)) return std::nullopt;
  return m[1].str();
}

inline std::vector<std::string> split_subjects(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto dot = text.find('.', start);
    std::string piece =
        trim(text.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (!piece.empty()) out.push_back(std::move(piece));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out;
}

}  // namespace detail

/// Text-grounder reply to subject phrases. "." is the only separator.
inline Result<RefinedQuery, ParseFailure> parse_subjects(std::string_view reply) {
  std::string text;
  if (const auto value = detail::subject_value(reply)) {
    if (!value->is_string()) return fail(ParseFailure{"\"Subject\" is not a string"});
    text = value->get<std::string>();
  } else if (auto bare = detail::bare_subject_text(reply)) {
    text = std::move(*bare);
  } else {
    return fail(ParseFailure{"reply has no \"Subject\" field"});
  }
  auto subjects = detail::split_subjects(text);
  if (subjects.empty()) return fail(ParseFailure{"\"Subject\" names no phrase"});
  return RefinedQuery{std::move(subjects), std::string(reply)};
}

namespace detail {

inline std::optional<std::vector<int>> positive_ids(const std::vector<double>& numbers) {
  std::vector<int> ids;
  std::unordered_set<int> seen;
  for (double v : numbers) {
    if (v < 1.0 || v != std::floor(v) || v > 1e9) return std::nullopt;
    const int id = static_cast<int>(v);
    if (seen.insert(id).second) ids.push_back(id);
  }
  if (ids.empty()) return std::nullopt;
  return ids;
}

inline std::optional<std::vector<int>> selection_ids(std::string_view reply) {
  if (const auto value = subject_value(reply)) {
    if (value->is_array()) {
      std::vector<double> numbers;
      for (const auto& v : *value) {
        if (!v.is_number()) return std::nullopt;
        numbers.push_back(v.get<double>());
      }
      return positive_ids(numbers);
    }
    if (value->is_number()) return positive_ids({value->get<double>()});
    if (value->is_string()) {
      static const std::regex re(R"(^\s*\[([^\[\]]*)\]\s*$)");
      const std::string s = value->get<std::string>();
      std::smatch m;
      if (std::regex_match(s, m, re)) {
        if (const auto numbers = parse_number_list(m[1].str())) return positive_ids(*numbers);
      }
    }
    return std::nullopt;
  }
  if (const auto body = bare_subject_array(reply)) {
    if (const auto numbers = parse_number_list(*body)) return positive_ids(*numbers);
  }
  return std::nullopt;
}

}  // namespace detail

/// Visual-grounder reply to mark ids or the no-target verdict. A usable id
/// array takes precedence over the sentinel text.
inline Result<SelectionReply, ParseFailure> parse_selection(std::string_view reply) {
  if (auto ids = detail::selection_ids(reply)) {
    return SelectionReply{SelectionReply::Kind::ids, std::move(*ids), std::string(reply)};
  }
  if (detail::lower(reply).find(detail::lower(prompts::kNoTargetSentinel)) != std::string::npos) {
    return SelectionReply{SelectionReply::Kind::no_target, {}, std::string(reply)};
  }
  return fail(ParseFailure{"reply holds neither mark ids nor the no-target verdict"});
}

/// The canonical selection reply for a set of ids: {"Subject": [1, 3]}.
inline std::string format_selection_reply(const std::vector<int>& ids) {
  nlohmann::json doc;
  doc["Subject"] = ids;
  return doc.dump();
}

/// Direct-grounding reply "[x, y, w, h]" to a pixel box clamped to the image.
inline Result<BaselineBoxReply, ParseFailure> parse_baseline_box(std::string_view reply,
                                                                 const ImageDims& dims) {
  std::optional<std::vector<double>> numbers;
  if (const auto value = detail::subject_value(reply)) {
    if (value->is_array()) {
      std::vector<double> v;
      for (const auto& e : *value) {
        if (!e.is_number()) return fail(ParseFailure{"\"Subject\" array holds a non-number"});
        v.push_back(e.get<double>());
      }
      numbers = std::move(v);
    } else if (value->is_string()) {
      static const std::regex re(R"(\[([^\[\]]*)\])");
      const std::string s = value->get<std::string>();
      std::smatch m;
      if (std::regex_search(s, m, re)) numbers = detail::parse_number_list(m[1].str());
      if (!numbers) return fail(ParseFailure{"\"Subject\" holds no numeric [x, y, w, h]"});
    }
  }
  if (!numbers) {
    // Fall back to the first bracket group made only of numbers.
    static const std::regex re(R"(\[([^\[\]]*)\])");
    const std::string text(reply);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator();
         ++it) {
      if (auto parsed = detail::parse_number_list((*it)[1].str()); parsed && !parsed->empty()) {
        numbers = std::move(parsed);
        break;
      }
    }
  }
  if (!numbers) return fail(ParseFailure{"reply holds no [x, y, w, h] box"});
  if (numbers->size() != 4)
    return fail(ParseFailure{"expected 4 numbers in the box, got " +
                             std::to_string(numbers->size())});
  const auto& n = *numbers;
  auto box = from_xywh(n[0], n[1], n[2], n[3]);
  if (!box) return fail(ParseFailure{box.error().message});
  return BaselineBoxReply{clamp_to(*box, dims), std::string(reply)};
}

// --- request building ---

enum class PromptPlacement {
  system_message,  // instruction as a system message, query as the user turn
  user_prefix,     // instruction and query concatenated into one user turn
};

struct ConfigError {
  std::string message;
};

struct ChatOptions {
  std::string model_name;
  double temperature = 0.75;
  std::optional<std::int64_t> seed = 42;
  PromptPlacement placement = PromptPlacement::system_message;
};

struct EncodedImage {
  Bytes bytes;
  MediaType media_type = MediaType::png;
};

/// Assembles the single-turn request for one model role. Multimodal roles
/// require an image; the text grounder accepts none.
inline Result<ChatRequest, ConfigError> build_messages(const PromptTemplate& prompt,
                                                       std::string_view query,
                                                       const std::optional<EncodedImage>& image,
                                                       const ChatOptions& options) {
  const bool multimodal = prompt.role != PromptRole::text_grounder;
  if (multimodal && !image)
    return fail(ConfigError{std::string(to_string(prompt.role)) + " requires an image"});
  if (!multimodal && image) return fail(ConfigError{"text_grounder takes no image"});
  if (!(options.temperature >= 0.0)) return fail(ConfigError{"temperature must be >= 0"});

  ChatRequest req;
  req.model_name = options.model_name;
  req.temperature = options.temperature;
  req.seed = options.seed;

  ChatMessage user{ChatRole::user, {}};
  if (options.placement == PromptPlacement::system_message) {
    req.messages.push_back({ChatRole::system, {TextPart{prompt.instruction()}}});
    user.parts.push_back(TextPart{std::string(query)});
  } else {
    user.parts.push_back(TextPart{prompt.instruction() + "\n\n" + std::string(query)});
  }
  if (image) user.parts.push_back(ImagePart{image->media_type, base64_encode(image->bytes)});
  req.messages.push_back(std::move(user));
  return req;
}

}  // namespace optic
