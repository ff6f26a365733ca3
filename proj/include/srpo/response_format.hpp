// Copyright 2026 The srpo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tag grammar, parser, renderer and answer matching for reflective responses:
//
//   <think>...</think> <answer>...</answer> <reflection>...</reflection>
//   <think>...</think> <answer>...</answer>
//
// Answers live inside \boxed{...} in the answer segments. <reflect> is
// accepted as a spelling of <reflection>.

#ifndef SRPO_RESPONSE_FORMAT_HPP_
#define SRPO_RESPONSE_FORMAT_HPP_

#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srpo/error.hpp"

namespace srpo {

enum class SegmentKind { kThink1, kAnswer1, kReflection, kThink2, kAnswer2 };

enum class FormatMode { kReflective, kTwoStepThinking, kPlain };

enum class ReflectionStyle { kEmpty, kBrief, kVerbose };

inline constexpr std::size_t kNumSegmentKinds = 5;

inline std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::kThink1: return "think1";
    case SegmentKind::kAnswer1: return "answer1";
    case SegmentKind::kReflection: return "reflection";
    case SegmentKind::kThink2: return "think2";
    case SegmentKind::kAnswer2: return "answer2";
  }
  return "?";
}

inline std::string_view to_string(FormatMode mode) {
  switch (mode) {
    case FormatMode::kReflective: return "reflective";
    case FormatMode::kTwoStepThinking: return "two-step";
    case FormatMode::kPlain: return "plain";
  }
  throw FormatError("unknown format mode");
}

inline std::optional<FormatMode> parse_format_mode(std::string_view s) {
  if (s == "reflective") return FormatMode::kReflective;
  if (s == "two-step") return FormatMode::kTwoStepThinking;
  if (s == "plain") return FormatMode::kPlain;
  return std::nullopt;
}

inline std::string_view to_string(ReflectionStyle style) {
  switch (style) {
    case ReflectionStyle::kEmpty: return "empty";
    case ReflectionStyle::kBrief: return "brief";
    case ReflectionStyle::kVerbose: return "verbose";
  }
  return "?";
}

namespace detail {

inline constexpr std::array<SegmentKind, 5> kReflectiveSequence = {
    SegmentKind::kThink1, SegmentKind::kAnswer1, SegmentKind::kReflection,
    SegmentKind::kThink2, SegmentKind::kAnswer2};
inline constexpr std::array<SegmentKind, 4> kTwoStepSequence = {
    SegmentKind::kThink1, SegmentKind::kAnswer1, SegmentKind::kThink2,
    SegmentKind::kAnswer2};
inline constexpr std::array<SegmentKind, 2> kPlainSequence = {
    SegmentKind::kThink1, SegmentKind::kAnswer1};
inline constexpr std::array<SegmentKind, 4> kSftSequence = {
    SegmentKind::kThink1, SegmentKind::kAnswer1, SegmentKind::kReflection,
    SegmentKind::kAnswer2};

enum class TagKind { kThink, kAnswer, kReflection };

inline TagKind tag_of(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::kThink1:
    case SegmentKind::kThink2: return TagKind::kThink;
    case SegmentKind::kAnswer1:
    case SegmentKind::kAnswer2: return TagKind::kAnswer;
    case SegmentKind::kReflection: return TagKind::kReflection;
  }
  return TagKind::kThink;
}

inline std::string_view open_tag(TagKind kind) {
  switch (kind) {
    case TagKind::kThink: return "<think>";
    case TagKind::kAnswer: return "<answer>";
    case TagKind::kReflection: return "<reflection>";
  }
  return "";
}

inline std::string_view close_tag(TagKind kind) {
  switch (kind) {
    case TagKind::kThink: return "</think>";
    case TagKind::kAnswer: return "</answer>";
    case TagKind::kReflection: return "</reflection>";
  }
  return "";
}

struct TagEvent {
  TagKind kind;
  bool closing;
  std::size_t begin;
  std::size_t end;
};

inline std::vector<TagEvent> scan_tags(std::string_view text) {
  struct Spelling {
    std::string_view text;
    TagKind kind;
    bool closing;
  };
  static constexpr std::array<Spelling, 8> kSpellings = {{
      {"<think>", TagKind::kThink, false},
      {"</think>", TagKind::kThink, true},
      {"<answer>", TagKind::kAnswer, false},
      {"</answer>", TagKind::kAnswer, true},
      {"<reflection>", TagKind::kReflection, false},
      {"</reflection>", TagKind::kReflection, true},
      {"<reflect>", TagKind::kReflection, false},
      {"</reflect>", TagKind::kReflection, true},
  }};
  std::vector<TagEvent> events;
  std::size_t pos = text.find('<');
  while (pos != std::string_view::npos) {
    std::size_t next = pos + 1;
    for (const Spelling& s : kSpellings) {
      if (text.compare(pos, s.text.size(), s.text) == 0) {
        events.push_back({s.kind, s.closing, pos, pos + s.text.size()});
        next = pos + s.text.size();
        break;
      }
    }
    pos = text.find('<', next);
  }
  return events;
}

inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

}  // namespace detail

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && detail::is_space(s[b])) ++b;
  while (e > b && detail::is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

/// Whitespace-delimited token count.
inline std::size_t count_tokens(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    if (detail::is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

inline std::span<const SegmentKind> required_segments(FormatMode mode) {
  switch (mode) {
    case FormatMode::kReflective: return detail::kReflectiveSequence;
    case FormatMode::kTwoStepThinking: return detail::kTwoStepSequence;
    case FormatMode::kPlain: return detail::kPlainSequence;
  }
  throw FormatError("unknown format mode");
}

/// Segment order of the cold-start SFT assistant turn: the first pass, the
/// reflection, and the ground-truth answer with no second think block.
inline std::span<const SegmentKind> sft_target_segments() {
  return detail::kSftSequence;
}

struct Span {
  std::size_t begin = 0;  // offset of the opening tag
  std::size_t end = 0;    // one past the closing tag
};

struct Segment {
  SegmentKind kind;
  Span span;
  std::string content;  // interior text, trimmed
  std::size_t tokens = 0;  // both tags plus interior tokens
};

struct StructuredResponse {
  std::string raw_text;
  std::vector<Segment> segments;
  bool well_formed = false;
  std::optional<std::string> first_answer;
  std::optional<std::string> second_answer;
  std::size_t total_length = 0;
  std::size_t think1_length = 0;
  std::size_t reflection_plus_think2_length = 0;

  const Segment* find(SegmentKind kind) const {
    for (const Segment& s : segments)
      if (s.kind == kind) return &s;
    return nullptr;
  }
};

namespace detail {

// Contents of every top-level balanced \boxed{...} in order.
inline std::vector<std::string_view> boxed_groups(std::string_view text) {
  static constexpr std::string_view kMarker = "\\boxed{";
  std::vector<std::string_view> groups;
  std::size_t pos = text.find(kMarker);
  if (pos == std::string_view::npos) return groups;

  // Single pass brace matching so adversarial inputs stay linear.
  std::vector<std::size_t> match(text.size(), std::string_view::npos);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '{') {
      stack.push_back(i);
    } else if (text[i] == '}' && !stack.empty()) {
      match[stack.back()] = i;
      stack.pop_back();
    }
  }

  while (pos != std::string_view::npos) {
    const std::size_t open = pos + kMarker.size() - 1;
    const std::size_t close = match[open];
    if (close != std::string_view::npos) {
      groups.push_back(text.substr(open + 1, close - open - 1));
      pos = text.find(kMarker, close + 1);
    } else {
      pos = text.find(kMarker, pos + 1);
    }
  }
  return groups;
}

inline std::string clean_boxed(std::string_view inner) {
  std::string_view s = trim(inner);
  while (!s.empty() && s.front() == '$') s.remove_prefix(1);
  while (!s.empty() && s.back() == '$') s.remove_suffix(1);
  return std::string(trim(s));
}

}  // namespace detail

/// Contents of the last top-level balanced \boxed{...}, trimmed with any
/// surrounding '$' removed. Nested boxes stay verbatim inside the result.
inline std::optional<std::string> extract_boxed(std::string_view text) {
  const auto groups = detail::boxed_groups(text);
  if (groups.empty()) return std::nullopt;
  return detail::clean_boxed(groups.back());
}

namespace detail {

inline bool is_decimal(std::string_view s) {
  if (!s.empty() && s.front() == '-') s.remove_prefix(1);
  if (s.empty()) return false;
  bool seen_dot = false;
  bool digit_before = false;
  bool digit_after = false;
  for (char c : s) {
    if (c == '.') {
      if (seen_dot) return false;
      seen_dot = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      (seen_dot ? digit_after : digit_before) = true;
    } else {
      return false;
    }
  }
  return digit_before && (!seen_dot || digit_after);
}

}  // namespace detail

inline std::string normalize_answer(std::string_view answer) {
  std::string_view s = trim(answer);
  if (!s.empty() && s.front() == '(') s.remove_prefix(1);
  if (!s.empty() && s.back() == ')') s.remove_suffix(1);
  s = trim(s);
  std::string out(s);
  if (out.size() == 1 && out[0] >= 'a' && out[0] <= 'd') {
    out[0] = static_cast<char>(out[0] - 'a' + 'A');
  }
  if (detail::is_decimal(out) && out.size() > 2 &&
      out.compare(out.size() - 2, 2, ".0") == 0) {
    out.resize(out.size() - 2);
  }
  return out;
}

inline bool answers_match(std::string_view predicted, std::string_view gold) {
  return normalize_answer(predicted) == normalize_answer(gold);
}

/// Parses `raw` against an explicit segment sequence. Never throws for any
/// input; a response that deviates from the sequence is returned with
/// well_formed = false and the longest matching prefix of segments.
inline StructuredResponse parse_sequence(std::string_view raw,
                                         std::span<const SegmentKind> sequence) {
  StructuredResponse out;
  out.raw_text = std::string(raw);
  const std::vector<detail::TagEvent> events = detail::scan_tags(raw);

  std::size_t ev = 0;
  for (SegmentKind kind : sequence) {
    if (ev + 1 >= events.size()) break;
    const detail::TagEvent& open = events[ev];
    const detail::TagEvent& close = events[ev + 1];
    const detail::TagKind want = detail::tag_of(kind);
    if (open.closing || open.kind != want || !close.closing ||
        close.kind != want) {
      break;
    }
    Segment seg;
    seg.kind = kind;
    seg.span = {open.begin, close.end};
    const std::string_view interior =
        raw.substr(open.end, close.begin - open.end);
    seg.content = std::string(trim(interior));
    seg.tokens = 2 + count_tokens(interior);
    out.segments.push_back(std::move(seg));
    ev += 2;
  }
  out.well_formed =
      out.segments.size() == sequence.size() && ev == events.size();

  // Lengths: segment tokens plus the tokens of the text between them.
  std::size_t cursor = 0;
  for (const Segment& seg : out.segments) {
    out.total_length +=
        count_tokens(raw.substr(cursor, seg.span.begin - cursor)) + seg.tokens;
    cursor = seg.span.end;
  }
  out.total_length += count_tokens(raw.substr(cursor));

  auto single_box = [](const Segment* seg) -> std::optional<std::string> {
    if (seg == nullptr) return std::nullopt;
    const auto groups = detail::boxed_groups(seg->content);
    if (groups.size() != 1) return std::nullopt;
    return detail::clean_boxed(groups.front());
  };
  if (const Segment* t1 = out.find(SegmentKind::kThink1)) {
    out.think1_length = count_tokens(t1->content);
  }
  if (const Segment* r = out.find(SegmentKind::kReflection)) {
    out.reflection_plus_think2_length += count_tokens(r->content);
  }
  if (const Segment* t2 = out.find(SegmentKind::kThink2)) {
    out.reflection_plus_think2_length += count_tokens(t2->content);
  }
  out.first_answer = single_box(out.find(SegmentKind::kAnswer1));
  out.second_answer = single_box(out.find(SegmentKind::kAnswer2));
  return out;
}

inline StructuredResponse parse(std::string_view raw, FormatMode mode) {
  return parse_sequence(raw, required_segments(mode));
}

struct RenderTemplates {
  // "{answer}" is replaced by the answer the segment belongs to.
  std::string think1 = "Working through the question step by step gives {answer}.";
  std::string think2 = "Following the reflection, the answer is {answer}.";
  std::string answer = "The answer is $\\boxed{{answer}}$.";
  std::string reflection_brief = "The reasoning should be checked once more.";
  std::string reflection_verbose =
      "The reasoning above should be checked once more, step by step, "
      "restating every assumption, verifying each intermediate quantity, "
      "comparing the result against every listed option, considering "
      "whether any relation was misread, and confirming that the final "
      "value is consistent with the question before committing to it in "
      "the second pass of the solution that follows.";
};

/// Slot assignments for one response. `bare` marks segments emitted without
/// their tags (the content is still written).
struct RenderDecisions {
  std::optional<std::string> first_answer;
  std::optional<ReflectionStyle> reflection_style;
  std::optional<std::string> reflection_text;  // overrides the style template
  std::optional<std::string> second_answer;
  std::array<bool, kNumSegmentKinds> bare{};
};

namespace detail {

inline std::string substitute(std::string_view tmpl, std::string_view value) {
  static constexpr std::string_view kKey = "{answer}";
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = tmpl.find(kKey, pos);
    if (hit == std::string_view::npos) break;
    out.append(tmpl.substr(pos, hit - pos));
    out.append(value);
    pos = hit + kKey.size();
  }
  out.append(tmpl.substr(pos));
  return out;
}

}  // namespace detail

inline std::string reflection_text_for(ReflectionStyle style,
                                       const RenderTemplates& templates) {
  switch (style) {
    case ReflectionStyle::kEmpty: return "";
    case ReflectionStyle::kBrief: return templates.reflection_brief;
    case ReflectionStyle::kVerbose: return templates.reflection_verbose;
  }
  return "";
}

/// Inverse of parse: writes the segments `mode` requires, one per line.
/// Throws MissingSlot if a required decision is absent.
inline std::string render(const RenderDecisions& d, FormatMode mode,
                          const RenderTemplates& templates = {}) {
  auto need = [](const std::optional<std::string>& v, std::string_view name) {
    if (!v) throw MissingSlot(std::string("missing decision: ") + std::string(name));
    return *v;
  };
  std::string out;
  for (SegmentKind kind : required_segments(mode)) {
    std::string content;
    switch (kind) {
      case SegmentKind::kThink1:
        content = detail::substitute(templates.think1, need(d.first_answer, "first_answer"));
        break;
      case SegmentKind::kAnswer1:
        content = detail::substitute(templates.answer, need(d.first_answer, "first_answer"));
        break;
      case SegmentKind::kReflection:
        if (d.reflection_text) {
          content = *d.reflection_text;
        } else if (d.reflection_style) {
          content = reflection_text_for(*d.reflection_style, templates);
        } else {
          throw MissingSlot("missing decision: reflection_style");
        }
        break;
      case SegmentKind::kThink2:
        content = detail::substitute(templates.think2, need(d.second_answer, "second_answer"));
        break;
      case SegmentKind::kAnswer2:
        content = detail::substitute(templates.answer, need(d.second_answer, "second_answer"));
        break;
    }
    if (!out.empty()) out.push_back('\n');
    if (d.bare[static_cast<std::size_t>(kind)]) {
      out += content;
    } else {
      const detail::TagKind tag = detail::tag_of(kind);
      out += detail::open_tag(tag);
      out += ' ';
      out += content;
      if (!content.empty()) out += ' ';
      out += detail::close_tag(tag);
    }
  }
  return out;
}

}  // namespace srpo

#endif  // SRPO_RESPONSE_FORMAT_HPP_
