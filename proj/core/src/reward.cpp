#include "drgrl/reward.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

#include "drgrl/errors.hpp"
#include "drgrl/metrics.hpp"

namespace drgrl {
namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

std::size_t CountOccurrences(std::string_view text, std::string_view needle) {
  std::size_t count = 0;
  for (std::size_t pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

bool AllSpace(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

std::vector<std::string> SplitWords(std::string_view s) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) words.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return words;
}

}  // namespace

std::string_view ToString(RewardScheme scheme) {
  switch (scheme) {
    case RewardScheme::kDense: return "dense";
    case RewardScheme::kBalanced: return "balanced";
    case RewardScheme::kStrict: return "strict";
  }
  return "?";
}

RewardScheme ParseRewardScheme(std::string_view name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "dense") return RewardScheme::kDense;
  if (lower == "balanced") return RewardScheme::kBalanced;
  if (lower == "strict") return RewardScheme::kStrict;
  throw ConfigError("unknown reward scheme '" + std::string(name) + "'");
}

CompletionText CompletionText::FromTokens(const Vocabulary& vocab, Tokens tokens) {
  CompletionText c;
  c.rendered = vocab.Detokenize(tokens);
  c.tokens = std::move(tokens);
  return c;
}

CompletionText CompletionText::FromText(std::string rendered) {
  CompletionText c;
  c.rendered = std::move(rendered);
  return c;
}

std::optional<std::string> ThinkBody(std::string_view text) {
  for (auto tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    if (CountOccurrences(text, tag) != 1) return std::nullopt;
  }
  const std::size_t think_open = text.find(kThinkOpen);
  const std::size_t think_close = text.find(kThinkClose);
  const std::size_t answer_open = text.find(kAnswerOpen);
  const std::size_t answer_close = text.find(kAnswerClose);
  if (!(think_open < think_close && think_close < answer_open &&
        answer_open < answer_close)) {
    return std::nullopt;
  }
  if (!AllSpace(text.substr(0, think_open))) return std::nullopt;
  const std::size_t think_body_begin = think_open + kThinkOpen.size();
  const std::string_view think_body =
      text.substr(think_body_begin, think_close - think_body_begin);
  const std::size_t gap_begin = think_close + kThinkClose.size();
  if (!AllSpace(text.substr(gap_begin, answer_open - gap_begin))) return std::nullopt;
  const std::size_t answer_body_begin = answer_open + kAnswerOpen.size();
  const std::string_view answer_body =
      text.substr(answer_body_begin, answer_close - answer_body_begin);
  if (!AllSpace(text.substr(answer_close + kAnswerClose.size()))) return std::nullopt;
  if (AllSpace(think_body) || AllSpace(answer_body)) return std::nullopt;
  return std::string(think_body);
}

double FormatReward(std::string_view rendered) {
  return ThinkBody(rendered).has_value() ? 0.0 : kFormatPenalty;
}

double AccuracyReward(RewardScheme scheme, MatchClass match) {
  switch (scheme) {
    case RewardScheme::kDense:
      switch (match) {
        case MatchClass::kFullMatch: return 2.0;
        case MatchClass::kPrincipalOnly: return 1.5;
        case MatchClass::kCcMccOnly: return 0.5;
        case MatchClass::kValidNoMatch: return -0.5;
        case MatchClass::kInvalid: return -1.5;
      }
      break;
    case RewardScheme::kBalanced:
      switch (match) {
        case MatchClass::kFullMatch: return 2.0;
        case MatchClass::kPrincipalOnly: return 1.0;
        case MatchClass::kCcMccOnly: return 1.0;
        case MatchClass::kValidNoMatch: return -0.5;
        case MatchClass::kInvalid: return -1.5;
      }
      break;
    case RewardScheme::kStrict:
      switch (match) {
        case MatchClass::kFullMatch: return 2.0;
        case MatchClass::kPrincipalOnly:
        case MatchClass::kCcMccOnly:
        case MatchClass::kValidNoMatch: return 0.0;
        case MatchClass::kInvalid: return -1.5;
      }
      break;
  }
  return 0.0;
}

double CotFirstPenalty(const CompletionText& c, const Catalog& catalog,
                       std::size_t window) {
  const auto body = ThinkBody(c.rendered);
  if (!body) return 0.0;
  std::vector<std::string> words = SplitWords(*body);
  if (words.size() > window) words.resize(window);
  std::string joined;
  for (const auto& w : words) {
    if (!joined.empty()) joined.push_back(' ');
    joined += w;
  }
  words = SplitWords(NormalizeText(joined));

  for (const auto& code : catalog.codes()) {
    const std::vector<std::string> title = SplitWords(code.normalized_text);
    if (title.empty() || title.size() > words.size()) continue;
    auto it = std::search(words.begin(), words.end(), title.begin(), title.end());
    if (it != words.end()) return kCotFirstPenalty;
  }
  return 0.0;
}

RewardBreakdown ScoreCompletion(const CompletionText& c, std::string_view reference,
                                const Catalog& catalog, RewardScheme scheme,
                                bool cot_penalty_enabled, std::size_t window) {
  if (!catalog.Contains(reference)) {
    throw ReferenceNotInCatalogError(NormalizeText(reference));
  }
  RewardBreakdown out;
  out.format_score = FormatReward(c);
  if (out.format_score != 0.0) {
    out.total = out.format_score;
    return out;
  }
  // The gate guarantees a single answer block; ExtractAnswer takes the last.
  const std::optional<std::string> answer = ExtractAnswer(c.rendered);
  const MatchClass match = ClassifyMatch(catalog, answer.value_or(""), reference);
  out.match = match;
  out.accuracy_score = AccuracyReward(scheme, match);
  if (cot_penalty_enabled) out.cot_penalty = CotFirstPenalty(c, catalog, window);
  out.total = out.format_score + *out.accuracy_score + out.cot_penalty;
  return out;
}

}  // namespace drgrl
