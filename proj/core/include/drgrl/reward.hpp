#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "drgrl/catalog.hpp"
#include "drgrl/vocabulary.hpp"

namespace drgrl {

enum class RewardScheme { kDense, kBalanced, kStrict };

std::string_view ToString(RewardScheme scheme);
// Accepts "dense", "balanced", "strict" (any case). Throws ConfigError.
RewardScheme ParseRewardScheme(std::string_view name);

inline constexpr double kFormatPenalty = -2.0;
inline constexpr double kCotFirstPenalty = -0.5;
inline constexpr std::size_t kDefaultCotWindow = 50;

// A sampled completion: token ids plus their deterministic rendering.
struct CompletionText {
  Tokens tokens;
  std::string rendered;

  static CompletionText FromTokens(const Vocabulary& vocab, Tokens tokens);
  static CompletionText FromText(std::string rendered);
};

struct RewardBreakdown {
  double format_score = 0.0;
  std::optional<double> accuracy_score;
  double cot_penalty = 0.0;
  double total = 0.0;
  // Match class of the extracted answer; absent when the format gate failed.
  std::optional<MatchClass> match;
};

struct RewardConfig {
  RewardScheme scheme = RewardScheme::kDense;
  bool cot_first_penalty = false;
  std::size_t cot_window = kDefaultCotWindow;
};

// Body of the single <think> block if the text passes the strict format gate.
std::optional<std::string> ThinkBody(std::string_view rendered);

// 0 when the text is exactly one non-empty <think> block followed by one
// non-empty <answer> block (whitespace allowed around them), -2 otherwise.
double FormatReward(std::string_view rendered);
inline double FormatReward(const CompletionText& c) { return FormatReward(c.rendered); }

double AccuracyReward(RewardScheme scheme, MatchClass match);

// -0.5 if some catalog title appears entirely inside the first `window` words
// of the think body, else 0. Words are compared after normalization.
double CotFirstPenalty(const CompletionText& c, const Catalog& catalog,
                       std::size_t window = kDefaultCotWindow);

RewardBreakdown ScoreCompletion(const CompletionText& c, std::string_view reference,
                                const Catalog& catalog, RewardScheme scheme,
                                bool cot_penalty_enabled,
                                std::size_t window = kDefaultCotWindow);

inline RewardBreakdown ScoreCompletion(const CompletionText& c,
                                       std::string_view reference,
                                       const Catalog& catalog,
                                       const RewardConfig& cfg) {
  return ScoreCompletion(c, reference, catalog, cfg.scheme, cfg.cot_first_penalty,
                         cfg.cot_window);
}

}  // namespace drgrl
