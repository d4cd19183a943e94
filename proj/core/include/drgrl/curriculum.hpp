#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drgrl/grpo.hpp"
#include "drgrl/reward.hpp"

namespace drgrl {

enum class DifficultyLabel { kEasy, kHard, kMedium };
enum class CurriculumMode { kOff, kDropEasy, kDropHard, kDropBoth, kEasyThenHard };

std::string_view ToString(DifficultyLabel label);
DifficultyLabel ParseDifficultyLabel(std::string_view s);
std::string_view ToString(CurriculumMode mode);
CurriculumMode ParseCurriculumMode(std::string_view s);

// EASY: zero reward variance and every accuracy score at the scheme maximum.
// HARD: zero reward variance and every accuracy score at the "wrong code"
// value (-0.5 under DENSE and BALANCED, 0 under STRICT).
// MEDIUM: everything else, including groups that fail the format gate.
DifficultyLabel ClassifyDifficulty(std::span<const RewardBreakdown> breakdowns,
                                   RewardScheme scheme);

// Classifies the first-attempt breakdowns, so resampling never changes a label.
DifficultyLabel ClassifyDifficulty(const SampledGroup& group, RewardScheme scheme);

using DifficultyLabels = std::vector<std::pair<std::string, DifficultyLabel>>;

// Ordered training phases. Drop modes and OFF yield one phase in label order;
// EASY_THEN_HARD yields EASY+MEDIUM followed by HARD+MEDIUM.
struct CurriculumSchedule {
  std::vector<std::vector<std::string>> phases;
};

CurriculumSchedule CurriculumFilter(const DifficultyLabels& labels, CurriculumMode mode);

// Cumulative end step of each stage; equal split, last stage absorbs rounding.
std::vector<int> StageBoundaries(int total_steps, int n_stages);

struct LabelCounts {
  std::size_t easy = 0;
  std::size_t hard = 0;
  std::size_t medium = 0;
};
LabelCounts CountLabels(const DifficultyLabels& labels);

}  // namespace drgrl
