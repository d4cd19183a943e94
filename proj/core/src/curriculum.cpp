#include "drgrl/curriculum.hpp"

#include "drgrl/errors.hpp"

namespace drgrl {
namespace {

double HardAccuracy(RewardScheme scheme) {
  return scheme == RewardScheme::kStrict ? 0.0 : -0.5;
}

}  // namespace

std::string_view ToString(DifficultyLabel label) {
  switch (label) {
    case DifficultyLabel::kEasy: return "easy";
    case DifficultyLabel::kHard: return "hard";
    case DifficultyLabel::kMedium: return "medium";
  }
  return "?";
}

DifficultyLabel ParseDifficultyLabel(std::string_view s) {
  if (s == "easy") return DifficultyLabel::kEasy;
  if (s == "hard") return DifficultyLabel::kHard;
  if (s == "medium") return DifficultyLabel::kMedium;
  throw ConfigError("unknown difficulty label '" + std::string(s) + "'");
}

std::string_view ToString(CurriculumMode mode) {
  switch (mode) {
    case CurriculumMode::kOff: return "off";
    case CurriculumMode::kDropEasy: return "drop_easy";
    case CurriculumMode::kDropHard: return "drop_hard";
    case CurriculumMode::kDropBoth: return "drop_both";
    case CurriculumMode::kEasyThenHard: return "easy_then_hard";
  }
  return "?";
}

CurriculumMode ParseCurriculumMode(std::string_view s) {
  if (s == "off") return CurriculumMode::kOff;
  if (s == "drop_easy") return CurriculumMode::kDropEasy;
  if (s == "drop_hard") return CurriculumMode::kDropHard;
  if (s == "drop_both") return CurriculumMode::kDropBoth;
  if (s == "easy_then_hard") return CurriculumMode::kEasyThenHard;
  throw ConfigError("unknown curriculum mode '" + std::string(s) + "'");
}

DifficultyLabel ClassifyDifficulty(std::span<const RewardBreakdown> breakdowns,
                                   RewardScheme scheme) {
  if (breakdowns.empty()) return DifficultyLabel::kMedium;
  const double first = breakdowns.front().total;
  for (const auto& b : breakdowns) {
    if (b.total != first) return DifficultyLabel::kMedium;
  }
  auto all_accuracy = [&](double value) {
    for (const auto& b : breakdowns) {
      if (!b.accuracy_score || *b.accuracy_score != value) return false;
    }
    return true;
  };
  if (all_accuracy(AccuracyReward(scheme, MatchClass::kFullMatch))) return DifficultyLabel::kEasy;
  if (all_accuracy(HardAccuracy(scheme))) return DifficultyLabel::kHard;
  return DifficultyLabel::kMedium;
}

DifficultyLabel ClassifyDifficulty(const SampledGroup& group, RewardScheme scheme) {
  const auto& b = group.initial_breakdowns.empty() ? group.breakdowns : group.initial_breakdowns;
  return ClassifyDifficulty(std::span<const RewardBreakdown>(b), scheme);
}

CurriculumSchedule CurriculumFilter(const DifficultyLabels& labels, CurriculumMode mode) {
  auto keep = [&](auto&& pred) {
    std::vector<std::string> out;
    for (const auto& [id, label] : labels) {
      if (pred(label)) out.push_back(id);
    }
    return out;
  };
  CurriculumSchedule s;
  switch (mode) {
    case CurriculumMode::kOff:
      s.phases.push_back(keep([](DifficultyLabel) { return true; }));
      break;
    case CurriculumMode::kDropEasy:
      s.phases.push_back(keep([](DifficultyLabel l) { return l != DifficultyLabel::kEasy; }));
      break;
    case CurriculumMode::kDropHard:
      s.phases.push_back(keep([](DifficultyLabel l) { return l != DifficultyLabel::kHard; }));
      break;
    case CurriculumMode::kDropBoth:
      s.phases.push_back(keep([](DifficultyLabel l) { return l == DifficultyLabel::kMedium; }));
      break;
    case CurriculumMode::kEasyThenHard:
      s.phases.push_back(keep([](DifficultyLabel l) { return l != DifficultyLabel::kHard; }));
      s.phases.push_back(keep([](DifficultyLabel l) { return l != DifficultyLabel::kEasy; }));
      break;
  }
  return s;
}

std::vector<int> StageBoundaries(int total_steps, int n_stages) {
  if (n_stages < 1) throw ConfigError("staging.n_stages must be >= 1");
  if (total_steps < 0) throw ConfigError("total steps must be >= 0");
  std::vector<int> out;
  for (int s = 1; s <= n_stages; ++s) {
    out.push_back(static_cast<int>(static_cast<long long>(total_steps) * s / n_stages));
  }
  return out;
}

LabelCounts CountLabels(const DifficultyLabels& labels) {
  LabelCounts c;
  for (const auto& entry : labels) {
    switch (entry.second) {
      case DifficultyLabel::kEasy: ++c.easy; break;
      case DifficultyLabel::kHard: ++c.hard; break;
      case DifficultyLabel::kMedium: ++c.medium; break;
    }
  }
  return c;
}

}  // namespace drgrl
