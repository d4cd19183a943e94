#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drgrl/clinic.hpp"
#include "drgrl/curriculum.hpp"
#include "drgrl/grpo.hpp"
#include "drgrl/optimizer.hpp"
#include "drgrl/policy.hpp"

namespace drgrl {

enum class Preset { kDesk, kPaper };
std::string_view ToString(Preset p);
Preset ParsePreset(std::string_view s);

struct DataConfig {
  // Size of the training pool shared between SFT and RL by sft.ratio.
  int train_size = 1024;
  int eval_size = 200;
  // Optional gen-data JSON Lines file replacing the generated training pool.
  std::string cases_path;
  // Seed for the case streams; when unset the experiment seed is used.
  std::optional<std::uint64_t> seed;
};

struct PatternMix {
  double answer_first = 0.0;
  double cot_first = 1.0;
  double differential = 0.0;
};

struct SftConfig {
  double ratio = 0.5;
  double learning_rate = 0.03;
  int epochs = 2;
  int batch_size = 16;
  PatternMix patterns;
};

struct EvalConfig {
  int k = 8;
  double temperature = 0.6;
  double top_p = 0.95;
  int max_len = 64;
  // Periodic evaluation every `every` GRPO steps on the first
  // `periodic_cases` held-out cases; 0 disables it.
  int every = 0;
  int periodic_cases = 50;
};

struct CurriculumConfig {
  CurriculumMode mode = CurriculumMode::kOff;
  // Labels written by the `filter` command; when empty a base run is made.
  std::string labels_path;
};

struct StagingConfig {
  int n_stages = 1;
  bool sft_on_hard = true;
  int sft_epochs = 3;
  double sft_learning_rate = 0.03;
};

struct ExperimentConfig {
  std::uint64_t seed = 7;
  std::string out_dir = "runs/default";
  Preset preset = Preset::kDesk;

  TaskConfig task;
  std::string catalog_path;  // empty: built-in miniature catalog

  DataConfig data;
  PolicyArch arch;
  double init_scale = 0.01;
  OptimizerConfig optimizer;
  SftConfig sft;
  TrainConfig train;
  EvalConfig eval;
  CurriculumConfig curriculum;
  StagingConfig staging;
  std::vector<double> sweep_ratios = {0.25, 0.5, 1.0};
  // Wall-clock timings make metrics files non-reproducible, so they are opt-in.
  bool wall_time = false;

  std::uint64_t DataSeed() const { return data.seed.value_or(seed); }

  // Structural checks; throws ConfigError. Does not touch the filesystem.
  void Validate() const;
};

ExperimentConfig DefaultConfig(Preset preset = Preset::kDesk);

// Applies one dotted key. Throws ConfigError for unknown keys or bad values.
void SetConfigValue(ExperimentConfig& cfg, std::string_view key, std::string_view value);

// Parses `key = value` lines ('#' starts a comment) on top of `cfg`. Errors
// carry `source:line` context. A `preset` key resets everything before it.
void ApplyConfigText(ExperimentConfig& cfg, std::string_view text,
                     std::string_view source = "<config>");
void ApplyConfigFile(ExperimentConfig& cfg, const std::filesystem::path& path);

// Every key with its current value, sorted by key; parses back to `cfg`.
std::string ConfigSnapshot(const ExperimentConfig& cfg);

std::vector<std::string> ConfigKeys();

// Loads catalog_path (if set) into cfg.task.catalog; the error names the path.
void ResolveCatalog(ExperimentConfig& cfg);

std::vector<double> ParseRatioList(std::string_view text);

// Shortest round-trip decimal form.
std::string FormatDouble(double v);

}  // namespace drgrl
