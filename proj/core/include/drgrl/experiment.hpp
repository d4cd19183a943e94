#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drgrl/clinic.hpp"
#include "drgrl/config.hpp"
#include "drgrl/curriculum.hpp"
#include "drgrl/grpo.hpp"
#include "drgrl/metrics.hpp"
#include "drgrl/policy.hpp"

namespace drgrl {

// Named sub-streams of the experiment seed.
namespace stream {
inline constexpr std::uint64_t kTrainCases = 1;
inline constexpr std::uint64_t kEvalCases = 2;
inline constexpr std::uint64_t kSplit = 3;
inline constexpr std::uint64_t kInit = 4;
inline constexpr std::uint64_t kSft = 5;
inline constexpr std::uint64_t kPatterns = 6;
inline constexpr std::uint64_t kGrpo = 7;
inline constexpr std::uint64_t kPromptOrder = 8;
inline constexpr std::uint64_t kEval = 9;
inline constexpr std::uint64_t kBaseRun = 10;
inline constexpr std::uint64_t kStage = 11;
inline constexpr std::uint64_t kLabeling = 12;
inline constexpr std::uint64_t kSweep = 13;
}  // namespace stream

struct Dataset {
  std::vector<CaseSpec> sft;
  std::vector<CaseSpec> rl;
  std::vector<CaseSpec> eval;
};

// Number of pool cases assigned to SFT for a ratio.
std::size_t SftShare(double ratio, std::size_t pool_size);

// Builds (or loads) the training pool, shuffles it with the split stream and
// assigns the first SftShare cases to SFT; eval cases come from their own
// stream so they never overlap the pool's generation indices.
Dataset BuildDataset(const ExperimentConfig& cfg);

// Cases as JSON Lines: {case_id, note_tokens, gold_code, principal_kind,
// principal_id, secondaries, targets?}.
void WriteCasesJsonl(const std::filesystem::path& path, const std::vector<CaseSpec>& cases,
                     const ExperimentConfig& cfg, bool with_targets);
// Re-derives the latent tuple with OracleH and checks the stored gold code.
// Errors name the file and line.
std::vector<CaseSpec> ReadCasesJsonl(const std::filesystem::path& path, const TaskConfig& task);

// One oracle target per case, its cognitive pattern drawn from the mix.
std::vector<SftExample> BuildSftExamples(const std::vector<CaseSpec>& cases,
                                         const ExperimentConfig& cfg, std::uint64_t seed);

// Minibatch SFT over shuffled epochs. Returns the mean pre-step NLL per epoch.
std::vector<double> RunSft(PolicyParams& params, const std::vector<SftExample>& examples,
                           const ExperimentConfig& cfg, double lr, int epochs,
                           std::uint64_t seed);

struct EvalOutput {
  std::vector<EvalSample> samples;
  MetricReport report;
  double mean_completion_len = 0.0;
};

// k samples per case; sample j of case i uses DeriveSeed(seed, {i, j}).
EvalOutput Evaluate(const PolicyParams& params, const std::vector<CaseSpec>& cases,
                    const ExperimentConfig& cfg, std::uint64_t seed);

PromptCase ToPromptCase(const CaseSpec& c);

// One group per case from `params` without resampling.
DifficultyLabels LabelByRollout(const PolicyParams& params, const PolicyParams* ref,
                                const std::vector<CaseSpec>& cases,
                                const ExperimentConfig& cfg, std::uint64_t seed);

void WriteLabelsJsonl(const std::filesystem::path& path, const DifficultyLabels& labels);
DifficultyLabels ReadLabelsJsonl(const std::filesystem::path& path);

// Whether completion length fell while accuracy rose, comparing the mean of
// the first and last `window` training steps.
struct LengthDiagnostic {
  std::size_t window = 0;
  double early_len = 0.0;
  double late_len = 0.0;
  double early_accuracy = 0.0;
  double late_accuracy = 0.0;
  bool accuracy_rose = false;
  bool length_contracted = false;
};
std::optional<LengthDiagnostic> DiagnoseLength(const std::vector<StepStats>& steps);

struct RunSummary {
  std::size_t sft_examples = 0;
  std::size_t rl_prompts = 0;
  bool grpo_ran = false;
  MetricReport sft_report;
  MetricReport final_report;
  std::vector<StepStats> steps;
  std::optional<LengthDiagnostic> length;
};

// Full pipeline. Writes into cfg.out_dir: config.txt, metrics.jsonl,
// sft.ckpt, final.ckpt, eval_cases.jsonl, sft_eval_summary.csv and
// eval_summary.csv. Requires ResolveCatalog to have run.
RunSummary RunExperiment(const ExperimentConfig& cfg);

// SFT cold start only; writes config.txt, metrics.jsonl and sft.ckpt.
PolicyParams RunSftOnly(const ExperimentConfig& cfg);

// Evaluates a checkpoint on the held-out cases; writes eval_cases.jsonl and
// eval_summary.csv.
EvalOutput EvaluateCheckpoint(const ExperimentConfig& cfg, const std::filesystem::path& ckpt);

// Base GRPO run from the SFT checkpoint (or `init` when given) labeling the
// RL pool; writes labels.jsonl and one id list per curriculum phase.
DifficultyLabels RunFilter(const ExperimentConfig& cfg,
                           const std::optional<std::filesystem::path>& init);

struct SweepRow {
  double ratio = 0.0;
  std::size_t sft_examples = 0;
  double pass1_sft = 0.0;
  double pass1_final = 0.0;
  double pass8 = 0.0;
  double maj8 = 0.0;
  std::string error;
};

inline constexpr const char* kSweepHeader = "ratio,sft_examples,pass@1_sft,pass@1_final,pass@8,maj@8";

// One experiment per ratio under out_dir/ratio_<r>, seeds derived from the
// base seed and the ratio index, data pool shared. Failed runs produce a row
// of NaN metrics and an entry in sweep_errors.log. Writes sweep.csv.
std::vector<SweepRow> RunSweep(const ExperimentConfig& cfg, const std::vector<double>& ratios);

}  // namespace drgrl
