#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drgrl/catalog.hpp"
#include "drgrl/optimizer.hpp"
#include "drgrl/policy.hpp"
#include "drgrl/reward.hpp"
#include "drgrl/rng.hpp"
#include "drgrl/vocabulary.hpp"

namespace drgrl {

enum class AdvantageVariant { kStandard, kDrGrpo };
enum class StdKind { kPopulation, kUnbiased };
enum class LossVariant { kVanilla, kDapo, kDrGrpo };
enum class KlScheduleKind { kConstant, kCosineDecay, kOff };
enum class ResampleMode { kOff, kNeutral, kPositive };

std::string_view ToString(AdvantageVariant v);
std::string_view ToString(StdKind v);
std::string_view ToString(LossVariant v);
std::string_view ToString(KlScheduleKind v);
std::string_view ToString(ResampleMode v);
AdvantageVariant ParseAdvantageVariant(std::string_view s);
StdKind ParseStdKind(std::string_view s);
LossVariant ParseLossVariant(std::string_view s);
KlScheduleKind ParseKlScheduleKind(std::string_view s);
ResampleMode ParseResampleMode(std::string_view s);

inline constexpr double kAdvantageEpsilon = 1e-4;

struct KlSchedule {
  KlScheduleKind kind = KlScheduleKind::kConstant;
  double beta0 = 0.04;
};

struct TrainConfig {
  int group_size = 8;
  int prompts_per_step = 16;
  double learning_rate = 1e-3;
  double warmup_ratio = 0.1;
  int total_steps = 100;
  double rollout_temperature = 1.0;
  int max_completion_len = 64;

  ResampleMode resample = ResampleMode::kOff;
  int resample_max = 12;
  std::vector<double> resample_temperatures = {0.7, 0.8, 0.9, 1.0};

  AdvantageVariant advantage_variant = AdvantageVariant::kStandard;
  StdKind std_kind = StdKind::kPopulation;
  double advantage_epsilon = kAdvantageEpsilon;

  LossVariant loss_variant = LossVariant::kVanilla;
  int max_tokens_norm = 64;

  KlSchedule kl;
  RewardConfig reward;

  // Rollout parallelism across prompts; results do not depend on it.
  int num_threads = 1;

  // Throws ConfigError.
  void Validate() const;
};

// One prompt's group of G completions with everything the update needs.
struct SampledGroup {
  std::string prompt_id;
  std::vector<CompletionText> completions;
  std::vector<RewardBreakdown> breakdowns;
  std::vector<double> rewards;
  std::vector<double> advantages;
  // log pi_theta (temperature 1) and log pi_ref per completion token.
  std::vector<std::vector<double>> per_token_logp;
  std::vector<std::vector<double>> per_token_logp_ref;
  int resample_attempts = 1;
  bool resample_failed = false;
  std::vector<double> attempt_temperatures;
  // Breakdowns from the first attempt, before any resampling.
  std::vector<RewardBreakdown> initial_breakdowns;

  std::size_t size() const { return completions.size(); }
  double RewardVariance() const;
  bool HasRewardSpread() const;
};

// Group-relative advantages. STANDARD: (r - mean) / (std + eps);
// DR_GRPO: r - mean. Requires at least two rewards.
std::vector<double> ComputeAdvantages(std::span<const double> rewards,
                                      AdvantageVariant variant,
                                      StdKind std_kind = StdKind::kPopulation,
                                      double epsilon = kAdvantageEpsilon);

// exp(d) - d - 1 with d = logp_ref - logp_theta; always >= 0.
double KlTerm(double logp_theta, double logp_ref);

// d KlTerm / d logp_theta.
double KlTermSlope(double logp_theta, double logp_ref);

double KlCoefficient(const KlSchedule& schedule, int t, int total_steps);

// Token (i, t) value A_i - beta * KlTerm(logp_theta, logp_ref).
std::vector<std::vector<double>> PerTokenObjective(const SampledGroup& group, double beta);

// Maximization objective aggregated per loss variant. Throws EmptyGroupError.
double AggregateLoss(std::span<const std::vector<double>> per_token, LossVariant variant,
                     int max_tokens_norm);

// Source of completions and their token log-probabilities.
class RolloutPolicy {
 public:
  virtual ~RolloutPolicy() = default;
  virtual Tokens Sample(std::span<const TokenId> prompt, double temperature, int max_len,
                        Rng& rng) const = 0;
  virtual std::vector<double> TokenLogprobs(std::span<const TokenId> prompt,
                                            std::span<const TokenId> completion) const = 0;
};

// Adapts PolicyParams to RolloutPolicy. Holds a reference; the parameters
// must outlive the adapter.
class ParametricPolicy final : public RolloutPolicy {
 public:
  ParametricPolicy(const PolicyParams& params, TokenId eos, double top_p = 1.0)
      : params_(params), eos_(eos), top_p_(top_p) {}

  Tokens Sample(std::span<const TokenId> prompt, double temperature, int max_len,
                Rng& rng) const override;
  std::vector<double> TokenLogprobs(std::span<const TokenId> prompt,
                                    std::span<const TokenId> completion) const override;

 private:
  const PolicyParams& params_;
  TokenId eos_;
  double top_p_;
};

struct PromptCase {
  std::string id;
  Tokens prompt;
  std::string reference;
};

// Renders token sequences and scores them with the rule-based reward.
class GroupScorer {
 public:
  GroupScorer(const Vocabulary& vocab, const Catalog& catalog, RewardConfig cfg)
      : vocab_(vocab), catalog_(catalog), cfg_(cfg) {}

  CompletionText Render(Tokens tokens) const;
  RewardBreakdown Score(const CompletionText& c, std::string_view reference) const;

  const Vocabulary& vocab() const { return vocab_; }
  const Catalog& catalog() const { return catalog_; }
  const RewardConfig& config() const { return cfg_; }

 private:
  const Vocabulary& vocab_;
  const Catalog& catalog_;
  RewardConfig cfg_;
};

// Samples G completions at `temperature`, scores them, computes advantages and
// the log-probabilities under the policy and the reference (`ref` may be null,
// in which case the reference equals the policy).
SampledGroup RolloutGroup(const RolloutPolicy& policy, const RolloutPolicy* ref,
                          const PromptCase& prompt, const TrainConfig& cfg,
                          const GroupScorer& scorer, double temperature, Rng& rng);

// Draws the group for one prompt. Attempt a uses the stream
// DeriveSeed(prompt_seed, {a}); the first attempt runs at the rollout
// temperature and regenerations draw their temperature uniformly from
// cfg.resample_temperatures. With resampling on, regenerates until the reward
// spread (and, in positive mode, a positive reward) appears or
// cfg.resample_max attempts are spent; on exhaustion the last group is
// returned with resample_failed set.
SampledGroup ObtainGroup(const RolloutPolicy& policy, const RolloutPolicy* ref,
                         const PromptCase& prompt, const TrainConfig& cfg,
                         const GroupScorer& scorer, std::uint64_t prompt_seed);

// ObtainGroup with resampling forced on (cfg.resample must not be kOff).
SampledGroup DynamicResample(const RolloutPolicy& policy, const RolloutPolicy* ref,
                             const PromptCase& prompt, const TrainConfig& cfg,
                             const GroupScorer& scorer, std::uint64_t prompt_seed);

// Per-token gradient weights realizing the batch objective for the active
// loss variant: w_it = c_i * (A_i + beta * (exp(logp_ref - logp_theta) - 1)).
std::vector<std::vector<std::vector<double>>> ObjectiveWeights(
    std::span<const SampledGroup> groups, const TrainConfig& cfg, double beta);

// Batch objective value (maximized) at the sampling parameters.
double BatchObjective(std::span<const SampledGroup> groups, const TrainConfig& cfg,
                      double beta);

// Gradient of the batch objective with respect to theta.
std::vector<double> ObjectiveGradient(const PolicyParams& p, std::span<const PromptCase> prompts,
                                      std::span<const SampledGroup> groups,
                                      const TrainConfig& cfg, double beta);

// Warmup-scaled learning rate for step t.
double LearningRateAt(const TrainConfig& cfg, int t);

struct StepStats {
  int step = 0;
  double mean_reward = 0.0;
  double frac_zero_variance_groups = 0.0;
  double mean_completion_len = 0.0;
  double accuracy = 0.0;      // fraction of completions with a full match
  double format_rate = 0.0;   // fraction passing the format gate
  double beta_t = 0.0;
  double grad_norm = 0.0;
  double resample_attempts_mean = 0.0;
  int resample_failed = 0;
  double objective = 0.0;
  double learning_rate = 0.0;
  std::optional<double> wall_ms;
};

struct StepResult {
  StepStats stats;
  std::vector<SampledGroup> groups;
};

// One on-policy GRPO update. Prompt i of step t draws its group from
// DeriveSeed(run_seed, {t, i}). `ref` may be null (no reference policy).
StepResult TrainStep(PolicyParams& params, Optimizer& opt, const PolicyParams* ref,
                     std::span<const PromptCase> batch, const TrainConfig& cfg,
                     const GroupScorer& scorer, int step, std::uint64_t run_seed);

}  // namespace drgrl
