#include "drgrl/grpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "drgrl/errors.hpp"
#include "drgrl/parallel.hpp"

namespace drgrl {
namespace {

// Stream index reserved for per-attempt temperature draws.
constexpr std::uint64_t kTemperatureStream = 0x7E3Bu;

template <typename E>
E ParseEnum(std::string_view s, std::initializer_list<std::pair<std::string_view, E>> table,
            std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace

std::string_view ToString(AdvantageVariant v) {
  return v == AdvantageVariant::kStandard ? "standard" : "dr_grpo";
}
std::string_view ToString(StdKind v) {
  return v == StdKind::kPopulation ? "population" : "unbiased";
}
std::string_view ToString(LossVariant v) {
  switch (v) {
    case LossVariant::kVanilla: return "vanilla";
    case LossVariant::kDapo: return "dapo";
    case LossVariant::kDrGrpo: return "dr_grpo";
  }
  return "?";
}
std::string_view ToString(KlScheduleKind v) {
  switch (v) {
    case KlScheduleKind::kConstant: return "constant";
    case KlScheduleKind::kCosineDecay: return "cosine_decay";
    case KlScheduleKind::kOff: return "off";
  }
  return "?";
}
std::string_view ToString(ResampleMode v) {
  switch (v) {
    case ResampleMode::kOff: return "off";
    case ResampleMode::kNeutral: return "neutral";
    case ResampleMode::kPositive: return "positive";
  }
  return "?";
}

AdvantageVariant ParseAdvantageVariant(std::string_view s) {
  return ParseEnum<AdvantageVariant>(
      s, {{"standard", AdvantageVariant::kStandard}, {"dr_grpo", AdvantageVariant::kDrGrpo}},
      "advantage variant");
}
StdKind ParseStdKind(std::string_view s) {
  return ParseEnum<StdKind>(
      s, {{"population", StdKind::kPopulation}, {"unbiased", StdKind::kUnbiased}}, "std kind");
}
LossVariant ParseLossVariant(std::string_view s) {
  return ParseEnum<LossVariant>(s,
                                {{"vanilla", LossVariant::kVanilla},
                                 {"dapo", LossVariant::kDapo},
                                 {"dr_grpo", LossVariant::kDrGrpo}},
                                "loss variant");
}
KlScheduleKind ParseKlScheduleKind(std::string_view s) {
  return ParseEnum<KlScheduleKind>(s,
                                   {{"constant", KlScheduleKind::kConstant},
                                    {"cosine_decay", KlScheduleKind::kCosineDecay},
                                    {"off", KlScheduleKind::kOff}},
                                   "KL schedule");
}
ResampleMode ParseResampleMode(std::string_view s) {
  return ParseEnum<ResampleMode>(s,
                                 {{"off", ResampleMode::kOff},
                                  {"neutral", ResampleMode::kNeutral},
                                  {"positive", ResampleMode::kPositive}},
                                 "resample mode");
}

void TrainConfig::Validate() const {
  if (group_size < 2) throw ConfigError("grpo.group_size must be >= 2");
  if (prompts_per_step < 1) throw ConfigError("grpo.prompts_per_step must be >= 1");
  if (total_steps < 0) throw ConfigError("grpo.total_steps must be >= 0");
  if (!(learning_rate >= 0.0)) throw ConfigError("grpo.learning_rate must be >= 0");
  if (warmup_ratio < 0.0 || warmup_ratio > 1.0) {
    throw ConfigError("grpo.warmup_ratio must be in [0, 1]");
  }
  if (!(rollout_temperature > 0.0)) throw ConfigError("grpo.temperature must be > 0");
  if (max_completion_len < 1) throw ConfigError("grpo.max_completion_len must be >= 1");
  if (resample_max < 1) throw ConfigError("grpo.resample_max must be >= 1");
  if (resample_temperatures.empty()) {
    throw ConfigError("grpo.resample_temperatures must be non-empty");
  }
  for (double t : resample_temperatures) {
    if (!(t > 0.0)) throw ConfigError("grpo.resample_temperatures must be > 0");
  }
  if (max_tokens_norm < max_completion_len) {
    throw ConfigError("grpo.max_tokens_norm must be >= grpo.max_completion_len");
  }
  if (kl.beta0 < 0.0) throw ConfigError("grpo.kl_beta0 must be >= 0");
  if (num_threads < 1) throw ConfigError("grpo.num_threads must be >= 1");
}

double SampledGroup::RewardVariance() const {
  if (rewards.empty()) return 0.0;
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  return var / static_cast<double>(rewards.size());
}

bool SampledGroup::HasRewardSpread() const {
  return std::any_of(rewards.begin(), rewards.end(),
                     [&](double r) { return r != rewards.front(); });
}

std::vector<double> ComputeAdvantages(std::span<const double> rewards,
                                      AdvantageVariant variant, StdKind std_kind,
                                      double epsilon) {
  const std::size_t g = rewards.size();
  if (g < 2) throw EmptyGroupError("advantages need a group of at least two rewards");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);

  std::vector<double> out(g);
  for (std::size_t i = 0; i < g; ++i) out[i] = rewards[i] - mean;
  if (variant == AdvantageVariant::kDrGrpo) return out;

  double ss = 0.0;
  for (double d : out) ss += d * d;
  const double denom_n = std_kind == StdKind::kPopulation ? static_cast<double>(g)
                                                          : static_cast<double>(g - 1);
  const double sd = std::sqrt(ss / denom_n);
  for (double& a : out) a /= (sd + epsilon);
  return out;
}

double KlTerm(double logp_theta, double logp_ref) {
  const double d = logp_ref - logp_theta;
  return std::exp(d) - d - 1.0;
}

double KlTermSlope(double logp_theta, double logp_ref) {
  return 1.0 - std::exp(logp_ref - logp_theta);
}

double KlCoefficient(const KlSchedule& schedule, int t, int total_steps) {
  switch (schedule.kind) {
    case KlScheduleKind::kOff: return 0.0;
    case KlScheduleKind::kConstant: return schedule.beta0;
    case KlScheduleKind::kCosineDecay: {
      if (total_steps < 1) throw ConfigError("KL cosine decay needs total_steps >= 1");
      const double frac = static_cast<double>(t) / static_cast<double>(total_steps);
      return schedule.beta0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
    }
  }
  return 0.0;
}

std::vector<std::vector<double>> PerTokenObjective(const SampledGroup& group, double beta) {
  std::vector<std::vector<double>> out(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& lp = group.per_token_logp[i];
    const auto& lr = group.per_token_logp_ref[i];
    out[i].resize(lp.size());
    for (std::size_t t = 0; t < lp.size(); ++t) {
      out[i][t] = group.advantages[i] - beta * KlTerm(lp[t], lr[t]);
    }
  }
  return out;
}

double AggregateLoss(std::span<const std::vector<double>> per_token, LossVariant variant,
                     int max_tokens_norm) {
  if (per_token.empty()) throw EmptyGroupError("cannot aggregate an empty group");
  std::size_t total_tokens = 0;
  for (const auto& seq : per_token) total_tokens += seq.size();
  if (total_tokens == 0) throw EmptyGroupError("cannot aggregate a group with no tokens");

  const double n = static_cast<double>(per_token.size());
  const double total = static_cast<double>(total_tokens);
  // Per-completion sums first, in one fixed order, so that VANILLA and DAPO
  // run identical arithmetic whenever all completions share one length.
  std::vector<double> sums;
  sums.reserve(per_token.size());
  for (const auto& seq : per_token) {
    double s = 0.0;
    for (double v : seq) s += v;
    sums.push_back(s);
  }
  switch (variant) {
    case LossVariant::kVanilla: {
      // mean_i(s_i / L_i) written as sum_i(s_i * T / (n L_i)) / T; the factor
      // is exactly 1 for equal lengths.
      double acc = 0.0;
      for (std::size_t i = 0; i < sums.size(); ++i) {
        if (per_token[i].empty()) continue;
        acc += sums[i] * (total / (n * static_cast<double>(per_token[i].size())));
      }
      return acc / total;
    }
    case LossVariant::kDapo: {
      double acc = 0.0;
      for (double s : sums) acc += s;
      return acc / total;
    }
    case LossVariant::kDrGrpo: {
      if (max_tokens_norm < 1) throw ConfigError("max_tokens_norm must be >= 1");
      double acc = 0.0;
      for (double s : sums) acc += s / static_cast<double>(max_tokens_norm);
      return acc / n;
    }
  }
  return 0.0;
}

Tokens ParametricPolicy::Sample(std::span<const TokenId> prompt, double temperature,
                                int max_len, Rng& rng) const {
  SamplingOptions opts;
  opts.temperature = temperature;
  opts.top_p = top_p_;
  opts.max_len = max_len;
  opts.eos = eos_;
  return SampleCompletion(params_, prompt, opts, rng);
}

std::vector<double> ParametricPolicy::TokenLogprobs(std::span<const TokenId> prompt,
                                                    std::span<const TokenId> completion) const {
  return SequenceLogprob(params_, prompt, completion, 1.0);
}

CompletionText GroupScorer::Render(Tokens tokens) const {
  return CompletionText::FromTokens(vocab_, std::move(tokens));
}

RewardBreakdown GroupScorer::Score(const CompletionText& c, std::string_view reference) const {
  return ScoreCompletion(c, reference, catalog_, cfg_);
}

SampledGroup RolloutGroup(const RolloutPolicy& policy, const RolloutPolicy* ref,
                          const PromptCase& prompt, const TrainConfig& cfg,
                          const GroupScorer& scorer, double temperature, Rng& rng) {
  const auto g = static_cast<std::size_t>(cfg.group_size);
  SampledGroup group;
  group.prompt_id = prompt.id;
  group.completions.reserve(g);
  for (std::size_t i = 0; i < g; ++i) {
    group.completions.push_back(
        scorer.Render(policy.Sample(prompt.prompt, temperature, cfg.max_completion_len, rng)));
  }
  for (const auto& c : group.completions) {
    group.breakdowns.push_back(scorer.Score(c, prompt.reference));
    group.rewards.push_back(group.breakdowns.back().total);
    group.per_token_logp.push_back(policy.TokenLogprobs(prompt.prompt, c.tokens));
    group.per_token_logp_ref.push_back(ref != nullptr
                                           ? ref->TokenLogprobs(prompt.prompt, c.tokens)
                                           : group.per_token_logp.back());
  }
  group.advantages = ComputeAdvantages(group.rewards, cfg.advantage_variant, cfg.std_kind,
                                       cfg.advantage_epsilon);
  group.attempt_temperatures = {temperature};
  group.initial_breakdowns = group.breakdowns;
  return group;
}

SampledGroup ObtainGroup(const RolloutPolicy& policy, const RolloutPolicy* ref,
                         const PromptCase& prompt, const TrainConfig& cfg,
                         const GroupScorer& scorer, std::uint64_t prompt_seed) {
  const int attempts_allowed = cfg.resample == ResampleMode::kOff ? 1 : cfg.resample_max;
  std::vector<double> temperatures;
  std::vector<RewardBreakdown> initial;
  SampledGroup group;
  for (int a = 0; a < attempts_allowed; ++a) {
    double temperature = cfg.rollout_temperature;
    if (a > 0) {
      Rng temp_rng(DeriveSeed(prompt_seed, {static_cast<std::uint64_t>(a), kTemperatureStream}));
      temperature = cfg.resample_temperatures[temp_rng.Below(cfg.resample_temperatures.size())];
    }
    Rng rng(DeriveSeed(prompt_seed, {static_cast<std::uint64_t>(a)}));
    group = RolloutGroup(policy, ref, prompt, cfg, scorer, temperature, rng);
    temperatures.push_back(temperature);
    if (a == 0) initial = group.breakdowns;

    bool accepted = cfg.resample == ResampleMode::kOff || group.HasRewardSpread();
    if (accepted && cfg.resample == ResampleMode::kPositive) {
      accepted = std::any_of(group.rewards.begin(), group.rewards.end(),
                             [](double r) { return r > 0.0; });
    }
    if (accepted) {
      group.resample_attempts = a + 1;
      group.resample_failed = false;
      group.attempt_temperatures = std::move(temperatures);
      group.initial_breakdowns = std::move(initial);
      return group;
    }
  }
  group.resample_attempts = attempts_allowed;
  group.resample_failed = true;
  group.attempt_temperatures = std::move(temperatures);
  group.initial_breakdowns = std::move(initial);
  return group;
}

SampledGroup DynamicResample(const RolloutPolicy& policy, const RolloutPolicy* ref,
                             const PromptCase& prompt, const TrainConfig& cfg,
                             const GroupScorer& scorer, std::uint64_t prompt_seed) {
  if (cfg.resample == ResampleMode::kOff) {
    throw ConfigError("dynamic resampling requires resample mode neutral or positive");
  }
  return ObtainGroup(policy, ref, prompt, cfg, scorer, prompt_seed);
}

std::vector<std::vector<std::vector<double>>> ObjectiveWeights(
    std::span<const SampledGroup> groups, const TrainConfig& cfg, double beta) {
  std::size_t n_completions = 0;
  std::size_t n_tokens = 0;
  for (const auto& g : groups) {
    n_completions += g.size();
    for (const auto& lp : g.per_token_logp) n_tokens += lp.size();
  }
  if (n_completions == 0 || n_tokens == 0) {
    throw EmptyGroupError("batch objective needs at least one token");
  }
  const double n = static_cast<double>(n_completions);

  std::vector<std::vector<std::vector<double>>> weights(groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    weights[gi].resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& lp = g.per_token_logp[i];
      const auto& lr = g.per_token_logp_ref[i];
      double scale = 0.0;
      switch (cfg.loss_variant) {
        case LossVariant::kVanilla:
          scale = lp.empty() ? 0.0 : 1.0 / (n * static_cast<double>(lp.size()));
          break;
        case LossVariant::kDapo: scale = 1.0 / static_cast<double>(n_tokens); break;
        case LossVariant::kDrGrpo:
          scale = 1.0 / (n * static_cast<double>(cfg.max_tokens_norm));
          break;
      }
      auto& w = weights[gi][i];
      w.resize(lp.size());
      for (std::size_t t = 0; t < lp.size(); ++t) {
        // d/dlogp of [A * ratio - beta * KlTerm] at ratio == 1.
        w[t] = scale * (g.advantages[i] - beta * KlTermSlope(lp[t], lr[t]));
      }
    }
  }
  return weights;
}

double BatchObjective(std::span<const SampledGroup> groups, const TrainConfig& cfg,
                      double beta) {
  std::vector<std::vector<double>> all;
  for (const auto& g : groups) {
    auto per_token = PerTokenObjective(g, beta);
    for (auto& seq : per_token) all.push_back(std::move(seq));
  }
  return AggregateLoss(all, cfg.loss_variant, cfg.max_tokens_norm);
}

std::vector<double> ObjectiveGradient(const PolicyParams& p, std::span<const PromptCase> prompts,
                                      std::span<const SampledGroup> groups,
                                      const TrainConfig& cfg, double beta) {
  if (prompts.size() != groups.size()) throw Error("one prompt per group is required");
  const auto weights = ObjectiveWeights(groups, cfg, beta);
  std::vector<WeightedSequence> items;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (std::size_t i = 0; i < groups[gi].size(); ++i) {
      items.push_back({prompts[gi].prompt, groups[gi].completions[i].tokens, weights[gi][i]});
    }
  }
  return GradWeightedLogprob(p, items);
}

double LearningRateAt(const TrainConfig& cfg, int t) {
  const int warmup =
      static_cast<int>(std::ceil(cfg.warmup_ratio * static_cast<double>(cfg.total_steps)));
  if (warmup <= 0 || t >= warmup) return cfg.learning_rate;
  return cfg.learning_rate * static_cast<double>(t + 1) / static_cast<double>(warmup);
}

StepResult TrainStep(PolicyParams& params, Optimizer& opt, const PolicyParams* ref,
                     std::span<const PromptCase> batch, const TrainConfig& cfg,
                     const GroupScorer& scorer, int step, std::uint64_t run_seed) {
  if (batch.empty()) throw EmptyGroupError("train step needs at least one prompt");
  const auto started = std::chrono::steady_clock::now();

  StepResult result;
  StepStats& s = result.stats;
  s.step = step;
  s.beta_t = KlCoefficient(cfg.kl, step, cfg.total_steps);
  s.learning_rate = LearningRateAt(cfg, step);

  const TokenId eos = scorer.vocab().eos();
  const ParametricPolicy policy(params, eos);
  std::optional<ParametricPolicy> ref_policy;
  if (ref != nullptr && cfg.kl.kind != KlScheduleKind::kOff) ref_policy.emplace(*ref, eos);
  const RolloutPolicy* ref_ptr = ref_policy ? &*ref_policy : nullptr;

  result.groups.resize(batch.size());
  ParallelFor(batch.size(), cfg.num_threads, [&](std::size_t i) {
    const std::uint64_t seed =
        DeriveSeed(run_seed, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(i)});
    result.groups[i] = ObtainGroup(policy, ref_ptr, batch[i], cfg, scorer, seed);
  });

  std::vector<double> grad = ObjectiveGradient(params, batch, result.groups, cfg, s.beta_t);
  s.objective = BatchObjective(result.groups, cfg, s.beta_t);
  double sq = 0.0;
  for (double& g : grad) {
    sq += g * g;
    g = -g;
  }
  s.grad_norm = std::sqrt(sq);
  opt.Step(params.mutable_theta(), grad, s.learning_rate);

  std::size_t n_completions = 0, n_tokens = 0, n_full = 0, n_format = 0, zero_var = 0;
  double reward_sum = 0.0, attempts = 0.0;
  for (const auto& g : result.groups) {
    zero_var += g.HasRewardSpread() ? 0 : 1;
    attempts += g.resample_attempts;
    s.resample_failed += g.resample_failed ? 1 : 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ++n_completions;
      n_tokens += g.completions[i].tokens.size();
      reward_sum += g.rewards[i];
      n_format += g.breakdowns[i].accuracy_score.has_value() ? 1 : 0;
      n_full += g.breakdowns[i].match == MatchClass::kFullMatch ? 1 : 0;
    }
  }
  const double ng = static_cast<double>(result.groups.size());
  const double nc = static_cast<double>(n_completions);
  s.mean_reward = reward_sum / nc;
  s.frac_zero_variance_groups = static_cast<double>(zero_var) / ng;
  s.mean_completion_len = static_cast<double>(n_tokens) / nc;
  s.accuracy = static_cast<double>(n_full) / nc;
  s.format_rate = static_cast<double>(n_format) / nc;
  s.resample_attempts_mean = attempts / ng;
  s.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                        started)
                  .count();
  return result;
}

}  // namespace drgrl
