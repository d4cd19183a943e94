#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drgrl/rng.hpp"
#include "drgrl/vocabulary.hpp"

namespace drgrl {

// Order-free summary of the prompt fed to the policy alongside the window.
enum class PromptFeatures { kNone, kUnigram, kBigram };

std::string_view ToString(PromptFeatures f);
PromptFeatures ParsePromptFeatures(std::string_view name);

// Architecture descriptor for the toy autoregressive policy.
//
// Input features are sparse: one indicator per (window slot j, token) for the
// last `context_window` context tokens, plus prompt-bag counts. With
// hidden_width == 0 the logits are a linear function of the features; with
// hidden_width > 0 a single tanh layer sits in between.
//
// Parameter layout (flat, in order):
//   readout bias                 [V]
//   feature table                [F x R]   R = V (linear) or H (hidden)
//   hidden bias                  [H]       (hidden only)
//   readout weights              [V x H]   (hidden only)
// where F = context_window * V + bag features (0, V or V*V).
struct PolicyArch {
  int vocab_size = 0;
  int context_window = 1;
  int hidden_width = 0;
  PromptFeatures prompt_features = PromptFeatures::kBigram;

  std::size_t NumWindowFeatures() const;
  std::size_t NumBagFeatures() const;
  std::size_t NumFeatures() const { return NumWindowFeatures() + NumBagFeatures(); }
  std::size_t RowWidth() const;
  std::size_t NumParams() const;

  std::size_t ReadoutBiasOffset() const { return 0; }
  std::size_t FeatureTableOffset() const;
  std::size_t HiddenBiasOffset() const;
  std::size_t ReadoutWeightsOffset() const;

  // e.g. "wbag-v1:V=57:k=4:H=0:bag=bigram"
  std::string Tag() const;
  static PolicyArch FromTag(std::string_view tag);
  void Validate() const;

  friend bool operator==(const PolicyArch&, const PolicyArch&) = default;
};

class PolicyParams {
 public:
  explicit PolicyParams(PolicyArch arch);
  PolicyParams(PolicyArch arch, std::vector<double> theta);

  // Small Gaussian init (scale * N(0, 1)) on every coordinate.
  static PolicyParams Random(PolicyArch arch, double scale, Rng& rng);

  const PolicyArch& arch() const { return arch_; }
  std::string architecture_tag() const { return arch_.Tag(); }
  std::span<const double> theta() const { return theta_; }
  // Throws Error when the parameters are frozen.
  std::span<double> mutable_theta();
  std::size_t size() const { return theta_.size(); }
  bool frozen() const { return frozen_; }
  bool AllFinite() const;

  // Deep copy marked immutable; used as the reference policy.
  PolicyParams CloneFrozen() const;

 private:
  PolicyArch arch_;
  std::vector<double> theta_;
  bool frozen_ = false;
};

// Sparse (feature index, count) list for the prompt bag.
using SparseFeatures = std::vector<std::pair<std::size_t, double>>;

SparseFeatures EncodePrompt(const PolicyArch& arch, std::span<const TokenId> prompt);

// Next-token logits given the prompt and the completion prefix generated so
// far. The prompt must be non-empty. Throws TokenOutOfRangeError.
std::vector<double> Logits(const PolicyParams& p, std::span<const TokenId> prompt,
                           std::span<const TokenId> prefix);

// log softmax(logits / temperature)[o_t] for each completion token.
std::vector<double> SequenceLogprob(const PolicyParams& p, std::span<const TokenId> prompt,
                                    std::span<const TokenId> completion,
                                    double temperature = 1.0);

struct SamplingOptions {
  double temperature = 1.0;
  double top_p = 1.0;
  int max_len = 64;
  TokenId eos = -1;
};

// Ancestral sampling; stops after emitting `eos` or at max_len tokens.
Tokens SampleCompletion(const PolicyParams& p, std::span<const TokenId> prompt,
                        const SamplingOptions& opts, Rng& rng);

// Draws one token from softmax(logits / temperature), optionally restricted
// to the smallest nucleus with mass >= top_p (renormalized).
TokenId SampleToken(std::span<const double> logits, double temperature, double top_p,
                    Rng& rng);

// Greedy decode (temperature -> 0).
Tokens GreedyDecode(const PolicyParams& p, std::span<const TokenId> prompt, int max_len,
                    TokenId eos);

struct WeightedSequence {
  std::span<const TokenId> prompt;
  std::span<const TokenId> completion;
  std::span<const double> weights;  // one per completion token
};

// Exact gradient of sum_items sum_t w_t * log pi(o_t | prompt, o_<t) at
// temperature 1. Adds into `grad` (size NumParams).
void AccumulateGradWeightedLogprob(const PolicyParams& p,
                                   std::span<const WeightedSequence> items,
                                   std::span<double> grad);
std::vector<double> GradWeightedLogprob(const PolicyParams& p,
                                        std::span<const WeightedSequence> items);

struct SftExample {
  Tokens prompt;
  Tokens target;
};

// Mean per-token negative log-likelihood of the targets.
double MeanNll(const PolicyParams& p, std::span<const SftExample> batch);

class Optimizer;

// One ascent step on the mean per-token log-likelihood of the targets.
// Returns the mean NLL before the step.
double SftStep(PolicyParams& p, Optimizer& opt, std::span<const SftExample> batch,
               double lr);

}  // namespace drgrl
