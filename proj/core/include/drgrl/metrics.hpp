#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drgrl/catalog.hpp"

namespace drgrl {

enum class Dimension { kDrg, kPrincipal, kCcMcc };

std::string_view ToString(Dimension dim);

// Normalized content of the last complete <answer>...</answer> block.
std::optional<std::string> ExtractAnswer(std::string_view rendered);

// Whether a match class counts as correct along `dim`.
bool IsCorrect(MatchClass match, Dimension dim);

// The k completions sampled for one evaluation case.
struct EvalSample {
  std::string case_id;
  std::string gold;
  std::vector<std::string> completions;
  std::vector<std::optional<std::string>> answers;
  std::vector<MatchClass> matches;
};

// Extracts answers and classifies them against `gold`. Throws
// ReferenceNotInCatalogError if gold is not a catalog member.
EvalSample MakeEvalSample(std::string case_id, std::string gold,
                          std::vector<std::string> completions,
                          const Catalog& catalog);

struct MetricSlice {
  double pass_at_1 = 0.0;
  double pass_at_k = 0.0;
  double maj_at_k = 0.0;
  std::size_t n_cases = 0;
  std::size_t k = 0;
};

struct MetricReport {
  MetricSlice drg;
  MetricSlice principal;
  MetricSlice cc_mcc;

  const MetricSlice& at(Dimension dim) const;
  MetricSlice& at(Dimension dim);
};

// Pass@1 is the per-case fraction of correct samples averaged over cases;
// Pass@k is the fraction of cases with any correct sample; Maj@k is the
// fraction of cases whose most frequent extracted answer (absent answers
// excluded, ties broken by lexical order) is correct.
MetricSlice ScoreSamples(std::span<const EvalSample> samples, const Catalog& catalog,
                         Dimension dim);
MetricReport ScoreAll(std::span<const EvalSample> samples, const Catalog& catalog);

// Trailing mean over min(window, i + 1) points.
std::vector<double> MovingAverage(std::span<const double> series, std::size_t window = 50);

// Cases x k outcomes for the exhaustive-counting oracle. `correct[c][j]` must
// be false whenever `answers[c][j]` is absent, and equal answers within a case
// must share the same correctness.
struct OutcomeMatrix {
  std::vector<std::vector<std::optional<std::string>>> answers;
  std::vector<std::vector<bool>> correct;
};

// Recomputes Pass@1 / Pass@k / Maj@k by brute-force counting; shares no code
// with ScoreSamples.
MetricSlice BruteForcePassKOracle(const OutcomeMatrix& outcomes);

}  // namespace drgrl
