#include "drgrl/metrics.hpp"

#include <algorithm>
#include <map>
#include <utility>
#include <stdexcept>

#include "drgrl/errors.hpp"

namespace drgrl {

std::string_view ToString(Dimension dim) {
  switch (dim) {
    case Dimension::kDrg: return "DRG";
    case Dimension::kPrincipal: return "PRINCIPAL";
    case Dimension::kCcMcc: return "CC_MCC";
  }
  return "?";
}

std::optional<std::string> ExtractAnswer(std::string_view rendered) {
  constexpr std::string_view kOpen = "<answer>";
  constexpr std::string_view kClose = "</answer>";
  const std::size_t close = rendered.rfind(kClose);
  if (close == std::string_view::npos) return std::nullopt;
  const std::size_t open = rendered.substr(0, close).rfind(kOpen);
  if (open == std::string_view::npos) return std::nullopt;
  const std::size_t begin = open + kOpen.size();
  return NormalizeText(rendered.substr(begin, close - begin));
}

bool IsCorrect(MatchClass match, Dimension dim) {
  switch (dim) {
    case Dimension::kDrg: return match == MatchClass::kFullMatch;
    case Dimension::kPrincipal:
      return match == MatchClass::kFullMatch || match == MatchClass::kPrincipalOnly;
    case Dimension::kCcMcc:
      return match == MatchClass::kFullMatch || match == MatchClass::kCcMccOnly;
  }
  return false;
}

EvalSample MakeEvalSample(std::string case_id, std::string gold,
                          std::vector<std::string> completions,
                          const Catalog& catalog) {
  if (!catalog.Contains(gold)) throw ReferenceNotInCatalogError(NormalizeText(gold));
  EvalSample s;
  s.case_id = std::move(case_id);
  s.gold = NormalizeText(gold);
  s.completions = std::move(completions);
  s.answers.reserve(s.completions.size());
  s.matches.reserve(s.completions.size());
  for (const auto& text : s.completions) {
    auto answer = ExtractAnswer(text);
    s.matches.push_back(answer ? ClassifyMatch(catalog, *answer, s.gold)
                               : MatchClass::kInvalid);
    s.answers.push_back(std::move(answer));
  }
  return s;
}

const MetricSlice& MetricReport::at(Dimension dim) const {
  switch (dim) {
    case Dimension::kDrg: return drg;
    case Dimension::kPrincipal: return principal;
    case Dimension::kCcMcc: return cc_mcc;
  }
  throw std::invalid_argument("bad dimension");
}

MetricSlice& MetricReport::at(Dimension dim) {
  return const_cast<MetricSlice&>(std::as_const(*this).at(dim));
}

MetricSlice ScoreSamples(std::span<const EvalSample> samples, const Catalog& catalog,
                         Dimension dim) {
  MetricSlice out;
  out.n_cases = samples.size();
  if (samples.empty()) return out;
  out.k = samples.front().completions.size();

  double pass1_sum = 0.0;
  std::size_t passk = 0;
  std::size_t maj = 0;
  for (const auto& s : samples) {
    if (!catalog.Contains(s.gold)) throw ReferenceNotInCatalogError(s.gold);
    const std::size_t k = s.matches.size();
    if (k == 0) continue;
    std::size_t n_correct = 0;
    // answer -> (count, correct); std::map orders ties lexically.
    std::map<std::string, std::pair<std::size_t, bool>> votes;
    for (std::size_t j = 0; j < k; ++j) {
      const bool ok = IsCorrect(s.matches[j], dim);
      n_correct += ok ? 1 : 0;
      if (s.answers[j]) {
        auto& slot = votes[*s.answers[j]];
        ++slot.first;
        slot.second = ok;
      }
    }
    pass1_sum += static_cast<double>(n_correct) / static_cast<double>(k);
    passk += n_correct > 0 ? 1 : 0;

    const std::pair<std::size_t, bool>* best = nullptr;
    for (const auto& [answer, slot] : votes) {
      if (best == nullptr || slot.first > best->first) best = &slot;
    }
    maj += (best != nullptr && best->second) ? 1 : 0;
  }
  const double n = static_cast<double>(samples.size());
  out.pass_at_1 = pass1_sum / n;
  out.pass_at_k = static_cast<double>(passk) / n;
  out.maj_at_k = static_cast<double>(maj) / n;
  return out;
}

MetricReport ScoreAll(std::span<const EvalSample> samples, const Catalog& catalog) {
  MetricReport r;
  for (Dimension d : {Dimension::kDrg, Dimension::kPrincipal, Dimension::kCcMcc}) {
    r.at(d) = ScoreSamples(samples, catalog, d);
  }
  return r;
}

std::vector<double> MovingAverage(std::span<const double> series, std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving average window must be >= 1");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t n = std::min(window, i + 1);
    double sum = 0.0;
    for (std::size_t j = i + 1 - n; j <= i; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(n);
  }
  return out;
}

MetricSlice BruteForcePassKOracle(const OutcomeMatrix& outcomes) {
  MetricSlice out;
  const std::size_t n_cases = outcomes.correct.size();
  out.n_cases = n_cases;
  if (n_cases == 0) return out;
  out.k = outcomes.correct[0].size();

  double pass1 = 0.0, passk = 0.0, maj = 0.0;
  for (std::size_t c = 0; c < n_cases; ++c) {
    const auto& correct = outcomes.correct[c];
    const auto& answers = outcomes.answers[c];
    const std::size_t k = correct.size();

    double hits = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < k; ++j) {
      if (correct[j]) {
        hits += 1.0;
        any = true;
      }
    }
    pass1 += hits / static_cast<double>(k);
    passk += any ? 1.0 : 0.0;

    // Majority: for each sample, count how many samples share its answer.
    std::size_t best_count = 0;
    std::optional<std::size_t> best_index;
    for (std::size_t j = 0; j < k; ++j) {
      if (!answers[j]) continue;
      std::size_t count = 0;
      for (std::size_t m = 0; m < k; ++m) {
        if (answers[m] && *answers[m] == *answers[j]) ++count;
      }
      const bool better =
          !best_index || count > best_count ||
          (count == best_count && *answers[j] < *answers[*best_index]);
      if (better) {
        best_count = count;
        best_index = j;
      }
    }
    if (best_index && correct[*best_index]) maj += 1.0;
  }
  const double n = static_cast<double>(n_cases);
  out.pass_at_1 = pass1 / n;
  out.pass_at_k = passk / n;
  out.maj_at_k = maj / n;
  return out;
}

}  // namespace drgrl
