// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit when any
// asserted criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drgrl/catalog.hpp"
#include "drgrl/config.hpp"
#include "drgrl/curriculum.hpp"
#include "drgrl/experiment.hpp"
#include "drgrl/grpo.hpp"
#include "drgrl/metrics.hpp"
#include "drgrl/reward.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace drgrl;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  bool report_only = false;

  void Require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail = "failed: " + what;
      pass = false;
    }
  }
};

std::string Fmt(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

constexpr const char* kGold = "HEART FAILURE AND SHOCK WITH MCC";

CompletionText Answer(const std::string& title) {
  return CompletionText::FromText("<think>reasoning</think><answer>" + title + "</answer>");
}

// Reference titles per match class, relative to kGold.
const std::pair<MatchClass, const char*> kByClass[] = {
    {MatchClass::kFullMatch, kGold},
    {MatchClass::kPrincipalOnly, "HEART FAILURE AND SHOCK WITH CC"},
    {MatchClass::kCcMccOnly, "SIMPLE PNEUMONIA AND PLEURISY WITH MCC"},
    {MatchClass::kValidNoMatch, "SIMPLE PNEUMONIA AND PLEURISY WITH CC"},
    {MatchClass::kInvalid, "NOT A REAL DRG"},
};

// ---------------------------------------------------------------------------

Outcome RewardTables() {
  Outcome o;
  const Catalog cat = MiniCatalog();
  struct Scheme {
    RewardScheme scheme;
    double values[5];  // full, principal, cc/mcc, valid no match, invalid
  };
  const Scheme tables[] = {
      {RewardScheme::kDense, {2.0, 1.5, 0.5, -0.5, -1.5}},
      {RewardScheme::kBalanced, {2.0, 1.0, 1.0, -0.5, -1.5}},
      {RewardScheme::kStrict, {2.0, 0.0, 0.0, 0.0, -1.5}},
  };
  int checked = 0;
  for (const auto& t : tables) {
    for (int i = 0; i < 5; ++i) {
      const auto [cls, title] = kByClass[i];
      o.Require(AccuracyReward(t.scheme, cls) == t.values[i],
                std::string(ToString(t.scheme)) + " " + std::string(ToString(cls)));
      const auto r = ScoreCompletion(Answer(title), kGold, cat, t.scheme, false);
      o.Require(r.match == cls && r.accuracy_score == t.values[i] && r.total == t.values[i],
                "scored " + std::string(title));
      ++checked;
    }
  }
  o.Require(FormatReward("<think>a</think><answer>b</answer>") == 0.0, "format accept");
  o.Require(FormatReward("<answer>b</answer>") == -2.0, "format reject");
  const auto malformed = ScoreCompletion(CompletionText::FromText("no tags"), kGold, cat, RewardScheme::kDense, true);
  o.Require(malformed.total == -2.0 && !malformed.accuracy_score, "format gate blocks accuracy");
  const auto early = CompletionText::FromText(std::string("<think>") + kGold + "</think><answer>" + kGold + "</answer>");
  o.Require(CotFirstPenalty(early, cat) == -0.5, "cot penalty value");
  o.Require(ScoreCompletion(early, kGold, cat, RewardScheme::kDense, true).total == 1.5, "penalty stacks");
  if (o.pass) o.detail = Fmt("%d accuracy cells, format {0,-2}, penalty -0.5", checked);
  return o;
}

Outcome KlScheduleCheck() {
  Outcome o;
  const drgrl::KlSchedule cos{KlScheduleKind::kCosineDecay, 0.04};
  for (int T : {1, 2, 10, 64, 100, 1001}) {
    o.Require(std::abs(KlCoefficient(cos, 0, T) - 0.04) <= 1e-12, "beta(0)");
    o.Require(std::abs(KlCoefficient(cos, T, T)) <= 1e-12, "beta(T)");
    if (T % 2 == 0) o.Require(std::abs(KlCoefficient(cos, T / 2, T) - 0.02) <= 1e-12, "beta(T/2)");
    for (int t = 1; t <= T; ++t) {
      o.Require(KlCoefficient(cos, t, T) <= KlCoefficient(cos, t - 1, T), "non-increasing");
    }
  }
  o.Require(KlCoefficient({KlScheduleKind::kOff, 0.04}, 3, 10) == 0.0, "off is zero");
  if (o.pass) o.detail = "beta(0)=0.04, beta(T)=0, beta(T/2)=0.02, monotone";
  return o;
}

Outcome GradientCheck() {
  Outcome o;
  Rng rng(20240601);
  int fixtures = 0;
  double worst = 0.0;
  for (int g : {2, 4, 8}) {
    for (int rep = 0; rep < 8; ++rep) {
      const auto f = testing::MakeGroupFixture(
          rng, g, 2, 6, rep % 2 == 0 ? AdvantageVariant::kStandard : AdvantageVariant::kDrGrpo);
      o.Require(f.policy.size() <= 500, "fixture size");
      const double beta = 0.02 * (rep + 1);
      for (LossVariant v : {LossVariant::kVanilla, LossVariant::kDapo, LossVariant::kDrGrpo}) {
        TrainConfig cfg;
        cfg.loss_variant = v;
        cfg.max_tokens_norm = 8;
        const auto grad = ObjectiveGradient(f.policy, f.prompts, f.groups, cfg, beta);
        const auto fd = testing::FiniteDifference(
            f.policy.arch(), std::vector<double>(f.policy.theta().begin(), f.policy.theta().end()),
            [&](const PolicyParams& q) {
              return testing::StepObjectiveOracle(q, f.prompts, f.groups, v, 8, beta);
            });
        const double err = testing::RelativeError(grad, fd);
        worst = std::max(worst, err);
        o.Require(err < 1e-4, Fmt("rel err %.3g (%s)", err, std::string(ToString(v)).c_str()));
      }
      ++fixtures;
    }
  }
  o.Require(fixtures >= 20, "fixture count");
  if (o.pass) o.detail = Fmt("%d fixtures x 3 loss variants, max rel err %.2e", fixtures, worst);
  return o;
}

Outcome LossIdentities() {
  Outcome o;
  const std::vector<std::vector<double>> worked = {{1, 1}, {0, 0, 0, 0}};
  const double van = AggregateLoss(worked, LossVariant::kVanilla, 8);
  const double dapo = AggregateLoss(worked, LossVariant::kDapo, 8);
  const double dr = AggregateLoss(worked, LossVariant::kDrGrpo, 8);
  o.Require(std::abs(van - 0.5) <= 1e-9, "vanilla 0.5");
  o.Require(std::abs(dapo - 0.333333) <= 1e-6 && std::abs(dapo - 1.0 / 3.0) <= 1e-9, "dapo 1/3");
  o.Require(std::abs(dr - 0.125) <= 1e-9, "dr_grpo 0.125");
  Rng rng(77);
  int batches = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.Below(16), len = 1 + rng.Below(32);
    std::vector<std::vector<double>> v(n, std::vector<double>(len));
    for (auto& s : v) {
      for (double& x : s) x = rng.Normal();
    }
    o.Require(AggregateLoss(v, LossVariant::kVanilla, 64) == AggregateLoss(v, LossVariant::kDapo, 64),
              "vanilla == dapo on equal lengths");
    ++batches;
  }
  if (o.pass) o.detail = Fmt("worked example %.6f/%.6f/%.6f; %d equal-length batches bit-equal", van, dapo, dr, batches);
  return o;
}

Outcome AdvantageProperties() {
  Outcome o;
  const double table[] = {2.0, 1.5, 1.0, 0.5, 0.0, -0.5, -1.5, -2.0};
  Rng rng(5);
  double max_zero = 0.0;
  int groups = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t g = std::size_t{2} << rng.Below(3);
    std::vector<double> r(g);
    for (double& x : r) x = table[rng.Below(8)];
    const auto a = ComputeAdvantages(r, AdvantageVariant::kStandard);
    double sum = 0.0;
    for (double x : a) sum += x;
    o.Require(std::abs(sum) <= 1e-9 * static_cast<double>(g), "sum to zero");

    std::vector<double> shifted = r;
    const double c = static_cast<double>(rng.Between(-5, 5)) * 0.5;
    for (double& x : shifted) x += c;
    o.Require(ComputeAdvantages(shifted, AdvantageVariant::kStandard) == a, "standard shift invariance");
    o.Require(ComputeAdvantages(shifted, AdvantageVariant::kDrGrpo) ==
                  ComputeAdvantages(r, AdvantageVariant::kDrGrpo),
              "dr_grpo shift invariance");

    const double scale = static_cast<double>(1 + rng.Below(10));
    std::vector<double> scaled = r;
    for (double& x : scaled) x *= scale;
    const auto d = ComputeAdvantages(r, AdvantageVariant::kDrGrpo);
    const auto ds = ComputeAdvantages(scaled, AdvantageVariant::kDrGrpo);
    for (std::size_t i = 0; i < g; ++i) o.Require(ds[i] == scale * d[i], "dr_grpo scale linearity");

    const std::vector<double> flat(g, r[0]);
    for (double x : ComputeAdvantages(flat, AdvantageVariant::kStandard)) {
      max_zero = std::max(max_zero, std::abs(x));
    }
    ++groups;
  }
  o.Require(max_zero <= 2e-4, "zero-variance advantage bound");
  if (o.pass) o.detail = Fmt("%d groups; zero-variance max |A| = %.1e", groups, max_zero);
  return o;
}

Outcome EvalOracle() {
  Outcome o;
  const Catalog cat = MiniCatalog();
  Rng rng(31337);
  int matrices = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto samples = testing::RandomEvalSamples(rng, cat, 1 + rng.Below(8), 8);
    for (Dimension d : {Dimension::kDrg, Dimension::kPrincipal, Dimension::kCcMcc}) {
      const auto got = ScoreSamples(samples, cat, d);
      const auto want = BruteForcePassKOracle(testing::OutcomesFor(samples, d));
      o.Require(got.pass_at_1 == want.pass_at_1 && got.pass_at_k == want.pass_at_k &&
                    got.maj_at_k == want.maj_at_k,
                "mismatch in trial " + std::to_string(trial));
    }
    ++matrices;
  }
  if (o.pass) o.detail = Fmt("%d matrices (k=8) x 3 metrics x 3 dimensions, exact", matrices);
  return o;
}

Outcome ResampleContract() {
  Outcome o;
  const Catalog cat = MiniCatalog();
  const GroupScorer scorer(Vocabulary::Default(), cat, RewardConfig{});
  const auto& v = Vocabulary::Default();
  auto completion = [&](const std::string& title) {
    return v.Tokenize("<think>PDX C1</think><answer>" + title + "</answer><eos>");
  };
  testing::MixturePolicy mix({completion(kGold), completion("HEART FAILURE AND SHOCK WITH CC"),
                              completion("SIMPLE PNEUMONIA AND PLEURISY WITH CC"), v.Tokenize("PDX <eos>")},
                             {0.85, 0.05, 0.05, 0.05});
  const PromptCase prompt{"p", v.Tokenize("<bos> PDX C0 SDX MCC C3"), kGold};
  TrainConfig cfg;
  cfg.group_size = 4;
  int resampled = 0, failed = 0, max_attempts = 0;
  for (ResampleMode mode : {ResampleMode::kNeutral, ResampleMode::kPositive}) {
    cfg.resample = mode;
    for (std::uint64_t i = 0; i < 1000; ++i) {
      const auto g = DynamicResample(mix, nullptr, prompt, cfg, scorer, DeriveSeed(99, {i}));
      o.Require(g.RewardVariance() > 0.0 || g.resample_failed, "zero-variance group returned unflagged");
      if (mode == ResampleMode::kPositive && !g.resample_failed) {
        bool positive = false;
        for (double r : g.rewards) positive = positive || r > 0.0;
        o.Require(positive, "positive mode without a positive reward");
      }
      o.Require(g.resample_attempts >= 1 && g.resample_attempts <= 12, "attempt bound");
      o.Require(g.attempt_temperatures.size() == static_cast<std::size_t>(g.resample_attempts), "temperature log");
      for (std::size_t a = 1; a < g.attempt_temperatures.size(); ++a) {
        const double t = g.attempt_temperatures[a];
        o.Require(t == 0.7 || t == 0.8 || t == 0.9 || t == 1.0, "temperature set");
      }
      resampled += g.resample_attempts > 1 ? 1 : 0;
      failed += g.resample_failed ? 1 : 0;
      max_attempts = std::max(max_attempts, g.resample_attempts);
    }
  }
  // Exhaustion on a constant-reward policy uses exactly N_max attempts.
  testing::FixedPolicy fixed(completion(kGold));
  cfg.resample = ResampleMode::kNeutral;
  const auto ex = DynamicResample(fixed, nullptr, prompt, cfg, scorer, 1);
  o.Require(ex.resample_failed && ex.resample_attempts == 12, "exhaustion at N_max = 12");
  o.Require(resampled > 0, "stub never triggered resampling");
  if (o.pass) {
    o.detail = Fmt("2000 groups, %d resampled, %d flagged failed, max attempts %d; N_max=12 exhaustion ok",
                   resampled, failed, max_attempts);
  }
  return o;
}

Outcome Classification() {
  Outcome o;
  const Catalog cat = MiniCatalog();
  using L = DifficultyLabel;
  // Expected label of a homogeneous group per match class, per scheme.
  const L expect[3][5] = {
      {L::kEasy, L::kMedium, L::kMedium, L::kHard, L::kMedium},  // dense
      {L::kEasy, L::kMedium, L::kMedium, L::kHard, L::kMedium},  // balanced
      {L::kEasy, L::kHard, L::kHard, L::kHard, L::kMedium},      // strict
  };
  const RewardScheme schemes[] = {RewardScheme::kDense, RewardScheme::kBalanced, RewardScheme::kStrict};
  int fixtures = 0;
  for (int s = 0; s < 3; ++s) {
    auto group = [&](std::initializer_list<int> classes) {
      std::vector<RewardBreakdown> out;
      for (int c : classes) out.push_back(ScoreCompletion(Answer(kByClass[c].second), kGold, cat, schemes[s], false));
      return out;
    };
    for (int c = 0; c < 5; ++c) {
      o.Require(ClassifyDifficulty(group({c, c, c, c, c, c, c, c}), schemes[s]) == expect[s][c],
                std::string(ToString(schemes[s])) + " " + std::string(ToString(kByClass[c].first)));
      ++fixtures;
    }
    o.Require(ClassifyDifficulty(group({0, 0, 0, 3}), schemes[s]) == L::kMedium, "mixed is medium");
    std::vector<RewardBreakdown> bad(4, ScoreCompletion(CompletionText::FromText("x"), kGold, cat, schemes[s], false));
    o.Require(ClassifyDifficulty(bad, schemes[s]) == L::kMedium, "format failures are medium");
    fixtures += 2;
  }
  if (o.pass) o.detail = Fmt("%d fixtures across dense/balanced/strict", fixtures);
  return o;
}

// ---------------------------------------------------------------------------
// End-to-end runs shared by the training, determinism and length criteria.

struct EndToEnd {
  RunSummary first;
  fs::path dir_a, dir_b;
  bool ran = false;
  std::string error;
  double seconds = 0.0;
};

ExperimentConfig DeskConfig(const fs::path& out) {
  ExperimentConfig cfg = DefaultConfig();
  cfg.out_dir = out.string();
  ResolveCatalog(cfg);
  return cfg;
}

Outcome Training(EndToEnd& e2e, const fs::path& workdir) {
  Outcome o;
  e2e.dir_a = workdir / "e2e_a";
  fs::remove_all(e2e.dir_a);
  const auto start = std::chrono::steady_clock::now();
  try {
    const ExperimentConfig cfg = DeskConfig(e2e.dir_a);
    o.Require(cfg.arch.vocab_size <= 64 && cfg.task.catalog.size() == 12, "task shape");
    o.Require(cfg.train.group_size == 8 && cfg.train.prompts_per_step == 16 &&
                  cfg.train.total_steps == 100 && cfg.data.eval_size == 200 && cfg.train.num_threads == 1,
              "run shape");
    e2e.first = RunExperiment(cfg);
    e2e.ran = true;
  } catch (const std::exception& ex) {
    e2e.error = ex.what();
    o.Require(false, std::string("run threw: ") + ex.what());
    return o;
  }
  e2e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const RunSummary& r = e2e.first;
  o.Require(r.sft_examples == 512, "512 SFT examples");
  o.Require(r.grpo_ran && r.steps.size() == 100, "100 GRPO steps");
  const auto& sft = r.sft_report.drg;
  const auto& fin = r.final_report.drg;
  const double d1 = fin.pass_at_1 - sft.pass_at_1;
  const double dmaj = fin.maj_at_k - sft.maj_at_k;
  const double dpk = fin.pass_at_k - sft.pass_at_k;
  o.Require(d1 >= 0.05, Fmt("delta Pass@1 %+.3f < +0.05", d1));
  o.Require(dmaj >= 0.0, Fmt("delta Maj@8 %+.3f < 0", dmaj));
  o.Require(e2e.seconds < 600.0, "runtime over 10 minutes");
  const std::string diag = Fmt("Pass@1 %.3f -> %.3f (%+.3f), Maj@8 %.3f -> %.3f (%+.3f), "
                               "Pass@8 %.3f -> %.3f (%+.3f, diagnostic: %s +0.02)",
                               sft.pass_at_1, fin.pass_at_1, d1, sft.maj_at_k, fin.maj_at_k, dmaj,
                               sft.pass_at_k, fin.pass_at_k, dpk, dpk <= 0.02 ? "<=" : ">");
  o.detail = o.pass ? diag : o.detail + "; " + diag;
  return o;
}

Outcome Determinism(EndToEnd& e2e, const fs::path& workdir) {
  Outcome o;
  if (!e2e.ran) {
    o.Require(false, "end-to-end run unavailable: " + e2e.error);
    return o;
  }
  e2e.dir_b = workdir / "e2e_b";
  fs::remove_all(e2e.dir_b);
  RunExperiment(DeskConfig(e2e.dir_b));
  const std::string a = Slurp(e2e.dir_a / "metrics.jsonl");
  o.Require(!a.empty() && a == Slurp(e2e.dir_b / "metrics.jsonl"), "single-run metrics differ");
  o.Require(Slurp(e2e.dir_a / "final.ckpt") == Slurp(e2e.dir_b / "final.ckpt"), "checkpoints differ");

  const std::vector<double> ratios = {0.25, 0.5, 1.0};
  const fs::path sa = workdir / "sweep_a", sb = workdir / "sweep_b";
  fs::remove_all(sa);
  fs::remove_all(sb);
  const auto rows_a = RunSweep(DeskConfig(sa), ratios);
  const auto rows_b = RunSweep(DeskConfig(sb), ratios);
  o.Require(rows_a.size() == 3 && rows_b.size() == 3, "sweep row count");
  for (const auto& row : rows_a) o.Require(row.error.empty(), "sweep run failed: " + row.error);
  o.Require(Slurp(sa / "sweep.csv") == Slurp(sb / "sweep.csv"), "sweep.csv differs");
  std::size_t bytes = a.size();
  for (double ratio : ratios) {
    const std::string sub = "ratio_" + FormatDouble(ratio);
    const std::string m = Slurp(sa / sub / "metrics.jsonl");
    o.Require(!m.empty() && m == Slurp(sb / sub / "metrics.jsonl"), "sweep metrics differ at " + sub);
    bytes += m.size();
  }
  if (o.pass) o.detail = Fmt("1 run + 3-ratio sweep repeated, %zu metrics bytes identical", bytes);
  return o;
}

Outcome LengthDiagnosticReport(const EndToEnd& e2e) {
  Outcome o;
  o.report_only = true;
  if (!e2e.ran || !e2e.first.length) {
    o.detail = "no diagnostic available";
    return o;
  }
  const auto& d = *e2e.first.length;
  o.detail = Fmt("per-step length logged; first/last %zu steps: length %.2f -> %.2f, accuracy %.3f -> %.3f; "
                 "accuracy rose: %s, length contracted: %s",
                 d.window, d.early_len, d.late_len, d.early_accuracy, d.late_accuracy,
                 d.accuracy_rose ? "yes" : "no", d.length_contracted ? "yes" : "no");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drgrl acceptance checks"};
  std::string workdir = "acceptance_runs";
  app.add_option("--workdir", workdir, "Directory for end-to-end run artifacts");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  EndToEnd e2e;
  struct Criterion {
    int id;
    const char* title;
    double budget_s;  // 0: no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "reward tables exact", 1.0, RewardTables},
      {2, "KL cosine schedule exact", 1.0, KlScheduleCheck},
      {3, "train-step gradient matches finite differences", 30.0, GradientCheck},
      {4, "loss-variant identities", 0.0, LossIdentities},
      {5, "advantage properties", 0.0, AdvantageProperties},
      {6, "evaluation oracle equivalence", 10.0, EvalOracle},
      {7, "dynamic resampling contract", 0.0, ResampleContract},
      {8, "end-to-end desk-scale training", 600.0, [&] { return Training(e2e, workdir); }},
      {9, "curriculum classification", 0.0, Classification},
      {10, "determinism", 0.0, [&] { return Determinism(e2e, workdir); }},
      {11, "completion-length diagnostic", 0.0, [&] { return LengthDiagnosticReport(e2e); }},
  };

  int failures = 0;
  double determinism_total = 0.0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& ex) {
      o.pass = false;
      o.detail = std::string("exception: ") + ex.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += Fmt(" (over the %.0f s budget)", c.budget_s);
    }
    if (c.id == 10) {
      // The determinism budget covers the first end-to-end run as well.
      determinism_total = secs + e2e.seconds;
      if (determinism_total >= 900.0) {
        o.pass = false;
        o.detail += " (over the 15 min budget)";
      }
    }
    const char* status = o.report_only ? "REPORT" : (o.pass ? "PASS" : "FAIL");
    std::printf("AC%-2d %-6s %s: %s [%.2f s]\n", c.id, status, c.title, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass && !o.report_only) ++failures;
  }
  std::printf("%d of %zu asserted criteria failed\n", failures, criteria.size() - 1);
  return failures == 0 ? 0 : 1;
}
