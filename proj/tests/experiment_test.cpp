#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "drgrl/checkpoint.hpp"
#include "drgrl/config.hpp"
#include "drgrl/errors.hpp"
#include "drgrl/experiment.hpp"

namespace drgrl {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

fs::path Scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "drgrl_experiment_test" / name;
  fs::remove_all(p);
  return p;
}

ExperimentConfig Tiny(const fs::path& out) {
  ExperimentConfig cfg = DefaultConfig();
  ApplyConfigText(cfg,
                  "data.train_size = 48\n"
                  "data.eval_size = 12\n"
                  "sft.epochs = 1\n"
                  "grpo.total_steps = 4\n"
                  "grpo.group_size = 4\n"
                  "grpo.prompts_per_step = 4\n"
                  "eval.k = 4\n",
                  "tiny");
  cfg.out_dir = out.string();
  ResolveCatalog(cfg);
  return cfg;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<json> Records(const fs::path& metrics) {
  std::vector<json> out;
  std::ifstream in(metrics);
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

std::size_t CountType(const std::vector<json>& records, const std::string& type) {
  std::size_t n = 0;
  for (const auto& r : records) n += r.at("type") == type ? 1 : 0;
  return n;
}

TEST(SftShare, RoundsToNearest) {
  EXPECT_EQ(SftShare(0.5, 1024), 512u);
  EXPECT_EQ(SftShare(0.0, 100), 0u);
  EXPECT_EQ(SftShare(1.0, 100), 100u);
  EXPECT_EQ(SftShare(0.25, 10), 3u);
}

TEST(BuildDataset, SplitsDeterministicallyWithoutOverlap) {
  ExperimentConfig cfg = Tiny(Scratch("dataset"));
  cfg.sft.ratio = 0.25;
  const Dataset a = BuildDataset(cfg);
  const Dataset b = BuildDataset(cfg);
  EXPECT_EQ(a.sft.size(), 12u);
  EXPECT_EQ(a.rl.size(), 36u);
  EXPECT_EQ(a.eval.size(), 12u);
  std::set<std::string> ids;
  for (const auto* part : {&a.sft, &a.rl, &a.eval}) {
    for (const auto& c : *part) EXPECT_TRUE(ids.insert(c.case_id).second) << c.case_id;
  }
  for (std::size_t i = 0; i < a.rl.size(); ++i) EXPECT_EQ(a.rl[i].note, b.rl[i].note);
  // A different run seed with a pinned data seed keeps the pool.
  ExperimentConfig pinned = cfg;
  pinned.data.seed = cfg.seed;
  pinned.seed = cfg.seed + 1;
  EXPECT_EQ(BuildDataset(pinned).eval[3].note, a.eval[3].note);
}

TEST(CasesJsonl, RoundTripAndErrors) {
  const fs::path dir = Scratch("cases");
  fs::create_directories(dir);
  ExperimentConfig cfg = Tiny(dir);
  const Dataset ds = BuildDataset(cfg);
  WriteCasesJsonl(dir / "pool.jsonl", ds.rl, cfg, true);
  const auto back = ReadCasesJsonl(dir / "pool.jsonl", cfg.task);
  ASSERT_EQ(back.size(), ds.rl.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].case_id, ds.rl[i].case_id);
    EXPECT_EQ(back[i].note, ds.rl[i].note);
    EXPECT_EQ(back[i].latent, ds.rl[i].latent);
    EXPECT_EQ(back[i].gold_code, ds.rl[i].gold_code);
  }

  // Corrupt the gold code of the second record.
  std::istringstream lines(Slurp(dir / "pool.jsonl"));
  std::ofstream bad(dir / "bad.jsonl");
  std::string line;
  for (int i = 0; std::getline(lines, line); ++i) {
    json j = json::parse(line);
    if (i == 1) j["gold_code"] = j["gold_code"] == "HEART FAILURE AND SHOCK WITH MCC"
                                     ? "HEART FAILURE AND SHOCK WITH CC"
                                     : "HEART FAILURE AND SHOCK WITH MCC";
    bad << j.dump() << "\n";
  }
  bad.close();
  try {
    ReadCasesJsonl(dir / "bad.jsonl", cfg.task);
    FAIL() << "expected a ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.jsonl:2:"), std::string::npos) << e.what();
  }

  // The pool can be supplied from a file instead of generated.
  ExperimentConfig from_file = cfg;
  from_file.data.cases_path = (dir / "pool.jsonl").string();
  from_file.sft.ratio = 0.0;
  EXPECT_EQ(BuildDataset(from_file).rl.size(), ds.rl.size());
  from_file.data.cases_path = (dir / "missing.jsonl").string();
  EXPECT_THROW(BuildDataset(from_file), ConfigError);
}

TEST(BuildSftExamples, FollowsThePatternMix) {
  ExperimentConfig cfg = Tiny(Scratch("patterns"));
  const Dataset ds = BuildDataset(cfg);
  const auto cot = BuildSftExamples(ds.sft, cfg, 1);
  ASSERT_EQ(cot.size(), ds.sft.size());
  const auto& v = Vocabulary::Default();
  // CoT-first targets open the think block with reasoning, never a title word.
  for (const auto& ex : cot) {
    EXPECT_EQ(ex.target.front(), v.think_open());
    EXPECT_TRUE(v.Symbol(ex.target[1]) == "PDX" || v.Symbol(ex.target[1]) == "PPROC");
    EXPECT_EQ(ex.target.back(), v.eos());
  }
  cfg.sft.patterns = {0.0, 0.0, 1.0};
  for (const auto& ex : BuildSftExamples(ds.sft, cfg, 1)) {
    EXPECT_EQ(v.Symbol(ex.target[1]), "CANDIDATE");
  }
}

TEST(RunExperiment, WritesArtifactsAndIsByteDeterministic) {
  const fs::path a = Scratch("det_a"), b = Scratch("det_b");
  const RunSummary ra = RunExperiment(Tiny(a));
  const RunSummary rb = RunExperiment(Tiny(b));
  ASSERT_TRUE(fs::exists(a / "config.txt"));
  // Everything but config.txt, which records each run's own out_dir.
  for (const char* f : {"metrics.jsonl", "sft.ckpt", "final.ckpt", "eval_cases.jsonl",
                        "sft_eval_summary.csv", "eval_summary.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(Slurp(a / f), Slurp(b / f)) << f;
  }
  EXPECT_TRUE(ra.grpo_ran);
  EXPECT_EQ(ra.steps.size(), 4u);
  EXPECT_EQ(ra.final_report.drg.pass_at_1, rb.final_report.drg.pass_at_1);

  const auto records = Records(a / "metrics.jsonl");
  EXPECT_EQ(CountType(records, "step"), 4u);
  EXPECT_EQ(CountType(records, "eval"), 2u);
  for (const auto& r : records) {
    if (r.at("type") != "step") continue;
    for (const char* key : {"step", "mean_reward", "frac_zero_variance_groups", "mean_completion_len",
                            "beta_t", "grad_norm", "resample_attempts_mean", "wall_ms"}) {
      EXPECT_TRUE(r.contains(key)) << key;
    }
    EXPECT_TRUE(r.at("wall_ms").is_null());
  }
  EXPECT_EQ(Slurp(a / "eval_summary.csv").substr(0, 23), "dimension,metric,value\n");

  // The stored config reproduces the run settings.
  ExperimentConfig reread = DefaultConfig();
  ApplyConfigFile(reread, a / "config.txt");
  EXPECT_EQ(ConfigSnapshot(reread), Slurp(a / "config.txt"));

  // Checkpoints load back with the configured architecture.
  EXPECT_EQ(LoadCheckpoint(a / "final.ckpt").arch(), Tiny(a).arch);
}

TEST(RunExperiment, FullSftRatioSkipsGrpo) {
  ExperimentConfig cfg = Tiny(Scratch("all_sft"));
  cfg.sft.ratio = 1.0;
  const RunSummary r = RunExperiment(cfg);
  EXPECT_FALSE(r.grpo_ran);
  EXPECT_EQ(r.rl_prompts, 0u);
  const auto records = Records(fs::path(cfg.out_dir) / "metrics.jsonl");
  EXPECT_EQ(CountType(records, "grpo_skipped"), 1u);
  EXPECT_EQ(CountType(records, "step"), 0u);
  EXPECT_EQ(CountType(records, "eval"), 2u);
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "eval_summary.csv"));
}

TEST(RunExperiment, StagedRunLogsBoundaries) {
  ExperimentConfig cfg = Tiny(Scratch("staged"));
  cfg.train.total_steps = 6;
  cfg.staging.n_stages = 3;
  cfg.staging.sft_epochs = 1;
  RunExperiment(cfg);
  std::vector<int> steps;
  for (const auto& r : Records(fs::path(cfg.out_dir) / "metrics.jsonl")) {
    if (r.at("type") == "stage_boundary") {
      steps.push_back(r.at("step").get<int>());
      EXPECT_EQ(r.at("sft_applied").get<bool>(), steps.size() < 3);
    }
  }
  EXPECT_EQ(steps, (std::vector<int>{2, 4, 6}));
}

TEST(RunExperiment, CurriculumRunUsesLabels) {
  const fs::path dir = Scratch("curriculum");
  ExperimentConfig cfg = Tiny(dir);
  cfg.curriculum.mode = CurriculumMode::kEasyThenHard;
  RunExperiment(cfg);
  const auto records = Records(dir / "metrics.jsonl");
  ASSERT_EQ(CountType(records, "curriculum"), 1u);
  EXPECT_EQ(CountType(records, "base_step"), 4u);
  for (const auto& r : records) {
    if (r.at("type") != "curriculum") continue;
    const auto& labels = r.at("labels");
    EXPECT_EQ(labels.at("easy").get<int>() + labels.at("hard").get<int>() + labels.at("medium").get<int>(), 24);
    EXPECT_EQ(r.at("phase_sizes").size(), 2u);
  }
}

TEST(RunFilter, WritesLabelsThatReadBack) {
  const fs::path dir = Scratch("filter");
  ExperimentConfig cfg = Tiny(dir);
  const auto labels = RunFilter(cfg, std::nullopt);
  EXPECT_EQ(labels.size(), 24u);
  const auto back = ReadLabelsJsonl(dir / "labels.jsonl");
  EXPECT_EQ(back, labels);
  EXPECT_TRUE(fs::exists(dir / "schedule.json"));
}

TEST(RunSweep, OneRowPerRatio) {
  const fs::path dir = Scratch("sweep");
  ExperimentConfig cfg = Tiny(dir);
  cfg.train.total_steps = 2;
  const auto rows = RunSweep(cfg, {0.25, 0.5, 0.75, 1.0});
  ASSERT_EQ(rows.size(), 4u);
  std::istringstream csv(Slurp(dir / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, kSweepHeader);
  int data_rows = 0;
  while (std::getline(csv, line)) ++data_rows;
  EXPECT_EQ(data_rows, 4);
  EXPECT_EQ(rows[0].sft_examples, 12u);
  EXPECT_EQ(rows[3].sft_examples, 48u);
  EXPECT_EQ(rows[3].pass1_sft, rows[3].pass1_final);
  for (const auto& r : rows) EXPECT_TRUE(r.error.empty()) << r.error;
  EXPECT_TRUE(fs::exists(dir / "ratio_0.25" / "metrics.jsonl"));
}

TEST(DiagnoseLength, DetectsContraction) {
  std::vector<StepStats> steps(20);
  for (int t = 0; t < 20; ++t) {
    steps[static_cast<std::size_t>(t)].mean_completion_len = 40.0 - t;
    steps[static_cast<std::size_t>(t)].accuracy = 0.02 * t;
  }
  const auto d = DiagnoseLength(steps);
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->window, 10u);
  EXPECT_TRUE(d->accuracy_rose);
  EXPECT_TRUE(d->length_contracted);
  EXPECT_DOUBLE_EQ(d->early_len, 35.5);
  EXPECT_FALSE(DiagnoseLength(std::vector<StepStats>(1)).has_value());
}

}  // namespace
}  // namespace drgrl
