#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "drgrl/config.hpp"
#include "drgrl/errors.hpp"

namespace drgrl {
namespace {

TEST(DefaultConfig, DeskDefaultsAreValid) {
  const ExperimentConfig cfg = DefaultConfig();
  EXPECT_NO_THROW(cfg.Validate());
  EXPECT_EQ(cfg.arch.vocab_size, static_cast<int>(Vocabulary::Default().size()));
  EXPECT_LE(cfg.arch.vocab_size, 64);
  EXPECT_EQ(cfg.train.group_size, 8);
  EXPECT_EQ(cfg.train.prompts_per_step, 16);
  EXPECT_EQ(cfg.train.total_steps, 100);
  EXPECT_EQ(cfg.train.resample_max, 12);
  EXPECT_EQ(cfg.train.kl.beta0, 0.04);
  EXPECT_EQ(cfg.eval.k, 8);
  EXPECT_EQ(cfg.eval.temperature, 0.6);
  EXPECT_EQ(cfg.eval.top_p, 0.95);
  EXPECT_EQ(cfg.data.eval_size, 200);
  EXPECT_EQ(cfg.task.catalog.size(), 12u);
}

TEST(DefaultConfig, PaperPresetIsValidAndLarger) {
  const ExperimentConfig cfg = DefaultConfig(Preset::kPaper);
  EXPECT_NO_THROW(cfg.Validate());
  EXPECT_EQ(cfg.train.prompts_per_step, 64);
  EXPECT_GT(cfg.data.train_size, DefaultConfig().data.train_size);
}

TEST(SetConfigValue, ParsesEveryKind) {
  ExperimentConfig cfg = DefaultConfig();
  SetConfigValue(cfg, "seed", "42");
  SetConfigValue(cfg, "grpo.loss_variant", "dr_grpo");
  SetConfigValue(cfg, "grpo.kl_schedule", "cosine_decay");
  SetConfigValue(cfg, "grpo.resample", "positive");
  SetConfigValue(cfg, "grpo.resample_temperatures", "0.5, 1.5");
  SetConfigValue(cfg, "reward.scheme", "strict");
  SetConfigValue(cfg, "reward.cot_first_penalty", "true");
  SetConfigValue(cfg, "sft.ratio", "0.25");
  SetConfigValue(cfg, "task.medical_bases", "HEART FAILURE AND SHOCK|SIMPLE PNEUMONIA AND PLEURISY");
  SetConfigValue(cfg, "data.seed", "9");
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.train.loss_variant, LossVariant::kDrGrpo);
  EXPECT_EQ(cfg.train.kl.kind, KlScheduleKind::kCosineDecay);
  EXPECT_EQ(cfg.train.resample, ResampleMode::kPositive);
  EXPECT_EQ(cfg.train.resample_temperatures, (std::vector<double>{0.5, 1.5}));
  EXPECT_EQ(cfg.train.reward.scheme, RewardScheme::kStrict);
  EXPECT_TRUE(cfg.train.reward.cot_first_penalty);
  EXPECT_EQ(cfg.sft.ratio, 0.25);
  EXPECT_EQ(cfg.task.medical_bases.size(), 2u);
  EXPECT_EQ(cfg.DataSeed(), 9u);
  SetConfigValue(cfg, "data.seed", "auto");
  EXPECT_EQ(cfg.DataSeed(), 42u);
}

TEST(SetConfigValue, RejectsUnknownKeysAndBadValues) {
  ExperimentConfig cfg = DefaultConfig();
  EXPECT_THROW(SetConfigValue(cfg, "grpo.nonsense", "1"), ConfigError);
  EXPECT_THROW(SetConfigValue(cfg, "grpo.group_size", "eight"), ConfigError);
  EXPECT_THROW(SetConfigValue(cfg, "grpo.group_size", "8x"), ConfigError);
  EXPECT_THROW(SetConfigValue(cfg, "reward.scheme", "lenient"), ConfigError);
  EXPECT_THROW(SetConfigValue(cfg, "output.wall_time", "maybe"), ConfigError);
}

TEST(ApplyConfigText, CommentsBlankLinesAndLineNumbers) {
  ExperimentConfig cfg = DefaultConfig();
  ApplyConfigText(cfg, "# header\n\ngrpo.group_size = 4   # trailing\n  eval.k=16\n");
  EXPECT_EQ(cfg.train.group_size, 4);
  EXPECT_EQ(cfg.eval.k, 16);
  try {
    ApplyConfigText(cfg, "seed = 1\n\nno_equals_here\n", "run.cfg");
    FAIL() << "expected a ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("run.cfg:3: ", 0), 0u) << e.what();
  }
}

TEST(ApplyConfigText, PresetResetsEarlierKeys) {
  ExperimentConfig cfg = DefaultConfig();
  ApplyConfigText(cfg, "eval.k = 3\npreset = paper\ngrpo.total_steps = 5\n");
  EXPECT_EQ(cfg.preset, Preset::kPaper);
  EXPECT_EQ(cfg.eval.k, 8);
  EXPECT_EQ(cfg.train.total_steps, 5);
}

TEST(ConfigSnapshot, RoundTripsEveryKey) {
  ExperimentConfig cfg = DefaultConfig();
  ApplyConfigText(cfg,
                  "seed = 11\ngrpo.learning_rate = 0.0123\nsweep.ratios = 0.1, 0.7\n"
                  "curriculum.mode = easy_then_hard\nsft.pattern.differential = 0.5\n");
  const std::string snap = ConfigSnapshot(cfg);
  ExperimentConfig back = DefaultConfig(Preset::kPaper);
  ApplyConfigText(back, snap, "snapshot");
  EXPECT_EQ(ConfigSnapshot(back), snap);
  EXPECT_EQ(back.train.learning_rate, 0.0123);
  EXPECT_EQ(back.sweep_ratios, (std::vector<double>{0.1, 0.7}));
  // Every registered key appears exactly once.
  for (const auto& key : ConfigKeys()) {
    EXPECT_NE(snap.find(key + " = "), std::string::npos) << key;
  }
}

TEST(ParseRatioList, ValidatesValues) {
  EXPECT_EQ(ParseRatioList("0.25,0.5, 1"), (std::vector<double>{0.25, 0.5, 1.0}));
  EXPECT_THROW(ParseRatioList("0.5,0.25,0.5"), ConfigError);
  EXPECT_THROW(ParseRatioList("0"), ConfigError);
  EXPECT_THROW(ParseRatioList("1.5"), ConfigError);
  EXPECT_THROW(ParseRatioList(""), ConfigError);
  ExperimentConfig cfg = DefaultConfig();
  EXPECT_THROW(ApplyConfigText(cfg, "sweep.ratios = 0.3, 0.3\n"), ConfigError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(FormatDouble(0.1), "0.1");
  EXPECT_EQ(FormatDouble(1.0), "1");
  EXPECT_EQ(FormatDouble(std::nan("")), "nan");
  for (double v : {1.0 / 3.0, 1e-300, -2.5e17}) EXPECT_EQ(std::stod(FormatDouble(v)), v);
}

TEST(Validate, CatchesStructuralErrors) {
  auto broken = [](std::string_view key, std::string_view value) {
    ExperimentConfig c = DefaultConfig();
    SetConfigValue(c, key, value);
    return c;
  };
  EXPECT_THROW(broken("sft.ratio", "1.5").Validate(), ConfigError);
  EXPECT_THROW(broken("grpo.group_size", "1").Validate(), ConfigError);
  EXPECT_THROW(broken("eval.top_p", "0").Validate(), ConfigError);
  EXPECT_THROW(broken("task.prior_mcc", "0.9").Validate(), ConfigError);
  EXPECT_THROW(broken("grpo.max_tokens_norm", "8").Validate(), ConfigError);
}

TEST(ResolveCatalog, MissingFileNamesThePath) {
  ExperimentConfig cfg = DefaultConfig();
  cfg.catalog_path = "/nonexistent/catalog.txt";
  try {
    ResolveCatalog(cfg);
    FAIL() << "expected a ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/catalog.txt"), std::string::npos);
  }
}

TEST(ResolveCatalog, LoadsFileOrPicksBuiltIn) {
  ExperimentConfig cfg = DefaultConfig();
  cfg.catalog_path = std::string(DRGRL_DATA_DIR) + "/catalog_mini.txt";
  ASSERT_TRUE(std::filesystem::exists(cfg.catalog_path)) << cfg.catalog_path;
  ResolveCatalog(cfg);
  EXPECT_EQ(cfg.task.catalog.size(), 12u);
  cfg.catalog_path.clear();
  cfg.task.procedures_enabled = true;
  ResolveCatalog(cfg);
  EXPECT_EQ(cfg.task.catalog.size(), 18u);
}

TEST(ApplyConfigFile, ReadsFromDisk) {
  const auto path = std::filesystem::temp_directory_path() / "drgrl_config_test.cfg";
  {
    std::ofstream out(path);
    out << "grpo.total_steps = 7\nbogus.key = 1\n";
  }
  ExperimentConfig cfg = DefaultConfig();
  try {
    ApplyConfigFile(cfg, path);
    FAIL() << "expected a ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":2: "), std::string::npos) << e.what();
  }
  EXPECT_EQ(cfg.train.total_steps, 7);
  std::filesystem::remove(path);
  EXPECT_THROW(ApplyConfigFile(cfg, path), ConfigError);
}

}  // namespace
}  // namespace drgrl
