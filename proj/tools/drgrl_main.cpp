// drgrl: command-line front end for the synthetic DRG coding experiments.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "drgrl/config.hpp"
#include "drgrl/errors.hpp"
#include "drgrl/experiment.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string preset = "desk";
  std::vector<std::string> overrides;
};

void AddCommon(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Config file (key = value lines)");
  cmd->add_option("--seed", o.seed, "Experiment seed");
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option("--preset", o.preset, "Base preset")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--set", o.overrides, "Extra key=value override (repeatable)");
}

// Preset, then the config file, then --set overrides, then dedicated flags.
drgrl::ExperimentConfig BuildConfig(const CommonOptions& o) {
  drgrl::ExperimentConfig cfg = drgrl::DefaultConfig(drgrl::ParsePreset(o.preset));
  if (!o.config_path.empty()) drgrl::ApplyConfigFile(cfg, o.config_path);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw drgrl::ConfigError("--set expects key=value, got '" + kv + "'");
    drgrl::SetConfigValue(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  drgrl::ResolveCatalog(cfg);
  return cfg;
}

void PrintReport(const char* label, const drgrl::MetricReport& r, int k) {
  std::printf("%-6s", label);
  for (auto d : {drgrl::Dimension::kDrg, drgrl::Dimension::kPrincipal, drgrl::Dimension::kCcMcc}) {
    const auto& s = r.at(d);
    std::printf("  %s pass@1=%.4f pass@%d=%.4f maj@%d=%.4f", std::string(drgrl::ToString(d)).c_str(),
                s.pass_at_1, k, s.pass_at_k, k, s.maj_at_k);
  }
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic DRG coding with SFT cold start and GRPO"};
  app.require_subcommand(1);

  CommonOptions gen_o, sft_o, train_o, eval_o, filter_o, sweep_o;
  bool with_targets = false;
  std::optional<int> gen_n;
  auto* gen = app.add_subcommand("gen-data", "Write training and held-out cases as JSON Lines");
  AddCommon(gen, gen_o);
  gen->add_flag("--targets", with_targets, "Include oracle targets for every cognitive pattern");
  gen->add_option("--n", gen_n, "Training pool size (overrides data.train_size)");

  auto* sft = app.add_subcommand("sft", "SFT cold start only; writes sft.ckpt");
  AddCommon(sft, sft_o);

  auto* train = app.add_subcommand("train", "Full pipeline: SFT, GRPO, evaluation");
  AddCommon(train, train_o);

  std::string eval_ckpt;
  std::optional<int> eval_k;
  std::optional<double> eval_temp, eval_top_p;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the held-out cases");
  AddCommon(eval, eval_o);
  eval->add_option("--checkpoint", eval_ckpt, "Policy checkpoint")->required();
  eval->add_option("--k", eval_k, "Samples per case");
  eval->add_option("--temperature", eval_temp, "Sampling temperature");
  eval->add_option("--top-p", eval_top_p, "Nucleus mass");

  std::string filter_ckpt;
  auto* filter = app.add_subcommand("filter", "Label RL cases easy/hard/medium with a base run");
  AddCommon(filter, filter_o);
  filter->add_option("--checkpoint", filter_ckpt, "Start from this checkpoint instead of a fresh SFT");

  std::string sweep_ratios;
  auto* sweep = app.add_subcommand("sweep", "Run the pipeline over SFT/RL data ratios");
  AddCommon(sweep, sweep_o);
  sweep->add_option("--ratios", sweep_ratios, "Comma-separated SFT ratios in (0, 1]");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      auto cfg = BuildConfig(gen_o);
      if (gen_n) cfg.data.train_size = *gen_n;
      cfg.Validate();
      std::filesystem::create_directories(cfg.out_dir);
      drgrl::ExperimentConfig all = cfg;
      all.sft.ratio = 1.0;  // keep the whole pool together in one file
      const auto ds = drgrl::BuildDataset(all);
      const std::filesystem::path out(cfg.out_dir);
      drgrl::WriteCasesJsonl(out / "train.jsonl", ds.sft, cfg, with_targets);
      drgrl::WriteCasesJsonl(out / "eval.jsonl", ds.eval, cfg, with_targets);
      std::printf("wrote %zu training and %zu held-out cases to %s\n", ds.sft.size(),
                  ds.eval.size(), cfg.out_dir.c_str());
    } else if (sft->parsed()) {
      const auto cfg = BuildConfig(sft_o);
      drgrl::RunSftOnly(cfg);
      std::printf("wrote %s/sft.ckpt\n", cfg.out_dir.c_str());
    } else if (train->parsed()) {
      const auto cfg = BuildConfig(train_o);
      const auto s = drgrl::RunExperiment(cfg);
      std::printf("sft examples %zu, rl prompts %zu, grpo %s\n", s.sft_examples, s.rl_prompts,
                  s.grpo_ran ? "ran" : "skipped");
      PrintReport("sft", s.sft_report, cfg.eval.k);
      PrintReport("final", s.final_report, cfg.eval.k);
      if (s.length) {
        std::printf("completion length %.2f -> %.2f, accuracy %.4f -> %.4f (%s)\n",
                    s.length->early_len, s.length->late_len, s.length->early_accuracy,
                    s.length->late_accuracy,
                    s.length->accuracy_rose && s.length->length_contracted
                        ? "length contracted as accuracy rose"
                        : "no contraction alongside rising accuracy");
      }
    } else if (eval->parsed()) {
      auto cfg = BuildConfig(eval_o);
      if (eval_k) cfg.eval.k = *eval_k;
      if (eval_temp) cfg.eval.temperature = *eval_temp;
      if (eval_top_p) cfg.eval.top_p = *eval_top_p;
      const auto e = drgrl::EvaluateCheckpoint(cfg, eval_ckpt);
      PrintReport("eval", e.report, cfg.eval.k);
    } else if (filter->parsed()) {
      const auto cfg = BuildConfig(filter_o);
      std::optional<std::filesystem::path> init;
      if (!filter_ckpt.empty()) init = filter_ckpt;
      const auto labels = drgrl::RunFilter(cfg, init);
      const auto c = drgrl::CountLabels(labels);
      std::printf("easy %zu, hard %zu, medium %zu -> %s/labels.jsonl\n", c.easy, c.hard, c.medium,
                  cfg.out_dir.c_str());
    } else if (sweep->parsed()) {
      const auto cfg = BuildConfig(sweep_o);
      const auto ratios = sweep_ratios.empty() ? cfg.sweep_ratios : drgrl::ParseRatioList(sweep_ratios);
      cfg.Validate();
      const auto rows = drgrl::RunSweep(cfg, ratios);
      std::printf("%s\n", drgrl::kSweepHeader);
      for (const auto& r : rows) {
        std::printf("%s,%zu,%.4f,%.4f,%.4f,%.4f%s\n", drgrl::FormatDouble(r.ratio).c_str(),
                    r.sft_examples, r.pass1_sft, r.pass1_final, r.pass8, r.maj8,
                    r.error.empty() ? "" : "  (failed, see sweep_errors.log)");
      }
    }
  } catch (const drgrl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
