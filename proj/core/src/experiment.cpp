#include "drgrl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "drgrl/checkpoint.hpp"
#include "drgrl/errors.hpp"
#include "drgrl/optimizer.hpp"
#include "drgrl/parallel.hpp"
#include "json.hpp"

namespace drgrl {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const Vocabulary& Vocab() { return Vocabulary::Default(); }

class MetricsLog {
 public:
  explicit MetricsLog(const fs::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot write metrics file '" + path.string() + "'");
  }
  void Write(const json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

std::ofstream OpenOut(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

void PrepareOutDir(const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw Error("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
  auto out = OpenOut(fs::path(cfg.out_dir) / "config.txt");
  out << ConfigSnapshot(cfg);
}

PolicyParams InitialParams(const ExperimentConfig& cfg) {
  Rng rng(DeriveSeed(cfg.seed, {stream::kInit}));
  return PolicyParams::Random(cfg.arch, cfg.init_scale, rng);
}

GroupScorer MakeScorer(const ExperimentConfig& cfg) {
  return GroupScorer(Vocab(), cfg.task.catalog, cfg.train.reward);
}

json SliceJson(const MetricSlice& s) {
  return json{{"pass@1", s.pass_at_1}, {"pass@k", s.pass_at_k}, {"maj@k", s.maj_at_k}};
}

json EvalRecord(std::string_view phase, int step, const EvalOutput& e, const ExperimentConfig& cfg) {
  return json{{"type", "eval"},
              {"phase", phase},
              {"step", step},
              {"n_cases", e.report.drg.n_cases},
              {"k", cfg.eval.k},
              {"mean_completion_len", e.mean_completion_len},
              {"drg", SliceJson(e.report.drg)},
              {"principal", SliceJson(e.report.principal)},
              {"cc_mcc", SliceJson(e.report.cc_mcc)}};
}

json StepRecord(std::string_view type, const StepStats& s, bool wall_time) {
  json j{{"type", type},
         {"step", s.step},
         {"mean_reward", s.mean_reward},
         {"accuracy", s.accuracy},
         {"format_rate", s.format_rate},
         {"frac_zero_variance_groups", s.frac_zero_variance_groups},
         {"mean_completion_len", s.mean_completion_len},
         {"beta_t", s.beta_t},
         {"learning_rate", s.learning_rate},
         {"objective", s.objective},
         {"grad_norm", s.grad_norm},
         {"resample_attempts_mean", s.resample_attempts_mean},
         {"resample_failed", s.resample_failed}};
  j["wall_ms"] = (wall_time && s.wall_ms) ? json(*s.wall_ms) : json(nullptr);
  return j;
}

void WriteEvalSummary(const fs::path& path, const EvalOutput& e, int k) {
  auto out = OpenOut(path);
  out << "dimension,metric,value\n";
  const std::string ks = std::to_string(k);
  for (Dimension d : {Dimension::kDrg, Dimension::kPrincipal, Dimension::kCcMcc}) {
    const MetricSlice& s = e.report.at(d);
    out << ToString(d) << ",pass@1," << FormatDouble(s.pass_at_1) << "\n";
    out << ToString(d) << ",pass@" << ks << "," << FormatDouble(s.pass_at_k) << "\n";
    out << ToString(d) << ",maj@" << ks << "," << FormatDouble(s.maj_at_k) << "\n";
  }
}

void WriteEvalCases(const fs::path& path, const EvalOutput& e) {
  auto out = OpenOut(path);
  for (const auto& s : e.samples) {
    json answers = json::array();
    for (const auto& a : s.answers) answers.push_back(a ? json(*a) : json(nullptr));
    json matches = json::array();
    std::size_t correct = 0;
    for (MatchClass m : s.matches) {
      matches.push_back(std::string(ToString(m)));
      correct += m == MatchClass::kFullMatch ? 1 : 0;
    }
    out << json{{"case_id", s.case_id},
                {"gold", s.gold},
                {"n_correct", correct},
                {"answers", answers},
                {"matches", matches},
                {"completions", s.completions}}
               .dump()
        << '\n';
  }
}

// Walks a prompt pool in shuffled passes; pass e uses DeriveSeed(seed, {e}).
class PromptStream {
 public:
  PromptStream(std::vector<PromptCase> pool, std::uint64_t seed)
      : pool_(std::move(pool)), seed_(seed) {
    if (pool_.empty()) throw ConfigError("GRPO prompt pool is empty");
    Reshuffle();
  }

  std::vector<PromptCase> Next(int n) {
    std::vector<PromptCase> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      if (pos_ == order_.size()) {
        ++pass_;
        Reshuffle();
      }
      out.push_back(pool_[order_[pos_++]]);
    }
    return out;
  }

 private:
  void Reshuffle() {
    order_.resize(pool_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(DeriveSeed(seed_, {pass_}));
    rng.Shuffle(order_.begin(), order_.end());
    pos_ = 0;
  }

  std::vector<PromptCase> pool_;
  std::uint64_t seed_;
  std::uint64_t pass_ = 0;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

std::vector<PromptCase> SelectPrompts(const std::vector<CaseSpec>& cases,
                                      const std::vector<std::string>& ids) {
  std::map<std::string, const CaseSpec*> by_id;
  for (const auto& c : cases) by_id[c.case_id] = &c;
  std::vector<PromptCase> out;
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ConfigError("curriculum label refers to unknown case '" + id + "'");
    out.push_back(ToPromptCase(*it->second));
  }
  return out;
}

std::vector<PromptCase> AllPrompts(const std::vector<CaseSpec>& cases) {
  std::vector<PromptCase> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(ToPromptCase(c));
  return out;
}

// Base run from `start`: records each case's first-visit group label, then
// labels cases the run never reached with a rollout of the final policy.
DifficultyLabels BaseRunLabels(const PolicyParams& start, const ExperimentConfig& cfg,
                               const std::vector<CaseSpec>& rl, MetricsLog* log) {
  const GroupScorer scorer = MakeScorer(cfg);
  PolicyParams params = start;
  const PolicyParams ref = start.CloneFrozen();
  Optimizer opt(cfg.optimizer, params.size());
  const std::uint64_t run_seed = DeriveSeed(cfg.seed, {stream::kBaseRun});
  PromptStream prompts(AllPrompts(rl), DeriveSeed(run_seed, {stream::kPromptOrder}));

  std::map<std::string, DifficultyLabel> first_visit;
  for (int t = 0; t < cfg.train.total_steps; ++t) {
    const auto batch = prompts.Next(cfg.train.prompts_per_step);
    const StepResult r = TrainStep(params, opt, &ref, batch, cfg.train, scorer, t, run_seed);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      first_visit.emplace(batch[i].id, ClassifyDifficulty(r.groups[i], cfg.train.reward.scheme));
    }
    if (log) log->Write(StepRecord("base_step", r.stats, cfg.wall_time));
  }

  std::vector<CaseSpec> unvisited;
  for (const auto& c : rl) {
    if (!first_visit.contains(c.case_id)) unvisited.push_back(c);
  }
  if (!unvisited.empty()) {
    const auto late = LabelByRollout(params, nullptr, unvisited, cfg,
                                     DeriveSeed(cfg.seed, {stream::kLabeling, 0}));
    for (const auto& [id, label] : late) first_visit.emplace(id, label);
  }

  DifficultyLabels labels;
  labels.reserve(rl.size());
  for (const auto& c : rl) labels.emplace_back(c.case_id, first_visit.at(c.case_id));
  return labels;
}

json CountsJson(const LabelCounts& c) {
  return json{{"easy", c.easy}, {"hard", c.hard}, {"medium", c.medium}};
}

std::vector<double> RunSftLogged(PolicyParams& params, const std::vector<SftExample>& examples,
                                 const ExperimentConfig& cfg, double lr, int epochs,
                                 std::uint64_t seed, MetricsLog& log, std::string_view phase) {
  const auto nll = RunSft(params, examples, cfg, lr, epochs, seed);
  for (std::size_t e = 0; e < nll.size(); ++e) {
    log.Write(json{{"type", "sft_epoch"},
                   {"phase", phase},
                   {"epoch", e + 1},
                   {"examples", examples.size()},
                   {"nll", nll[e]}});
  }
  return nll;
}

}  // namespace

std::size_t SftShare(double ratio, std::size_t pool_size) {
  const double share = std::round(ratio * static_cast<double>(pool_size));
  return std::min(pool_size, static_cast<std::size_t>(std::max(0.0, share)));
}

Dataset BuildDataset(const ExperimentConfig& cfg) {
  TaskConfig task = cfg.task;
  task.seed = cfg.DataSeed();
  std::vector<CaseSpec> pool;
  if (!cfg.data.cases_path.empty()) {
    if (!fs::exists(cfg.data.cases_path)) {
      throw ConfigError("cases file not found: '" + cfg.data.cases_path + "'");
    }
    pool = ReadCasesJsonl(cfg.data.cases_path, task);
  } else {
    pool = GenerateCases(task, static_cast<std::size_t>(cfg.data.train_size),
                         stream::kTrainCases, "train-");
  }

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(DeriveSeed(task.seed, {stream::kSplit}));
  rng.Shuffle(order.begin(), order.end());

  Dataset ds;
  const std::size_t n_sft = SftShare(cfg.sft.ratio, pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_sft ? ds.sft : ds.rl).push_back(pool[order[i]]);
  }
  ds.eval = GenerateCases(task, static_cast<std::size_t>(cfg.data.eval_size), stream::kEvalCases,
                          "eval-");
  return ds;
}

void WriteCasesJsonl(const fs::path& path, const std::vector<CaseSpec>& cases,
                     const ExperimentConfig& cfg, bool with_targets) {
  const Vocabulary& v = Vocab();
  auto out = OpenOut(path);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const CaseSpec& c = cases[i];
    json note = json::array();
    for (TokenId t : c.note) note.push_back(v.Symbol(t));
    json secondaries = json::array();
    for (const auto& s : c.latent.secondaries) {
      secondaries.push_back(json{{"condition", s.condition}, {"severity", ToString(s.severity)}});
    }
    json j{{"case_id", c.case_id},
           {"note_tokens", note},
           {"gold_code", c.gold_code.normalized_text},
           {"principal_kind", ToString(c.latent.principal_kind)},
           {"principal_id", c.latent.principal_id},
           {"secondaries", secondaries}};
    if (with_targets) {
      json targets = json::object();
      for (CognitivePattern p : {CognitivePattern::kAnswerFirst, CognitivePattern::kCotFirst,
                                 CognitivePattern::kDifferential}) {
        Rng rng(DeriveSeed(cfg.DataSeed(), {stream::kPatterns, i, static_cast<std::uint64_t>(p)}));
        targets[std::string(ToString(p))] = RenderSftTarget(c, p, cfg.task, rng).rendered;
      }
      j["targets"] = targets;
    }
    out << j.dump() << '\n';
  }
}

std::vector<CaseSpec> ReadCasesJsonl(const fs::path& path, const TaskConfig& task) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open cases file '" + path.string() + "'");
  const Vocabulary& v = Vocab();
  std::vector<CaseSpec> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      CaseSpec c;
      c.case_id = j.at("case_id").get<std::string>();
      for (const auto& sym : j.at("note_tokens")) {
        const auto id = v.Find(sym.get<std::string>());
        if (!id) throw MalformedNoteError("unknown note token '" + sym.get<std::string>() + "'");
        c.note.push_back(*id);
      }
      c.latent = OracleH(c.note, task);
      c.gold_code = MapF(task, c.latent);
      const std::string stored = NormalizeText(j.at("gold_code").get<std::string>());
      if (stored != c.gold_code.normalized_text) {
        throw MalformedNoteError("gold_code '" + stored + "' disagrees with the note ('" +
                                 c.gold_code.normalized_text + "')");
      }
      out.push_back(std::move(c));
    } catch (const std::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<SftExample> BuildSftExamples(const std::vector<CaseSpec>& cases,
                                         const ExperimentConfig& cfg, std::uint64_t seed) {
  const PatternMix& mix = cfg.sft.patterns;
  const double total = mix.answer_first + mix.cot_first + mix.differential;
  std::vector<SftExample> out;
  out.reserve(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    Rng rng(DeriveSeed(seed, {i}));
    const double u = rng.Uniform() * total;
    CognitivePattern p = CognitivePattern::kDifferential;
    if (u < mix.cot_first) {
      p = CognitivePattern::kCotFirst;
    } else if (u < mix.cot_first + mix.answer_first) {
      p = CognitivePattern::kAnswerFirst;
    }
    out.push_back({cases[i].PromptTokens(Vocab()), RenderSftTarget(cases[i], p, cfg.task, rng).tokens});
  }
  return out;
}

std::vector<double> RunSft(PolicyParams& params, const std::vector<SftExample>& examples,
                           const ExperimentConfig& cfg, double lr, int epochs,
                           std::uint64_t seed) {
  std::vector<double> epoch_nll;
  if (examples.empty() || epochs <= 0) return epoch_nll;
  Optimizer opt(cfg.optimizer, params.size());
  const auto bs = static_cast<std::size_t>(cfg.sft.batch_size);
  std::vector<std::size_t> order(examples.size());
  for (int e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(DeriveSeed(seed, {static_cast<std::uint64_t>(e)}));
    rng.Shuffle(order.begin(), order.end());
    double sum = 0.0;
    std::size_t batches = 0;
    std::vector<SftExample> batch;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) {
        batch.push_back(examples[order[i]]);
      }
      sum += SftStep(params, opt, batch, lr);
      ++batches;
    }
    epoch_nll.push_back(sum / static_cast<double>(batches));
  }
  return epoch_nll;
}

PromptCase ToPromptCase(const CaseSpec& c) {
  return PromptCase{c.case_id, c.PromptTokens(Vocab()), c.gold_code.normalized_text};
}

EvalOutput Evaluate(const PolicyParams& params, const std::vector<CaseSpec>& cases,
                    const ExperimentConfig& cfg, std::uint64_t seed) {
  const Vocabulary& v = Vocab();
  EvalOutput out;
  out.samples.resize(cases.size());
  std::vector<std::size_t> tokens(cases.size(), 0);
  const SamplingOptions opts{cfg.eval.temperature, cfg.eval.top_p, cfg.eval.max_len, v.eos()};
  ParallelFor(cases.size(), cfg.train.num_threads, [&](std::size_t i) {
    const Tokens prompt = cases[i].PromptTokens(v);
    std::vector<std::string> completions;
    for (int j = 0; j < cfg.eval.k; ++j) {
      Rng rng(DeriveSeed(seed, {i, static_cast<std::uint64_t>(j)}));
      const Tokens completion = SampleCompletion(params, prompt, opts, rng);
      tokens[i] += completion.size();
      completions.push_back(v.Detokenize(completion));
    }
    out.samples[i] = MakeEvalSample(cases[i].case_id, cases[i].gold_code.normalized_text,
                                    std::move(completions), cfg.task.catalog);
  });
  out.report = ScoreAll(out.samples, cfg.task.catalog);
  const double n = static_cast<double>(cases.size()) * cfg.eval.k;
  out.mean_completion_len =
      n > 0 ? static_cast<double>(std::accumulate(tokens.begin(), tokens.end(), std::size_t{0})) / n
            : 0.0;
  return out;
}

DifficultyLabels LabelByRollout(const PolicyParams& params, const PolicyParams* ref,
                                const std::vector<CaseSpec>& cases,
                                const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainConfig tc = cfg.train;
  tc.resample = ResampleMode::kOff;
  const GroupScorer scorer = MakeScorer(cfg);
  const ParametricPolicy policy(params, Vocab().eos());
  std::optional<ParametricPolicy> ref_policy;
  if (ref) ref_policy.emplace(*ref, Vocab().eos());
  DifficultyLabels labels(cases.size());
  ParallelFor(cases.size(), cfg.train.num_threads, [&](std::size_t i) {
    const SampledGroup g = ObtainGroup(policy, ref_policy ? &*ref_policy : nullptr,
                                       ToPromptCase(cases[i]), tc, scorer, DeriveSeed(seed, {i}));
    labels[i] = {cases[i].case_id, ClassifyDifficulty(g, tc.reward.scheme)};
  });
  return labels;
}

void WriteLabelsJsonl(const fs::path& path, const DifficultyLabels& labels) {
  auto out = OpenOut(path);
  for (const auto& [id, label] : labels) {
    out << json{{"case_id", id}, {"label", ToString(label)}}.dump() << '\n';
  }
}

DifficultyLabels ReadLabelsJsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open labels file '" + path.string() + "'");
  DifficultyLabels out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      std::string id = j.at("case_id").get<std::string>();
      if (!seen.insert(id).second) throw ConfigError("case '" + id + "' is labeled twice");
      out.emplace_back(std::move(id), ParseDifficultyLabel(j.at("label").get<std::string>()));
    } catch (const std::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::optional<LengthDiagnostic> DiagnoseLength(const std::vector<StepStats>& steps) {
  if (steps.size() < 2) return std::nullopt;
  LengthDiagnostic d;
  d.window = std::max<std::size_t>(1, std::min<std::size_t>(10, steps.size() / 2));
  for (std::size_t i = 0; i < d.window; ++i) {
    d.early_len += steps[i].mean_completion_len;
    d.early_accuracy += steps[i].accuracy;
    d.late_len += steps[steps.size() - 1 - i].mean_completion_len;
    d.late_accuracy += steps[steps.size() - 1 - i].accuracy;
  }
  const double w = static_cast<double>(d.window);
  d.early_len /= w;
  d.late_len /= w;
  d.early_accuracy /= w;
  d.late_accuracy /= w;
  d.accuracy_rose = d.late_accuracy > d.early_accuracy;
  d.length_contracted = d.late_len < d.early_len;
  return d;
}

RunSummary RunExperiment(const ExperimentConfig& cfg) {
  cfg.Validate();
  PrepareOutDir(cfg);
  const fs::path out_dir(cfg.out_dir);
  MetricsLog log(out_dir / "metrics.jsonl");
  const Dataset ds = BuildDataset(cfg);
  log.Write(json{{"type", "data"},
                 {"sft_cases", ds.sft.size()},
                 {"rl_cases", ds.rl.size()},
                 {"eval_cases", ds.eval.size()}});

  RunSummary summary;
  summary.sft_examples = ds.sft.size();
  summary.rl_prompts = ds.rl.size();

  PolicyParams params = InitialParams(cfg);
  const auto examples = BuildSftExamples(ds.sft, cfg, DeriveSeed(cfg.seed, {stream::kPatterns}));
  RunSftLogged(params, examples, cfg, cfg.sft.learning_rate, cfg.sft.epochs,
               DeriveSeed(cfg.seed, {stream::kSft}), log, "cold_start");
  SaveCheckpoint(params, out_dir / "sft.ckpt");

  const std::uint64_t eval_seed = DeriveSeed(cfg.seed, {stream::kEval});
  const EvalOutput sft_eval = Evaluate(params, ds.eval, cfg, eval_seed);
  log.Write(EvalRecord("sft", 0, sft_eval, cfg));
  WriteEvalSummary(out_dir / "sft_eval_summary.csv", sft_eval, cfg.eval.k);
  summary.sft_report = sft_eval.report;

  const int T = cfg.train.total_steps;
  if (ds.rl.empty() || T == 0) {
    log.Write(json{{"type", "grpo_skipped"},
                   {"reason", ds.rl.empty() ? "no RL cases at this SFT ratio" : "zero GRPO steps"}});
    SaveCheckpoint(params, out_dir / "final.ckpt");
    log.Write(EvalRecord("final", 0, sft_eval, cfg));
    WriteEvalCases(out_dir / "eval_cases.jsonl", sft_eval);
    WriteEvalSummary(out_dir / "eval_summary.csv", sft_eval, cfg.eval.k);
    summary.final_report = sft_eval.report;
    return summary;
  }
  summary.grpo_ran = true;

  const PolicyParams ref = params.CloneFrozen();
  const std::uint64_t run_seed = DeriveSeed(cfg.seed, {stream::kGrpo});
  const GroupScorer scorer = MakeScorer(cfg);

  // Prompt phases: one pool unless the curriculum asks for two.
  std::vector<std::vector<PromptCase>> phases;
  if (cfg.curriculum.mode == CurriculumMode::kOff) {
    phases.push_back(AllPrompts(ds.rl));
  } else {
    DifficultyLabels labels = cfg.curriculum.labels_path.empty()
                                  ? BaseRunLabels(params, cfg, ds.rl, &log)
                                  : ReadLabelsJsonl(cfg.curriculum.labels_path);
    const CurriculumSchedule schedule = CurriculumFilter(labels, cfg.curriculum.mode);
    json sizes = json::array();
    for (const auto& ids : schedule.phases) {
      sizes.push_back(ids.size());
      if (ids.empty()) {
        throw ConfigError("curriculum mode " + std::string(ToString(cfg.curriculum.mode)) +
                          " leaves no RL cases");
      }
      phases.push_back(SelectPrompts(ds.rl, ids));
    }
    log.Write(json{{"type", "curriculum"},
                   {"mode", ToString(cfg.curriculum.mode)},
                   {"labels", CountsJson(CountLabels(labels))},
                   {"phase_sizes", sizes}});
  }
  std::vector<PromptStream> streams;
  for (std::size_t p = 0; p < phases.size(); ++p) {
    streams.emplace_back(std::move(phases[p]), DeriveSeed(run_seed, {stream::kPromptOrder, p}));
  }
  const int phase_switch = (T + 1) / 2;

  const std::vector<int> boundaries = StageBoundaries(T, cfg.staging.n_stages);
  std::size_t stage = 0;
  Optimizer opt(cfg.optimizer, params.size());
  for (int t = 0; t < T; ++t) {
    PromptStream& ps = streams.size() > 1 && t >= phase_switch ? streams[1] : streams[0];
    const auto batch = ps.Next(cfg.train.prompts_per_step);
    const StepResult r = TrainStep(params, opt, &ref, batch, cfg.train, scorer, t, run_seed);
    if (!params.AllFinite()) throw Error("non-finite parameters after GRPO step " + std::to_string(t));
    summary.steps.push_back(r.stats);
    log.Write(StepRecord("step", r.stats, cfg.wall_time));

    if (cfg.eval.every > 0 && (t + 1) % cfg.eval.every == 0 && t + 1 < T) {
      const std::size_t n = std::min(ds.eval.size(), static_cast<std::size_t>(cfg.eval.periodic_cases));
      const std::vector<CaseSpec> subset(ds.eval.begin(), ds.eval.begin() + static_cast<std::ptrdiff_t>(n));
      log.Write(EvalRecord("periodic", t + 1, Evaluate(params, subset, cfg, eval_seed), cfg));
    }

    if (cfg.staging.n_stages > 1 && t + 1 == boundaries[stage]) {
      const bool last = stage + 1 == boundaries.size();
      json marker{{"type", "stage_boundary"}, {"stage", stage + 1}, {"step", t + 1}};
      if (!last && cfg.staging.sft_on_hard) {
        const DifficultyLabels labels =
            LabelByRollout(params, nullptr, ds.rl, cfg, DeriveSeed(cfg.seed, {stream::kLabeling, stage + 1}));
        std::vector<CaseSpec> hard;
        for (std::size_t i = 0; i < labels.size(); ++i) {
          if (labels[i].second == DifficultyLabel::kHard) hard.push_back(ds.rl[i]);
        }
        const auto hard_examples =
            BuildSftExamples(hard, cfg, DeriveSeed(cfg.seed, {stream::kStage, stage, 0}));
        const auto nll = RunSftLogged(params, hard_examples, cfg, cfg.staging.sft_learning_rate,
                                      cfg.staging.sft_epochs,
                                      DeriveSeed(cfg.seed, {stream::kStage, stage, 1}), log, "staged");
        marker["labels"] = CountsJson(CountLabels(labels));
        marker["sft_examples"] = hard_examples.size();
        marker["sft_epochs"] = nll.size();
      }
      marker["sft_applied"] = !last && cfg.staging.sft_on_hard;
      log.Write(marker);
      ++stage;
    }
  }

  SaveCheckpoint(params, out_dir / "final.ckpt");
  const EvalOutput final_eval = Evaluate(params, ds.eval, cfg, eval_seed);
  log.Write(EvalRecord("final", T, final_eval, cfg));
  WriteEvalCases(out_dir / "eval_cases.jsonl", final_eval);
  WriteEvalSummary(out_dir / "eval_summary.csv", final_eval, cfg.eval.k);
  summary.final_report = final_eval.report;

  summary.length = DiagnoseLength(summary.steps);
  if (summary.length) {
    const auto& d = *summary.length;
    log.Write(json{{"type", "length_diagnostic"},
                   {"window", d.window},
                   {"early_len", d.early_len},
                   {"late_len", d.late_len},
                   {"early_accuracy", d.early_accuracy},
                   {"late_accuracy", d.late_accuracy},
                   {"accuracy_rose", d.accuracy_rose},
                   {"length_contracted", d.length_contracted}});
  }
  return summary;
}

PolicyParams RunSftOnly(const ExperimentConfig& cfg) {
  cfg.Validate();
  PrepareOutDir(cfg);
  const fs::path out_dir(cfg.out_dir);
  MetricsLog log(out_dir / "metrics.jsonl");
  const Dataset ds = BuildDataset(cfg);
  PolicyParams params = InitialParams(cfg);
  const auto examples = BuildSftExamples(ds.sft, cfg, DeriveSeed(cfg.seed, {stream::kPatterns}));
  RunSftLogged(params, examples, cfg, cfg.sft.learning_rate, cfg.sft.epochs,
               DeriveSeed(cfg.seed, {stream::kSft}), log, "cold_start");
  SaveCheckpoint(params, out_dir / "sft.ckpt");
  return params;
}

EvalOutput EvaluateCheckpoint(const ExperimentConfig& cfg, const fs::path& ckpt) {
  cfg.Validate();
  if (!fs::exists(ckpt)) throw ConfigError("checkpoint not found: '" + ckpt.string() + "'");
  const PolicyParams params = LoadCheckpoint(ckpt);
  if (params.arch().vocab_size != static_cast<int>(Vocab().size())) {
    throw ConfigError("checkpoint '" + ckpt.string() + "' was trained on a different vocabulary");
  }
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  const Dataset ds = BuildDataset(cfg);
  EvalOutput e = Evaluate(params, ds.eval, cfg, DeriveSeed(cfg.seed, {stream::kEval}));
  WriteEvalCases(fs::path(cfg.out_dir) / "eval_cases.jsonl", e);
  WriteEvalSummary(fs::path(cfg.out_dir) / "eval_summary.csv", e, cfg.eval.k);
  return e;
}

DifficultyLabels RunFilter(const ExperimentConfig& cfg, const std::optional<fs::path>& init) {
  cfg.Validate();
  PrepareOutDir(cfg);
  const fs::path out_dir(cfg.out_dir);
  MetricsLog log(out_dir / "metrics.jsonl");
  const Dataset ds = BuildDataset(cfg);
  PolicyParams start = InitialParams(cfg);
  if (init) {
    if (!fs::exists(*init)) throw ConfigError("checkpoint not found: '" + init->string() + "'");
    start = LoadCheckpoint(*init);
  } else {
    const auto examples = BuildSftExamples(ds.sft, cfg, DeriveSeed(cfg.seed, {stream::kPatterns}));
    RunSftLogged(start, examples, cfg, cfg.sft.learning_rate, cfg.sft.epochs,
                 DeriveSeed(cfg.seed, {stream::kSft}), log, "cold_start");
  }
  if (ds.rl.empty()) throw ConfigError("filter needs RL cases (sft.ratio leaves none)");
  const DifficultyLabels labels = BaseRunLabels(start, cfg, ds.rl, &log);
  WriteLabelsJsonl(out_dir / "labels.jsonl", labels);

  const CurriculumMode mode =
      cfg.curriculum.mode == CurriculumMode::kOff ? CurriculumMode::kDropBoth : cfg.curriculum.mode;
  const CurriculumSchedule schedule = CurriculumFilter(labels, mode);
  auto out = OpenOut(out_dir / "schedule.json");
  out << json{{"mode", ToString(mode)},
              {"labels", CountsJson(CountLabels(labels))},
              {"phases", schedule.phases}}
             .dump()
      << '\n';
  return labels;
}

std::vector<SweepRow> RunSweep(const ExperimentConfig& cfg, const std::vector<double>& ratios) {
  ParseRatioList([&] {
    std::string s;
    for (std::size_t i = 0; i < ratios.size(); ++i) s += (i ? "," : "") + FormatDouble(ratios[i]);
    return s;
  }());
  const fs::path out_dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory '" + cfg.out_dir + "': " + ec.message());

  std::vector<SweepRow> rows;
  std::ofstream errors;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    ExperimentConfig run = cfg;
    run.sft.ratio = ratios[i];
    run.seed = DeriveSeed(cfg.seed, {stream::kSweep, i});
    run.data.seed = cfg.DataSeed();
    run.out_dir = (out_dir / ("ratio_" + FormatDouble(ratios[i]))).string();
    SweepRow row;
    row.ratio = ratios[i];
    row.sft_examples = SftShare(ratios[i], static_cast<std::size_t>(cfg.data.train_size));
    try {
      const RunSummary s = RunExperiment(run);
      row.sft_examples = s.sft_examples;
      row.pass1_sft = s.sft_report.drg.pass_at_1;
      row.pass1_final = s.final_report.drg.pass_at_1;
      row.pass8 = s.final_report.drg.pass_at_k;
      row.maj8 = s.final_report.drg.maj_at_k;
    } catch (const std::exception& e) {
      row.pass1_sft = row.pass1_final = row.pass8 = row.maj8 = nan;
      row.error = e.what();
      if (!errors.is_open()) errors = OpenOut(out_dir / "sweep_errors.log");
      errors << "ratio " << FormatDouble(ratios[i]) << ": " << e.what() << '\n';
    }
    rows.push_back(row);
  }

  auto csv = OpenOut(out_dir / "sweep.csv");
  csv << kSweepHeader << '\n';
  for (const auto& r : rows) {
    csv << FormatDouble(r.ratio) << ',' << r.sft_examples << ',' << FormatDouble(r.pass1_sft) << ','
        << FormatDouble(r.pass1_final) << ',' << FormatDouble(r.pass8) << ','
        << FormatDouble(r.maj8) << '\n';
  }
  return rows;
}

}  // namespace drgrl
