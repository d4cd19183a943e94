#include "drgrl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "drgrl/errors.hpp"

namespace drgrl {
namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> Split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(Trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void BadValue(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("bad value '" + std::string(value) + "' for " + std::string(key) +
                    " (expected " + std::string(want) + ")");
}

double ToDouble(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) BadValue(key, v, "a number");
  return out;
}

long long ToInt(std::string_view key, std::string_view v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) BadValue(key, v, "an integer");
  return out;
}

int ToInt32(std::string_view key, std::string_view v) {
  const long long x = ToInt(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    BadValue(key, v, "a 32-bit integer");
  }
  return static_cast<int>(x);
}

std::uint64_t ToU64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    BadValue(key, v, "an unsigned integer");
  }
  return out;
}

bool ToBool(std::string_view key, std::string_view v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  BadValue(key, v, "on/off");
}

std::string FromBool(bool b) { return b ? "on" : "off"; }

std::string JoinDoubles(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += FormatDouble(xs[i]);
  }
  return out;
}

std::vector<double> ToDoubleList(std::string_view key, std::string_view v) {
  std::vector<double> out;
  for (auto part : Split(v, ',')) out.push_back(ToDouble(key, part));
  return out;
}

std::string JoinBases(const std::vector<std::string>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += " | ";
    out += xs[i];
  }
  return out;
}

std::vector<std::string> ToBases(std::string_view v) {
  std::vector<std::string> out;
  if (Trim(v).empty()) return out;
  for (auto part : Split(v, '|')) out.push_back(NormalizeText(part));
  return out;
}

// Wraps an enum parser so its error names the key.
template <typename Parse>
auto ParseEnum(std::string_view key, std::string_view v, Parse parse) {
  try {
    return parse(v);
  } catch (const Error&) {
    BadValue(key, v, "a known option");
  }
}

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define DRGRL_INT(k, member)                                                        \
  Field {                                                                           \
    k, [](const ExperimentConfig& c) { return std::to_string(c.member); },          \
        [](ExperimentConfig& c, std::string_view v) { c.member = ToInt32(k, v); } \
  }
#define DRGRL_DOUBLE(k, member)                                                      \
  Field {                                                                            \
    k, [](const ExperimentConfig& c) { return FormatDouble(c.member); },             \
        [](ExperimentConfig& c, std::string_view v) { c.member = ToDouble(k, v); } \
  }
#define DRGRL_BOOL(k, member)                                                      \
  Field {                                                                          \
    k, [](const ExperimentConfig& c) { return FromBool(c.member); },               \
        [](ExperimentConfig& c, std::string_view v) { c.member = ToBool(k, v); } \
  }
#define DRGRL_STRING(k, member)                                                         \
  Field {                                                                               \
    k, [](const ExperimentConfig& c) { return c.member; },                              \
        [](ExperimentConfig& c, std::string_view v) { c.member = std::string(v); } \
  }
#define DRGRL_ENUM(k, member, parser)                                                   \
  Field {                                                                               \
    k, [](const ExperimentConfig& c) { return std::string(ToString(c.member)); },       \
        [](ExperimentConfig& c, std::string_view v) { c.member = ParseEnum(k, v, parser); } \
  }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f = {
        Field{"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
              [](ExperimentConfig& c, std::string_view v) { c.seed = ToU64("seed", v); }},
        DRGRL_STRING("out_dir", out_dir),

        DRGRL_STRING("task.catalog_path", catalog_path),
        DRGRL_INT("task.condition_vocab", task.condition_vocab),
        DRGRL_INT("task.procedure_vocab", task.procedure_vocab),
        DRGRL_INT("task.note_len_min", task.note_len_min),
        DRGRL_INT("task.note_len_max", task.note_len_max),
        DRGRL_INT("task.secondaries_min", task.secondaries_min),
        DRGRL_INT("task.secondaries_max", task.secondaries_max),
        DRGRL_DOUBLE("task.prior_mcc", task.prior_mcc),
        DRGRL_DOUBLE("task.prior_cc", task.prior_cc),
        DRGRL_DOUBLE("task.prior_neither", task.prior_neither),
        DRGRL_INT("task.distractors_min", task.distractors_min),
        DRGRL_INT("task.distractors_max", task.distractors_max),
        DRGRL_BOOL("task.procedures", task.procedures_enabled),
        DRGRL_DOUBLE("task.procedure_prob", task.procedure_prob),
        Field{"task.medical_bases",
              [](const ExperimentConfig& c) { return JoinBases(c.task.medical_bases); },
              [](ExperimentConfig& c, std::string_view v) { c.task.medical_bases = ToBases(v); }},
        Field{"task.surgical_bases",
              [](const ExperimentConfig& c) { return JoinBases(c.task.surgical_bases); },
              [](ExperimentConfig& c, std::string_view v) { c.task.surgical_bases = ToBases(v); }},

        DRGRL_INT("data.train_size", data.train_size),
        DRGRL_INT("data.eval_size", data.eval_size),
        DRGRL_STRING("data.cases_path", data.cases_path),
        Field{"data.seed",
              [](const ExperimentConfig& c) {
                return c.data.seed ? std::to_string(*c.data.seed) : std::string("auto");
              },
              [](ExperimentConfig& c, std::string_view v) {
                if (v == "auto" || v.empty()) {
                  c.data.seed.reset();
                } else {
                  c.data.seed = ToU64("data.seed", v);
                }
              }},

        DRGRL_INT("policy.context_window", arch.context_window),
        DRGRL_INT("policy.hidden_width", arch.hidden_width),
        DRGRL_ENUM("policy.prompt_features", arch.prompt_features, ParsePromptFeatures),
        DRGRL_DOUBLE("policy.init_scale", init_scale),

        DRGRL_ENUM("optimizer.kind", optimizer.kind, ParseOptimizerKind),
        DRGRL_DOUBLE("optimizer.beta1", optimizer.beta1),
        DRGRL_DOUBLE("optimizer.beta2", optimizer.beta2),
        DRGRL_DOUBLE("optimizer.epsilon", optimizer.epsilon),
        DRGRL_DOUBLE("optimizer.weight_decay", optimizer.weight_decay),

        DRGRL_DOUBLE("sft.ratio", sft.ratio),
        DRGRL_DOUBLE("sft.learning_rate", sft.learning_rate),
        DRGRL_INT("sft.epochs", sft.epochs),
        DRGRL_INT("sft.batch_size", sft.batch_size),
        DRGRL_DOUBLE("sft.pattern.answer_first", sft.patterns.answer_first),
        DRGRL_DOUBLE("sft.pattern.cot_first", sft.patterns.cot_first),
        DRGRL_DOUBLE("sft.pattern.differential", sft.patterns.differential),

        DRGRL_INT("grpo.group_size", train.group_size),
        DRGRL_INT("grpo.prompts_per_step", train.prompts_per_step),
        DRGRL_DOUBLE("grpo.learning_rate", train.learning_rate),
        DRGRL_DOUBLE("grpo.warmup_ratio", train.warmup_ratio),
        DRGRL_INT("grpo.total_steps", train.total_steps),
        DRGRL_DOUBLE("grpo.temperature", train.rollout_temperature),
        DRGRL_INT("grpo.max_completion_len", train.max_completion_len),
        DRGRL_ENUM("grpo.resample", train.resample, ParseResampleMode),
        DRGRL_INT("grpo.resample_max", train.resample_max),
        Field{"grpo.resample_temperatures",
              [](const ExperimentConfig& c) { return JoinDoubles(c.train.resample_temperatures); },
              [](ExperimentConfig& c, std::string_view v) {
                c.train.resample_temperatures = ToDoubleList("grpo.resample_temperatures", v);
              }},
        DRGRL_ENUM("grpo.advantage_variant", train.advantage_variant, ParseAdvantageVariant),
        DRGRL_ENUM("grpo.std_kind", train.std_kind, ParseStdKind),
        DRGRL_DOUBLE("grpo.advantage_epsilon", train.advantage_epsilon),
        DRGRL_ENUM("grpo.loss_variant", train.loss_variant, ParseLossVariant),
        DRGRL_INT("grpo.max_tokens_norm", train.max_tokens_norm),
        DRGRL_ENUM("grpo.kl_schedule", train.kl.kind, ParseKlScheduleKind),
        DRGRL_DOUBLE("grpo.kl_beta0", train.kl.beta0),
        DRGRL_INT("grpo.num_threads", train.num_threads),

        DRGRL_ENUM("reward.scheme", train.reward.scheme, ParseRewardScheme),
        DRGRL_BOOL("reward.cot_first_penalty", train.reward.cot_first_penalty),
        DRGRL_INT("reward.cot_window", train.reward.cot_window),

        DRGRL_INT("eval.k", eval.k),
        DRGRL_DOUBLE("eval.temperature", eval.temperature),
        DRGRL_DOUBLE("eval.top_p", eval.top_p),
        DRGRL_INT("eval.max_len", eval.max_len),
        DRGRL_INT("eval.every", eval.every),
        DRGRL_INT("eval.periodic_cases", eval.periodic_cases),

        DRGRL_ENUM("curriculum.mode", curriculum.mode, ParseCurriculumMode),
        DRGRL_STRING("curriculum.labels_path", curriculum.labels_path),

        DRGRL_INT("staging.n_stages", staging.n_stages),
        DRGRL_BOOL("staging.sft_on_hard", staging.sft_on_hard),
        DRGRL_INT("staging.sft_epochs", staging.sft_epochs),
        DRGRL_DOUBLE("staging.sft_learning_rate", staging.sft_learning_rate),

        Field{"sweep.ratios",
              [](const ExperimentConfig& c) { return JoinDoubles(c.sweep_ratios); },
              [](ExperimentConfig& c, std::string_view v) { c.sweep_ratios = ParseRatioList(v); }},
        DRGRL_BOOL("output.wall_time", wall_time),
    };
    std::sort(f.begin(), f.end(), [](const Field& a, const Field& b) { return a.key < b.key; });
    return f;
  }();
  return fields;
}

#undef DRGRL_INT
#undef DRGRL_DOUBLE
#undef DRGRL_BOOL
#undef DRGRL_STRING
#undef DRGRL_ENUM

}  // namespace

std::string_view ToString(Preset p) { return p == Preset::kDesk ? "desk" : "paper"; }

Preset ParsePreset(std::string_view s) {
  if (s == "desk") return Preset::kDesk;
  if (s == "paper") return Preset::kPaper;
  throw ConfigError("unknown preset '" + std::string(s) + "' (expected desk or paper)");
}

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<double> ParseRatioList(std::string_view text) {
  std::vector<double> out = ToDoubleList("sweep.ratios", text);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0.0 && out[i] <= 1.0)) {
      throw ConfigError("sweep ratio " + FormatDouble(out[i]) + " is outside (0, 1]");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (out[j] == out[i]) throw ConfigError("duplicated sweep ratio " + FormatDouble(out[i]));
    }
  }
  return out;
}

ExperimentConfig DefaultConfig(Preset preset) {
  ExperimentConfig c;
  c.preset = preset;
  c.arch.vocab_size = static_cast<int>(Vocabulary::Default().size());
  c.arch.context_window = 8;
  c.arch.hidden_width = 0;
  c.arch.prompt_features = PromptFeatures::kBigram;

  c.train.group_size = 8;
  c.train.prompts_per_step = 16;
  c.train.total_steps = 100;
  c.train.learning_rate = 0.02;
  c.train.warmup_ratio = 0.1;
  c.train.rollout_temperature = 1.0;
  c.train.max_completion_len = 64;
  c.train.max_tokens_norm = 64;
  c.train.kl = {KlScheduleKind::kConstant, 0.04};

  if (preset == Preset::kPaper) {
    // Mirrors the reported pipeline shape: 64 prompts x 8 completions per
    // step, one pass over the RL share, longer SFT, constant KL 0.04.
    c.data.train_size = 8192;
    c.data.eval_size = 1000;
    c.train.prompts_per_step = 64;
    c.train.total_steps = 64;
    c.sft.epochs = 9;
    c.staging.sft_epochs = 3;
    c.eval.every = 16;
    c.eval.periodic_cases = 200;
  }
  return c;
}

void ExperimentConfig::Validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(sft.ratio)) throw ConfigError("sft.ratio must be in [0, 1]");
  if (data.train_size < 1) throw ConfigError("data.train_size must be >= 1");
  if (data.eval_size < 1) throw ConfigError("data.eval_size must be >= 1");
  if (sft.epochs < 0) throw ConfigError("sft.epochs must be >= 0");
  if (sft.batch_size < 1) throw ConfigError("sft.batch_size must be >= 1");
  if (!(sft.learning_rate >= 0.0)) throw ConfigError("sft.learning_rate must be >= 0");
  const auto& pm = sft.patterns;
  if (pm.answer_first < 0 || pm.cot_first < 0 || pm.differential < 0 ||
      pm.answer_first + pm.cot_first + pm.differential <= 0) {
    throw ConfigError("sft.pattern weights must be >= 0 with a positive sum");
  }
  if (eval.k < 1) throw ConfigError("eval.k must be >= 1");
  if (!(eval.temperature > 0.0)) throw ConfigError("eval.temperature must be > 0");
  if (!(eval.top_p > 0.0 && eval.top_p <= 1.0)) throw ConfigError("eval.top_p must be in (0, 1]");
  if (eval.max_len < 1) throw ConfigError("eval.max_len must be >= 1");
  if (eval.every < 0 || eval.periodic_cases < 1) {
    throw ConfigError("eval.every must be >= 0 and eval.periodic_cases >= 1");
  }
  if (staging.n_stages < 1) throw ConfigError("staging.n_stages must be >= 1");
  if (staging.sft_epochs < 0) throw ConfigError("staging.sft_epochs must be >= 0");
  if (!(init_scale >= 0.0)) throw ConfigError("policy.init_scale must be >= 0");
  if (arch.vocab_size != static_cast<int>(Vocabulary::Default().size())) {
    throw ConfigError("policy vocabulary size does not match the task vocabulary");
  }
  ParseRatioList(JoinDoubles(sweep_ratios));
  arch.Validate();
  train.Validate();
  task.Validate();
}

void SetConfigValue(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  key = Trim(key);
  value = Trim(value);
  if (key == "preset") {
    cfg = DefaultConfig(ParsePreset(value));
    return;
  }
  const auto& fields = Fields();
  const auto it = std::lower_bound(fields.begin(), fields.end(), key,
                                   [](const Field& f, std::string_view k) { return f.key < k; });
  if (it == fields.end() || it->key != key) {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
  it->set(cfg, value);
}

void ApplyConfigText(ExperimentConfig& cfg, std::string_view text, std::string_view source) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = Trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      try {
        if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'");
        SetConfigValue(cfg, line.substr(0, eq), line.substr(eq + 1));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
}

void ApplyConfigFile(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  ApplyConfigText(cfg, buf.str(), path.string());
}

std::string ConfigSnapshot(const ExperimentConfig& cfg) {
  std::string out = "preset = " + std::string(ToString(cfg.preset)) + "\n";
  for (const auto& f : Fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> keys = {"preset"};
  for (const auto& f : Fields()) keys.push_back(f.key);
  return keys;
}

void ResolveCatalog(ExperimentConfig& cfg) {
  if (cfg.catalog_path.empty()) {
    cfg.task.catalog = cfg.task.procedures_enabled ? MiniCatalogWithProcedures() : MiniCatalog();
    return;
  }
  const std::filesystem::path path(cfg.catalog_path);
  if (!std::filesystem::exists(path)) {
    throw ConfigError("catalog file not found: '" + cfg.catalog_path + "'");
  }
  try {
    cfg.task.catalog = Catalog::LoadFile(path);
  } catch (const Error& e) {
    throw ConfigError("catalog file '" + cfg.catalog_path + "': " + e.what());
  }
}

}  // namespace drgrl
