#include "drgrl/policy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "drgrl/errors.hpp"
#include "drgrl/optimizer.hpp"

namespace drgrl {
namespace {

void CheckTokens(std::span<const TokenId> tokens, int vocab_size) {
  for (TokenId t : tokens) {
    if (t < 0 || t >= vocab_size) {
      throw TokenOutOfRangeError("token id " + std::to_string(t) +
                                 " outside vocabulary of size " +
                                 std::to_string(vocab_size));
    }
  }
}

// Numerically stable log-softmax of logits / temperature, in place.
void LogSoftmax(std::vector<double>& z, double temperature) {
  double m = -std::numeric_limits<double>::infinity();
  for (double& v : z) {
    v /= temperature;
    m = std::max(m, v);
  }
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  for (double& v : z) v -= lse;
}

// Forward/backward machinery shared by every entry point.
class Evaluator {
 public:
  Evaluator(const PolicyParams& p, std::span<const TokenId> prompt)
      : a_(p.arch()), theta_(p.theta()) {
    if (prompt.empty()) throw Error("policy context must include a non-empty prompt");
    CheckTokens(prompt, a_.vocab_size);
    bag_ = EncodePrompt(a_, prompt);
    ctx_.assign(prompt.begin(), prompt.end());
    prompt_len_ = ctx_.size();
    const auto V = static_cast<std::size_t>(a_.vocab_size);
    const auto H = static_cast<std::size_t>(a_.hidden_width);
    z_.resize(V);
    pre_.resize(H);
    h_.resize(H);
  }

  void SetCompletion(std::span<const TokenId> completion) {
    CheckTokens(completion, a_.vocab_size);
    ctx_.resize(prompt_len_);
    ctx_.insert(ctx_.end(), completion.begin(), completion.end());
  }

  void Push(TokenId t) { ctx_.push_back(t); }

  // Logits for the token following ctx_[0, end).
  const std::vector<double>& Forward(std::size_t end) {
    CollectFeatures(end);
    const auto V = static_cast<std::size_t>(a_.vocab_size);
    const std::size_t table = a_.FeatureTableOffset();
    if (a_.hidden_width == 0) {
      for (std::size_t v = 0; v < V; ++v) z_[v] = theta_[v];
      for (const auto& [f, c] : active_) {
        const double* row = theta_.data() + table + f * V;
        for (std::size_t v = 0; v < V; ++v) z_[v] += c * row[v];
      }
      return z_;
    }
    const auto H = static_cast<std::size_t>(a_.hidden_width);
    const double* b1 = theta_.data() + a_.HiddenBiasOffset();
    for (std::size_t i = 0; i < H; ++i) pre_[i] = b1[i];
    for (const auto& [f, c] : active_) {
      const double* row = theta_.data() + table + f * H;
      for (std::size_t i = 0; i < H; ++i) pre_[i] += c * row[i];
    }
    for (std::size_t i = 0; i < H; ++i) h_[i] = std::tanh(pre_[i]);
    const double* w2 = theta_.data() + a_.ReadoutWeightsOffset();
    for (std::size_t v = 0; v < V; ++v) {
      double acc = theta_[v];
      const double* row = w2 + v * H;
      for (std::size_t i = 0; i < H; ++i) acc += row[i] * h_[i];
      z_[v] = acc;
    }
    return z_;
  }

  // Backpropagates dL/dz for the most recent Forward() into grad.
  void Backward(std::span<const double> dz, std::span<double> grad) {
    const auto V = static_cast<std::size_t>(a_.vocab_size);
    const std::size_t table = a_.FeatureTableOffset();
    for (std::size_t v = 0; v < V; ++v) grad[v] += dz[v];
    if (a_.hidden_width == 0) {
      for (const auto& [f, c] : active_) {
        double* row = grad.data() + table + f * V;
        for (std::size_t v = 0; v < V; ++v) row[v] += c * dz[v];
      }
      return;
    }
    const auto H = static_cast<std::size_t>(a_.hidden_width);
    const double* w2 = theta_.data() + a_.ReadoutWeightsOffset();
    double* gw2 = grad.data() + a_.ReadoutWeightsOffset();
    gpre_.assign(H, 0.0);
    for (std::size_t v = 0; v < V; ++v) {
      if (dz[v] == 0.0) continue;
      const double* row = w2 + v * H;
      double* grow = gw2 + v * H;
      for (std::size_t i = 0; i < H; ++i) {
        grow[i] += dz[v] * h_[i];
        gpre_[i] += dz[v] * row[i];
      }
    }
    for (std::size_t i = 0; i < H; ++i) gpre_[i] *= 1.0 - h_[i] * h_[i];
    double* gb1 = grad.data() + a_.HiddenBiasOffset();
    for (std::size_t i = 0; i < H; ++i) gb1[i] += gpre_[i];
    for (const auto& [f, c] : active_) {
      double* row = grad.data() + table + f * H;
      for (std::size_t i = 0; i < H; ++i) row[i] += c * gpre_[i];
    }
  }

  std::size_t prompt_len() const { return prompt_len_; }
  std::size_t ctx_len() const { return ctx_.size(); }
  TokenId ctx(std::size_t i) const { return ctx_[i]; }

 private:
  void CollectFeatures(std::size_t end) {
    active_.clear();
    const auto V = static_cast<std::size_t>(a_.vocab_size);
    const auto k = static_cast<std::size_t>(a_.context_window);
    for (std::size_t j = 0; j < k && j < end; ++j) {
      const auto tok = static_cast<std::size_t>(ctx_[end - 1 - j]);
      active_.emplace_back(j * V + tok, 1.0);
    }
    active_.insert(active_.end(), bag_.begin(), bag_.end());
  }

  const PolicyArch& a_;
  std::span<const double> theta_;
  SparseFeatures bag_;
  SparseFeatures active_;
  std::vector<TokenId> ctx_;
  std::size_t prompt_len_ = 0;
  std::vector<double> z_, pre_, h_, gpre_;
};

}  // namespace

std::string_view ToString(PromptFeatures f) {
  switch (f) {
    case PromptFeatures::kNone: return "none";
    case PromptFeatures::kUnigram: return "unigram";
    case PromptFeatures::kBigram: return "bigram";
  }
  return "?";
}

PromptFeatures ParsePromptFeatures(std::string_view name) {
  if (name == "none") return PromptFeatures::kNone;
  if (name == "unigram") return PromptFeatures::kUnigram;
  if (name == "bigram") return PromptFeatures::kBigram;
  throw ConfigError("unknown prompt feature mode '" + std::string(name) + "'");
}

std::size_t PolicyArch::NumWindowFeatures() const {
  return static_cast<std::size_t>(context_window) * static_cast<std::size_t>(vocab_size);
}

std::size_t PolicyArch::NumBagFeatures() const {
  const auto V = static_cast<std::size_t>(vocab_size);
  switch (prompt_features) {
    case PromptFeatures::kNone: return 0;
    case PromptFeatures::kUnigram: return V;
    case PromptFeatures::kBigram: return V * V;
  }
  return 0;
}

std::size_t PolicyArch::RowWidth() const {
  return hidden_width == 0 ? static_cast<std::size_t>(vocab_size)
                           : static_cast<std::size_t>(hidden_width);
}

std::size_t PolicyArch::FeatureTableOffset() const {
  return static_cast<std::size_t>(vocab_size);
}

std::size_t PolicyArch::HiddenBiasOffset() const {
  return FeatureTableOffset() + NumFeatures() * RowWidth();
}

std::size_t PolicyArch::ReadoutWeightsOffset() const {
  return HiddenBiasOffset() + static_cast<std::size_t>(hidden_width);
}

std::size_t PolicyArch::NumParams() const {
  const auto V = static_cast<std::size_t>(vocab_size);
  const auto H = static_cast<std::size_t>(hidden_width);
  return ReadoutWeightsOffset() + V * H;
}

std::string PolicyArch::Tag() const {
  std::ostringstream os;
  os << "wbag-v1:V=" << vocab_size << ":k=" << context_window << ":H=" << hidden_width
     << ":bag=" << ToString(prompt_features);
  return os.str();
}

PolicyArch PolicyArch::FromTag(std::string_view tag) {
  constexpr std::string_view kPrefix = "wbag-v1:";
  if (tag.substr(0, kPrefix.size()) != kPrefix) {
    throw ConfigError("unsupported architecture tag '" + std::string(tag) + "'");
  }
  PolicyArch arch;
  std::string rest(tag.substr(kPrefix.size()));
  std::istringstream in(rest);
  std::string field;
  int seen = 0;
  while (std::getline(in, field, ':')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ConfigError("bad architecture field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    try {
      if (key == "V") arch.vocab_size = std::stoi(value);
      else if (key == "k") arch.context_window = std::stoi(value);
      else if (key == "H") arch.hidden_width = std::stoi(value);
      else if (key == "bag") arch.prompt_features = ParsePromptFeatures(value);
      else throw ConfigError("unknown architecture field '" + key + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("bad architecture value in '" + field + "'");
    }
    ++seen;
  }
  if (seen != 4) throw ConfigError("incomplete architecture tag '" + std::string(tag) + "'");
  arch.Validate();
  return arch;
}

void PolicyArch::Validate() const {
  if (vocab_size < 2) throw ConfigError("policy vocab_size must be >= 2");
  if (context_window < 1) throw ConfigError("policy context_window must be >= 1");
  if (hidden_width < 0) throw ConfigError("policy hidden_width must be >= 0");
}

PolicyParams::PolicyParams(PolicyArch arch) : arch_(arch) {
  arch_.Validate();
  theta_.assign(arch_.NumParams(), 0.0);
}

PolicyParams::PolicyParams(PolicyArch arch, std::vector<double> theta)
    : arch_(arch), theta_(std::move(theta)) {
  arch_.Validate();
  if (theta_.size() != arch_.NumParams()) {
    throw Error("parameter vector has " + std::to_string(theta_.size()) +
                " entries, architecture " + arch_.Tag() + " needs " +
                std::to_string(arch_.NumParams()));
  }
}

PolicyParams PolicyParams::Random(PolicyArch arch, double scale, Rng& rng) {
  PolicyParams p(arch);
  for (double& v : p.theta_) v = scale * rng.Normal();
  return p;
}

std::span<double> PolicyParams::mutable_theta() {
  if (frozen_) throw Error("attempt to modify frozen policy parameters");
  return theta_;
}

bool PolicyParams::AllFinite() const {
  return std::all_of(theta_.begin(), theta_.end(),
                     [](double v) { return std::isfinite(v); });
}

PolicyParams PolicyParams::CloneFrozen() const {
  PolicyParams copy(arch_, theta_);
  copy.frozen_ = true;
  return copy;
}

SparseFeatures EncodePrompt(const PolicyArch& arch, std::span<const TokenId> prompt) {
  SparseFeatures out;
  const std::size_t base = arch.NumWindowFeatures();
  const auto V = static_cast<std::size_t>(arch.vocab_size);
  std::vector<std::size_t> idx;
  switch (arch.prompt_features) {
    case PromptFeatures::kNone: return out;
    case PromptFeatures::kUnigram:
      for (TokenId t : prompt) idx.push_back(base + static_cast<std::size_t>(t));
      break;
    case PromptFeatures::kBigram:
      for (std::size_t i = 1; i < prompt.size(); ++i) {
        idx.push_back(base + static_cast<std::size_t>(prompt[i - 1]) * V +
                      static_cast<std::size_t>(prompt[i]));
      }
      break;
  }
  std::sort(idx.begin(), idx.end());
  for (std::size_t f : idx) {
    if (!out.empty() && out.back().first == f) {
      out.back().second += 1.0;
    } else {
      out.emplace_back(f, 1.0);
    }
  }
  return out;
}

std::vector<double> Logits(const PolicyParams& p, std::span<const TokenId> prompt,
                           std::span<const TokenId> prefix) {
  Evaluator ev(p, prompt);
  ev.SetCompletion(prefix);
  return ev.Forward(ev.ctx_len());
}

std::vector<double> SequenceLogprob(const PolicyParams& p, std::span<const TokenId> prompt,
                                    std::span<const TokenId> completion,
                                    double temperature) {
  if (!(temperature > 0.0)) throw Error("temperature must be > 0");
  Evaluator ev(p, prompt);
  ev.SetCompletion(completion);
  std::vector<double> out(completion.size());
  std::vector<double> z;
  for (std::size_t t = 0; t < completion.size(); ++t) {
    z = ev.Forward(ev.prompt_len() + t);
    LogSoftmax(z, temperature);
    out[t] = z[static_cast<std::size_t>(completion[t])];
  }
  return out;
}

TokenId SampleToken(std::span<const double> logits, double temperature, double top_p,
                    Rng& rng) {
  std::vector<double> probs(logits.begin(), logits.end());
  LogSoftmax(probs, temperature);
  for (double& v : probs) v = std::exp(v);

  const double u = rng.Uniform();
  if (top_p >= 1.0) {
    double acc = 0.0;
    for (std::size_t v = 0; v < probs.size(); ++v) {
      acc += probs[v];
      if (u < acc) return static_cast<TokenId>(v);
    }
    // Rounding left u above the cumulative mass; take the last positive entry.
    for (std::size_t v = probs.size(); v-- > 0;) {
      if (probs[v] > 0.0) return static_cast<TokenId>(v);
    }
    return 0;
  }

  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  std::size_t keep = 0;
  double mass = 0.0;
  while (keep < order.size()) {
    mass += probs[order[keep]];
    ++keep;
    if (mass >= top_p) break;
  }
  const double target = u * mass;
  double acc = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    acc += probs[order[i]];
    if (target < acc) return static_cast<TokenId>(order[i]);
  }
  return static_cast<TokenId>(order[keep - 1]);
}

Tokens SampleCompletion(const PolicyParams& p, std::span<const TokenId> prompt,
                        const SamplingOptions& opts, Rng& rng) {
  if (!(opts.temperature > 0.0)) throw Error("temperature must be > 0");
  if (opts.max_len < 1) throw Error("max_len must be >= 1");
  Evaluator ev(p, prompt);
  Tokens out;
  out.reserve(static_cast<std::size_t>(opts.max_len));
  while (static_cast<int>(out.size()) < opts.max_len) {
    const auto& z = ev.Forward(ev.ctx_len());
    const TokenId t = SampleToken(z, opts.temperature, opts.top_p, rng);
    out.push_back(t);
    ev.Push(t);
    if (t == opts.eos) break;
  }
  return out;
}

Tokens GreedyDecode(const PolicyParams& p, std::span<const TokenId> prompt, int max_len,
                    TokenId eos) {
  Evaluator ev(p, prompt);
  Tokens out;
  while (static_cast<int>(out.size()) < max_len) {
    const auto& z = ev.Forward(ev.ctx_len());
    const auto best = static_cast<TokenId>(std::max_element(z.begin(), z.end()) - z.begin());
    out.push_back(best);
    ev.Push(best);
    if (best == eos) break;
  }
  return out;
}

void AccumulateGradWeightedLogprob(const PolicyParams& p,
                                   std::span<const WeightedSequence> items,
                                   std::span<double> grad) {
  if (grad.size() != p.size()) throw Error("gradient buffer size mismatch");
  const auto V = static_cast<std::size_t>(p.arch().vocab_size);
  std::vector<double> dz(V);
  for (const auto& item : items) {
    if (item.weights.size() != item.completion.size()) {
      throw Error("one weight per completion token is required");
    }
    Evaluator ev(p, item.prompt);
    ev.SetCompletion(item.completion);
    for (std::size_t t = 0; t < item.completion.size(); ++t) {
      const double w = item.weights[t];
      if (w == 0.0) continue;
      std::vector<double> z = ev.Forward(ev.prompt_len() + t);
      LogSoftmax(z, 1.0);
      // d/dz log softmax(z)[o] = onehot(o) - softmax(z)
      for (std::size_t v = 0; v < V; ++v) dz[v] = -w * std::exp(z[v]);
      dz[static_cast<std::size_t>(item.completion[t])] += w;
      ev.Backward(dz, grad);
    }
  }
}

std::vector<double> GradWeightedLogprob(const PolicyParams& p,
                                        std::span<const WeightedSequence> items) {
  std::vector<double> grad(p.size(), 0.0);
  AccumulateGradWeightedLogprob(p, items, grad);
  return grad;
}

double MeanNll(const PolicyParams& p, std::span<const SftExample> batch) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& ex : batch) {
    for (double lp : SequenceLogprob(p, ex.prompt, ex.target)) total -= lp;
    n += ex.target.size();
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

double SftStep(PolicyParams& p, Optimizer& opt, std::span<const SftExample> batch,
               double lr) {
  std::size_t n_tokens = 0;
  for (const auto& ex : batch) n_tokens += ex.target.size();
  if (n_tokens == 0) return 0.0;
  const double before = MeanNll(p, batch);

  const double w = 1.0 / static_cast<double>(n_tokens);
  std::vector<std::vector<double>> weights;
  std::vector<WeightedSequence> items;
  weights.reserve(batch.size());
  items.reserve(batch.size());
  for (const auto& ex : batch) {
    weights.emplace_back(ex.target.size(), w);
    items.push_back({ex.prompt, ex.target, weights.back()});
  }
  std::vector<double> grad = GradWeightedLogprob(p, items);
  // Ascent on log-likelihood == descent on its negation.
  for (double& g : grad) g = -g;
  opt.Step(p.mutable_theta(), grad, lr);
  return before;
}

}  // namespace drgrl
