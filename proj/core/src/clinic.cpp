#include "drgrl/clinic.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "drgrl/errors.hpp"

namespace drgrl {
namespace {

const Vocabulary& Vocab() { return Vocabulary::Default(); }

TokenId ConditionToken(int i) { return Vocab().Id("C" + std::to_string(i)); }
TokenId ProcedureToken(int j) { return Vocab().Id("P" + std::to_string(j)); }

TokenId SeverityToken(SecondarySeverity s) {
  switch (s) {
    case SecondarySeverity::kMcc: return Vocab().Id("MCC");
    case SecondarySeverity::kCc: return Vocab().Id("CC");
    case SecondarySeverity::kNeither: return Vocab().Id("NONE");
  }
  return -1;
}

// Parses "<prefix><n>" symbols such as C7 or P2.
std::optional<int> IndexedSymbol(TokenId id, char prefix, int limit) {
  const std::string& sym = Vocab().Symbol(id);
  if (sym.size() < 2 || sym[0] != prefix) return std::nullopt;
  int value = 0;
  for (std::size_t i = 1; i < sym.size(); ++i) {
    if (sym[i] < '0' || sym[i] > '9') return std::nullopt;
    value = value * 10 + (sym[i] - '0');
  }
  if (value >= limit) return std::nullopt;
  return value;
}

bool IsFiller(TokenId id) {
  const std::string& sym = Vocab().Symbol(id);
  return sym.size() >= 2 && sym[0] == 'F' && sym[1] >= '0' && sym[1] <= '9';
}

SecondarySeverity MaxSeverity(std::span<const Secondary> secondaries) {
  bool cc = false;
  for (const auto& s : secondaries) {
    if (s.severity == SecondarySeverity::kMcc) return SecondarySeverity::kMcc;
    cc = cc || s.severity == SecondarySeverity::kCc;
  }
  return cc ? SecondarySeverity::kCc : SecondarySeverity::kNeither;
}

void Append(Tokens& out, const Tokens& more) { out.insert(out.end(), more.begin(), more.end()); }

}  // namespace

std::string_view ToString(PrincipalKind k) {
  return k == PrincipalKind::kDiagnosis ? "diagnosis" : "procedure";
}

std::string_view ToString(SecondarySeverity s) {
  switch (s) {
    case SecondarySeverity::kCc: return "CC";
    case SecondarySeverity::kMcc: return "MCC";
    case SecondarySeverity::kNeither: return "NONE";
  }
  return "?";
}

std::string_view ToString(CognitivePattern p) {
  switch (p) {
    case CognitivePattern::kAnswerFirst: return "answer_first";
    case CognitivePattern::kCotFirst: return "cot_first";
    case CognitivePattern::kDifferential: return "differential";
  }
  return "?";
}

CognitivePattern ParseCognitivePattern(std::string_view s) {
  if (s == "answer_first") return CognitivePattern::kAnswerFirst;
  if (s == "cot_first") return CognitivePattern::kCotFirst;
  if (s == "differential") return CognitivePattern::kDifferential;
  throw ConfigError("unknown cognitive pattern '" + std::string(s) + "'");
}

Tokens CaseSpec::PromptTokens(const Vocabulary& vocab) const {
  Tokens out;
  out.reserve(note.size() + 1);
  out.push_back(vocab.bos());
  out.insert(out.end(), note.begin(), note.end());
  return out;
}

void TaskConfig::Validate() const {
  if (catalog.empty()) throw ConfigError("task catalog is empty");
  if (medical_bases.empty()) throw ConfigError("task needs at least one medical base");
  if (condition_vocab < 1 || condition_vocab > 12) {
    throw ConfigError("task.condition_vocab must be in [1, 12]");
  }
  if (procedure_vocab < 1 || procedure_vocab > 4) {
    throw ConfigError("task.procedure_vocab must be in [1, 4]");
  }
  if (note_len_min < 0 || note_len_max < note_len_min) {
    throw ConfigError("task note length range is invalid");
  }
  if (secondaries_min < 0 || secondaries_max < secondaries_min ||
      secondaries_max > condition_vocab - 1) {
    throw ConfigError("task secondaries range is invalid");
  }
  if (distractors_min < 0 || distractors_max < distractors_min) {
    throw ConfigError("task distractor range is invalid");
  }
  for (double p : {prior_mcc, prior_cc, prior_neither}) {
    if (p < 0.0 || p > 1.0) throw ConfigError("task severity priors must be in [0, 1]");
  }
  if (std::abs(prior_mcc + prior_cc + prior_neither - 1.0) > 1e-9) {
    throw ConfigError("task severity priors must sum to 1");
  }
  if (procedures_enabled && surgical_bases.empty()) {
    throw ConfigError("procedure track enabled without surgical bases");
  }
  // Catalog closure: every reachable (base, tier) must resolve.
  auto check = [&](PrincipalKind kind, int id) {
    for (SecondarySeverity s :
         {SecondarySeverity::kMcc, SecondarySeverity::kCc, SecondarySeverity::kNeither}) {
      const Secondary sec{0, s};
      try {
        MapF(*this, kind, id, std::span<const Secondary>(&sec, 1));
      } catch (const UnknownConditionError& e) {
        throw ConfigError(std::string("task catalog does not cover: ") + e.what());
      }
    }
  };
  for (int i = 0; i < condition_vocab; ++i) check(PrincipalKind::kDiagnosis, i);
  if (procedures_enabled) {
    for (int j = 0; j < procedure_vocab; ++j) check(PrincipalKind::kProcedure, j);
  }
}

DrgCode MapF(const TaskConfig& cfg, PrincipalKind kind, int principal_id,
             std::span<const Secondary> secondaries) {
  const auto& bases =
      kind == PrincipalKind::kDiagnosis ? cfg.medical_bases : cfg.surgical_bases;
  const int limit =
      kind == PrincipalKind::kDiagnosis ? cfg.condition_vocab : cfg.procedure_vocab;
  if (principal_id < 0 || principal_id >= limit || bases.empty()) {
    throw UnknownConditionError("no base DRG assigned to " + std::string(ToString(kind)) +
                                " " + std::to_string(principal_id));
  }
  const std::string& base = bases[static_cast<std::size_t>(principal_id) % bases.size()];
  const Catalog& catalog = cfg.catalog;

  if (auto idx = catalog.FindByParts(base, SeverityTier::kUnsplit)) return catalog.at(*idx);

  std::vector<std::string> candidates;
  switch (MaxSeverity(secondaries)) {
    case SecondarySeverity::kMcc: candidates = {base + " WITH MCC"}; break;
    case SecondarySeverity::kCc: candidates = {base + " WITH CC", base + " WITHOUT MCC"}; break;
    case SecondarySeverity::kNeither:
      candidates = {base + " WITHOUT CC/MCC", base + " WITHOUT MCC"};
      break;
  }
  for (const auto& title : candidates) {
    if (auto idx = catalog.Find(title)) return catalog.at(*idx);
  }
  throw UnknownConditionError("catalog has no code for '" + candidates.front() + "'");
}

LatentTuple OracleH(std::span<const TokenId> note, const TaskConfig& cfg) {
  const Vocabulary& v = Vocab();
  const TokenId pdx = v.Id("PDX"), pproc = v.Id("PPROC"), sdx = v.Id("SDX"), hx = v.Id("HX");
  const TokenId mcc = v.Id("MCC"), cc = v.Id("CC"), none = v.Id("NONE");

  LatentTuple out;
  bool have_principal = false;
  std::size_t i = 0;
  if (!note.empty() && note[0] == v.bos()) ++i;

  auto need = [&](std::size_t at, const char* what) {
    if (at >= note.size()) throw MalformedNoteError(std::string("note ends before ") + what);
    return note[at];
  };
  auto condition_at = [&](std::size_t at) {
    const auto c = IndexedSymbol(need(at, "condition id"), 'C', cfg.condition_vocab);
    if (!c) throw MalformedNoteError("expected condition id at position " + std::to_string(at));
    return *c;
  };

  while (i < note.size()) {
    const TokenId t = note[i];
    if (t < 0 || static_cast<std::size_t>(t) >= v.size()) {
      throw MalformedNoteError("token id out of range in note");
    }
    if (IsFiller(t)) {
      ++i;
    } else if (t == pdx || t == pproc) {
      if (have_principal) throw MalformedNoteError("note has more than one principal marker");
      have_principal = true;
      if (t == pdx) {
        out.principal_kind = PrincipalKind::kDiagnosis;
        out.principal_id = condition_at(i + 1);
      } else {
        const auto p = IndexedSymbol(need(i + 1, "procedure id"), 'P', cfg.procedure_vocab);
        if (!p) throw MalformedNoteError("expected procedure id after PPROC");
        out.principal_kind = PrincipalKind::kProcedure;
        out.principal_id = *p;
      }
      i += 2;
    } else if (t == sdx) {
      const TokenId sev = need(i + 1, "severity marker");
      Secondary s;
      if (sev == mcc) s.severity = SecondarySeverity::kMcc;
      else if (sev == cc) s.severity = SecondarySeverity::kCc;
      else if (sev == none) s.severity = SecondarySeverity::kNeither;
      else throw MalformedNoteError("expected severity marker after SDX");
      s.condition = condition_at(i + 2);
      out.secondaries.push_back(s);
      i += 3;
    } else if (t == hx) {
      condition_at(i + 1);
      i += 2;
    } else {
      throw MalformedNoteError("unexpected token '" + v.Symbol(t) + "' in note");
    }
  }
  if (!have_principal) throw MalformedNoteError("note has no principal marker");
  std::sort(out.secondaries.begin(), out.secondaries.end());
  out.secondaries.erase(std::unique(out.secondaries.begin(), out.secondaries.end()),
                        out.secondaries.end());
  return out;
}

CaseSpec GenerateCase(const TaskConfig& cfg, Rng& rng) {
  const Vocabulary& v = Vocab();
  CaseSpec c;
  LatentTuple& lt = c.latent;

  if (cfg.procedures_enabled && rng.Bernoulli(cfg.procedure_prob)) {
    lt.principal_kind = PrincipalKind::kProcedure;
    lt.principal_id = rng.Between(0, cfg.procedure_vocab - 1);
  } else {
    lt.principal_kind = PrincipalKind::kDiagnosis;
    lt.principal_id = rng.Between(0, cfg.condition_vocab - 1);
  }

  // Secondary conditions: distinct, and distinct from a principal diagnosis.
  std::vector<int> pool;
  for (int i = 0; i < cfg.condition_vocab; ++i) {
    if (lt.principal_kind == PrincipalKind::kDiagnosis && i == lt.principal_id) continue;
    pool.push_back(i);
  }
  const int n_sec =
      std::min(rng.Between(cfg.secondaries_min, cfg.secondaries_max), static_cast<int>(pool.size()));
  for (int s = 0; s < n_sec; ++s) {
    const auto pick = static_cast<std::size_t>(rng.Below(pool.size() - static_cast<std::size_t>(s)));
    std::swap(pool[pick], pool[pool.size() - 1 - static_cast<std::size_t>(s)]);
    const int cond = pool[pool.size() - 1 - static_cast<std::size_t>(s)];
    const double u = rng.Uniform();
    SecondarySeverity sev = SecondarySeverity::kNeither;
    if (u < cfg.prior_mcc) sev = SecondarySeverity::kMcc;
    else if (u < cfg.prior_mcc + cfg.prior_cc) sev = SecondarySeverity::kCc;
    lt.secondaries.push_back({cond, sev});
  }
  std::sort(lt.secondaries.begin(), lt.secondaries.end());

  std::vector<Tokens> segments;
  if (lt.principal_kind == PrincipalKind::kDiagnosis) {
    segments.push_back({v.Id("PDX"), ConditionToken(lt.principal_id)});
  } else {
    segments.push_back({v.Id("PPROC"), ProcedureToken(lt.principal_id)});
  }
  for (const auto& s : lt.secondaries) {
    segments.push_back({v.Id("SDX"), SeverityToken(s.severity), ConditionToken(s.condition)});
  }
  const int n_distractors = rng.Between(cfg.distractors_min, cfg.distractors_max);
  for (int d = 0; d < n_distractors; ++d) {
    segments.push_back({v.Id("HX"), ConditionToken(rng.Between(0, cfg.condition_vocab - 1))});
  }
  rng.Shuffle(segments.begin(), segments.end());

  int structural = 0;
  for (const auto& seg : segments) structural += static_cast<int>(seg.size());
  const int length = rng.Between(std::max(cfg.note_len_min, structural),
                                 std::max(cfg.note_len_max, structural));
  // fillers_before[g]: filler count placed before segment g (g == size: tail).
  std::vector<int> fillers_before(segments.size() + 1, 0);
  for (int f = 0; f < length - structural; ++f) {
    ++fillers_before[rng.Below(fillers_before.size())];
  }
  for (std::size_t g = 0; g <= segments.size(); ++g) {
    for (int f = 0; f < fillers_before[g]; ++f) {
      c.note.push_back(v.Id("F" + std::to_string(rng.Below(4))));
    }
    if (g < segments.size()) Append(c.note, segments[g]);
  }
  c.gold_code = MapF(cfg, lt);
  return c;
}

std::vector<CaseSpec> GenerateCases(const TaskConfig& cfg, std::size_t n,
                                    std::uint64_t stream, std::string_view id_prefix) {
  std::vector<CaseSpec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(DeriveSeed(cfg.seed, {stream, static_cast<std::uint64_t>(i)}));
    CaseSpec c = GenerateCase(cfg, rng);
    c.case_id = std::string(id_prefix) + std::to_string(i);
    out.push_back(std::move(c));
  }
  return out;
}

CompletionText RenderSftTarget(const CaseSpec& c, CognitivePattern pattern,
                               const TaskConfig& cfg, Rng& rng) {
  const Vocabulary& v = Vocab();
  const Tokens gold = v.Tokenize(c.gold_code.normalized_text);

  // Reasoning restates h(D): the principal marker and the dominant severity.
  Tokens reasoning;
  if (c.latent.principal_kind == PrincipalKind::kDiagnosis) {
    reasoning = {v.Id("PDX"), ConditionToken(c.latent.principal_id)};
  } else {
    reasoning = {v.Id("PPROC"), ProcedureToken(c.latent.principal_id)};
  }
  reasoning.push_back(v.Id("SDX"));
  reasoning.push_back(SeverityToken(MaxSeverity(c.latent.secondaries)));

  Tokens out = {v.think_open()};
  switch (pattern) {
    case CognitivePattern::kCotFirst:
      Append(out, reasoning);
      break;
    case CognitivePattern::kAnswerFirst:
      Append(out, gold);
      Append(out, reasoning);
      break;
    case CognitivePattern::kDifferential: {
      // Gold plus one same-base and one same-tier alternative when available.
      const Catalog& catalog = cfg.catalog;
      std::vector<std::size_t> same_base, same_tier, other;
      for (std::size_t i = 0; i < catalog.size(); ++i) {
        const DrgCode& code = catalog.at(i);
        if (code.normalized_text == c.gold_code.normalized_text) continue;
        if (code.base == c.gold_code.base) same_base.push_back(i);
        else if (code.tier == c.gold_code.tier) same_tier.push_back(i);
        else other.push_back(i);
      }
      std::vector<std::string> picks = {c.gold_code.normalized_text};
      auto take = [&](std::vector<std::size_t>& from) {
        if (from.empty() || picks.size() >= 3) return;
        const auto k = rng.Below(from.size());
        picks.push_back(catalog.at(from[k]).normalized_text);
        from.erase(from.begin() + static_cast<std::ptrdiff_t>(k));
      };
      take(same_base);
      take(same_tier);
      while (picks.size() < 3 && !(same_base.empty() && same_tier.empty() && other.empty())) {
        take(!other.empty() ? other : (!same_tier.empty() ? same_tier : same_base));
      }
      rng.Shuffle(picks.begin(), picks.end());
      for (const auto& title : picks) {
        out.push_back(v.Id("CANDIDATE"));
        Append(out, v.Tokenize(title));
      }
      Append(out, reasoning);
      break;
    }
  }
  out.push_back(v.think_close());
  out.push_back(v.answer_open());
  Append(out, gold);
  out.push_back(v.answer_close());
  out.push_back(v.eos());
  return CompletionText::FromTokens(v, std::move(out));
}

}  // namespace drgrl
