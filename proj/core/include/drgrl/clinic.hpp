#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drgrl/catalog.hpp"
#include "drgrl/reward.hpp"
#include "drgrl/rng.hpp"
#include "drgrl/vocabulary.hpp"

namespace drgrl {

enum class PrincipalKind { kDiagnosis, kProcedure };
enum class SecondarySeverity { kCc, kMcc, kNeither };
enum class CognitivePattern { kAnswerFirst, kCotFirst, kDifferential };

std::string_view ToString(PrincipalKind k);
std::string_view ToString(SecondarySeverity s);
std::string_view ToString(CognitivePattern p);
CognitivePattern ParseCognitivePattern(std::string_view s);

struct Secondary {
  int condition = 0;
  SecondarySeverity severity = SecondarySeverity::kNeither;

  friend auto operator<=>(const Secondary&, const Secondary&) = default;
};

// The latent (principal, secondaries) tuple that the note encodes.
struct LatentTuple {
  PrincipalKind principal_kind = PrincipalKind::kDiagnosis;
  int principal_id = 0;
  std::vector<Secondary> secondaries;  // sorted by condition id

  friend bool operator==(const LatentTuple&, const LatentTuple&) = default;
};

struct CaseSpec {
  std::string case_id;
  Tokens note;  // note tokens, without the leading <bos>
  LatentTuple latent;
  DrgCode gold_code;

  // <bos> followed by the note.
  Tokens PromptTokens(const Vocabulary& vocab) const;
};

// Note grammar (segments in random order, filler tokens F* between them):
//   principal diagnosis   PDX C<i>
//   principal procedure   PPROC P<j>
//   secondary             SDX <MCC|CC|NONE> C<i>
//   distractor            HX C<i>        (history mention, ignored by f)
struct TaskConfig {
  Catalog catalog = MiniCatalog();
  // Condition i maps to medical_bases[i % size]; procedure j to
  // surgical_bases[j % size].
  std::vector<std::string> medical_bases = {
      "HEART FAILURE AND SHOCK",
      "ESOPHAGITIS GASTROENTERITIS AND MISCELLANEOUS DIGESTIVE DISORDERS",
      "OTHER CIRCULATORY SYSTEM DIAGNOSES",
      "SIMPLE PNEUMONIA AND PLEURISY",
  };
  std::vector<std::string> surgical_bases = {
      "PANCREAS LIVER AND SHUNT PROCEDURES",
      "OTHER DIGESTIVE SYSTEM PROCEDURES",
  };
  int condition_vocab = 12;
  int procedure_vocab = 4;
  int note_len_min = 8;
  int note_len_max = 24;
  int secondaries_min = 0;
  int secondaries_max = 3;
  // Per-secondary severity priors; must sum to 1.
  double prior_mcc = 0.25;
  double prior_cc = 0.35;
  double prior_neither = 0.40;
  int distractors_min = 0;
  int distractors_max = 0;
  bool procedures_enabled = false;
  double procedure_prob = 0.25;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void Validate() const;
};

// f: tier is MCC if any secondary is MCC-flagged, else CC if any is
// CC-flagged, else NO_CC_MCC (UNSPLIT for bases without a severity split).
// Throws UnknownConditionError.
DrgCode MapF(const TaskConfig& cfg, PrincipalKind kind, int principal_id,
             std::span<const Secondary> secondaries);
inline DrgCode MapF(const TaskConfig& cfg, const LatentTuple& t) {
  return MapF(cfg, t.principal_kind, t.principal_id, t.secondaries);
}

// h: exact inverse of the note encoding. A leading <bos> is tolerated.
// Throws MalformedNoteError.
LatentTuple OracleH(std::span<const TokenId> note, const TaskConfig& cfg);

CaseSpec GenerateCase(const TaskConfig& cfg, Rng& rng);

// Case i of the stream is drawn from DeriveSeed(cfg.seed, {stream, i}).
std::vector<CaseSpec> GenerateCases(const TaskConfig& cfg, std::size_t n,
                                    std::uint64_t stream, std::string_view id_prefix);

// Oracle SFT target in the requested cognitive pattern; always
// <think>...</think><answer>gold</answer><eos>.
CompletionText RenderSftTarget(const CaseSpec& c, CognitivePattern pattern,
                               const TaskConfig& cfg, Rng& rng);

}  // namespace drgrl
