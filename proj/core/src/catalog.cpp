#include "drgrl/catalog.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>

#include "drgrl/errors.hpp"

namespace drgrl {
namespace {

struct SuffixRule {
  std::string_view suffix;
  SeverityTier tier;
};

// Priority order; the first whole-word match wins.
constexpr std::array<SuffixRule, 4> kSuffixRules = {{
    {"WITHOUT CC/MCC", SeverityTier::kNoCcMcc},
    {"WITH MCC", SeverityTier::kMcc},
    {"WITH CC", SeverityTier::kCc},
    {"WITHOUT MCC", SeverityTier::kCc},
}};

bool IsSpace(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view Trim(std::string_view s) {
  while (!s.empty() && IsSpace(s.front())) s.remove_prefix(1);
  while (!s.empty() && IsSpace(s.back())) s.remove_suffix(1);
  return s;
}

constexpr std::array<std::string_view, 6> kMiniBases = {
    "HEART FAILURE AND SHOCK",
    "ESOPHAGITIS GASTROENTERITIS AND MISCELLANEOUS DIGESTIVE DISORDERS",
    "OTHER CIRCULATORY SYSTEM DIAGNOSES",
    "SIMPLE PNEUMONIA AND PLEURISY",
    "PANCREAS LIVER AND SHUNT PROCEDURES",
    "OTHER DIGESTIVE SYSTEM PROCEDURES",
};

Catalog BuildMini(std::size_t n_bases) {
  std::vector<DrgCode> codes;
  for (std::size_t b = 0; b < n_bases; ++b) {
    for (SeverityTier tier :
         {SeverityTier::kMcc, SeverityTier::kCc, SeverityTier::kNoCcMcc}) {
      codes.push_back(ParseCode(RenderTitle(kMiniBases[b], tier)));
    }
  }
  return Catalog(std::move(codes));
}

}  // namespace

std::string_view ToString(SeverityTier tier) {
  switch (tier) {
    case SeverityTier::kMcc: return "MCC";
    case SeverityTier::kCc: return "CC";
    case SeverityTier::kNoCcMcc: return "NO_CC_MCC";
    case SeverityTier::kUnsplit: return "UNSPLIT";
  }
  return "?";
}

std::string_view ToString(MatchClass match) {
  switch (match) {
    case MatchClass::kFullMatch: return "FULL_MATCH";
    case MatchClass::kPrincipalOnly: return "PRINCIPAL_ONLY";
    case MatchClass::kCcMccOnly: return "CC_MCC_ONLY";
    case MatchClass::kValidNoMatch: return "VALID_NO_MATCH";
    case MatchClass::kInvalid: return "INVALID";
  }
  return "?";
}

std::string NormalizeText(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (IsSpace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  // Stripping periods can expose whitespace ("CC . ") and vice versa.
  for (;;) {
    std::size_t n = out.size();
    while (!out.empty() && out.back() == '.') out.pop_back();
    while (!out.empty() && out.back() == ' ') out.pop_back();
    if (out.size() == n) break;
  }
  return out;
}

DrgCode ParseCode(std::string_view raw) {
  DrgCode code;
  code.raw_text = std::string(raw);
  code.normalized_text = NormalizeText(raw);
  if (code.normalized_text.empty()) throw EmptyCodeError();

  const std::string_view text = code.normalized_text;
  for (const auto& rule : kSuffixRules) {
    if (text.size() <= rule.suffix.size() + 1) continue;
    if (text.substr(text.size() - rule.suffix.size()) != rule.suffix) continue;
    if (text[text.size() - rule.suffix.size() - 1] != ' ') continue;
    const std::string_view base =
        Trim(text.substr(0, text.size() - rule.suffix.size() - 1));
    if (base.empty()) continue;
    code.base = std::string(base);
    code.tier = rule.tier;
    return code;
  }
  code.base = code.normalized_text;
  code.tier = SeverityTier::kUnsplit;
  return code;
}

std::string RenderTitle(std::string_view base, SeverityTier tier) {
  std::string title = NormalizeText(base);
  switch (tier) {
    case SeverityTier::kMcc: title += " WITH MCC"; break;
    case SeverityTier::kCc: title += " WITH CC"; break;
    case SeverityTier::kNoCcMcc: title += " WITHOUT CC/MCC"; break;
    case SeverityTier::kUnsplit: break;
  }
  return title;
}

Catalog::Catalog(std::vector<DrgCode> codes) : codes_(std::move(codes)) {
  index_.reserve(codes_.size());
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    if (!index_.emplace(codes_[i].normalized_text, i).second) {
      throw DuplicateCodeError(codes_[i].normalized_text, 0);
    }
  }
}

Catalog Catalog::Load(std::istream& in) {
  std::vector<DrgCode> codes;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view trimmed = Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    DrgCode code;
    try {
      code = ParseCode(trimmed);
    } catch (const EmptyCodeError&) {
      throw EmptyCodeError(line_no);
    }
    if (!seen.emplace(code.normalized_text, line_no).second) {
      throw DuplicateCodeError(code.normalized_text, line_no);
    }
    codes.push_back(std::move(code));
  }
  return Catalog(std::move(codes));
}

Catalog Catalog::LoadFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open catalog file: " + path.string());
  return Load(in);
}

std::optional<std::size_t> Catalog::Find(std::string_view text) const {
  auto it = index_.find(NormalizeText(text));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Catalog::FindByParts(std::string_view base,
                                                SeverityTier tier) const {
  return Find(RenderTitle(base, tier));
}

std::vector<std::string> Catalog::Bases() const {
  std::vector<std::string> bases;
  for (const auto& code : codes_) {
    bool present = false;
    for (const auto& b : bases) present = present || b == code.base;
    if (!present) bases.push_back(code.base);
  }
  return bases;
}

MatchClass ClassifyMatch(const Catalog& catalog, std::string_view predicted,
                         std::string_view reference) {
  const auto ref_index = catalog.Find(reference);
  if (!ref_index) throw ReferenceNotInCatalogError(NormalizeText(reference));
  const auto pred_index = catalog.Find(predicted);
  if (!pred_index) return MatchClass::kInvalid;

  const DrgCode& ref = catalog.at(*ref_index);
  const DrgCode& pred = catalog.at(*pred_index);
  if (pred.normalized_text == ref.normalized_text) return MatchClass::kFullMatch;
  if (pred.base == ref.base) return MatchClass::kPrincipalOnly;
  if (pred.tier == ref.tier) return MatchClass::kCcMccOnly;
  return MatchClass::kValidNoMatch;
}

Catalog MiniCatalog() { return BuildMini(4); }

Catalog MiniCatalogWithProcedures() { return BuildMini(6); }

}  // namespace drgrl
