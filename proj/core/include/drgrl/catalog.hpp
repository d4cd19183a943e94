#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace drgrl {

enum class SeverityTier { kMcc, kCc, kNoCcMcc, kUnsplit };

enum class MatchClass {
  kFullMatch,
  kPrincipalOnly,
  kCcMccOnly,
  kValidNoMatch,
  kInvalid,
};

std::string_view ToString(SeverityTier tier);
std::string_view ToString(MatchClass match);

// Uppercases, trims, collapses internal whitespace runs to one space and
// strips trailing periods. Idempotent.
std::string NormalizeText(std::string_view s);

// A parsed DRG title: base description plus severity tier.
struct DrgCode {
  std::string raw_text;
  std::string normalized_text;
  std::string base;
  SeverityTier tier = SeverityTier::kUnsplit;

  friend bool operator==(const DrgCode& a, const DrgCode& b) {
    return a.normalized_text == b.normalized_text;
  }
};

// Splits a title into base and tier by its severity suffix. Throws
// EmptyCodeError when the title normalizes to nothing.
DrgCode ParseCode(std::string_view raw);

// Canonical title for (base, tier), e.g. "X WITHOUT CC/MCC".
std::string RenderTitle(std::string_view base, SeverityTier tier);

// Immutable, ordered set of DRG titles keyed by normalized text.
class Catalog {
 public:
  Catalog() = default;
  // Throws DuplicateCodeError on normalized duplicates.
  explicit Catalog(std::vector<DrgCode> codes);

  // One title per line; '#' comments and blank lines skipped. Errors carry
  // the 1-based line number.
  static Catalog Load(std::istream& in);
  static Catalog LoadFile(const std::filesystem::path& path);

  const std::vector<DrgCode>& codes() const { return codes_; }
  std::size_t size() const { return codes_.size(); }
  bool empty() const { return codes_.empty(); }
  const DrgCode& at(std::size_t i) const { return codes_.at(i); }

  // Looks up `text` after normalization.
  std::optional<std::size_t> Find(std::string_view text) const;
  bool Contains(std::string_view text) const { return Find(text).has_value(); }

  // Index of the (base, tier) code, if present.
  std::optional<std::size_t> FindByParts(std::string_view base,
                                         SeverityTier tier) const;

  // Distinct bases in first-appearance order.
  std::vector<std::string> Bases() const;

 private:
  std::vector<DrgCode> codes_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Relationship of a predicted title to the reference title. Throws
// ReferenceNotInCatalogError if `reference` is not a catalog member.
MatchClass ClassifyMatch(const Catalog& catalog, std::string_view predicted,
                         std::string_view reference);

// The shipped 12-entry fixture: four medical bases times three tiers.
Catalog MiniCatalog();

// The fixture extended with two surgical bases (18 entries), used when the
// procedure track is enabled.
Catalog MiniCatalogWithProcedures();

}  // namespace drgrl
