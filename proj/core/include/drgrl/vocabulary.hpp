#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace drgrl {

using TokenId = std::int32_t;
using Tokens = std::vector<TokenId>;

// Word-level symbol table for the synthetic coding task.
//
// Rendering rules: tag symbols ("<think>", "</answer>", ...) are emitted
// verbatim with no surrounding spaces; consecutive word symbols are joined by
// one space; the end-of-sequence symbol renders as nothing. Every word symbol
// therefore maps to exactly one whitespace-delimited word of rendered text.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> symbols);

  // The task vocabulary (special tags, note markers, condition and procedure
  // ids, fillers, DRG title words, reasoning words).
  static const Vocabulary& Default();

  std::size_t size() const { return symbols_.size(); }
  const std::string& Symbol(TokenId id) const;
  std::optional<TokenId> Find(std::string_view symbol) const;
  // Throws TokenOutOfRangeError for unknown symbols.
  TokenId Id(std::string_view symbol) const;

  bool IsTag(TokenId id) const;

  std::string Detokenize(std::span<const TokenId> tokens) const;
  // Inverse of Detokenize for text made of known tags and words.
  Tokens Tokenize(std::string_view text) const;

  TokenId bos() const { return bos_; }
  TokenId eos() const { return eos_; }
  TokenId think_open() const { return think_open_; }
  TokenId think_close() const { return think_close_; }
  TokenId answer_open() const { return answer_open_; }
  TokenId answer_close() const { return answer_close_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId bos_ = -1, eos_ = -1;
  TokenId think_open_ = -1, think_close_ = -1;
  TokenId answer_open_ = -1, answer_close_ = -1;
};

}  // namespace drgrl
