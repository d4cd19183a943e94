#include "drgrl/vocabulary.hpp"

#include <cctype>

#include "drgrl/errors.hpp"

namespace drgrl {
namespace {

std::vector<std::string> DefaultSymbols() {
  std::vector<std::string> s = {
      "<bos>", "<eos>", "<think>", "</think>", "<answer>", "</answer>",
      // note markers
      "PDX", "PPROC", "SDX", "HX", "NONE",
  };
  for (int i = 0; i < 12; ++i) s.push_back("C" + std::to_string(i));
  for (int i = 0; i < 4; ++i) s.push_back("P" + std::to_string(i));
  for (int i = 0; i < 4; ++i) s.push_back("F" + std::to_string(i));
  for (const char* w :
       {"HEART", "FAILURE", "AND", "SHOCK", "ESOPHAGITIS", "GASTROENTERITIS",
        "MISCELLANEOUS", "DIGESTIVE", "DISORDERS", "OTHER", "CIRCULATORY",
        "SYSTEM", "DIAGNOSES", "SIMPLE", "PNEUMONIA", "PLEURISY", "PANCREAS",
        "LIVER", "SHUNT", "PROCEDURES", "WITH", "WITHOUT", "MCC", "CC",
        "CC/MCC", "CANDIDATE"}) {
    s.emplace_back(w);
  }
  return s;
}

bool LooksLikeTag(std::string_view s) {
  return s.size() >= 3 && s.front() == '<' && s.back() == '>';
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> symbols)
    : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto& sym = symbols_[i];
    if (sym.empty()) throw Error("vocabulary symbols must be non-empty");
    for (char c : sym) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        throw Error("vocabulary symbol contains whitespace: '" + sym + "'");
      }
    }
    if (!index_.emplace(sym, static_cast<TokenId>(i)).second) {
      throw Error("duplicate vocabulary symbol: '" + sym + "'");
    }
  }
  auto find = [this](std::string_view s) {
    auto id = Find(s);
    return id ? *id : TokenId{-1};
  };
  bos_ = find("<bos>");
  eos_ = find("<eos>");
  think_open_ = find("<think>");
  think_close_ = find("</think>");
  answer_open_ = find("<answer>");
  answer_close_ = find("</answer>");
}

const Vocabulary& Vocabulary::Default() {
  static const Vocabulary vocab(DefaultSymbols());
  return vocab;
}

const std::string& Vocabulary::Symbol(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size()) {
    throw TokenOutOfRangeError("token id " + std::to_string(id) +
                               " outside vocabulary of size " +
                               std::to_string(symbols_.size()));
  }
  return symbols_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::Find(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::Id(std::string_view symbol) const {
  auto id = Find(symbol);
  if (!id) throw TokenOutOfRangeError("unknown symbol '" + std::string(symbol) + "'");
  return *id;
}

bool Vocabulary::IsTag(TokenId id) const { return LooksLikeTag(Symbol(id)); }

std::string Vocabulary::Detokenize(std::span<const TokenId> tokens) const {
  std::string out;
  bool prev_word = false;
  for (TokenId id : tokens) {
    if (id == eos_) continue;
    const std::string& sym = Symbol(id);
    const bool tag = LooksLikeTag(sym);
    if (!tag && prev_word) out.push_back(' ');
    out += sym;
    prev_word = !tag;
  }
  return out;
}

Tokens Vocabulary::Tokenize(std::string_view text) const {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t end;
    if (c == '<') {
      end = text.find('>', i);
      if (end == std::string_view::npos) {
        throw TokenOutOfRangeError("unterminated tag in '" + std::string(text) + "'");
      }
      ++end;
    } else {
      end = i;
      while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end])) &&
             text[end] != '<') {
        ++end;
      }
    }
    out.push_back(Id(text.substr(i, end - i)));
    i = end;
  }
  return out;
}

}  // namespace drgrl
