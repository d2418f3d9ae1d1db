#include "seqslu/vocab.hpp"

#include <stdexcept>

namespace seqslu {

std::string_view to_string(VocabLevel level) {
  switch (level) {
    case VocabLevel::kChars: return "chars";
    case VocabLevel::kTokens: return "tokens";
    case VocabLevel::kConcepts: return "concepts";
    case VocabLevel::kAnnotation: return "annotation";
  }
  return "?";
}

VocabLevel parse_vocab_level(std::string_view s) {
  if (s == "chars") return VocabLevel::kChars;
  if (s == "tokens") return VocabLevel::kTokens;
  if (s == "concepts") return VocabLevel::kConcepts;
  if (s == "annotation") return VocabLevel::kAnnotation;
  throw std::invalid_argument("unknown vocabulary level '" + std::string(s) + "'");
}

Vocab::Vocab(VocabLevel level, std::vector<std::string> symbols) : level_(level) {
  symbols_.reserve(symbols.size() + 2);
  symbols_.emplace_back(kBlankSymbol);
  symbols_.emplace_back(kSosSymbol);
  for (auto& s : symbols) {
    if (s == kBlankSymbol || s == kSosSymbol) {
      throw std::invalid_argument("reserved symbol '" + s + "' in vocabulary");
    }
    symbols_.push_back(std::move(s));
  }
  for (size_t i = 0; i < symbols_.size(); ++i) {
    if (!ids_.emplace(symbols_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary symbol '" + symbols_[i] + "'");
    }
  }
}

std::optional<int> Vocab::find(std::string_view symbol) const {
  auto it = ids_.find(std::string(symbol));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

int Vocab::index(std::string_view symbol) const {
  auto id = find(symbol);
  if (!id) {
    throw std::out_of_range("symbol '" + std::string(symbol) + "' not in " +
                            std::string(to_string(level_)) + " vocabulary");
  }
  return *id;
}

std::vector<int> Vocab::encode(const std::vector<std::string>& symbols) const {
  std::vector<int> ids;
  ids.reserve(symbols.size());
  for (const auto& s : symbols) ids.push_back(index(s));
  return ids;
}

std::vector<std::string> Vocab::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  for (int id : ids)
    if (id != kBlankId && id != kSosId) out.push_back(symbol(id));
  return out;
}

}  // namespace seqslu
