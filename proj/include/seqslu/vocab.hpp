#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seqslu {

inline constexpr int kBlankId = 0;
inline constexpr int kSosId = 1;
inline constexpr std::string_view kBlankSymbol = "<blank>";
inline constexpr std::string_view kSosSymbol = "<sos>";

// Output level of a decoder. `annotation` is the joint token + bracket +
// concept vocabulary of the bracketed SLU output.
enum class VocabLevel { kChars, kTokens, kConcepts, kAnnotation };

std::string_view to_string(VocabLevel level);
VocabLevel parse_vocab_level(std::string_view s);

class Vocab {
 public:
  Vocab() = default;
  // Reserved entries are prepended; `symbols` must be unique and must not
  // contain the reserved names.
  Vocab(VocabLevel level, std::vector<std::string> symbols);

  VocabLevel level() const { return level_; }
  // Including BLANK and SOS.
  int size() const { return static_cast<int>(symbols_.size()); }
  const std::string& symbol(int id) const { return symbols_.at(static_cast<size_t>(id)); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  std::optional<int> find(std::string_view symbol) const;
  // Throws std::out_of_range on unknown symbols.
  int index(std::string_view symbol) const;
  std::vector<int> encode(const std::vector<std::string>& symbols) const;
  // Reserved ids are dropped.
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.level_ == b.level_ && a.symbols_ == b.symbols_;
  }

 private:
  VocabLevel level_ = VocabLevel::kChars;
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace seqslu
