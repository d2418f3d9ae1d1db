#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace seqslu {

inline constexpr std::string_view kNullConcept = "null";
inline constexpr std::string_view kOpenBracket = "<";
inline constexpr std::string_view kCloseBracket = ">";

// A span of transcript tokens tagged with one concept (attribute name).
struct ConceptChunk {
  std::vector<std::string> tokens;
  std::string label = std::string(kNullConcept);

  bool is_null() const { return label == kNullConcept; }
  friend bool operator==(const ConceptChunk&, const ConceptChunk&) = default;
};

struct Annotation {
  std::vector<std::string> transcript;
  std::vector<ConceptChunk> chunks;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep = " ");

// Bracketed format: "oui < chambre double chambre-type >". Inside brackets the
// last token is the concept label; bare tokens become singleton null chunks.
// Throws std::invalid_argument on unbalanced brackets, empty chunks, chunks
// holding only a label, or an explicit "null" label.
Annotation parse_annotation(std::string_view s);

// Null chunks are emitted bare. Throws std::invalid_argument when the chunks
// do not tile the transcript exactly or contain reserved tokens.
std::string serialize_annotation(const std::vector<std::string>& transcript,
                                 const std::vector<ConceptChunk>& chunks);
inline std::string serialize_annotation(const Annotation& a) {
  return serialize_annotation(a.transcript, a.chunks);
}

// Non-null concept labels in chunk order.
std::vector<std::string> concept_labels(const std::vector<ConceptChunk>& chunks);

}  // namespace seqslu
