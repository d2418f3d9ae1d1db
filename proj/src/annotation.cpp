#include "seqslu/annotation.hpp"

#include <stdexcept>

namespace seqslu {

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) ++i;
    size_t j = i;
    while (j < s.size() && !(s[j] == ' ' || s[j] == '\t' || s[j] == '\n' || s[j] == '\r')) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

Annotation parse_annotation(std::string_view s) {
  Annotation a;
  const auto tokens = split_whitespace(s);
  bool open = false;
  std::vector<std::string> inside;
  for (const auto& tok : tokens) {
    if (tok == kOpenBracket) {
      if (open) throw std::invalid_argument("nested '<' in annotation: " + std::string(s));
      open = true;
      inside.clear();
    } else if (tok == kCloseBracket) {
      if (!open) throw std::invalid_argument("'>' without matching '<' in annotation: " + std::string(s));
      if (inside.empty()) throw std::invalid_argument("empty chunk in annotation: " + std::string(s));
      if (inside.size() == 1) {
        throw std::invalid_argument("chunk holds only a label in annotation: " + std::string(s));
      }
      ConceptChunk chunk;
      chunk.label = inside.back();
      if (chunk.is_null()) {
        throw std::invalid_argument("explicit null label in annotation: " + std::string(s));
      }
      inside.pop_back();
      chunk.tokens = inside;
      a.transcript.insert(a.transcript.end(), inside.begin(), inside.end());
      a.chunks.push_back(std::move(chunk));
      open = false;
    } else if (open) {
      inside.push_back(tok);
    } else {
      a.transcript.push_back(tok);
      a.chunks.push_back(ConceptChunk{{tok}, std::string(kNullConcept)});
    }
  }
  if (open) throw std::invalid_argument("unclosed '<' in annotation: " + std::string(s));
  return a;
}

std::string serialize_annotation(const std::vector<std::string>& transcript,
                                 const std::vector<ConceptChunk>& chunks) {
  std::vector<std::string> out;
  size_t pos = 0;
  for (const auto& c : chunks) {
    if (c.tokens.empty()) throw std::invalid_argument("chunk without tokens");
    if (c.label.empty() || c.label == kOpenBracket || c.label == kCloseBracket ||
        split_whitespace(c.label).size() != 1) {
      throw std::invalid_argument("invalid concept label '" + c.label + "'");
    }
    if (!c.is_null()) out.emplace_back(kOpenBracket);
    for (const auto& t : c.tokens) {
      if (pos >= transcript.size() || transcript[pos] != t) {
        throw std::invalid_argument("chunks overlap or do not match the transcript at token " +
                                    std::to_string(pos));
      }
      if (t == kOpenBracket || t == kCloseBracket) throw std::invalid_argument("bracket used as a token");
      out.push_back(t);
      ++pos;
    }
    if (!c.is_null()) {
      out.push_back(c.label);
      out.emplace_back(kCloseBracket);
    }
  }
  if (pos != transcript.size()) throw std::invalid_argument("chunks do not cover the transcript");
  return join(out);
}

std::vector<std::string> concept_labels(const std::vector<ConceptChunk>& chunks) {
  std::vector<std::string> out;
  for (const auto& c : chunks)
    if (!c.is_null()) out.push_back(c.label);
  return out;
}

}  // namespace seqslu
