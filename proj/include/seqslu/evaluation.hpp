#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace seqslu {

struct EditStats {
  int64_t substitutions = 0;
  int64_t deletions = 0;
  int64_t insertions = 0;
  int64_t ref_length = 0;

  int64_t errors() const { return substitutions + deletions + insertions; }
  // Percentage; 0 for an empty reference with no insertions.
  double rate() const;
  EditStats& operator+=(const EditStats& o);
  friend bool operator==(const EditStats&, const EditStats&) = default;
};

// Unit-cost alignment. Among minimal alignments the backtrace prefers
// substitution (or match), then insertion, then deletion.
EditStats levenshtein(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);

// Pooled percentage rounded to 2 decimals. Throws std::invalid_argument on
// length mismatch or when all references are empty.
double corpus_rate(const std::vector<std::vector<std::string>>& hyps,
                   const std::vector<std::vector<std::string>>& refs);
double wer(const std::vector<std::vector<std::string>>& hyps, const std::vector<std::vector<std::string>>& refs);
double cer(const std::vector<std::vector<std::string>>& hyp_concepts,
           const std::vector<std::vector<std::string>>& ref_concepts);

// Concept labels of a bracketed token sequence, null chunks excluded. An
// unclosed chunk is closed at the end of the sequence; a stray ">" and an
// empty chunk are ignored. Total.
std::vector<std::string> extract_concepts(const std::vector<std::string>& decoded);

struct ScoredItem {
  std::string id;
  std::vector<std::string> hyp, ref;
};

// {metric, corpus_rate, per_utterance: [{id, S, D, I, ref_len}]}
nlohmann::ordered_json score_report(const std::string& metric, const std::vector<ScoredItem>& items);

}  // namespace seqslu
