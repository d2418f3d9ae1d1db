#include "seqslu/evaluation.hpp"

#include <cmath>
#include <stdexcept>

#include "seqslu/annotation.hpp"

namespace seqslu {

double EditStats::rate() const {
  if (ref_length == 0) return errors() == 0 ? 0.0 : 100.0 * static_cast<double>(errors());
  return 100.0 * static_cast<double>(errors()) / static_cast<double>(ref_length);
}

EditStats& EditStats::operator+=(const EditStats& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_length += o.ref_length;
  return *this;
}

EditStats levenshtein(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  const size_t n = hyp.size(), m = ref.size();
  // d[i][j]: cost of aligning hyp[0, i) with ref[0, j).
  std::vector<std::vector<int64_t>> d(n + 1, std::vector<int64_t>(m + 1));
  for (size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int64_t>(i);
  for (size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const int64_t sub = d[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }

  EditStats s;
  s.ref_length = static_cast<int64_t>(m);
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1)) {
      if (hyp[i - 1] != ref[j - 1]) ++s.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++s.insertions;
      --i;
    } else {
      ++s.deletions;
      --j;
    }
  }
  return s;
}

double corpus_rate(const std::vector<std::vector<std::string>>& hyps,
                   const std::vector<std::vector<std::string>>& refs) {
  if (hyps.size() != refs.size()) {
    throw std::invalid_argument("scoring: " + std::to_string(hyps.size()) + " hypotheses for " +
                                std::to_string(refs.size()) + " references");
  }
  EditStats total;
  for (size_t k = 0; k < hyps.size(); ++k) total += levenshtein(hyps[k], refs[k]);
  if (total.ref_length == 0) throw std::invalid_argument("scoring: empty reference corpus");
  return std::round(total.rate() * 100.0) / 100.0;
}

double wer(const std::vector<std::vector<std::string>>& hyps, const std::vector<std::vector<std::string>>& refs) {
  return corpus_rate(hyps, refs);
}

double cer(const std::vector<std::vector<std::string>>& hyp_concepts,
           const std::vector<std::vector<std::string>>& ref_concepts) {
  return corpus_rate(hyp_concepts, ref_concepts);
}

std::vector<std::string> extract_concepts(const std::vector<std::string>& decoded) {
  std::vector<std::string> out;
  bool open = false;
  std::string last;  // last symbol seen inside the open chunk
  for (const auto& s : decoded) {
    if (s == kOpenBracket) {
      if (open && !last.empty() && last != kNullConcept) out.push_back(last);
      open = true;
      last.clear();
    } else if (s == kCloseBracket) {
      if (open && !last.empty() && last != kNullConcept) out.push_back(last);
      open = false;
      last.clear();
    } else if (open) {
      last = s;
    }
  }
  if (open && !last.empty() && last != kNullConcept) out.push_back(last);
  return out;
}

nlohmann::ordered_json score_report(const std::string& metric, const std::vector<ScoredItem>& items) {
  std::vector<std::vector<std::string>> hyps, refs;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& it : items) {
    const EditStats s = levenshtein(it.hyp, it.ref);
    per.push_back({{"id", it.id},
                   {"S", s.substitutions},
                   {"D", s.deletions},
                   {"I", s.insertions},
                   {"ref_len", s.ref_length}});
    hyps.push_back(it.hyp);
    refs.push_back(it.ref);
  }
  nlohmann::ordered_json r;
  r["metric"] = metric;
  r["corpus_rate"] = corpus_rate(hyps, refs);
  r["per_utterance"] = std::move(per);
  return r;
}

}  // namespace seqslu
