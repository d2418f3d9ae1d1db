#pragma once

#include <span>
#include <vector>

#include "seqslu/autodiff.hpp"
#include "seqslu/vocab.hpp"

namespace seqslu {

// CTC over a T x W matrix of frame log-probabilities (column kBlankId is the
// blank). Labels must lie in [0, W) and differ from kBlankId and kSosId.
template <typename T>
struct CtcResult {
  T loss;
  Tensor<T> grad;  // d loss / d logp, T x W
};

// Minimum number of frames that can carry `target`: one per label plus one
// blank between each pair of equal neighbours.
int64_t ctc_min_frames(std::span<const int> target);

// -log of the total probability of all alignments that collapse to `target`,
// via log-space forward-backward. Throws std::invalid_argument when the
// target does not fit in T frames or holds an invalid label.
template <typename T>
CtcResult<T> ctc_loss(const Tensor<T>& logp, std::span<const int> target);

// Differentiable form for the training graph; returns a scalar.
template <typename T>
Var<T> ctc_loss(const Var<T>& logp, std::span<const int> target);

// Merge adjacent repeats, then drop blanks.
std::vector<int> collapse(std::span<const int> frame_labels, int blank = kBlankId);

// Per-frame argmax (lowest index on ties) followed by collapse.
template <typename T>
std::vector<int> greedy_decode(const Tensor<T>& logp);

template <typename T>
std::vector<int> frame_argmax(const Tensor<T>& logp);

}  // namespace seqslu
