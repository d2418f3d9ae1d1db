#pragma once

#include <cstdint>

#include "seqslu/autodiff.hpp"

namespace seqslu {

// Length ratio between an output sequence (M items) and an input sequence
// (N encoder frames), r = M / N.
struct RatioMap {
  int64_t output_length = 0;  // M
  int64_t input_length = 1;   // N
  double ratio = 0.0;
};

// Throws std::invalid_argument when N < 1 or M < 0.
RatioMap compute_ratio(int64_t output_length, int64_t input_length);

// floor(i * r) clamped to [0, limit - 1].
int64_t map_position(int64_t i, double r, int64_t limit);
// Exact-integer form: floor(i * M / N) clamped to [0, clamp_to - 1].
int64_t map_position(int64_t i, const RatioMap& map, int64_t clamp_to);

// Gold item considered current at frame t: clamp(floor(t * M / N), 0, M - 1).
// The decoder is fed the item before it (SOS for index 0).
int64_t gold_feedback_index(int64_t t, int64_t output_length, int64_t input_length);

// Sum of rows [max(0, center - w), min(N - 1, center + w)] of H (N x d).
template <typename T>
Tensor<T> window_sum(const Tensor<T>& states, int64_t center, int64_t half_width);
template <typename T>
Var<T> window_sum(const Var<T>& states, int64_t center, int64_t half_width);

// Stacks, for each of `steps` decoding positions i, the window sum of
// `states` (N x d) around floor(i * N / steps). Returns steps x d.
template <typename T>
Var<T> aligned_window_sum(const Var<T>& states, int64_t steps, int64_t half_width);

}  // namespace seqslu
