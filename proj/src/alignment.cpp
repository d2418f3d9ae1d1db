#include "seqslu/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace seqslu {

RatioMap compute_ratio(int64_t output_length, int64_t input_length) {
  if (input_length < 1) throw std::invalid_argument("compute_ratio: input length must be >= 1");
  if (output_length < 0) throw std::invalid_argument("compute_ratio: output length must be >= 0");
  return {output_length, input_length,
          static_cast<double>(output_length) / static_cast<double>(input_length)};
}

int64_t map_position(int64_t i, double r, int64_t limit) {
  if (limit < 1) throw std::invalid_argument("map_position: empty target range");
  const auto p = static_cast<int64_t>(std::floor(static_cast<double>(i) * r));
  return std::clamp<int64_t>(p, 0, limit - 1);
}

int64_t map_position(int64_t i, const RatioMap& map, int64_t clamp_to) {
  if (clamp_to < 1) throw std::invalid_argument("map_position: empty target range");
  return std::clamp<int64_t>(i * map.output_length / map.input_length, 0, clamp_to - 1);
}

int64_t gold_feedback_index(int64_t t, int64_t output_length, int64_t input_length) {
  if (input_length < 1) throw std::invalid_argument("gold_feedback_index: no input frames");
  if (output_length < 1) return 0;
  return map_position(t, compute_ratio(output_length, input_length), output_length);
}

template <typename T>
Tensor<T> window_sum(const Tensor<T>& states, int64_t center, int64_t half_width) {
  const int64_t n = states.rows(), d = states.cols();
  if (center < 0 || center >= n) throw std::invalid_argument("window_sum: center out of range");
  if (half_width < 0) throw std::invalid_argument("window_sum: negative half width");
  Tensor<T> out({1, d});
  const int64_t lo = std::max<int64_t>(0, center - half_width);
  const int64_t hi = std::min<int64_t>(n - 1, center + half_width);
  for (int64_t j = lo; j <= hi; ++j)
    for (int64_t c = 0; c < d; ++c) out[c] += states(j, c);
  return out;
}

template <typename T>
Var<T> window_sum(const Var<T>& states, int64_t center, int64_t half_width) {
  Tensor<T> out = window_sum(states.value(), center, half_width);
  const int64_t lo = std::max<int64_t>(0, center - half_width);
  const int64_t hi = std::min<int64_t>(states.rows() - 1, center + half_width);
  return make_op<T>("window_sum", std::move(out), {states}, [lo, hi](Node<T>& n) {
    auto& g = n.parents[0]->grad_buffer();
    for (int64_t j = lo; j <= hi; ++j)
      for (int64_t c = 0; c < g.cols(); ++c) g(j, c) += n.grad[c];
  });
}

template <typename T>
Var<T> aligned_window_sum(const Var<T>& states, int64_t steps, int64_t half_width) {
  const int64_t n = states.rows(), d = states.cols();
  if (steps < 1) throw std::invalid_argument("aligned_window_sum: need at least one step");
  if (half_width < 0) throw std::invalid_argument("aligned_window_sum: negative half width");
  const RatioMap map = compute_ratio(n, steps);

  std::vector<std::pair<int64_t, int64_t>> ranges(static_cast<size_t>(steps));
  Tensor<T> out({steps, d});
  for (int64_t i = 0; i < steps; ++i) {
    const int64_t center = map_position(i, map, n);
    const int64_t lo = std::max<int64_t>(0, center - half_width);
    const int64_t hi = std::min<int64_t>(n - 1, center + half_width);
    ranges[static_cast<size_t>(i)] = {lo, hi};
    for (int64_t j = lo; j <= hi; ++j)
      for (int64_t c = 0; c < d; ++c) out(i, c) += states.value()(j, c);
  }
  return make_op<T>("aligned_window_sum", std::move(out), {states}, [ranges = std::move(ranges)](Node<T>& n) {
    auto& g = n.parents[0]->grad_buffer();
    for (size_t i = 0; i < ranges.size(); ++i) {
      const auto [lo, hi] = ranges[i];
      for (int64_t j = lo; j <= hi; ++j)
        for (int64_t c = 0; c < g.cols(); ++c) g(j, c) += n.grad(static_cast<int64_t>(i), c);
    }
  });
}

template Tensor<float> window_sum(const Tensor<float>&, int64_t, int64_t);
template Tensor<double> window_sum(const Tensor<double>&, int64_t, int64_t);
template Var<float> window_sum(const Var<float>&, int64_t, int64_t);
template Var<double> window_sum(const Var<double>&, int64_t, int64_t);
template Var<float> aligned_window_sum(const Var<float>&, int64_t, int64_t);
template Var<double> aligned_window_sum(const Var<double>&, int64_t, int64_t);

}  // namespace seqslu
