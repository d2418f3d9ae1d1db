#pragma once

#include <vector>

#include "seqslu/autodiff.hpp"
#include "seqslu/rng.hpp"

namespace seqslu {

enum class Phase { kTrain, kEval };

inline constexpr double kLayerNormEps = 1e-5;

// All ops view their inputs as rows x cols (see Tensor::rows/cols).

template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
// a + broadcast of the length-cols vector b over rows.
template <typename T> Var<T> add_bias(const Var<T>& a, const Var<T>& b);
// x * w + b, with w of shape in x out.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> sigmoid(const Var<T>& a);

template <typename T> Var<T> log_softmax(const Var<T>& x);
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias,
                  double eps = kLayerNormEps);
// Inverted dropout: survivors are scaled by 1/(1-p) in training, identity in eval.
template <typename T> Var<T> dropout(const Var<T>& x, double p, Phase phase, Rng& rng);

template <typename T> Var<T> concat_cols(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> slice_cols(const Var<T>& a, int64_t begin, int64_t end);
template <typename T> Var<T> select_row(const Var<T>& a, int64_t r);
template <typename T> Var<T> stack_rows(const std::vector<Var<T>>& rows);

// x: T x Cin, w: Cout x Cin x K, b: Cout. Zero padding `pad` on both ends.
template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad);
int64_t conv1d_output_length(int64_t length, int kernel, int stride, int pad);

// One LSTM step. gates_in (r x 4H) already holds x*Wx + b; wh is H x 4H.
// Gate order i, f, g, o. Returns r x 2H laid out as [h | c].
template <typename T>
Var<T> lstm_cell(const Var<T>& gates_in, const Var<T>& h_prev, const Var<T>& c_prev,
                 const Var<T>& wh);

// Index of the row maximum; ties go to the lowest index.
template <typename T> int64_t argmax_row(const Tensor<T>& t, int64_t r);

}  // namespace seqslu
