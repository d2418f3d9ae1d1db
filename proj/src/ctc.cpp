#include "seqslu/ctc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "seqslu/ops.hpp"

namespace seqslu {
namespace {

template <typename T>
T log_add(T a, T b) {
  constexpr T kNegInf = -std::numeric_limits<T>::infinity();
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

}  // namespace

int64_t ctc_min_frames(std::span<const int> target) {
  int64_t need = static_cast<int64_t>(target.size());
  for (size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++need;
  return need;
}

template <typename T>
CtcResult<T> ctc_loss(const Tensor<T>& logp, std::span<const int> target) {
  constexpr T kNegInf = -std::numeric_limits<T>::infinity();
  const int64_t frames = logp.rows();
  const int64_t width = logp.cols();
  if (frames < 1) throw std::invalid_argument("ctc_loss: no frames");
  for (int label : target) {
    if (label < 0 || label >= width || label == kBlankId || label == kSosId) {
      throw std::invalid_argument("ctc_loss: label " + std::to_string(label) + " is not an output symbol");
    }
  }
  if (ctc_min_frames(target) > frames) {
    throw std::invalid_argument("ctc_loss: target of length " + std::to_string(target.size()) + " needs " +
                                std::to_string(ctc_min_frames(target)) + " frames, have " +
                                std::to_string(frames));
  }

  // Extended sequence: blank, l1, blank, l2, ..., blank.
  const int64_t states = 2 * static_cast<int64_t>(target.size()) + 1;
  auto label_at = [&](int64_t s) { return s % 2 == 0 ? kBlankId : target[static_cast<size_t>(s / 2)]; };
  auto can_skip = [&](int64_t s) { return s >= 2 && s % 2 == 1 && label_at(s) != label_at(s - 2); };

  Tensor<T> alpha({frames, states}, kNegInf);
  Tensor<T> beta({frames, states}, kNegInf);
  alpha(0, 0) = logp(0, kBlankId);
  if (states > 1) alpha(0, 1) = logp(0, label_at(1));
  for (int64_t t = 1; t < frames; ++t) {
    for (int64_t s = 0; s < states; ++s) {
      T a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = log_add(a, alpha(t - 1, s - 2));
      if (a != kNegInf) alpha(t, s) = a + logp(t, label_at(s));
    }
  }
  beta(frames - 1, states - 1) = logp(frames - 1, kBlankId);
  if (states > 1) beta(frames - 1, states - 2) = logp(frames - 1, label_at(states - 2));
  for (int64_t t = frames - 2; t >= 0; --t) {
    for (int64_t s = 0; s < states; ++s) {
      T b = beta(t + 1, s);
      if (s + 1 < states) b = log_add(b, beta(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) b = log_add(b, beta(t + 1, s + 2));
      if (b != kNegInf) beta(t, s) = b + logp(t, label_at(s));
    }
  }

  T log_total = alpha(frames - 1, states - 1);
  if (states > 1) log_total = log_add(log_total, alpha(frames - 1, states - 2));

  CtcResult<T> res{-log_total, Tensor<T>({frames, width})};
  // d(-log P)/d logp[t][k] = -sum_{s: l'_s = k} alpha_t(s) beta_t(s) / (P * p_t(k)).
  for (int64_t t = 0; t < frames; ++t) {
    for (int64_t s = 0; s < states; ++s) {
      const int k = label_at(s);
      const T lg = alpha(t, s) + beta(t, s) - logp(t, k) - log_total;
      if (alpha(t, s) != kNegInf && beta(t, s) != kNegInf) res.grad(t, k) -= std::exp(lg);
    }
  }
  return res;
}

template <typename T>
Var<T> ctc_loss(const Var<T>& logp, std::span<const int> target) {
  CtcResult<T> r = ctc_loss(logp.value(), target);
  return make_op<T>("ctc_loss", Tensor<T>({1}, std::vector<T>{r.loss}), {logp},
                    [grad = std::move(r.grad)](Node<T>& n) {
                      auto& g = n.parents[0]->grad_buffer();
                      const T d = n.grad[0];
                      for (int64_t i = 0; i < g.size(); ++i) g[i] += d * grad[i];
                    });
}

std::vector<int> collapse(std::span<const int> frame_labels, int blank) {
  std::vector<int> out;
  for (size_t i = 0; i < frame_labels.size(); ++i) {
    if (i > 0 && frame_labels[i] == frame_labels[i - 1]) continue;
    if (frame_labels[i] != blank) out.push_back(frame_labels[i]);
  }
  return out;
}

template <typename T>
std::vector<int> frame_argmax(const Tensor<T>& logp) {
  std::vector<int> best(static_cast<size_t>(logp.rows()));
  for (int64_t t = 0; t < logp.rows(); ++t) best[static_cast<size_t>(t)] = static_cast<int>(argmax_row(logp, t));
  return best;
}

template <typename T>
std::vector<int> greedy_decode(const Tensor<T>& logp) {
  return collapse(frame_argmax(logp));
}

template CtcResult<float> ctc_loss(const Tensor<float>&, std::span<const int>);
template CtcResult<double> ctc_loss(const Tensor<double>&, std::span<const int>);
template Var<float> ctc_loss(const Var<float>&, std::span<const int>);
template Var<double> ctc_loss(const Var<double>&, std::span<const int>);
template std::vector<int> greedy_decode(const Tensor<float>&);
template std::vector<int> greedy_decode(const Tensor<double>&);
template std::vector<int> frame_argmax(const Tensor<float>&);
template std::vector<int> frame_argmax(const Tensor<double>&);

}  // namespace seqslu
