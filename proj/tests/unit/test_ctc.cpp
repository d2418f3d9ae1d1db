#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "seqslu/ctc.hpp"
#include "seqslu/grad_check.hpp"
#include "seqslu/gradient_suite.hpp"
#include "seqslu/ops.hpp"
#include "seqslu/rng.hpp"

using namespace seqslu;

namespace {

Tensor<double> random_logp(int64_t frames, int64_t width, Rng& rng) {
  Tensor<double> x({frames, width});
  for (auto& v : x.values()) v = rng.uniform(-3.0, 3.0);
  return log_softmax(constant(x)).value();
}

// Labels in [2, width) so that neither BLANK nor SOS appear.
std::vector<int> random_target(Rng& rng, int64_t max_len, int64_t width, int64_t frames) {
  for (;;) {
    std::vector<int> t;
    const int64_t len = rng.uniform_int(0, max_len);
    for (int64_t i = 0; i < len; ++i) t.push_back(static_cast<int>(rng.uniform_int(2, width - 1)));
    if (ctc_min_frames(t) <= frames) return t;
  }
}

}  // namespace

TEST(Ctc, SingleFrameSingleLabel) {
  Rng rng(1);
  const Tensor<double> lp = random_logp(1, 4, rng);
  EXPECT_NEAR(ctc_loss(lp, std::vector<int>{2}).loss, -lp(0, 2), 1e-12);
}

TEST(Ctc, TwoFramesThreeAlignments) {
  Rng rng(2);
  const Tensor<double> lp = random_logp(2, 4, rng);
  auto p = [&](int t, int k) { return std::exp(lp(t, k)); };
  const double expected = -std::log(p(0, 2) * p(1, 2) + p(0, 2) * p(1, 0) + p(0, 0) * p(1, 2));
  EXPECT_NEAR(ctc_loss(lp, std::vector<int>{2}).loss, expected, 1e-12);
}

TEST(Ctc, MatchesBruteForce) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const int64_t frames = rng.uniform_int(1, 6);
    const int64_t width = rng.uniform_int(3, 5);  // BLANK, SOS and 1..3 labels
    const Tensor<double> lp = random_logp(frames, width, rng);
    const std::vector<int> target = random_target(rng, 3, width, frames);
    const double loss = ctc_loss(lp, target).loss;
    EXPECT_NEAR(loss, oracle::ctc_brute_force(lp, target), 1e-8);
    EXPECT_GE(loss, 0.0);
  }
}

TEST(Ctc, MinFrames) {
  EXPECT_EQ(ctc_min_frames(std::vector<int>{}), 0);
  EXPECT_EQ(ctc_min_frames(std::vector<int>{2, 2, 3}), 4);
  EXPECT_EQ(ctc_min_frames(std::vector<int>{2, 3, 2}), 3);
}

TEST(Ctc, Errors) {
  Rng rng(4);
  const Tensor<double> lp = random_logp(2, 4, rng);
  EXPECT_THROW(ctc_loss(lp, std::vector<int>{2, 2}), std::invalid_argument);
  EXPECT_THROW(ctc_loss(lp, std::vector<int>{4}), std::invalid_argument);
  EXPECT_THROW(ctc_loss(lp, std::vector<int>{0}), std::invalid_argument);
  EXPECT_THROW(ctc_loss(lp, std::vector<int>{kSosId}), std::invalid_argument);
}

TEST(Ctc, ConcentratingMassLowersTheLoss) {
  // Frames 0..3 moving toward the single alignment [2, 0, 3, 3] of target [2, 3].
  const std::vector<int> path{2, 0, 3, 3};
  double prev = std::numeric_limits<double>::infinity();
  for (double sharp : {0.0, 1.0, 2.0, 4.0, 8.0}) {
    Tensor<double> x({4, 4}, 0.0);
    for (int64_t t = 0; t < 4; ++t) x(t, path[static_cast<size_t>(t)]) = sharp;
    const double loss = ctc_loss(log_softmax(constant(x)).value(), std::vector<int>{2, 3}).loss;
    EXPECT_LT(loss, prev);
    prev = loss;
  }
}

TEST(Ctc, GradientPassesFiniteDifferences) {
  for (uint64_t s = 0; s < 20; ++s) {
    const GradientCase c = run_gradient_case("ctc_loss", derive_seed(5, s));
    EXPECT_TRUE(c.report.pass) << c.report.max_rel_error;
  }
}

TEST(Ctc, GradientOfLogpMatchesDifferences) {
  Rng rng(6);
  const Tensor<double> lp = random_logp(5, 4, rng);
  const std::vector<int> target{2, 3};
  auto p = parameter(lp);
  auto r = grad_check([=] { return ctc_loss(p, target); }, {{"logp", p}});
  EXPECT_TRUE(r.pass) << r.max_rel_error;
}

TEST(Collapse, Rules) {
  EXPECT_EQ(collapse(std::vector<int>{2, 2, 0, 2, 3, 0, 3}), (std::vector<int>{2, 2, 3, 3}));
  EXPECT_TRUE(collapse(std::vector<int>{0, 0, 0}).empty());
  EXPECT_EQ(collapse(std::vector<int>{2, 3, 4}), (std::vector<int>{2, 3, 4}));
}

TEST(Collapse, IdempotentOnItsOutputWithoutRepeats) {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    std::vector<int> frames;
    for (int t = 0; t < 10; ++t) frames.push_back(static_cast<int>(rng.uniform_int(0, 3)));
    const std::vector<int> once = collapse(frames);
    std::vector<int> merged;
    for (int v : once)
      if (merged.empty() || merged.back() != v) merged.push_back(v);
    EXPECT_EQ(collapse(merged), merged);
  }
}

TEST(GreedyDecode, Examples) {
  Tensor<double> x({4, 4}, 0.0);
  const int peaks[] = {2, 2, 0, 3};
  for (int t = 0; t < 4; ++t) x(t, peaks[t]) = 5.0;
  EXPECT_EQ(greedy_decode(log_softmax(constant(x)).value()), (std::vector<int>{2, 3}));
  EXPECT_TRUE(greedy_decode(log_softmax(constant(Tensor<double>({3, 4}, 0.0))).value()).empty());
}

TEST(GreedyDecode, MatchesArgmaxPathOracle) {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const Tensor<double> lp = random_logp(8, 5, rng);
    std::vector<int> expected;
    int prev = -1;
    for (int64_t t = 0; t < 8; ++t) {
      int best = 0;
      for (int k = 1; k < 5; ++k)
        if (lp(t, k) > lp(t, best)) best = k;
      if (best != prev && best != 0) expected.push_back(best);
      prev = best;
    }
    EXPECT_EQ(greedy_decode(lp), expected);
  }
}
