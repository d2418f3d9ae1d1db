#include <gtest/gtest.h>

#include <set>

#include "seqslu/alignment.hpp"
#include "seqslu/gradient_suite.hpp"
#include "seqslu/rng.hpp"

using namespace seqslu;

namespace {

Tensor<double> states(int64_t n, int64_t d, uint64_t seed) {
  Rng rng(seed);
  Tensor<double> h({n, d});
  for (auto& v : h.values()) v = rng.uniform(-1.0, 1.0);
  return h;
}

}  // namespace

TEST(Ratio, Examples) {
  EXPECT_DOUBLE_EQ(compute_ratio(10, 300).ratio, 1.0 / 30.0);
  EXPECT_DOUBLE_EQ(compute_ratio(7, 7).ratio, 1.0);
  EXPECT_DOUBLE_EQ(compute_ratio(0, 5).ratio, 0.0);
  EXPECT_THROW(compute_ratio(3, 0), std::invalid_argument);
}

TEST(MapPosition, Examples) {
  EXPECT_EQ(map_position(3, 0.1, 10), 0);
  EXPECT_EQ(map_position(299, compute_ratio(10, 300), 300), 9);
  EXPECT_EQ(map_position(299, 1.0 / 30.0, 300), 9);
  EXPECT_EQ(map_position(0, 0.77, 4), 0);
  EXPECT_EQ(map_position(100, 1.0, 4), 3);
}

TEST(MapPosition, InRangeAndMonotone) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t m = rng.uniform_int(0, 40), n = rng.uniform_int(1, 40);
    const RatioMap map = compute_ratio(m, n);
    int64_t prev = 0;
    for (int64_t i = 0; i < 60; ++i) {
      const int64_t p = map_position(i, map, n);
      EXPECT_GE(p, 0);
      EXPECT_LT(p, n);
      EXPECT_GE(p, prev);
      prev = p;
    }
  }
}

TEST(GoldFeedback, Examples) {
  EXPECT_EQ(gold_feedback_index(0, 10, 300), 0);
  EXPECT_EQ(gold_feedback_index(150, 10, 300), 5);
  for (int64_t t = 0; t < 12; ++t) EXPECT_EQ(gold_feedback_index(t, 12, 12), t);
  EXPECT_EQ(gold_feedback_index(299, 10, 300), 9);
}

TEST(GoldFeedback, SurjectiveWhenInputIsLonger) {
  for (int64_t n = 1; n < 30; ++n) {
    for (int64_t m = 1; m <= n; ++m) {
      std::set<int64_t> hit;
      for (int64_t t = 0; t < n; ++t) hit.insert(gold_feedback_index(t, m, n));
      EXPECT_EQ(static_cast<int64_t>(hit.size()), m) << m << "/" << n;
      EXPECT_EQ(*hit.rbegin(), m - 1);
    }
  }
}

TEST(WindowSum, Examples) {
  const Tensor<double> h = states(5, 3, 2);
  EXPECT_EQ(window_sum(h, 2, 0), Tensor<double>({1, 3}, std::vector<double>(h.row(2).begin(), h.row(2).end())));
  const Tensor<double> edge = window_sum(h, 0, 1);
  const Tensor<double> full = window_sum(h, 3, 7);
  for (int64_t c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(edge[c], h(0, c) + h(1, c));
    double col = 0.0;
    for (int64_t r = 0; r < 5; ++r) col += h(r, c);
    EXPECT_NEAR(full[c], col, 1e-12);
  }
  EXPECT_THROW(window_sum(h, 5, 1), std::invalid_argument);
  EXPECT_THROW(window_sum(h, 0, -1), std::invalid_argument);
}

TEST(WindowSum, MatchesDirectSummation) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int64_t n = rng.uniform_int(1, 9);
    const Tensor<double> h = states(n, 2, trial);
    const int64_t steps = rng.uniform_int(1, 12), w = rng.uniform_int(0, 2);
    const Tensor<double> got = aligned_window_sum(constant(h), steps, w).value();
    ASSERT_EQ(got.shape(), (Shape{steps, 2}));
    for (int64_t i = 0; i < steps; ++i) {
      const int64_t center = std::min(n - 1, i * n / steps);
      for (int64_t c = 0; c < 2; ++c) {
        double s = 0.0;
        for (int64_t j = std::max<int64_t>(0, center - w); j <= std::min(n - 1, center + w); ++j) s += h(j, c);
        EXPECT_NEAR(got(i, c), s, 1e-12);
      }
    }
  }
}

TEST(WindowSum, GradientChecks) {
  for (uint64_t s = 0; s < 20; ++s) {
    EXPECT_TRUE(run_gradient_case("window_sum", derive_seed(9, s)).report.pass);
    EXPECT_TRUE(run_gradient_case("aligned_window_sum", derive_seed(9, s)).report.pass);
  }
}
