#include <gtest/gtest.h>

#include <cmath>

#include "dtm/optim/optim.hpp"
#include "test_util.hpp"

using namespace dtm;
using dtm::testing::random_mat;

namespace {

// Independent scalar Adam with the same operation order as the documented
// update rule.
struct ScalarAdam {
  double m = 0, v = 0;
  long t = 0;
  double step(double p, double g, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * (g * g);
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
    return p - lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
  }
};

GradMap one(std::initializer_list<double> values) {
  Mat m(static_cast<Eigen::Index>(values.size()), 1);
  std::copy(values.begin(), values.end(), m.data());
  return {m};
}

}  // namespace

TEST(Clip, ScalesAboveThreshold) {
  GradMap g = one({0.3, 0.4});
  const auto r = clip_global_norm(g, {0.1});
  EXPECT_DOUBLE_EQ(r.pre_norm, 0.5);
  EXPECT_TRUE(r.clipped);
  EXPECT_NEAR(g[0](0, 0), 0.06, 1e-15);
  EXPECT_NEAR(g[0](1, 0), 0.08, 1e-15);
  EXPECT_LE(global_norm(g), 0.1);
}

TEST(Clip, UnderThresholdUnchanged) {
  GradMap g = one({0.03, 0.04});
  const GradMap before = g;
  const auto r = clip_global_norm(g, {0.1});
  EXPECT_FALSE(r.clipped);
  EXPECT_EQ(g[0], before[0]);
}

TEST(Clip, ZeroGradients) {
  GradMap g = one({0, 0, 0});
  EXPECT_EQ(clip_global_norm(g, {0.1}).pre_norm, 0.0);
  EXPECT_EQ(g[0], Mat::Zero(3, 1));
}

TEST(Clip, NonFiniteNamesParameter) {
  ParamSet ps;
  ps.add("first", Mat::Zero(1, 1));
  ps.add("second", Mat::Zero(2, 1));
  GradMap g = {Mat::Zero(1, 1), Mat::Constant(2, 1, NAN)};
  try {
    clip_global_norm(g, {0.1}, &ps);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("second"), std::string::npos);
  }
}

TEST(Clip, IdempotentDirectionPreservingAndBounded) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    GradMap g = {random_mat(rng, 3, 4, rng.uniform(0.001, 10.0)), random_mat(rng, 5, 1, rng.uniform(0.001, 10.0))};
    const GradMap original = g;
    const auto r = clip_global_norm(g, {0.1});
    if (r.pre_norm > 0.1) {
      EXPECT_LE(global_norm(g), 0.1);
      // positive multiple of the input
      const double k = g[0](0, 0) / original[0](0, 0);
      EXPECT_GT(k, 0);
      for (std::size_t t = 0; t < g.size(); ++t) {
        EXPECT_LT((g[t] - k * original[t]).cwiseAbs().maxCoeff(), 1e-12);
      }
    }
    GradMap again = g;
    clip_global_norm(again, {0.1});
    for (std::size_t t = 0; t < g.size(); ++t) EXPECT_EQ(again[t], g[t]);
  }
}

TEST(Adam, FirstStepMagnitude) {
  for (double g : {0.5, -3.0, 1e-3}) {
    ParamSet ps;
    ps.add("p", Mat::Constant(4, 1, 1.0));
    AdamState s = AdamState::zeros_like(ps);
    adam_step(ps, GradMap{Mat::Constant(4, 1, g)}, s, {}, 0.01);
    const double expect = 1.0 - 0.01 * g / (std::abs(g) + 1e-8);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(ps[0].value(i, 0), expect, 1e-15);
    EXPECT_EQ(s.step, 1);
  }
}

TEST(Adam, ZeroGradientNeverMoves) {
  ParamSet ps;
  ps.add("p", Mat::Constant(2, 3, 0.7));
  AdamState s = AdamState::zeros_like(ps);
  for (int i = 0; i < 50; ++i) adam_step(ps, GradMap{Mat::Zero(2, 3)}, s, {}, 0.1);
  EXPECT_EQ(ps[0].value, Mat::Constant(2, 3, 0.7));
  EXPECT_EQ(s.step, 50);
}

TEST(Adam, QuadraticTrajectoryMatchesScalarOracle) {
  ParamSet ps;
  ps.add("w", Mat::Constant(1, 1, 1.0));
  AdamState s = AdamState::zeros_like(ps);
  ScalarAdam oracle;
  double w = 1.0;
  for (int i = 0; i < 5; ++i) {
    const double g = 2.0 * ps[0].value(0, 0);
    adam_step(ps, GradMap{Mat::Constant(1, 1, g)}, s, {}, 0.1);
    w = oracle.step(w, 2.0 * w, 0.1);
    EXPECT_NEAR(ps[0].value(0, 0), w, 1e-12);
  }
}

TEST(Adam, ElementwiseEqualsScalarOracleExactly) {
  Rng rng(2);
  ParamSet ps;
  ps.add("a", random_mat(rng, 3, 3));
  ps.add("b", random_mat(rng, 4, 1));
  std::vector<std::vector<double>> p(2);
  std::vector<std::vector<ScalarAdam>> oracle(2);
  for (std::size_t t = 0; t < 2; ++t) {
    p[t].assign(ps[t].value.data(), ps[t].value.data() + ps[t].value.size());
    oracle[t].resize(p[t].size());
  }
  AdamState s = AdamState::zeros_like(ps);
  for (int step = 0; step < 30; ++step) {
    GradMap g = {random_mat(rng, 3, 3), random_mat(rng, 4, 1)};
    adam_step(ps, g, s, {}, 0.05);
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t i = 0; i < p[t].size(); ++i) {
        p[t][i] = oracle[t][i].step(p[t][i], g[t].data()[i], 0.05);
        ASSERT_EQ(ps[t].value.data()[i], p[t][i]);
      }
    }
  }
}

TEST(Adam, DeterministicAcrossRuns) {
  auto run = [] {
    Rng rng(3);
    ParamSet ps;
    ps.add("a", random_mat(rng, 5, 5));
    AdamState s = AdamState::zeros_like(ps);
    for (int i = 0; i < 20; ++i) adam_step(ps, GradMap{random_mat(rng, 5, 5)}, s, {}, 0.01);
    return ps[0].value;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ShapeMismatch) {
  ParamSet ps;
  ps.add("a", Mat::Zero(2, 2));
  AdamState s = AdamState::zeros_like(ps);
  EXPECT_THROW(adam_step(ps, GradMap{Mat::Zero(2, 3)}, s, {}, 0.1), ConfigError);
  EXPECT_THROW(adam_step(ps, GradMap{}, s, {}, 0.1), ConfigError);
  EXPECT_THROW(adam_step(ps, GradMap{Mat::Zero(2, 2)}, s, {}, 0.0), ConfigError);
}

TEST(OneCycle, Boundaries) {
  const OneCycleSchedule s{1e-3, 100, 0.3, 25, 1e4};
  EXPECT_EQ(onecycle_lr(0, s), 1e-3 / 25);
  EXPECT_EQ(s.peak_step(), 29);
  EXPECT_EQ(onecycle_lr(29, s), 1e-3);
  EXPECT_EQ(onecycle_lr(99, s), 1e-3 / 1e4);
}

TEST(OneCycle, MonotoneUpThenDown) {
  for (std::int64_t total : {7, 10, 33, 100, 1000}) {
    const OneCycleSchedule s{0.01, total, 0.3, 25, 1e4};
    const auto peak = s.peak_step();
    for (std::int64_t t = 1; t < total; ++t) {
      const double prev = onecycle_lr(t - 1, s), cur = onecycle_lr(t, s);
      EXPECT_GT(cur, 0);
      if (t <= peak) {
        EXPECT_GE(cur, prev) << t;
      } else {
        EXPECT_LE(cur, prev) << t;
      }
    }
  }
}

TEST(OneCycle, MidpointsAreCosineHalfway) {
  const OneCycleSchedule s{1.0, 201, 0.5, 10, 100};
  EXPECT_NEAR(onecycle_lr(50, s), 0.1 + 0.9 * 0.5, 1e-15);
  EXPECT_NEAR(onecycle_lr(150, s), 1.0 + (0.01 - 1.0) * 0.5, 1e-15);
}

TEST(OneCycle, OutOfRangeStep) {
  const OneCycleSchedule s{1e-3, 10};
  EXPECT_THROW(onecycle_lr(-1, s), ConfigError);
  EXPECT_THROW(onecycle_lr(10, s), ConfigError);
  EXPECT_THROW(onecycle_lr(0, OneCycleSchedule{1e-3, 10, 1.5}), ConfigError);
}
