#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dtm/error.hpp"
#include "dtm/metrics/metrics.hpp"
#include "dtm/util/rng.hpp"

using namespace dtm;

namespace {

// textbook two-pass formulas
struct Oracle {
  real r, mae, rmse;
};

Oracle oracle(const std::vector<real>& p, const std::vector<real>& t) {
  const real n = static_cast<real>(p.size());
  real mp = 0, mt = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i];
    mt += t[i];
  }
  mp /= n;
  mt /= n;
  real sxy = 0, sxx = 0, syy = 0, abs = 0, sq = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sxy += (p[i] - mp) * (t[i] - mt);
    sxx += (p[i] - mp) * (p[i] - mp);
    syy += (t[i] - mt) * (t[i] - mt);
    abs += std::fabs(p[i] - t[i]);
    sq += (p[i] - t[i]) * (p[i] - t[i]);
  }
  return {sxy / std::sqrt(sxx * syy), abs / n, std::sqrt(sq / n)};
}

}  // namespace

TEST(Metrics, Examples) {
  const std::vector<real> a{1, 3}, b{2, 2};
  EXPECT_EQ(mae(a, b), 1.0);
  const std::vector<real> z{0, 0}, c{3, 4};
  EXPECT_DOUBLE_EQ(rmse(z, c), std::sqrt(12.5));
  const std::vector<real> x{1, 2, 3}, y{2, 4, 6}, yn{-1, -2, -3};
  EXPECT_DOUBLE_EQ(pearson(x, y), 1.0);
  EXPECT_DOUBLE_EQ(pearson(x, yn), -1.0);
}

TEST(Metrics, MatchesOracle) {
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<real> p(n), l(n);
    for (std::size_t i = 0; i < n; ++i) {
      l[i] = 3 * rng.normal();
      p[i] = 0.5 * l[i] + rng.normal();
    }
    const auto o = oracle(p, l);
    const auto m = evaluate_metrics(p, l);
    EXPECT_NEAR(m.r, o.r, 1e-12);
    EXPECT_NEAR(m.mae, o.mae, 1e-12);
    EXPECT_NEAR(m.rmse, o.rmse, 1e-12);
    EXPECT_EQ(m.n, n);
    EXPECT_GE(m.rmse, m.mae - 1e-15);
    EXPECT_LE(std::fabs(m.r), 1.0);
  }
}

TEST(Metrics, PearsonAffineInvariant) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<real> p(20), l(20), q(20);
    for (int i = 0; i < 20; ++i) {
      p[i] = rng.normal();
      l[i] = rng.normal() + p[i];
    }
    const real a = rng.uniform(0.1, 10), b = rng.uniform(-5, 5);
    for (int i = 0; i < 20; ++i) q[i] = a * p[i] + b;
    EXPECT_NEAR(pearson(q, l), pearson(p, l), 1e-12);
    for (int i = 0; i < 20; ++i) q[i] = -a * p[i] + b;
    EXPECT_NEAR(pearson(q, l), -pearson(p, l), 1e-12);
  }
}

TEST(Metrics, Errors) {
  const std::vector<real> c{2, 2, 2}, v{1, 2, 3}, one{1}, two{1, 2};
  EXPECT_THROW(pearson(c, v), NumericError);
  EXPECT_THROW(pearson(v, c), NumericError);
  EXPECT_THROW(pearson(one, one), ConfigError);
  EXPECT_THROW(mae(v, two), ConfigError);
}

TEST(Metrics, Formatting) {
  const MetricsReport m{0.5, 1.25, 2.0, 10};
  EXPECT_EQ(format_kv(m), "n=10 r=0.5 mae=1.25 rmse=2\n");
  const auto row = format_table(m, "test");
  EXPECT_NE(row.find("0.500"), std::string::npos) << row;
}
