#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "dtm/core/dense.hpp"
#include "dtm/core/tape.hpp"
#include "test_util.hpp"

using namespace dtm;
using dtm::testing::central_diff;
using dtm::testing::max_rel_err;
using dtm::testing::random_mat;
using dtm::testing::random_vec;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

}  // namespace

TEST(Linear, IdentityWeights) {
  Mat W(2, 2);
  W << 1, 0, 0, 1;
  EXPECT_EQ(linear_forward<double>(vec({1, 2}), W, vec({0, 0})), vec({1, 2}));
}

TEST(Linear, HandArithmetic) {
  Mat W(1, 2);
  W << 2, 3;
  EXPECT_EQ(linear_forward<double>(vec({1, 1}), W, vec({-1})), vec({4}));
}

TEST(Linear, ZeroInputReturnsBias) {
  Rng rng(1);
  EXPECT_EQ(linear_forward<double>(vec({0, 0}), random_mat(rng, 2, 2), vec({5, 7})), vec({5, 7}));
}

TEST(Linear, ShapeMismatchNamesBothShapes) {
  Mat W(2, 3);
  W.setZero();
  try {
    linear_forward<double>(vec({1, 2}), W, vec({0, 0}));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("(2x3)"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("(2x1)"), std::string::npos);
  }
}

TEST(Linear, WorksForLongDouble) {
  DenseMat<long double> W(1, 2);
  W << 2, 3;
  DenseVec<long double> x(2), b(1);
  x << 1, 1;
  b << -1;
  EXPECT_EQ(linear_forward<long double>(x, W, b)[0], 4.0L);
}

TEST(OuterFlatten, HandArithmetic) { EXPECT_EQ(outer_flatten<double>(vec({1, 2}), vec({3, 4})), vec({3, 4, 6, 8})); }

TEST(OuterFlatten, BasisVectors) {
  EXPECT_EQ(outer_flatten<double>(vec({1, 0}), vec({1, 0})), vec({1, 0, 0, 0}));
}

TEST(OuterFlatten, SquaredLength) {
  Rng rng(2);
  EXPECT_EQ(outer_flatten<double>(random_vec(rng, 16), random_vec(rng, 16)).size(), 256);
}

TEST(OuterFlatten, LengthMismatch) {
  EXPECT_THROW(outer_flatten<double>(vec({1, 2}), vec({1})), ConfigError);
}

TEST(OuterFlatten, SwapIsIndexTranspose) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(9));
    const Vec u = random_vec(rng, d), v = random_vec(rng, d);
    const Vec uv = outer_flatten<double>(u, v), vu = outer_flatten<double>(v, u);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) EXPECT_EQ(uv[i * d + j], vu[j * d + i]);
    }
    std::vector<double> a(uv.data(), uv.data() + uv.size()), b(vu.data(), vu.data() + vu.size());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

TEST(LayerNorm, ConstantInputIsZero) {
  const Vec y = layernorm_forward<double>(vec({5, 5, 5}), Vec::Ones(3), Vec::Zero(3), 1e-5);
  EXPECT_EQ(y, Vec::Zero(3));
}

TEST(LayerNorm, AlreadyStandardized) {
  const Vec y = layernorm_forward<double>(vec({1, -1}), Vec::Ones(2), Vec::Zero(2), 1e-14);
  EXPECT_NEAR(y[0], 1.0, 1e-12);
  EXPECT_NEAR(y[1], -1.0, 1e-12);
}

TEST(LayerNorm, FormulaOracleWithBeta) {
  // mean 2, population variance 2/3
  const double s = std::sqrt(2.0 / 3.0 + 1e-5);
  const Vec y = layernorm_forward<double>(vec({1, 2, 3}), Vec::Ones(3), Vec::Ones(3), 1e-5);
  EXPECT_DOUBLE_EQ(y[0], -1.0 / s + 1.0);
  EXPECT_DOUBLE_EQ(y[1], 1.0);
  EXPECT_DOUBLE_EQ(y[2], 1.0 / s + 1.0);
}

TEST(LayerNorm, CoreHasZeroMeanUnitVariance) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec x = random_vec(rng, 2 + static_cast<Eigen::Index>(rng.below(30)), 3.0);
    const Vec core = layernorm_core<double>(x, 1e-12).core;
    const double mean = core.mean();
    const double var = (core.array() - mean).square().mean();
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_LE(var, 1.0);
    EXPECT_GE(var, 1.0 - 1e-6);
  }
}

TEST(LayerNorm, CoreIsOdd) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec x = random_vec(rng, 8);
    const Vec a = layernorm_core<double>(x, 1e-5).core;
    const Vec b = layernorm_core<double>(Vec(-x), 1e-5).core;
    EXPECT_LT((a + b).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Concat, LaysPartsEndToEnd) {
  EXPECT_EQ(concat<double>({vec({1}), vec({2, 3})}), vec({1, 2, 3}));
  EXPECT_EQ(concat<double>({vec({4, 5})}), vec({4, 5}));
  Rng rng(6);
  EXPECT_EQ(concat<double>({random_vec(rng, 8), random_vec(rng, 8)}).size(), 16);
}

TEST(Concat, EmptyListRejected) {
  EXPECT_THROW(concat<double>(std::span<const Vec>()), ConfigError);
}

TEST(Concat, PreservesEntriesAndOrder) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec> parts;
    Eigen::Index total = 0;
    for (int k = 0; k < 1 + static_cast<int>(rng.below(5)); ++k) {
      parts.push_back(random_vec(rng, 1 + static_cast<Eigen::Index>(rng.below(6))));
      total += parts.back().size();
    }
    const Vec out = concat<double>(std::span<const Vec>(parts));
    ASSERT_EQ(out.size(), total);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      EXPECT_EQ(out.segment(at, p.size()), p);
      at += p.size();
    }
  }
}

// ---------------------------------------------------------------------------
// Kernel gradients vs central differences

class KernelGradients : public ::testing::TestWithParam<std::tuple<int, int>> {};

TEST_P(KernelGradients, LinearMatchesFiniteDifferences) {
  const auto [d, seed] = GetParam();
  Rng rng(static_cast<std::uint64_t>(seed));
  Vec x = random_vec(rng, d), b = random_vec(rng, d + 1), r = random_vec(rng, d + 1);
  Mat W = random_mat(rng, d + 1, d);
  auto f = [&] { return r.dot(linear_forward<double>(x, W, b)); };
  const auto g = linear_backward<double>(x, W, r);
  EXPECT_LT(max_rel_err(g.x, central_diff(x, f)), 1e-4);
  EXPECT_LT(max_rel_err(g.W, central_diff(W, f)), 1e-4);
  EXPECT_LT(max_rel_err(g.b, central_diff(b, f)), 1e-4);
}

TEST_P(KernelGradients, OuterMatchesFiniteDifferences) {
  const auto [d, seed] = GetParam();
  Rng rng(static_cast<std::uint64_t>(seed) + 100);
  Vec u = random_vec(rng, d), v = random_vec(rng, d), r = random_vec(rng, d * d);
  auto f = [&] { return r.dot(outer_flatten<double>(u, v)); };
  const auto [gu, gv] = outer_flatten_backward<double>(u, v, r);
  EXPECT_LT(max_rel_err(gu, central_diff(u, f)), 1e-4);
  EXPECT_LT(max_rel_err(gv, central_diff(v, f)), 1e-4);
}

TEST_P(KernelGradients, LayerNormMatchesFiniteDifferences) {
  const auto [d, seed] = GetParam();
  Rng rng(static_cast<std::uint64_t>(seed) + 200);
  Vec x = random_vec(rng, d), gamma = random_vec(rng, d), beta = random_vec(rng, d),
      r = random_vec(rng, d);
  auto f = [&] { return r.dot(layernorm_forward<double>(x, gamma, beta, 1e-5)); };
  const auto g = layernorm_backward<double>(layernorm_core<double>(x, 1e-5), gamma, r);
  EXPECT_LT(max_rel_err(g.x, central_diff(x, f)), 1e-4);
  EXPECT_LT(max_rel_err(g.gamma, central_diff(gamma, f)), 1e-4);
  EXPECT_LT(max_rel_err(g.beta, central_diff(beta, f)), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Dims, KernelGradients,
                         ::testing::Combine(::testing::Values(3, 8, 16), ::testing::Range(0, 5)));

// ---------------------------------------------------------------------------
// Tape

TEST(Tape, ChainRuleHandExample) {
  // loss = (w x)^2 at w = 3, x = 2 -> dloss/dw = 2 (6)(2) = 24
  ParamSet params;
  const ParamId w = params.add_vector("w", vec({3}));
  Tape tape(params);
  const NodeId x = tape.input(vec({2}));
  const NodeId loss = tape.squared_error(tape.mul_scalar(x, tape.param(w)), 0.0);
  EXPECT_EQ(tape.scalar(loss), 36.0);
  const auto g = tape.backward(loss);
  EXPECT_EQ(g.params[w.index](0, 0), 24.0);
  EXPECT_EQ(g.wrt(x)[0], 36.0);
}

TEST(Tape, UntouchedParameterGetsZero) {
  ParamSet params;
  const ParamId used = params.add_vector("used", vec({1, 2}));
  const ParamId unused = params.add("unused", Mat::Ones(3, 4));
  Tape tape(params);
  const NodeId loss = tape.squared_error(tape.param(used), 1.0);
  const auto g = tape.backward(loss);
  ASSERT_EQ(g.params.size(), 2u);
  EXPECT_EQ(g.params[unused.index], Mat::Zero(3, 4));
}

TEST(Tape, BackwardBeforeForwardIsStateError) {
  ParamSet params;
  Tape tape(params);
  EXPECT_THROW(tape.backward(NodeId{0}), StateError);
}

TEST(Tape, BackwardNeedsScalarOutput) {
  ParamSet params;
  Tape tape(params);
  const NodeId x = tape.input(vec({1, 2}));
  EXPECT_THROW(tape.backward(x), StateError);
}

// A graph exercising every primitive; gradients w.r.t. parameters and inputs
// vs central differences.
TEST(Tape, ComposedGraphMatchesFiniteDifferences) {
  for (int d : {3, 8, 16}) {
    for (int seed = 0; seed < 5; ++seed) {
      Rng rng(static_cast<std::uint64_t>(1000 + seed * 7 + d));
      ParamSet params;
      const ParamId W = params.add("W", random_mat(rng, d, d * d, 0.3));
      const ParamId bW = params.add_vector("bW", random_vec(rng, d));
      const ParamId g1 = params.add_vector("g1", random_vec(rng, d));
      const ParamId b1 = params.add_vector("b1", random_vec(rng, d));
      const ParamId s = params.add_vector("s", random_vec(rng, 1));
      const ParamId N = params.add("N", random_mat(rng, 1, 2 * d));
      const ParamId nb = params.add_vector("nb", random_vec(rng, 1));
      Vec u = random_vec(rng, d), v = random_vec(rng, d);

      NodeId u_node{}, v_node{};
      auto build = [&](Tape& t) {
        u_node = t.input(u);
        v_node = t.input(v);
        const NodeId h = t.linear(t.outer_flatten(u_node, v_node), W, bW);
        const NodeId ln = t.layernorm(t.sub(u_node, v_node), g1, b1, 1e-5);
        const NodeId mixed = t.add(t.mul_scalar(h, t.param(s)), t.scale(ln, 0.7));
        const NodeId parts[] = {mixed, ln};
        const NodeId y = t.linear(t.concat(parts), N, nb);
        return t.scale(t.squared_error(y, 0.3), 0.5);
      };
      Tape tape(params);
      const auto g = tape.backward(build(tape));
      auto f = [&] {
        Tape t(params);
        return t.scalar(build(t));
      };
      for (std::size_t p = 0; p < params.size(); ++p) {
        EXPECT_LT(max_rel_err(g.params[p], central_diff(params[p].value, f)), 1e-4)
            << params[p].name << " d=" << d << " seed=" << seed;
      }
      EXPECT_LT(max_rel_err(g.wrt(u_node), central_diff(u, f)), 1e-4);
      EXPECT_LT(max_rel_err(g.wrt(v_node), central_diff(v, f)), 1e-4);
    }
  }
}
