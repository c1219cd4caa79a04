#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "imda/alpha_solver.hpp"
#include "imda/error.hpp"
#include "imda/optimizer.hpp"
#include "test_util.hpp"

namespace imda {
namespace {

double objective_value(const std::vector<double>& c, double lambda, const std::vector<double>& a,
                       const std::vector<double>& m) {
  double lin = 0, reg = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    lin += a[i] * c[i];
    reg += a[i] * a[i] / m[i];
  }
  return lin + lambda * std::sqrt(reg);
}

// Ternary search on the segment; the objective is convex.
double two_source_minimum(const std::vector<double>& c, double lambda, const std::vector<double>& m) {
  double lo = 0, hi = 1;
  for (int it = 0; it < 200; ++it) {
    const double a = lo + (hi - lo) / 3, b = hi - (hi - lo) / 3;
    if (objective_value(c, lambda, {a, 1 - a}, m) < objective_value(c, lambda, {b, 1 - b}, m)) hi = b;
    else lo = a;
  }
  const double x = 0.5 * (lo + hi);
  return objective_value(c, lambda, {x, 1 - x}, m);
}

TEST(AlphaSolver, ProjectionKnownPoints) {
  EXPECT_EQ(simplex_project(std::vector<double>{0.5, 0.5}), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(simplex_project(std::vector<double>{2.0, 0.0}), (std::vector<double>{1.0, 0.0}));
  // Shift every coordinate by (1 - 0.6) / 3.
  const auto p = simplex_project(std::vector<double>{0.3, 0.3, 0.0});
  EXPECT_NEAR(p[0], 0.3 + 0.4 / 3, 1e-15);
  EXPECT_NEAR(p[2], 0.4 / 3, 1e-15);
  const auto q = simplex_project(std::vector<double>{0.9, 0.9, -2.0});
  EXPECT_NEAR(q[0], 0.5, 1e-15);
  EXPECT_EQ(q[2], 0.0);
}

TEST(AlphaSolver, ProjectionIsNearestPoint) {
  Rng rng = make_stream(1, {40});
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(3);
    for (double& v : x) v = n(rng);
    const auto p = simplex_project(x);
    ASSERT_TRUE(on_simplex(p));
    double dp = 0;
    for (int i = 0; i < 3; ++i) dp += std::pow(x[i] - p[i], 2);
    // No random simplex point is closer.
    for (int k = 0; k < 50; ++k) {
      std::vector<double> q = {-std::log(u(rng)), -std::log(u(rng)), -std::log(u(rng))};
      const double s = q[0] + q[1] + q[2];
      double dq = 0;
      for (int i = 0; i < 3; ++i) dq += std::pow(x[i] - q[i] / s, 2);
      EXPECT_LE(dp, dq + 1e-12);
    }
  }
}

TEST(AlphaSolver, RegularizerAloneGivesSizeProportionalWeights) {
  const std::vector<double> m = {100, 300};
  const AlphaObjective f{{0.0, 0.0}, 1.0};
  const auto a = solve_alpha(f, m);
  EXPECT_NEAR(a[0], 0.25, 1e-6);
  EXPECT_NEAR(a[1], 0.75, 1e-6);
}

TEST(AlphaSolver, NoRegularizerPicksLowestRisk) {
  const std::vector<double> m = {10, 10, 10};
  const auto a = solve_alpha(AlphaObjective{{0.5, 0.2, 0.9}, 0.0}, m);
  EXPECT_NEAR(a[1], 1.0, 1e-9);
}

TEST(AlphaSolver, MatchesTernarySearchOnTwoSources) {
  Rng rng = make_stream(2, {40});
  std::uniform_real_distribution<double> c(-1, 1), lam(0, 3), msz(10, 1000);
  for (int t = 0; t < 200; ++t) {
    const std::vector<double> lin = {c(rng), c(rng)};
    const double lambda = lam(rng);
    const std::vector<double> m = {msz(rng), msz(rng)};
    const auto a = solve_alpha(AlphaObjective{lin, lambda}, m);
    ASSERT_TRUE(on_simplex(a));
    EXPECT_LE(objective_value(lin, lambda, a, m), two_source_minimum(lin, lambda, m) + 1e-8) << t;
  }
}

TEST(AlphaSolver, GridOracleAgreesOnThreeSources) {
  Rng rng = make_stream(3, {40});
  std::uniform_real_distribution<double> c(-1, 1), lam(0, 2), msz(10, 500);
  for (int t = 0; t < 30; ++t) {
    const AlphaObjective f{{c(rng), c(rng), c(rng)}, lam(rng)};
    const std::vector<double> m = {msz(rng), msz(rng), msz(rng)};
    const auto a = solve_alpha(f, m);
    const auto g = grid_oracle(f, m, 0.01);
    EXPECT_LE(f.value(a, m), f.value(g, m) + 1e-6);
  }
}

TEST(AlphaSolver, ObjectiveGradientMatchesDifferences) {
  const AlphaObjective f{{0.3, -0.2, 0.1}, 0.7};
  const std::vector<double> m = {50, 80, 20};
  const std::vector<double> a = {0.2, 0.5, 0.3};
  const auto g = f.gradient(a, m);
  for (int i = 0; i < 3; ++i) {
    auto p = a, q = a;
    p[i] += 1e-6;
    q[i] -= 1e-6;
    EXPECT_NEAR(g[i], (f.value(p, m) - f.value(q, m)) / 2e-6, 1e-7);
  }
}

TEST(AlphaSolver, BuildObjectiveCoefficients) {
  const AlphaTerms t{0.5, 0.4, 1.2, 0.5};
  const std::vector<double> rv = {0.3, 0.6}, rd = {0.2, 0.1};
  const double lam = 0.25;
  const auto f = build_objective(rv, rd, t, nullptr, &lam);
  const double a = 0.5 * 0.4 + 1.2 * 0.6, b = 0.5 * 0.4 + 0.6;
  EXPECT_DOUBLE_EQ(f.linear[0], a * 0.3 - b * 0.2);
  EXPECT_DOUBLE_EQ(f.linear[1], a * 0.6 - b * 0.1);
  EXPECT_EQ(f.lambda_r, 0.25);
  EXPECT_THROW(build_objective(rv, rd, t, nullptr), NumericError);

  GradNormLedger ledger;
  ledger.accumulate(LedgerBlock::kU, 0, 1.0, 1.0, 2.0);  // delta_u = 1
  ledger.accumulate(LedgerBlock::kV, 0, 1.0, 1.0, 6.0);  // delta_v = 3
  const auto g = build_objective(rv, rd, t, &ledger);
  EXPECT_DOUBLE_EQ(g.lambda_r, 0.5 * ((1 - 0.4 + 0.2) * 2.0 + 0.2 * 1.0));
  EXPECT_DOUBLE_EQ(regularizer_weight(t, 1.0, 3.0), g.lambda_r);
}

TEST(AlphaSolver, MovingAverage) {
  const auto a = moving_average_update(std::vector<double>{0.2, 0.8}, std::vector<double>{1.0, 0.0}, 0.75);
  EXPECT_DOUBLE_EQ(a[0], 0.75 * 0.2 + 0.25);
  EXPECT_DOUBLE_EQ(a[1], 0.75 * 0.8);
  EXPECT_TRUE(on_simplex(a));
}

TEST(AlphaSolver, InvalidInputs) {
  const std::vector<double> m = {10, 0};
  EXPECT_THROW(solve_alpha(AlphaObjective{{0, 0}, 1}, m), Error);
  const std::vector<double> m2 = {10, 10};
  EXPECT_THROW(solve_alpha(AlphaObjective{{NAN, 0}, 1}, m2), NumericError);
}

TEST(AlphaSolver, SingleSourceIsTrivial) {
  const std::vector<double> m = {10};
  EXPECT_EQ(solve_alpha(AlphaObjective{{3.0}, 1.0}, m), (std::vector<double>{1.0}));
}

}  // namespace
}  // namespace imda
