#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "imda/checks.hpp"
#include "imda/error.hpp"
#include "imda/theory.hpp"
#include "test_util.hpp"

namespace imda {
namespace {

// Assignment by bitmask dynamic programming over the second side; exact
// for uniform measures of equal size.
double dp_w1(const DiscreteMeasurePair& p, const GroundMetric& metric) {
  const std::size_t n = p.first.size();
  std::vector<double> best(std::size_t{1} << n, std::numeric_limits<double>::infinity());
  best[0] = 0;
  for (std::size_t mask = 0; mask < best.size(); ++mask) {
    const std::size_t i = static_cast<std::size_t>(__builtin_popcountll(mask));
    if (i >= n) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask & (std::size_t{1} << j)) continue;
      const double c = metric(p.first[i].x, p.first[i].y, p.second[j].x, p.second[j].y);
      auto& slot = best[mask | (std::size_t{1} << j)];
      slot = std::min(slot, best[mask] + c);
    }
  }
  return best.back() / n;
}

TEST(Theory, GroundMetricCases) {
  const std::vector<double> a = {0, 0}, b = {3, 4};
  EXPECT_EQ((GroundMetric{LabelCost::kNone, 2.0, "example"})(a, 1, b, 0), 10.0);
  EXPECT_EQ((GroundMetric{LabelCost::kIndicator, 1.0, "example"})(a, 1, b, 0), 6.0);
  EXPECT_EQ((GroundMetric{LabelCost::kAbsolute, 1.0, "example"})(a, 2.5, b, 0), 7.5);
  EXPECT_EQ((GroundMetric{LabelCost::kAbsolute, 0.0, "example"})(a, 2.5, b, 0), 2.5);
}

TEST(Theory, ExactW1HandInstance) {
  // Shifting two atoms by 0.5 costs 0.5.
  DiscreteMeasurePair p{{{{0.0}, 0}, {{1.0}, 0}}, {{{0.5}, 0}, {{1.5}, 0}}};
  EXPECT_DOUBLE_EQ(exact_w1(p, {LabelCost::kNone, 1.0, "example"}), 0.5);
  // Label disagreement adds through the label cost.
  DiscreteMeasurePair q{{{{0.0}, 0}}, {{{0.0}, 1}}};
  EXPECT_DOUBLE_EQ(exact_w1(q, {LabelCost::kIndicator, 1.0, "example"}), 1.0);
}

TEST(Theory, ExactW1MatchesAssignmentDp) {
  Rng rng = make_stream(1, {50});
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + t % kMaxExactAtoms;
    const auto p = random_measure_pair(rng, n, 2, t % 2 == 0);
    for (auto cost : {LabelCost::kNone, LabelCost::kIndicator, LabelCost::kAbsolute}) {
      const GroundMetric m{cost, 0.7, "example"};
      EXPECT_NEAR(exact_w1(p, m), dp_w1(p, m), 1e-12) << t;
    }
  }
}

TEST(Theory, ExactW1IsAMetric) {
  Rng rng = make_stream(2, {50});
  const GroundMetric m{LabelCost::kAbsolute, 1.0, "example"};
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + t % 5;
    auto a = random_measure_pair(rng, n, 2, false);
    auto c = random_measure_pair(rng, n, 2, false);
    const DiscreteMeasurePair ab{a.first, a.second}, ba{a.second, a.first};
    const DiscreteMeasurePair aa{a.first, a.first};
    const DiscreteMeasurePair ac{a.first, c.first}, cb{c.first, a.second};
    EXPECT_NEAR(exact_w1(ab, m), exact_w1(ba, m), 1e-12);
    EXPECT_EQ(exact_w1(aa, m), 0.0);
    EXPECT_LE(exact_w1(ab, m), exact_w1(ac, m) + exact_w1(cb, m) + 1e-9);
  }
}

TEST(Theory, ContractiveRepresentationShrinksW1) {
  // z = A x with |A| <= K: W1 in z-space under scale L is at most W1 in
  // x-space under scale L K.
  Rng rng = make_stream(3, {50});
  for (int t = 0; t < 100; ++t) {
    auto p = random_measure_pair(rng, 4, 3, false);
    const Matrix a = test::random_matrix(rng, 3, 3, 0.5);
    const double k = spectral_norm(a);
    auto map = [&](std::vector<LabeledPoint> side) {
      for (auto& pt : side) {
        std::vector<double> z(3, 0.0);
        for (int c = 0; c < 3; ++c)
          for (int r = 0; r < 3; ++r) z[c] += pt.x[r] * a(r, c);
        pt.x = z;
      }
      return side;
    };
    const DiscreteMeasurePair z{map(p.first), map(p.second)};
    const double l = 1.3;
    EXPECT_LE(exact_w1(z, {LabelCost::kAbsolute, l, "representation"}),
              exact_w1(p, {LabelCost::kAbsolute, l * k, "example"}) + 1e-9);
  }
}

TEST(Theory, PairValidation) {
  DiscreteMeasurePair uneven{{{{0.0}, 0}}, {}};
  EXPECT_THROW(exact_w1(uneven, {}), ShapeError);
  Rng rng = make_stream(4, {50});
  const auto big = random_measure_pair(rng, kMaxExactAtoms + 1, 1, false);
  EXPECT_THROW(exact_w1(big, {}), ConfigError);
}

TEST(Theory, MeasurePairCsv) {
  const auto path = test::scratch_dir("pair") + "/pair.csv";
  {
    std::ofstream f(path);
    f << "set,label,f0,f1\n0,1.5,0,0\n1,1.5,3,4\n";
  }
  const auto p = load_measure_pair_csv(path);
  ASSERT_EQ(p.first.size(), 1u);
  EXPECT_EQ(p.second[0].x, (std::vector<double>{3, 4}));
  EXPECT_DOUBLE_EQ(exact_w1(p, {LabelCost::kAbsolute, 1.0, "example"}), 5.0);
  {
    std::ofstream f(path);
    f << "set,label,f0\n0,x,0\n";
  }
  EXPECT_THROW(load_measure_pair_csv(path), Error);
}

TEST(Theory, RiskGapNeverViolatedWithCertificates) {
  Rng rng = make_stream(5, {50});
  for (int t = 0; t < 100; ++t) {
    const auto inst = random_regression_instance(rng, 2, 4);
    const auto pair = random_measure_pair(rng, 5, 2, false);
    const auto cert = certify(inst.spec, inst.u, inst.v);
    const auto r = check_risk_gap(inst.spec, inst.u, inst.v, pair, cert);
    EXPECT_TRUE(r.holds) << r.lhs << " > " << r.rhs;
    EXPECT_NEAR(r.lhs,
                std::fabs(regression_risk(inst.spec, inst.u, inst.v, pair.first) -
                          regression_risk(inst.spec, inst.u, inst.v, pair.second)),
                1e-12);
  }
}

TEST(Theory, KantorovichDualBelowPrimal) {
  Rng rng = make_stream(6, {50});
  const MlpSpec critic{{2, 5, 1}, {Activation::kRelu, Activation::kNone}, 0.0};
  for (int t = 0; t < 50; ++t) {
    ParameterVector p = init_mlp(critic, rng);
    test::randomize(p, rng, 0.6);
    const auto pair = random_measure_pair(rng, 5, 2, false);
    const auto d = kantorovich_check(critic, p, pair, {LabelCost::kAbsolute, 1.0, "example"});
    EXPECT_LE(d.normalized, d.w1 + 1e-9);
  }
}

TEST(Theory, SubgaussianFromRange) {
  EXPECT_EQ(subgaussian_from_range(0, 1), 0.5);
  EXPECT_THROW(subgaussian_from_range(1, 0), ConfigError);
}

BoundConstants constants() {
  BoundConstants c;
  c.sigma = 0.5;
  c.epsilon = 1.0;
  c.alpha = {1.0, 0.0};
  c.m = {100, 1};
  c.m_t = 100;
  return c;
}

TEST(Theory, SupervisedGapValues) {
  auto c = constants();
  EXPECT_EQ(bound_supervised_gap(c, 0, 0).total, 0.0);
  // 0.5 sqrt(2 * 0.01 * 2) + 0.5 sqrt(2 * (0.01 + 0.01) * 2)
  EXPECT_NEAR(bound_supervised_gap(c, 2, 2).total, 0.1 + 0.5 * std::sqrt(0.08), 1e-15);
  c.epsilon = 0.0;
  const auto r = bound_supervised_gap(c, 3, 5);
  EXPECT_EQ(r.term("representation"), 0.0);
  EXPECT_NEAR(r.total, 0.5 * std::sqrt(2 * 3 / 100.0), 1e-15);
  EXPECT_THROW(bound_supervised_gap(c, -1, 0), ConfigError);
}

TEST(Theory, UnsupervisedGapValues) {
  BoundConstants c;
  c.sigma = 1;
  c.alpha = {1};
  c.m = {100};
  c.m_t_prime = 100;
  c.r_star = 0.05;
  c.r_star_rep = 0.05;
  EXPECT_NEAR(bound_unsupervised_gap(c, 2).total, std::sqrt(0.08) + 0.1, 1e-15);
  // More equal sources shrink the joint term.
  double last = INFINITY;
  for (int n = 1; n <= 6; ++n) {
    c.alpha.assign(n, 1.0 / n);
    c.m.assign(n, 100);
    const double j = bound_unsupervised_gap(c, 2).term("joint");
    EXPECT_LT(j, last);
    last = j;
  }
}

TEST(Theory, GradientNormBoundValues) {
  BoundConstants c;
  c.sigma = 1;
  c.tau = 0.5;
  c.epsilon = 0.5;
  c.alpha = {1};
  c.m = {100};
  c.m_t = 100;
  c.m_t_prime = 100;
  c.delta_u = 1;
  c.delta_v = 1;
  c.r_star = 0.1;
  c.r_star_rep = 0.1;
  c.empirical_risk = 0.3;
  const auto r = bound_gradient_norm(c);
  // sup_joint = 0.5 sqrt(2 * 0.005 * 2), sup_rep = 0.25 sqrt(0.04) = 0.05,
  // unsup_joint = 0.5 sqrt(0.08), r* terms 0.05 each.
  EXPECT_NEAR(r.term("sup_joint"), 0.5 * std::sqrt(0.02), 1e-15);
  EXPECT_NEAR(r.term("sup_representation"), 0.05, 1e-15);
  EXPECT_NEAR(r.term("unsup_joint"), 0.5 * std::sqrt(0.08), 1e-15);
  EXPECT_NEAR(r.total, 0.45 + 0.15 * std::sqrt(2.0), 1e-14);

  c.tau = 1;
  const auto sup = bound_gradient_norm(c);
  EXPECT_EQ(sup.term("unsup_joint"), 0.0);
  EXPECT_EQ(sup.term("unsup_r_star"), 0.0);
  c.tau = 0;
  c.m_t = 0;  // unused at tau = 0
  const auto uns = bound_gradient_norm(c);
  EXPECT_EQ(uns.term("sup_joint"), 0.0);
  EXPECT_EQ(uns.term("sup_representation"), 0.0);
  c.delta_u.reset();
  EXPECT_THROW(bound_gradient_norm(c), NumericError);
}

TEST(Theory, GradientNormBoundMonotone) {
  BoundConstants c;
  c.tau = 0.4;
  c.epsilon = 0.3;
  c.alpha = {0.5, 0.5};
  c.m = {50, 80};
  c.m_t = 20;
  c.m_t_prime = 200;
  c.r_star = 0.1;
  c.r_star_rep = 0.2;
  double prev_sigma = -1;
  for (int s = 0; s < 10; ++s) {
    double prev_du = -1;
    for (int u = 0; u < 10; ++u) {
      double prev_dv = -1;
      for (int v = 0; v < 10; ++v) {
        c.sigma = 0.1 + s;
        c.delta_u = 0.5 * u;
        c.delta_v = 0.5 * v;
        const double t = bound_gradient_norm(c).total;
        EXPECT_GE(t, prev_dv);
        prev_dv = t;
      }
      c.delta_v = 1.0;
      const double t = bound_gradient_norm(c).total;
      EXPECT_GE(t, prev_du);
      prev_du = t;
    }
    c.delta_u = c.delta_v = 1.0;
    const double t = bound_gradient_norm(c).total;
    EXPECT_GT(t, prev_sigma);
    prev_sigma = t;
  }
}

TEST(Theory, BoundReportCsv) {
  const auto r = bound_unsupervised_gap(
      [] {
        BoundConstants c;
        c.sigma = 1;
        c.alpha = {1};
        c.m = {100};
        c.m_t_prime = 100;
        return c;
      }(),
      2);
  const auto path = test::scratch_dir("bound") + "/bound.csv";
  r.write_csv(path);
  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  EXPECT_EQ(header, "term_name,value");
  EXPECT_THROW(r.term("nope"), ConfigError);
}

TEST(Theory, PropertySuitesPass) {
  for (const auto& r : run_property_checks(7)) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

}  // namespace
}  // namespace imda
