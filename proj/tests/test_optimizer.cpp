#include <gtest/gtest.h>

#include <cmath>

#include "imda/error.hpp"
#include "imda/optimizer.hpp"
#include "test_util.hpp"

namespace imda {
namespace {

Layout flat(std::size_t n) {
  Layout l;
  l.add("p", 1, n);
  return l;
}

TEST(Optimizer, ScheduleRepeatsLastValue) {
  const Schedule s(std::vector<double>{0.5, 0.25});
  EXPECT_EQ(s.at(0), 0.5);
  EXPECT_EQ(s.at(1), 0.25);
  EXPECT_EQ(s.at(100), 0.25);
  EXPECT_EQ(Schedule(0.3).at(7), 0.3);
  EXPECT_FALSE(Schedule(std::vector<double>{0.1, 0.0}).positive());
}

TEST(Optimizer, NoiselessStepIsGradientDescent) {
  ParameterVector p(flat(3), {1, 2, 3});
  const ParameterVector g(flat(3), {0.5, -1, 0});
  sgld_step(p, g, 0.1, 1.0, nullptr);
  EXPECT_EQ(p, ParameterVector(flat(3), {1 - 0.1 * 0.5, 2 + 0.1, 3}));
}

TEST(Optimizer, AscentStep) {
  ParameterVector p(flat(2), {1, 1});
  duplicate_ascent_step(p, ParameterVector(flat(2), {2, -4}), 0.25);
  EXPECT_EQ(p, ParameterVector(flat(2), {1.5, 0.0}));
}

TEST(Optimizer, NoiseMomentsMatchSigma) {
  const std::size_t n = 100000;
  const double sigma = 0.3;
  ParameterVector p(flat(n));
  Rng rng = make_stream(1, {kStreamNoise});
  sgld_step(p, p.zeros_like(), 0.1, sigma, &rng);
  double mean = 0, var = 0;
  for (double v : p.values()) mean += v;
  mean /= n;
  for (double v : p.values()) var += (v - mean) * (v - mean);
  var /= n - 1;
  EXPECT_NEAR(mean, 0.0, 5 * sigma / std::sqrt(double(n)));
  EXPECT_NEAR(var / (sigma * sigma), 1.0, 0.05);
}

TEST(Optimizer, NoiseIsReproducible) {
  ParameterVector a(flat(50)), b(flat(50));
  Rng ra = make_stream(9, {kStreamNoise}), rb = make_stream(9, {kStreamNoise});
  sgld_step(a, a.zeros_like(), 1, 1, &ra);
  sgld_step(b, b.zeros_like(), 1, 1, &rb);
  EXPECT_EQ(a, b);
}

TEST(Optimizer, NonFiniteDetected) {
  ParameterVector p(flat(4), {0, 1, NAN, 2});
  try {
    require_finite(p, "test");
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.index(), 2u);
  }
  ParameterVector q(flat(2), {0, 0});
  EXPECT_THROW(sgld_step(q, ParameterVector(flat(2), {INFINITY, 0}), 0.1, 0.1, nullptr),
               NonFiniteError);
}

TEST(Optimizer, ConfigValidation) {
  SgldConfig c;
  EXPECT_NO_THROW(c.validate());
  c.sigma = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.noiseless = true;
  EXPECT_NO_THROW(c.validate());
  c.eta_u = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Optimizer, LedgerIncrementFormula) {
  EXPECT_DOUBLE_EQ(GradNormLedger::increment(0.5, 0.1, 4.0), 0.25 * 4.0 / (2 * 0.01));
}

TEST(Optimizer, LedgerSumsAndReplay) {
  GradNormLedger ledger;
  Rng rng = make_stream(3, {30});
  std::uniform_real_distribution<double> u(0.0, 10.0);
  double du = 0, dv = 0;
  for (std::uint64_t s = 0; s < 300; ++s) {
    const double gu = u(rng), gv = u(rng);
    ledger.accumulate(LedgerBlock::kU, s, 0.1, 0.01, gu);
    ledger.accumulate(LedgerBlock::kV, s, 0.2, 0.01, gv);
    du += GradNormLedger::increment(0.1, 0.01, gu);
    dv += GradNormLedger::increment(0.2, 0.01, gv);
  }
  EXPECT_EQ(ledger.delta_u(), du);
  EXPECT_EQ(ledger.delta_v(), dv);
  const auto replayed = GradNormLedger::replay(ledger.log());
  EXPECT_EQ(replayed.delta_u(), ledger.delta_u());
  EXPECT_EQ(replayed.delta_v(), ledger.delta_v());
  EXPECT_EQ(ledger.log().back().delta_after, ledger.delta_v());
}

TEST(Optimizer, LedgerCsvRoundTripIsExact) {
  GradNormLedger ledger;
  Rng rng = make_stream(4, {30});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::uint64_t s = 0; s < 50; ++s) {
    ledger.accumulate(LedgerBlock::kU, s, u(rng), 1e-3, u(rng));
    ledger.accumulate(LedgerBlock::kV, s, u(rng), 1e-3, u(rng));
  }
  const auto path = test::scratch_dir("ledger") + "/ledger.csv";
  ledger.write_csv(path);
  const auto log = GradNormLedger::read_csv(path);
  ASSERT_EQ(log.size(), ledger.log().size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(log[i].step, ledger.log()[i].step);
    EXPECT_EQ(log[i].block, ledger.log()[i].block);
    EXPECT_EQ(log[i].eta, ledger.log()[i].eta);
    EXPECT_EQ(log[i].grad_sq_norm, ledger.log()[i].grad_sq_norm);
    EXPECT_EQ(log[i].delta_after, ledger.log()[i].delta_after);
  }
  const auto replayed = GradNormLedger::replay(log);
  EXPECT_EQ(replayed.delta_u(), ledger.delta_u());
  EXPECT_EQ(replayed.delta_v(), ledger.delta_v());
}

}  // namespace
}  // namespace imda
