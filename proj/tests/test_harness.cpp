#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "imda/alpha_solver.hpp"
#include "imda/error.hpp"
#include "imda/harness.hpp"
#include "test_util.hpp"

namespace imda {
namespace {

RunOptions on(const MultiSourceDataset& data) {
  RunOptions o;
  o.dataset = &data;
  return o;
}

MultiSourceDataset small_data(std::uint64_t seed) {
  SyntheticBenchmark b;
  b.domain_size = 120;
  b.target_labeled = 40;
  b.target_unlabeled = 120;
  b.target_test = 200;
  b.seed = seed;
  return b.build();
}

ExperimentConfig config(const std::string& mode, std::vector<std::string> sets = {}) {
  sets.push_back("epochs=3");
  sets.push_back("warmup_epochs=1");
  sets.push_back("rep_hidden=8");
  return parse_config_text("mode = " + mode + "\n", sets);
}

TEST(Harness, MetricsRowsAndSimplex) {
  const auto data = small_data(1);
  for (const char* mode : {"supervised", "unsupervised", "semi"}) {
    const auto r = run(config(mode), on(data));
    ASSERT_EQ(r.metrics.size(), 4u) << mode;
    for (const auto& row : r.metrics) EXPECT_TRUE(on_simplex(row.alpha)) << mode;
    EXPECT_EQ(r.metrics.front().epoch, 0u);
    EXPECT_EQ(r.steps, 3 * r.steps_per_epoch);
    ASSERT_TRUE(r.ledger.has_value());
    EXPECT_GT(r.ledger->delta_u(), 0.0);
    EXPECT_TRUE(std::isfinite(r.bound->total));
  }
}

TEST(Harness, UnsupervisedTargetRiskIsMissing) {
  const auto data = small_data(2);
  const auto r = run(config("unsupervised"), on(data));
  EXPECT_TRUE(std::isnan(r.metrics.back().target_risk));
  EXPECT_TRUE(std::isfinite(r.metrics.back().target_accuracy));
}

TEST(Harness, SameSeedSameRun) {
  const auto data = small_data(3);
  const auto a = run(config("semi", {"seed=4"}), on(data));
  const auto b = run(config("semi", {"seed=4"}), on(data));
  EXPECT_EQ(a.model.rep, b.model.rep);
  EXPECT_EQ(a.model.pred, b.model.pred);
  EXPECT_EQ(a.alpha, b.alpha);
  EXPECT_EQ(a.ledger->delta_v(), b.ledger->delta_v());
  const auto c = run(config("semi", {"seed=5"}), on(data));
  EXPECT_NE(a.model.rep, c.model.rep);
}

TEST(Harness, LedgerReplayMatchesRun) {
  const auto data = small_data(4);
  const auto r = run(config("supervised"), on(data));
  const auto replay = GradNormLedger::replay(r.ledger->log());
  EXPECT_EQ(replay.delta_u(), r.ledger->delta_u());
  EXPECT_EQ(replay.delta_v(), r.ledger->delta_v());
  EXPECT_EQ(r.ledger->log().size(), 2 * r.steps);
}

TEST(Harness, NoiselessNeedsFixedLambda) {
  const auto data = small_data(5);
  EXPECT_THROW(run(config("supervised", {"noiseless=true"}), on(data)), NumericError);
  const auto r = run(config("supervised", {"noiseless=true", "lambda_r=0.1"}), on(data));
  EXPECT_FALSE(r.ledger.has_value());
  EXPECT_FALSE(r.bound.has_value());
}

TEST(Harness, StepCallbackSeesEveryUpdate) {
  const auto data = small_data(6);
  std::size_t calls = 0, last = 0;
  RunOptions opts{&data, [&](std::size_t step, const ModelTriple&) {
                    ++calls;
                    EXPECT_EQ(step, last + 1);
                    last = step;
                  }};
  const auto r = run(config("supervised"), opts);
  EXPECT_EQ(calls, r.steps);
}

TEST(Harness, BaselineKeepsUniformWeightsAndCritic) {
  const auto data = small_data(7);
  const auto r = run(config("unsupervised", {"alignment=false"}), on(data));
  EXPECT_EQ(r.alpha, (std::vector<double>{0.5, 0.5}));
  Rng init = make_stream(0, {kStreamInit});
  const auto fresh = ModelTriple::initialize(r.model.spec, init);
  EXPECT_EQ(r.model.dup, fresh.dup);
}

TEST(Harness, FixedAlphaWhenNotLearned) {
  const auto data = small_data(8);
  const auto r = run(config("supervised", {"learn_alpha=false"}), on(data));
  for (const auto& row : r.metrics) EXPECT_EQ(row.alpha, (std::vector<double>{0.5, 0.5}));
}

TEST(Harness, OutputsWritten) {
  const auto dir = test::scratch_dir("run_outputs");
  const auto data = small_data(9);
  run(config("semi", {"output_dir=" + dir}), on(data));
  for (const char* f : {"metrics.csv", "alpha.csv", "ledger.csv", "bound.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir + "/" + f)) << f;
  std::ifstream alpha(dir + "/alpha.csv");
  std::string header;
  std::getline(alpha, header);
  EXPECT_EQ(header, "epoch,alpha_1,alpha_2,lambda_R");
  std::size_t lines = 0;
  for (std::string l; std::getline(alpha, l);) ++lines;
  EXPECT_EQ(lines, 4u);
}

TEST(Harness, EvaluateCountsMatches) {
  const auto data = small_data(10);
  const auto r = run(config("supervised", {"epochs=1"}), on(data));
  const double acc = evaluate(r.model, data.target_test);
  const auto pred = argmax_rows(
      predict(r.model.spec, r.model.pred, represent(r.model.spec, r.model.rep, data.target_test.x)));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data.target_test.labels[i];
  EXPECT_EQ(acc, static_cast<double>(hits) / pred.size());
}

TEST(Harness, BoundFromConfigUsesKeys) {
  const auto cfg = parse_config(std::string(IMDA_SOURCE_DIR) + "/configs/bound_example.conf", {});
  EXPECT_NEAR(bound_from_config(cfg).total, std::sqrt(0.08) + 0.1, 1e-15);
}

}  // namespace
}  // namespace imda
