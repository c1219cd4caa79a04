#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "imda/data.hpp"
#include "imda/error.hpp"
#include "test_util.hpp"

namespace imda {
namespace {

GaussianDomain two_class(double shift) {
  return {{{-2.0 + shift, 0.0}, {2.0 + shift, 0.0}}, {0.5, 0.5}, {0.3, 0.7}};
}

TEST(Data, GaussianMomentsAndPrior) {
  const auto set = sample_gaussian_domain(two_class(1.0), 20000, 3, 1);
  ASSERT_EQ(set.size(), 20000u);
  const auto counts = set.class_counts(2);
  EXPECT_NEAR(counts[1] / 20000.0, 0.7, 0.02);
  double mx = 0, vy = 0;
  std::size_t n1 = 0;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set.labels[i] == 1) {
      mx += set.x(i, 0);
      vy += set.x(i, 1) * set.x(i, 1);
      ++n1;
    }
  EXPECT_NEAR(mx / n1, 3.0, 0.02);
  EXPECT_NEAR(std::sqrt(vy / n1), 0.5, 0.02);
}

TEST(Data, SamplingIsDeterministic) {
  const auto a = sample_gaussian_domain(two_class(0), 50, 9, 2);
  const auto b = sample_gaussian_domain(two_class(0), 50, 9, 2);
  const auto c = sample_gaussian_domain(two_class(0), 50, 9, 3);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.x, c.x);
}

TEST(Data, SuiteSizes) {
  GaussianSuiteSpec s;
  s.sources = {two_class(0), two_class(1)};
  s.source_sizes = {30, 40};
  s.target = two_class(2);
  s.target_labeled = 5;
  s.target_unlabeled = 60;
  s.target_test = 70;
  const auto d = gen_gaussian_sources(s);
  EXPECT_EQ(d.source_sizes(), (std::vector<std::size_t>{30, 40}));
  EXPECT_EQ(d.target.size(), 5u);
  EXPECT_EQ(d.target_unlabeled.size(), 60u);
  EXPECT_EQ(d.target_test.size(), 70u);
  EXPECT_EQ(d.num_classes, 2);
  EXPECT_EQ(d.feature_width, 2u);
}

TEST(Data, DropClassesKeepsCeilingFraction) {
  const auto set = sample_gaussian_domain(two_class(0), 1000, 4, 1);
  const auto before = set.class_counts(2);
  for (double d : {0.0, 0.1, 0.5, 0.7, 0.95}) {
    ShiftSpec s{{1}, d, ShiftTarget::kSources, 5};
    const auto out = drop_classes(set, s, 1);
    const auto after = out.class_counts(2);
    EXPECT_EQ(after[0], before[0]);
    EXPECT_EQ(after[1], static_cast<std::size_t>(std::ceil((1 - d) * before[1] - 1e-9))) << d;
  }
  ShiftSpec bad{{1}, 1.0, ShiftTarget::kSources, 0};
  EXPECT_THROW(drop_classes(set, bad, 1), Error);
}

TEST(Data, ShiftLeavesUnlabeledTargetAlone) {
  SyntheticBenchmark b;
  b.domain_size = 200;
  b.target_unlabeled = 100;
  b.target_test = 100;
  b.drop_rate = 0.0;
  const auto base = b.build();
  for (auto where : {ShiftTarget::kSources, ShiftTarget::kTarget}) {
    const auto shifted = apply_target_shift(base, {{1}, 0.6, where, 3});
    EXPECT_EQ(shifted.target_unlabeled.x, base.target_unlabeled.x);
    if (where == ShiftTarget::kSources) {
      EXPECT_LT(shifted.sources[0].size(), base.sources[0].size());
      EXPECT_EQ(shifted.target_test.size(), base.target_test.size());
    } else {
      EXPECT_EQ(shifted.sources[0].size(), base.sources[0].size());
      EXPECT_LT(shifted.target_test.size(), base.target_test.size());
    }
  }
}

TEST(Data, CsvRoundTrip) {
  const auto dir = test::scratch_dir("csv");
  const auto set = sample_gaussian_domain(two_class(0), 25, 1, 1);
  write_csv(dir + "/s.csv", set);
  CsvReport rep;
  const auto back = load_csv(dir + "/s.csv", &rep);
  EXPECT_EQ(rep.rows, 25u);
  EXPECT_EQ(rep.width, 2u);
  EXPECT_EQ(back.labels, set.labels);
  EXPECT_EQ(back.x, set.x);
  EXPECT_EQ(load_unlabeled_csv(dir + "/s.csv").x, set.x);
}

TEST(Data, CsvErrors) {
  const auto dir = test::scratch_dir("csv_bad");
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream(dir + "/" + name) << body;
    return dir + "/" + name;
  };
  EXPECT_THROW(load_csv(dir + "/missing.csv"), Error);
  EXPECT_THROW(load_csv(write("ragged.csv", "label,f0,f1\n0,1,2\n1,3\n")), DataError);
  EXPECT_THROW(load_csv(write("text.csv", "label,f0\n0,abc\n")), DataError);
  EXPECT_THROW(load_csv(write("neg.csv", "label,f0\n-1,0.5\n")), DataError);
}

TEST(Data, BatchStreamPartitionsEachEpoch) {
  const BatchStream s(23, 5, 7, 1);
  EXPECT_EQ(s.batches_per_epoch(), 5u);
  for (std::uint64_t pass = 0; pass < 3; ++pass) {
    std::multiset<std::size_t> seen;
    for (const auto& b : s.epoch(pass)) seen.insert(b.begin(), b.end());
    EXPECT_EQ(seen.size(), 23u);
    EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 23u);
  }
  EXPECT_NE(s.epoch(0), s.epoch(1));
  EXPECT_EQ(s.epoch(2), BatchStream(23, 5, 7, 1).epoch(2));
}

TEST(Data, BatchSizeClippedToSet) {
  const BatchStream s(4, 10, 0, 1);
  EXPECT_TRUE(s.clipped());
  EXPECT_EQ(s.batch_size(), 4u);
  EXPECT_EQ(s.batches_per_epoch(), 1u);
}

TEST(Data, CyclerWrapsIntoNextPass) {
  BatchCycler c(10, 4, 2, 1);
  const BatchStream s(10, 4, 2, 1);
  const auto e0 = s.epoch(0), e1 = s.epoch(1);
  for (const auto& b : e0) EXPECT_EQ(c.next(), b);
  EXPECT_EQ(c.next(), e1[0]);
}

TEST(Data, ValidationCatchesMismatch) {
  MultiSourceDataset d;
  d.num_classes = 2;
  d.feature_width = 2;
  d.sources = {sample_gaussian_domain(two_class(0), 10, 1, 1)};
  d.target = sample_gaussian_domain(two_class(0), 10, 1, 2);
  d.target_unlabeled.x = Matrix(5, 3);
  EXPECT_THROW(d.validate(), Error);
}

}  // namespace
}  // namespace imda
