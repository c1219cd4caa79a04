#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "imda/matrix.hpp"

namespace imda {

struct LabeledSet {
  Matrix x;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  // Labels as a (size x 1) column for graph inputs.
  Matrix label_column() const;
  LabeledSet subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_counts(int num_classes) const;
};

// Target inputs without labels; there is deliberately no label field.
struct UnlabeledSet {
  Matrix x;

  std::size_t size() const { return x.rows(); }
  bool empty() const { return x.rows() == 0; }
  UnlabeledSet subset(std::span<const std::size_t> indices) const;
};

UnlabeledSet strip_labels(const LabeledSet& set);

struct MultiSourceDataset {
  std::vector<LabeledSet> sources;  // S_1..S_N
  LabeledSet target;                // T, labeled target (may be empty)
  UnlabeledSet target_unlabeled;    // T_X'
  LabeledSet target_test;           // held-out evaluation split
  int num_classes = 0;
  std::size_t feature_width = 0;

  std::vector<std::size_t> source_sizes() const;
  void validate() const;
};

// Class-conditional Gaussian domain with diagonal covariance.
struct GaussianDomain {
  std::vector<std::vector<double>> class_means;  // one mean per class
  std::vector<double> stddev;                    // per feature
  std::vector<double> class_prior;               // on the simplex
};

struct GaussianSuiteSpec {
  std::vector<GaussianDomain> sources;
  std::vector<std::size_t> source_sizes;
  GaussianDomain target;
  std::size_t target_labeled = 0;
  std::size_t target_unlabeled = 0;
  std::size_t target_test = 0;
  std::uint64_t seed = 0;
};

LabeledSet sample_gaussian_domain(const GaussianDomain& domain, std::size_t size,
                                  std::uint64_t seed, std::uint64_t domain_tag);

MultiSourceDataset gen_gaussian_sources(const GaussianSuiteSpec& spec);

enum class ShiftTarget { kSources, kTarget };

struct ShiftSpec {
  std::vector<int> drop_classes;
  double drop_rate = 0.0;  // in [0, 1)
  ShiftTarget apply_to = ShiftTarget::kSources;
  std::uint64_t seed = 0;
};

// Keeps exactly ceil((1 - d) * count) examples of each dropped class, chosen
// by the seed, then shuffles the set. Other classes are untouched.
LabeledSet drop_classes(const LabeledSet& set, const ShiftSpec& spec, std::uint64_t set_tag);

// Applies the shift to every source (or to the labeled target and test
// splits). The unlabeled target split carries no labels and is never
// filtered.
MultiSourceDataset apply_target_shift(const MultiSourceDataset& dataset, const ShiftSpec& spec);

// Two-class rotated-blob benchmark.
struct SyntheticBenchmark {
  std::size_t num_sources = 2;
  std::vector<double> source_angles_deg = {30.0, 45.0};
  double target_angle_deg = 0.0;
  double class_separation = 2.0;  // distance of each class mean from the origin
  double noise = 0.8;
  std::size_t domain_size = 2000;
  std::size_t target_labeled = 200;
  std::size_t target_unlabeled = 2000;
  std::size_t target_test = 2000;
  double drop_rate = 0.5;
  std::vector<int> drop_classes = {1};
  ShiftTarget shift_apply_to = ShiftTarget::kSources;
  std::uint64_t seed = 0;

  GaussianSuiteSpec suite() const;
  MultiSourceDataset build() const;
};

struct CsvReport {
  std::size_t rows = 0;
  std::size_t width = 0;
};

// Header `label,f0,f1,...`; integer labels.
LabeledSet load_csv(const std::string& path, CsvReport* report = nullptr);
// Same schema; the label column, if present, is discarded.
UnlabeledSet load_unlabeled_csv(const std::string& path, CsvReport* report = nullptr);
void write_csv(const std::string& path, const LabeledSet& set);

// Seeded per-epoch permutations cut into batches. The schedule is a pure
// function of (seed, set tag, pass); it never sees model parameters.
class BatchStream {
 public:
  BatchStream(std::size_t set_size, std::size_t batch_size, std::uint64_t seed,
              std::uint64_t set_tag);

  std::vector<std::vector<std::size_t>> epoch(std::uint64_t pass) const;
  std::size_t batches_per_epoch() const;
  // Set when the requested batch size exceeded the set size.
  bool clipped() const { return clipped_; }
  std::size_t batch_size() const { return batch_size_; }
  std::size_t set_size() const { return set_size_; }

 private:
  std::size_t set_size_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::uint64_t set_tag_;
  bool clipped_ = false;
};

// Endless walk over a BatchStream, starting a new pass when one runs out.
class BatchCycler {
 public:
  BatchCycler(std::size_t set_size, std::size_t batch_size, std::uint64_t seed,
              std::uint64_t set_tag);
  const std::vector<std::size_t>& next();
  const BatchStream& stream() const { return stream_; }

 private:
  BatchStream stream_;
  std::uint64_t pass_ = 0;
  std::size_t position_ = 0;
  std::vector<std::vector<std::size_t>> current_;
};

}  // namespace imda
