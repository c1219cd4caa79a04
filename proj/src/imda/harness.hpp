#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "imda/config.hpp"
#include "imda/data.hpp"
#include "imda/models.hpp"
#include "imda/optimizer.hpp"
#include "imda/theory.hpp"

namespace imda {

// Missing values (for example the labeled-target risk of an unsupervised
// run) are NaN and printed as NA.
struct EpochMetrics {
  std::size_t epoch = 0;
  double target_accuracy = 0.0;
  std::vector<double> source_accuracy;
  double target_risk = 0.0;
  double source_risk = 0.0;
  double w1_supervised = 0.0;
  double w1_pseudo = 0.0;
  double combined = 0.0;
  std::vector<double> alpha;
  double lambda_r = 0.0;
  double delta_u = 0.0;
  double delta_v = 0.0;
  double bound_total = 0.0;
};

struct RunResult {
  ModelTriple model;
  std::vector<EpochMetrics> metrics;  // epochs + 1 rows
  std::vector<double> alpha;
  std::optional<GradNormLedger> ledger;  // absent in noiseless runs
  std::optional<BoundReport> bound;
  std::size_t steps = 0;
  std::size_t steps_per_epoch = 0;
};

struct RunOptions {
  // Used instead of the dataset described by the config.
  const MultiSourceDataset* dataset = nullptr;
  // Called after every parameter update with the global step (from 1).
  std::function<void(std::size_t, const ModelTriple&)> on_step;
};

RunResult run(const ExperimentConfig& config, const RunOptions& options = {});

// Fraction of argmax predictions equal to the labels; dropout off.
double evaluate(const ModelTriple& model, const LabeledSet& set);

// Per-source mean NLL over each full source set, eval mode.
std::vector<double> full_source_risks(const ModelSpec& spec, const ParameterVector& u,
                                      const ParameterVector& v,
                                      const std::vector<LabeledSet>& sources);

// Constants for the gradient-norm bound of a finished run.
BoundConstants bound_constants(const ExperimentConfig& config, const MultiSourceDataset& data,
                               const std::vector<double>& alpha, double empirical_risk,
                               const GradNormLedger* ledger);

// Standalone bound report from the config's bound_* keys; missing sample
// counts are read from the configured dataset.
BoundReport bound_from_config(const ExperimentConfig& config);

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& rows,
                       std::size_t num_sources);
void write_alpha_csv(const std::string& path, const std::vector<EpochMetrics>& rows);

}  // namespace imda
