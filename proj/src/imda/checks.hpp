#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "imda/models.hpp"
#include "imda/theory.hpp"

namespace imda {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

using CheckReporter = std::function<void(const CheckResult&)>;

// Property suites behind `imda check`. Each suite reports once.
std::vector<CheckResult> run_property_checks(std::uint64_t seed, const CheckReporter& report = {});

const std::vector<std::string>& property_check_names();

// Small regression model: representation [width, hidden] ReLU, predictor
// [hidden, 1] linear, random weights.
struct RegressionInstance {
  ModelSpec spec;
  ParameterVector u;
  ParameterVector v;
};

RegressionInstance random_regression_instance(Rng& rng, std::size_t width, std::size_t hidden);

DiscreteMeasurePair random_measure_pair(Rng& rng, std::size_t atoms, std::size_t width,
                                        bool integer_labels);

}  // namespace imda
