#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "imda/data.hpp"
#include "imda/models.hpp"
#include "imda/optimizer.hpp"

namespace imda {

enum class Mode { kSupervised, kUnsupervised, kSemi };
enum class AlphaRiskSource { kFullPass, kLastBatch };

const char* mode_name(Mode mode);

struct DataConfig {
  std::string kind = "synthetic";  // synthetic | csv
  SyntheticBenchmark synthetic;
  std::vector<std::string> source_csv;
  std::string target_csv;
  std::string target_unlabeled_csv;
  std::string target_test_csv;

  MultiSourceDataset load() const;
};

// Constants for the standalone bound report. Unset counts are taken from
// the dataset; unset alpha is uniform.
struct BoundSettings {
  std::string kind = "gradient_norm";  // supervised | unsupervised | gradient_norm
  double sigma = 1.0;
  std::optional<double> m_t;
  std::optional<double> m_t_prime;
  std::vector<double> m;
  std::vector<double> alpha;
  std::optional<double> delta_u;
  std::optional<double> delta_v;
  double i_uv = 0.0;
  double i_u = 0.0;
  double r_star = 0.0;
  double r_star_rep = 0.0;
  double empirical_risk = 0.0;
};

struct ExperimentConfig {
  Mode mode = Mode::kSupervised;
  double epsilon = 0.5;
  double tau = 1.0;
  double c0 = 1.2;
  double c1 = 0.5;
  double moving_average = 0.5;
  SgldConfig sgld;
  double w1_sup_coef = 0.01;
  double coef1 = 0.06;
  double coef2 = 1.2;
  double interp_penalty_weight = 1.0;
  double param_penalty_weight = 0.0;
  std::size_t batch_size = 20;
  std::size_t epochs = 40;
  std::size_t warmup_epochs = 5;
  std::uint64_t seed = 0;
  bool learn_alpha = true;
  bool alignment = true;  // false: plain risk minimization, no critic
  AlphaRiskSource alpha_risks = AlphaRiskSource::kFullPass;
  std::optional<double> lambda_r;

  std::vector<std::size_t> rep_hidden = {32, 16};
  std::vector<std::size_t> pred_hidden;
  double dropout = 0.0;

  DataConfig data;
  BoundSettings bound;
  std::string output_dir;  // empty: write nothing

  ModelSpec model_spec(std::size_t input_width, std::size_t num_classes) const;
  void validate() const;
};

// `key = value` lines, `#` comments. Overrides are `key=value` strings
// applied after the file. Unknown keys and a missing mode are errors.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides,
                                   const std::string& origin = "<config>");
ExperimentConfig parse_config(const std::string& path, const std::vector<std::string>& overrides);

// Keys understood by the parser.
const std::vector<std::string>& config_keys();

}  // namespace imda
