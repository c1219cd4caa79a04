#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "imda/graph.hpp"
#include "imda/matrix.hpp"
#include "imda/parameters.hpp"
#include "imda/rng.hpp"

namespace imda {

enum class Activation { kNone, kRelu };
enum class Task { kClassification, kRegression };

// Fully connected network. Layer i maps widths[i] -> widths[i+1] and is
// followed by activations[i]. Dropout (if any) follows every layer but the
// last.
struct MlpSpec {
  std::vector<std::size_t> widths;
  std::vector<Activation> activations;
  double dropout = 0.0;

  std::size_t num_layers() const { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  Layout layout() const;
  void validate(const char* what) const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

// Representation g(u, .) and predictor h(v, .); the duplicate predictor
// h(v', .) reuses `predictor`.
struct ModelSpec {
  MlpSpec representation;
  MlpSpec predictor;
  Task task = Task::kClassification;

  // Representation [d_in, 32, 16] with ReLU, linear predictor [16, classes].
  static ModelSpec desk_default(std::size_t input_width, std::size_t num_classes);

  std::size_t num_classes() const { return predictor.output_width(); }
  void validate() const;
  // `key = value` lines understood by the experiment config parser.
  std::string to_config_block() const;
};

struct ModelTriple {
  ModelSpec spec;
  ParameterVector rep;   // u
  ParameterVector pred;  // v
  ParameterVector dup;   // v'

  // Uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)); zero biases.
  static ModelTriple initialize(const ModelSpec& spec, Rng& rng);
};

ParameterVector init_mlp(const MlpSpec& spec, Rng& rng);

// Plain evaluation. Dropout is applied only when `dropout_rng` is given.
Matrix mlp_forward(const MlpSpec& spec, const ParameterVector& params, const Matrix& x,
                   Rng* dropout_rng = nullptr);

Matrix represent(const ModelSpec& spec, const ParameterVector& u, const Matrix& x,
                 Rng* dropout_rng = nullptr);

// Classification: row-wise log-probabilities. Regression: one column.
Matrix predict(const ModelSpec& spec, const ParameterVector& v, const Matrix& features);

// Argmax per row, ties to the lowest index.
std::vector<int> argmax_rows(const Matrix& scores);

struct MlpNodes {
  NodeId output;
  std::vector<NodeId> dropout_masks;  // inputs the caller must fill each step
};

// Adds the network to `graph` reading parameters from `block`. When
// `with_dropout` is set and the spec has a rate, mask inputs are created.
MlpNodes build_mlp(Graph& graph, const MlpSpec& spec, std::size_t block, NodeId x,
                   const std::string& prefix, bool with_dropout);

// Inverted dropout mask: 0 with probability p, 1/(1-p) otherwise.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double p, Rng& rng);

struct LipschitzCertificate {
  double representation = 0.0;  // K
  double predictor = 0.0;       // L
  double loss = 1.0;            // M
  std::string method = "spectral-product";
};

struct PowerIterationOptions {
  double tolerance = 1e-8;
  int max_iterations = 1000;
  std::uint64_t seed = 0x9e3779b97f4a7c15ull;
};

// Upper estimate of the largest singular value: sqrt(lambda + |residual|)
// from power iteration on the smaller Gram matrix. Throws ConvergenceError
// with the last iterate when the residual test is not met in time.
double spectral_norm(const Matrix& w, const PowerIterationOptions& options = {});

// Product of layer spectral norms; valid for 1-Lipschitz activations.
double lipschitz_upper_bound(const MlpSpec& spec, const ParameterVector& params,
                             const PowerIterationOptions& options = {});

// K from u, L from v; M = 1 (absolute loss in regression mode).
LipschitzCertificate certify(const ModelSpec& spec, const ParameterVector& u,
                             const ParameterVector& v);

}  // namespace imda
