#include "imda/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "imda/error.hpp"

namespace imda {

Layout MlpSpec::layout() const {
  Layout layout;
  for (std::size_t i = 0; i < num_layers(); ++i) {
    layout.add("W" + std::to_string(i), widths[i], widths[i + 1]);
    layout.add("b" + std::to_string(i), 1, widths[i + 1]);
  }
  return layout;
}

void MlpSpec::validate(const char* what) const {
  if (widths.size() < 2)
    throw ConfigError(std::string(what) + ": need at least an input and an output width");
  if (activations.size() != num_layers())
    throw ConfigError(std::string(what) + ": one activation per layer required");
  for (auto w : widths)
    if (w == 0) throw ConfigError(std::string(what) + ": zero layer width");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError(std::string(what) + ": dropout must lie in [0, 1)");
}

ModelSpec ModelSpec::desk_default(std::size_t input_width, std::size_t num_classes) {
  ModelSpec spec;
  spec.representation = {{input_width, 32, 16}, {Activation::kRelu, Activation::kRelu}, 0.0};
  spec.predictor = {{16, num_classes}, {Activation::kNone}, 0.0};
  spec.task = Task::kClassification;
  return spec;
}

void ModelSpec::validate() const {
  representation.validate("representation");
  predictor.validate("predictor");
  if (representation.output_width() != predictor.input_width())
    throw ConfigError("representation output width " +
                      std::to_string(representation.output_width()) +
                      " differs from predictor input width " +
                      std::to_string(predictor.input_width()));
  if (task == Task::kRegression && predictor.output_width() != 1)
    throw ConfigError("regression predictor must have a single output");
  if (task == Task::kClassification && predictor.output_width() < 2)
    throw ConfigError("classification predictor needs at least two classes");
  if (predictor.activations.back() != Activation::kNone)
    throw ConfigError("predictor output layer must be linear");
}

namespace {

std::string join_widths(const std::vector<std::size_t>& w, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < w.size(); ++i) {
    if (!out.empty()) out += ",";
    out += std::to_string(w[i]);
  }
  return out;
}

}  // namespace

std::string ModelSpec::to_config_block() const {
  std::ostringstream os;
  os << "rep_hidden = " << join_widths(representation.widths, 1) << "\n";
  std::vector<std::size_t> hidden(predictor.widths.begin() + 1, predictor.widths.end() - 1);
  os << "pred_hidden = " << join_widths(hidden, 0) << "\n";
  os << "dropout = " << representation.dropout << "\n";
  return os.str();
}

ParameterVector init_mlp(const MlpSpec& spec, Rng& rng) {
  ParameterVector params(spec.layout());
  for (std::size_t i = 0; i < spec.num_layers(); ++i) {
    const double fan_in = static_cast<double>(spec.widths[i]);
    const double fan_out = static_cast<double>(spec.widths[i + 1]);
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (double& w : params.entry_values(2 * i)) w = dist(rng);
  }
  return params;
}

ModelTriple ModelTriple::initialize(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  ModelTriple m{spec, init_mlp(spec.representation, rng), init_mlp(spec.predictor, rng),
                ParameterVector()};
  m.dup = init_mlp(spec.predictor, rng);
  return m;
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double p, Rng& rng) {
  Matrix mask(rows, cols, 1.0);
  if (p <= 0.0) return mask;
  std::bernoulli_distribution drop(p);
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask.values()) m = drop(rng) ? 0.0 : keep_scale;
  return mask;
}

Matrix mlp_forward(const MlpSpec& spec, const ParameterVector& params, const Matrix& x,
                   Rng* dropout_rng) {
  if (!(params.layout() == spec.layout()))
    throw ShapeError("mlp_forward: parameters do not match the architecture");
  if (x.cols() != spec.input_width())
    throw ShapeError("mlp_forward: input width " + std::to_string(x.cols()) +
                     ", architecture expects " + std::to_string(spec.input_width()));
  Matrix h = x;
  for (std::size_t i = 0; i < spec.num_layers(); ++i) {
    const auto w = params.matrix(2 * i);
    const auto b = params.entry_values(2 * i + 1);
    Matrix y = matmul(h, w);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto row = y.row(r);
      for (std::size_t c = 0; c < y.cols(); ++c) row[c] += b[c];
    }
    if (spec.activations[i] == Activation::kRelu)
      for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
    if (dropout_rng != nullptr && spec.dropout > 0.0 && i + 1 < spec.num_layers()) {
      const Matrix mask = dropout_mask(y.rows(), y.cols(), spec.dropout, *dropout_rng);
      for (std::size_t k = 0; k < y.size(); ++k) y.values()[k] *= mask.values()[k];
    }
    h = std::move(y);
  }
  return h;
}

Matrix represent(const ModelSpec& spec, const ParameterVector& u, const Matrix& x,
                 Rng* dropout_rng) {
  return mlp_forward(spec.representation, u, x, dropout_rng);
}

Matrix predict(const ModelSpec& spec, const ParameterVector& v, const Matrix& features) {
  Matrix scores = mlp_forward(spec.predictor, v, features);
  if (spec.task == Task::kRegression) return scores;
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto row = scores.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double val : row) s += std::exp(val - mx);
    const double lse = mx + std::log(s);
    for (double& val : row) val -= lse;
  }
  return scores;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(scores.rows(), 0);
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto row = scores.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

MlpNodes build_mlp(Graph& graph, const MlpSpec& spec, std::size_t block, NodeId x,
                   const std::string& prefix, bool with_dropout) {
  MlpNodes nodes;
  NodeId h = x;
  for (std::size_t i = 0; i < spec.num_layers(); ++i) {
    const auto w = graph.parameter(block, 2 * i);
    const auto b = graph.parameter(block, 2 * i + 1);
    h = graph.affine(h, w, b, prefix + ".affine" + std::to_string(i));
    if (spec.activations[i] == Activation::kRelu)
      h = graph.relu(h, prefix + ".relu" + std::to_string(i));
    if (with_dropout && spec.dropout > 0.0 && i + 1 < spec.num_layers()) {
      const auto mask = graph.input(prefix + ".mask" + std::to_string(i));
      nodes.dropout_masks.push_back(mask);
      h = graph.dropout(h, mask, prefix + ".dropout" + std::to_string(i));
    }
  }
  nodes.output = h;
  return nodes;
}

double spectral_norm(const Matrix& w, const PowerIterationOptions& options) {
  // Gram of the smaller side.
  const Matrix gram = w.rows() < w.cols() ? matmul_nt(w, w) : matmul_tn(w, w);
  const std::size_t n = gram.rows();
  if (n == 0 || squared_norm(gram.values()) == 0.0) return 0.0;

  Rng rng = make_stream(options.seed, {n, w.rows(), w.cols()});
  std::normal_distribution<double> normal;
  Matrix x(n, 1);
  for (double& v : x.values()) v = normal(rng);
  double nx = std::sqrt(squared_norm(x.values()));
  for (double& v : x.values()) v /= nx;

  for (int it = 0; it < options.max_iterations; ++it) {
    Matrix y = matmul(gram, x);
    const double lambda = dot(x.values(), y.values());
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = y.values()[i] - lambda * x.values()[i];
      residual += d * d;
    }
    residual = std::sqrt(residual);
    if (residual <= options.tolerance * lambda) return std::sqrt(lambda + residual);
    const double ny = std::sqrt(squared_norm(y.values()));
    if (ny == 0.0) break;
    for (std::size_t i = 0; i < n; ++i) x.values()[i] = y.values()[i] / ny;
  }
  throw ConvergenceError("spectral_norm: power iteration did not converge in " +
                             std::to_string(options.max_iterations) + " iterations",
                         std::vector<double>(x.values().begin(), x.values().end()));
}

double lipschitz_upper_bound(const MlpSpec& spec, const ParameterVector& params,
                             const PowerIterationOptions& options) {
  if (!(params.layout() == spec.layout()))
    throw ShapeError("lipschitz_upper_bound: parameters do not match the architecture");
  double bound = 1.0;
  for (std::size_t i = 0; i < spec.num_layers(); ++i)
    bound *= spectral_norm(params.matrix(2 * i), options);
  return bound;
}

LipschitzCertificate certify(const ModelSpec& spec, const ParameterVector& u,
                             const ParameterVector& v) {
  LipschitzCertificate cert;
  cert.representation = lipschitz_upper_bound(spec.representation, u);
  cert.predictor = lipschitz_upper_bound(spec.predictor, v);
  cert.loss = 1.0;
  return cert;
}

}  // namespace imda
