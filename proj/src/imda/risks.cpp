#include "imda/risks.hpp"

#include <cmath>

#include "imda/error.hpp"

namespace imda {

std::vector<double> nll_per_example(const Matrix& log_probs, std::span<const int> labels) {
  if (labels.size() != log_probs.rows())
    throw ShapeError("nll: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(log_probs.rows()) + " rows");
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= log_probs.cols())
      throw DataError("nll: label " + std::to_string(l) + " outside the label set");
    out[i] = -log_probs(i, static_cast<std::size_t>(l));
  }
  return out;
}

namespace {

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void require_classification(const ModelSpec& spec, const char* what) {
  if (spec.task != Task::kClassification)
    throw ConfigError(std::string(what) + " needs a classification model");
}

double batch_nll(const ModelSpec& spec, const ParameterVector& u, const ParameterVector& v,
                 const Matrix& x, std::span<const int> labels) {
  return mean(nll_per_example(predict(spec, v, represent(spec, u, x)), labels));
}

}  // namespace

double empirical_risk_target(const ModelSpec& spec, const ParameterVector& u,
                             const ParameterVector& v, const LabeledSet& batch) {
  require_classification(spec, "empirical_risk_target");
  if (batch.empty()) throw DataError("empirical_risk_target: empty batch");
  return batch_nll(spec, u, v, batch.x, batch.labels);
}

void require_simplex(std::span<const double> alpha, const char* context) {
  double total = 0.0;
  for (double a : alpha) {
    if (!(a >= 0.0)) throw NumericError(std::string(context) + ": negative domain weight");
    total += a;
  }
  if (alpha.empty() || std::fabs(total - 1.0) > 1e-9)
    throw NumericError(std::string(context) + ": domain weights are not on the simplex");
}

SourceRisks empirical_risk_sources(const ModelSpec& spec, const ParameterVector& u,
                                   const ParameterVector& v, std::span<const LabeledSet> batches,
                                   std::span<const double> alpha) {
  require_classification(spec, "empirical_risk_sources");
  require_simplex(alpha, "empirical_risk_sources");
  if (batches.size() != alpha.size())
    throw DataError("empirical_risk_sources: " + std::to_string(batches.size()) +
                    " source batches for " + std::to_string(alpha.size()) + " weights");
  SourceRisks out;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    if (batches[i].empty())
      throw DataError("empirical_risk_sources: empty batch for source " + std::to_string(i + 1));
    const double r = batch_nll(spec, u, v, batches[i].x, batches[i].labels);
    out.per_source.push_back(r);
    out.combined += alpha[i] * r;
  }
  return out;
}

PseudoBatch make_pseudo_batch(const ModelSpec& spec, const ParameterVector& u,
                              const ParameterVector& v, const ParameterVector& v_dup,
                              const Matrix& x) {
  require_classification(spec, "pseudo labels");
  const Matrix features = represent(spec, u, x);
  return {x, argmax_rows(predict(spec, v, features)), argmax_rows(predict(spec, v_dup, features))};
}

double pseudo_label_risk(const ModelSpec& spec, const ParameterVector& u,
                         const ParameterVector& v, const ParameterVector& v_dup,
                         const Matrix& x, double coef1, double coef2) {
  require_classification(spec, "pseudo_label_risk");
  if (!(coef1 >= 0.0 && coef2 >= 0.0))
    throw ConfigError("pseudo_label_risk: coefficients must be non-negative");
  if (x.rows() == 0) throw DataError("pseudo_label_risk: empty batch");
  const Matrix features = represent(spec, u, x);
  const Matrix main = predict(spec, v, features);
  const Matrix dup = predict(spec, v_dup, features);
  const auto labels = argmax_rows(main);
  const auto dup_labels = argmax_rows(dup);
  return coef1 * mean(nll_per_example(dup, labels)) + coef2 * mean(nll_per_example(main, dup_labels));
}

double w1_dual_supervised(const ModelSpec& spec, const ParameterVector& u,
                          const ParameterVector& v_dup, const LabeledSet& target,
                          std::span<const LabeledSet> sources, std::span<const double> alpha) {
  return empirical_risk_target(spec, u, v_dup, target) -
         empirical_risk_sources(spec, u, v_dup, sources, alpha).combined;
}

double w1_dual_pseudo(const ModelSpec& spec, const ParameterVector& u, const ParameterVector& v,
                      const ParameterVector& v_dup, const Matrix& target_x,
                      std::span<const LabeledSet> sources, std::span<const double> alpha,
                      double coef1, double coef2) {
  return pseudo_label_risk(spec, u, v, v_dup, target_x, coef1, coef2) -
         empirical_risk_sources(spec, u, v_dup, sources, alpha).combined;
}

double assemble_combined(double epsilon, double tau, const RiskBreakdown& p) {
  return tau * (1.0 - epsilon) * p.target_risk + tau * epsilon * p.combined_source_risk +
         tau * epsilon * p.w1_supervised + (1.0 - tau) * p.w1_pseudo;
}

RiskBreakdown combined_objective(const ModelTriple& model, const ObjectiveInputs& in) {
  if (!(in.epsilon >= 0.0 && in.epsilon <= 1.0 && in.tau >= 0.0 && in.tau <= 1.0))
    throw ConfigError("combined_objective: epsilon and tau must lie in [0, 1]");
  const auto& spec = model.spec;
  RiskBreakdown out;
  const bool supervised = in.tau > 0.0;
  const bool unsupervised = in.tau < 1.0;
  const bool sources_used = in.tau * in.epsilon > 0.0 || unsupervised;

  if (supervised && in.epsilon < 1.0) {
    if (in.target == nullptr) throw DataError("combined_objective: labeled target missing");
    out.target_risk = empirical_risk_target(spec, model.rep, model.pred, *in.target);
  }
  if (sources_used) {
    const auto s = empirical_risk_sources(spec, model.rep, model.pred, in.sources, in.alpha);
    out.per_source_risks = s.per_source;
    out.combined_source_risk = s.combined;
  }
  double critic_source = 0.0;
  if (sources_used)
    critic_source = empirical_risk_sources(spec, model.rep, model.dup, in.sources, in.alpha).combined;
  if (supervised && in.epsilon > 0.0) {
    if (in.target == nullptr) throw DataError("combined_objective: labeled target missing");
    out.w1_supervised = empirical_risk_target(spec, model.rep, model.dup, *in.target) - critic_source;
  }
  if (unsupervised) {
    if (in.target_unlabeled == nullptr)
      throw DataError("combined_objective: unlabeled target missing");
    out.w1_pseudo = pseudo_label_risk(spec, model.rep, model.pred, model.dup, *in.target_unlabeled,
                                      in.coef1, in.coef2) -
                    critic_source;
  }
  out.combined = assemble_combined(in.epsilon, in.tau, out);
  return out;
}

PenaltyResult jacobian_penalty(const MlpSpec& critic, const ParameterVector& params,
                               const Matrix& points) {
  if (!(params.layout() == critic.layout()))
    throw ShapeError("jacobian_penalty: parameters do not match the critic");
  if (points.cols() != critic.input_width())
    throw ShapeError("jacobian_penalty: feature width " + std::to_string(points.cols()) +
                     ", critic expects " + std::to_string(critic.input_width()));
  if (points.rows() == 0) throw DataError("jacobian_penalty: no points");

  const std::size_t layers = critic.num_layers();
  std::vector<Matrix> weights;
  for (std::size_t l = 0; l < layers; ++l) weights.push_back(params.matrix(2 * l));

  PenaltyResult result{0.0, params.zeros_like()};
  const double inv_n = 1.0 / static_cast<double>(points.rows());
  for (std::size_t p = 0; p < points.rows(); ++p) {
    // ReLU derivative masks at this point.
    std::vector<std::vector<double>> masks(layers);
    Matrix h = Matrix::row_vector(points.row(p));
    for (std::size_t l = 0; l < layers; ++l) {
      Matrix y = matmul(h, weights[l]);
      const auto b = params.entry_values(2 * l + 1);
      masks[l].assign(y.cols(), 1.0);
      for (std::size_t c = 0; c < y.cols(); ++c) {
        y(0, c) += b[c];
        if (critic.activations[l] == Activation::kRelu) {
          masks[l][c] = y(0, c) > 0.0 ? 1.0 : 0.0;
          y(0, c) = y(0, c) > 0.0 ? y(0, c) : 0.0;
        }
      }
      h = std::move(y);
    }
    // Row convention: d(score) = d(x) * A, A = prod_l W_l D_l.
    auto scaled = [&](std::size_t l) {
      Matrix wd = weights[l];
      for (std::size_t r = 0; r < wd.rows(); ++r)
        for (std::size_t c = 0; c < wd.cols(); ++c) wd(r, c) *= masks[l][c];
      return wd;
    };
    std::vector<Matrix> left(layers + 1);  // left[l] = prod_{k<l} W_k D_k
    left[0] = Matrix::identity(critic.input_width());
    for (std::size_t l = 0; l < layers; ++l) left[l + 1] = matmul(left[l], scaled(l));
    const Matrix& jac = left[layers];
    result.value += inv_n * squared_norm(jac.values());

    // right[l] = D_l prod_{k>l} W_k D_k, built from the output side.
    Matrix right = Matrix::identity(critic.output_width());
    for (std::size_t l = layers; l-- > 0;) {
      Matrix dright = right;  // D_l * right
      for (std::size_t r = 0; r < dright.rows(); ++r)
        for (std::size_t c = 0; c < dright.cols(); ++c) dright(r, c) *= masks[l][r];
      // dP/dW_l = 2 left_l^T A dright^T
      const Matrix g = matmul_nt(matmul_tn(left[l], jac), dright);
      auto dst = result.gradient.entry_values(2 * l);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += 2.0 * inv_n * g.values()[i];
      right = matmul(weights[l], dright);
    }
  }
  return result;
}

Matrix interpolate_rows(const Matrix& a, const Matrix& b, Rng& rng) {
  if (a.cols() != b.cols())
    throw ShapeError("interpolate_rows: feature widths " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.cols()));
  if (a.rows() == 0 || b.rows() == 0) throw DataError("interpolate_rows: empty batch");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double lambda = unit(rng);
    const auto ar = a.row(i);
    const auto br = b.row(i % b.rows());
    auto o = out.row(i);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] = lambda * ar[c] + (1.0 - lambda) * br[c];
  }
  return out;
}

PenaltyResult gradient_penalty_interp(const MlpSpec& critic, const ParameterVector& params,
                                      const Matrix& target_features,
                                      const Matrix& source_features, Rng& rng) {
  return jacobian_penalty(critic, params, interpolate_rows(target_features, source_features, rng));
}

double gradient_penalty_param(const ParameterVector& gradient) { return gradient.squared_norm(); }

std::vector<ParameterVector> param_penalty_gradient(Graph& graph, NodeId output,
                                                    std::span<const ParameterVector> blocks,
                                                    std::span<const ParameterVector> gradient,
                                                    std::span<const std::size_t> wrt,
                                                    double radius) {
  if (gradient.size() != blocks.size())
    throw ShapeError("param_penalty_gradient: one gradient per block required");
  std::vector<ParameterVector> out;
  for (const auto& g : gradient) out.push_back(g.zeros_like());
  double sq = 0.0;
  for (auto b : wrt) {
    if (b >= blocks.size()) throw ShapeError("param_penalty_gradient: unknown block");
    sq += gradient[b].squared_norm();
  }
  if (sq == 0.0) return out;
  const double h = radius / std::sqrt(sq);
  auto grad_at = [&](double sign) {
    std::vector<ParameterVector> shifted(blocks.begin(), blocks.end());
    for (auto b : wrt) shifted[b].axpy(sign * h, gradient[b]);
    graph.forward(shifted);
    return graph.backward(output);
  };
  const auto plus = grad_at(1.0);
  const auto minus = grad_at(-1.0);
  // 2 * (plus - minus) / (2h)
  for (auto b : wrt) {
    out[b].axpy(1.0 / h, plus[b]);
    out[b].axpy(-1.0 / h, minus[b]);
  }
  return out;
}

}  // namespace imda
