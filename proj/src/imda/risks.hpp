#pragma once

#include <span>
#include <vector>

#include "imda/data.hpp"
#include "imda/graph.hpp"
#include "imda/models.hpp"
#include "imda/parameters.hpp"
#include "imda/rng.hpp"

namespace imda {

// Per-example negative log-likelihood of `labels` under row log-probabilities.
std::vector<double> nll_per_example(const Matrix& log_probs, std::span<const int> labels);

// Mean NLL of h(v, g(u, x)) on a labeled batch.
double empirical_risk_target(const ModelSpec& spec, const ParameterVector& u,
                             const ParameterVector& v, const LabeledSet& batch);

struct SourceRisks {
  double combined = 0.0;            // sum_i alpha_i r_i
  std::vector<double> per_source;   // unweighted batch means r_i
};

SourceRisks empirical_risk_sources(const ModelSpec& spec, const ParameterVector& u,
                                   const ParameterVector& v, std::span<const LabeledSet> batches,
                                   std::span<const double> alpha);

// Throws unless alpha is non-negative and sums to one within 1e-9.
void require_simplex(std::span<const double> alpha, const char* context);

// Hard labels from the main and duplicate predictors, recomputed on demand.
struct PseudoBatch {
  Matrix x;
  std::vector<int> labels;      // argmax h(v, g(u, x))
  std::vector<int> dup_labels;  // argmax h(v', g(u, x))
};

PseudoBatch make_pseudo_batch(const ModelSpec& spec, const ParameterVector& u,
                              const ParameterVector& v, const ParameterVector& v_dup,
                              const Matrix& x);

// coef1 * l(h(v', g(u,x)), Yhat) + coef2 * l(h(v, g(u,x)), Yhat'), batch mean.
double pseudo_label_risk(const ModelSpec& spec, const ParameterVector& u,
                         const ParameterVector& v, const ParameterVector& v_dup,
                         const Matrix& x, double coef1, double coef2);

// Current critic value R_T(u, v') - R_S^alpha(u, v'); the max over v' is
// carried out by the training loop.
double w1_dual_supervised(const ModelSpec& spec, const ParameterVector& u,
                          const ParameterVector& v_dup, const LabeledSet& target,
                          std::span<const LabeledSet> sources, std::span<const double> alpha);

// Pseudo-label risk of the critic minus R_S^alpha(u, v').
double w1_dual_pseudo(const ModelSpec& spec, const ParameterVector& u, const ParameterVector& v,
                      const ParameterVector& v_dup, const Matrix& target_x,
                      std::span<const LabeledSet> sources, std::span<const double> alpha,
                      double coef1, double coef2);

struct RiskBreakdown {
  double target_risk = 0.0;
  std::vector<double> per_source_risks;
  double combined_source_risk = 0.0;
  double w1_supervised = 0.0;
  double w1_pseudo = 0.0;
  double combined = 0.0;
};

// tau(1-eps) R_T + tau eps R_S + tau eps W1_sup + (1-tau) W1_pseudo
double assemble_combined(double epsilon, double tau, const RiskBreakdown& parts);

struct ObjectiveInputs {
  const LabeledSet* target = nullptr;             // needed when tau > 0
  const Matrix* target_unlabeled = nullptr;       // needed when tau < 1
  std::span<const LabeledSet> sources;
  std::span<const double> alpha;
  double epsilon = 0.0;
  double tau = 1.0;
  double coef1 = 0.06;
  double coef2 = 1.2;
};

// Terms whose coefficient vanishes are left at zero and their data is not
// read.
RiskBreakdown combined_objective(const ModelTriple& model, const ObjectiveInputs& in);

struct PenaltyResult {
  double value = 0.0;
  ParameterVector gradient;  // with respect to the critic parameters
};

// Squared Frobenius norm of the critic's score Jacobian at the given input
// rows, averaged, together with its gradient in the critic parameters.
PenaltyResult jacobian_penalty(const MlpSpec& critic, const ParameterVector& params,
                               const Matrix& points);

// Interpolates target and source feature rows pairwise (source row i taken
// modulo its count) with lambda ~ U[0, 1] per pair and evaluates the
// Jacobian penalty there.
PenaltyResult gradient_penalty_interp(const MlpSpec& critic, const ParameterVector& params,
                                      const Matrix& target_features,
                                      const Matrix& source_features, Rng& rng);

Matrix interpolate_rows(const Matrix& a, const Matrix& b, Rng& rng);

// Squared Euclidean norm of a parameter gradient.
double gradient_penalty_param(const ParameterVector& gradient);

// Gradient of |grad_wrt J|^2 with respect to the blocks in `wrt`, that is
// 2 H g, from a central difference of the gradient along g with step
// `radius` / |g|. `gradient` holds g for every block (other entries are
// ignored). Leaves the graph forwarded at a shifted point.
std::vector<ParameterVector> param_penalty_gradient(Graph& graph, NodeId output,
                                                    std::span<const ParameterVector> blocks,
                                                    std::span<const ParameterVector> gradient,
                                                    std::span<const std::size_t> wrt,
                                                    double radius = 1e-4);

}  // namespace imda
