#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imda/models.hpp"

namespace imda {

enum class LabelCost { kNone, kIndicator, kAbsolute };

// rho((x, y), (x', y')) = label_cost(y, y') + scale * |x - x'|_2
struct GroundMetric {
  LabelCost label_cost = LabelCost::kAbsolute;
  double scale = 1.0;
  std::string space = "example";  // "example" or "representation"

  // Input space, scale L * M * K.
  static GroundMetric example_space(const LipschitzCertificate& cert);
  // Representation space, scale L * M.
  static GroundMetric representation_space(const LipschitzCertificate& cert);

  double operator()(std::span<const double> x, double y, std::span<const double> x2,
                    double y2) const;
};

struct LabeledPoint {
  std::vector<double> x;
  double y = 0.0;
};

// Two uniform empirical measures with the same number of atoms.
struct DiscreteMeasurePair {
  std::vector<LabeledPoint> first;
  std::vector<LabeledPoint> second;

  void validate() const;
};

inline constexpr std::size_t kMaxExactAtoms = 7;

// Header `set,label,f0,f1,...`; set is 0 or 1 (or a / b) and selects the
// side of the pair. Labels are real numbers.
DiscreteMeasurePair load_measure_pair_csv(const std::string& path);

// Minimum over all permutation couplings of the mean matched cost.
double exact_w1(const DiscreteMeasurePair& pair, const GroundMetric& metric);

// Mean of |h(u, v, x) - y| over the atoms; regression mode only.
double regression_risk(const ModelSpec& spec, const ParameterVector& u, const ParameterVector& v,
                       std::span<const LabeledPoint> atoms);

struct RiskGapCheck {
  double lhs = 0.0;  // |R_first - R_second|
  double rhs = 0.0;  // exact W1 under the certified example-space metric
  bool holds = false;
};

// Risk gap versus W1 for a regression model with absolute loss. The first
// measure plays the target, the second the combined source.
RiskGapCheck check_risk_gap(const ModelSpec& spec, const ParameterVector& u, const ParameterVector& v,
                       const DiscreteMeasurePair& pair, const LipschitzCertificate& cert);

struct DualCheck {
  double critic_gap = 0.0;   // mean f(first) - mean f(second)
  double lipschitz = 0.0;    // certified constant of f under the metric
  double normalized = 0.0;   // critic_gap / lipschitz
  double w1 = 0.0;
};

// Critic f(x, y) = |h(x) - y| with h an MLP on the atom features. Under
// label_cost = absolute and scale s its Lipschitz constant is at most
// max(1, L / s), L the certified constant of h.
DualCheck kantorovich_check(const MlpSpec& critic, const ParameterVector& params,
                            const DiscreteMeasurePair& pair, const GroundMetric& metric);

// Hoeffding constant (b - a) / 2 for losses bounded in [a, b].
double subgaussian_from_range(double lower, double upper);

struct BoundConstants {
  double sigma = 0.0;
  double m_t = 0.0;        // labeled target size
  double m_t_prime = 0.0;  // unlabeled target size
  std::vector<double> m;   // source sizes
  std::vector<double> alpha;
  double epsilon = 0.0;
  double tau = 1.0;
  std::optional<double> delta_u;
  std::optional<double> delta_v;
  double r_star = 0.0;      // user-supplied
  double r_star_rep = 0.0;  // user-supplied
  double empirical_risk = 0.0;

  // sum_i alpha_i^2 / m_i
  double alpha_mass() const;
};

struct BoundTerm {
  std::string name;
  double value = 0.0;
};

struct BoundReport {
  std::vector<BoundTerm> terms;
  double total = 0.0;

  double term(const std::string& name) const;
  void write_csv(const std::string& path) const;
};

// sigma sqrt(2((1-eps)^2/m_t + eps^2 sum alpha^2/m) I_uv)
//   + sigma sqrt(2 eps^2 (sum alpha^2/m + 1/m_t) I_u)
BoundReport bound_supervised_gap(const BoundConstants& c, double i_uv, double i_u);

// sqrt(2 sigma^2 (sum alpha^2/m + 1/m_t') I_uv) + R*_rep + R*
BoundReport bound_unsupervised_gap(const BoundConstants& c, double i_uv);

// Empirical combined risk plus the gradient-norm terms. Terms with a zero
// coefficient are reported as 0 without touching their sample counts.
BoundReport bound_gradient_norm(const BoundConstants& c);

}  // namespace imda
