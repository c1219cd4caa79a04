#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace imda {

class GradNormLedger;

// Euclidean projection onto the probability simplex (sort and threshold).
std::vector<double> simplex_project(std::span<const double> point);

// True when alpha is non-negative and sums to one within `tol`.
bool on_simplex(std::span<const double> alpha, double tol = 1e-9);

// f(alpha) = sum_i alpha_i c_i + lambda_r * sqrt(sum_i alpha_i^2 / m_i)
struct AlphaObjective {
  std::vector<double> linear;
  double lambda_r = 0.0;

  double regularizer(std::span<const double> alpha, std::span<const double> m) const;
  double value(std::span<const double> alpha, std::span<const double> m) const;
  std::vector<double> gradient(std::span<const double> alpha, std::span<const double> m) const;
};

struct AlphaTerms {
  double epsilon = 0.0;
  double tau = 1.0;
  double c0 = 1.0;
  double c1 = 0.5;
};

double regularizer_weight(const AlphaTerms& terms, double delta_u, double delta_v);

// c_i = (eps tau + C0 (1 - tau)) r_i(v) - (eps tau + 1 - tau) r_i(v'). The
// ledger may be null only when `lambda_override` is given.
AlphaObjective build_objective(std::span<const double> risks_v, std::span<const double> risks_dup,
                               const AlphaTerms& terms, const GradNormLedger* ledger,
                               const double* lambda_override = nullptr);

struct SolveOptions {
  double tolerance = 1e-8;
  int max_iterations = 100000;
};

// Projected gradient with backtracking, started at the uniform point. Throws
// ConvergenceError carrying the best iterate when the cap is hit.
std::vector<double> solve_alpha(const AlphaObjective& objective, std::span<const double> m,
                                const SolveOptions& options = {});

// c * old + (1 - c) * fresh
std::vector<double> moving_average_update(std::span<const double> old_alpha,
                                          std::span<const double> fresh, double c);

// Exhaustive search over the grid {k * step} on the simplex, N <= 3.
std::vector<double> grid_oracle(const AlphaObjective& objective, std::span<const double> m,
                                double step);

}  // namespace imda
