#include "imda/alpha_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "imda/error.hpp"
#include "imda/optimizer.hpp"

namespace imda {

std::vector<double> simplex_project(std::span<const double> point) {
  if (point.empty()) throw ConfigError("simplex_project: empty input");
  for (double p : point)
    if (!std::isfinite(p)) throw NumericError("simplex_project: non-finite entry");
  std::vector<double> sorted(point.begin(), point.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - t > 0.0) theta = t;
  }
  std::vector<double> out(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) out[i] = std::max(point[i] - theta, 0.0);
  return out;
}

bool on_simplex(std::span<const double> alpha, double tol) {
  if (alpha.empty()) return false;
  double total = 0.0;
  for (double a : alpha) {
    if (!(a >= 0.0)) return false;
    total += a;
  }
  return std::fabs(total - 1.0) <= tol;
}

namespace {

void check_sizes(const AlphaObjective& f, std::span<const double> alpha,
                 std::span<const double> m) {
  if (alpha.size() != f.linear.size() || m.size() != f.linear.size())
    throw ShapeError("alpha objective: expected " + std::to_string(f.linear.size()) +
                     " sources, got alpha " + std::to_string(alpha.size()) + " and m " +
                     std::to_string(m.size()));
}

void check_counts(std::span<const double> m) {
  for (double mi : m)
    if (!(mi >= 1.0)) throw DataError("alpha objective: sample counts must be >= 1");
}

}  // namespace

double AlphaObjective::regularizer(std::span<const double> alpha,
                                   std::span<const double> m) const {
  check_sizes(*this, alpha, m);
  double s = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) s += alpha[i] * alpha[i] / m[i];
  return std::sqrt(s);
}

double AlphaObjective::value(std::span<const double> alpha, std::span<const double> m) const {
  double lin = 0.0;
  for (std::size_t i = 0; i < alpha.size() && i < linear.size(); ++i) lin += alpha[i] * linear[i];
  return lin + lambda_r * regularizer(alpha, m);
}

std::vector<double> AlphaObjective::gradient(std::span<const double> alpha,
                                             std::span<const double> m) const {
  const double r = regularizer(alpha, m);
  std::vector<double> g(linear);
  if (r > 0.0)
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += lambda_r * alpha[i] / (m[i] * r);
  return g;
}

double regularizer_weight(const AlphaTerms& t, double delta_u, double delta_v) {
  return t.c1 * ((1.0 - t.tau + t.tau * t.epsilon) * std::sqrt(delta_u + delta_v) +
                 t.tau * t.epsilon * std::sqrt(delta_u));
}

AlphaObjective build_objective(std::span<const double> risks_v, std::span<const double> risks_dup,
                               const AlphaTerms& t, const GradNormLedger* ledger,
                               const double* lambda_override) {
  if (risks_v.size() != risks_dup.size() || risks_v.empty())
    throw ShapeError("build_objective: per-source risk lists differ in length or are empty");
  AlphaObjective f;
  const double a = t.epsilon * t.tau + t.c0 * (1.0 - t.tau);
  const double b = t.epsilon * t.tau + 1.0 - t.tau;
  for (std::size_t i = 0; i < risks_v.size(); ++i)
    f.linear.push_back(a * risks_v[i] - b * risks_dup[i]);
  if (lambda_override != nullptr) {
    if (!(*lambda_override >= 0.0)) throw ConfigError("lambda_r override must be >= 0");
    f.lambda_r = *lambda_override;
  } else {
    if (ledger == nullptr)
      throw NumericError(
          "build_objective: no gradient-norm ledger (noiseless run); set a fixed lambda_r "
          "override");
    f.lambda_r = regularizer_weight(t, ledger->delta_u(), ledger->delta_v());
  }
  return f;
}

std::vector<double> solve_alpha(const AlphaObjective& objective, std::span<const double> m,
                                const SolveOptions& options) {
  const std::size_t n = objective.linear.size();
  if (n == 0) throw ConfigError("solve_alpha: no sources");
  check_counts(m);
  std::vector<double> alpha(n, 1.0 / static_cast<double>(n));
  check_sizes(objective, alpha, m);
  for (double c : objective.linear)
    if (!std::isfinite(c)) throw NumericError("solve_alpha: non-finite linear coefficient");
  if (!(objective.lambda_r >= 0.0) || !std::isfinite(objective.lambda_r))
    throw NumericError("solve_alpha: regularizer weight must be finite and >= 0");
  if (n == 1) return alpha;

  // The minimizer is invariant under positive scaling; work at unit scale
  // so the tolerance means the same thing whatever the size of lambda_r.
  double scale = std::max(1.0, objective.lambda_r);
  for (double c : objective.linear) scale = std::max(scale, std::fabs(c));
  AlphaObjective f = objective;
  for (double& c : f.linear) c /= scale;
  f.lambda_r /= scale;

  auto residual = [&](const std::vector<double>& a, const std::vector<double>& g) {
    std::vector<double> probe(n);
    for (std::size_t i = 0; i < n; ++i) probe[i] = a[i] - g[i];
    const auto p = simplex_project(probe);
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) r += (a[i] - p[i]) * (a[i] - p[i]);
    return std::sqrt(r);
  };

  double value = f.value(alpha, m);
  double last_residual = 0.0;
  double trial = 1.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    const auto g = f.gradient(alpha, m);
    last_residual = residual(alpha, g);
    if (last_residual < options.tolerance) return alpha;

    // Backtracking with halving. The first trial is a unit step; later ones
    // start from twice the last accepted step, since the regularizer can be
    // so flat near the optimum that unit steps crawl.
    double step = trial;
    bool accepted = false;
    std::vector<double> next(n), probe(n);
    double next_value = value;
    for (int halving = 0; halving < 60; ++halving) {
      for (std::size_t i = 0; i < n; ++i) probe[i] = alpha[i] - step * g[i];
      next = simplex_project(probe);
      next_value = f.value(next, m);
      double move = 0.0;
      for (std::size_t i = 0; i < n; ++i) move += (next[i] - alpha[i]) * (next[i] - alpha[i]);
      if (next_value <= value - 0.5 / step * move) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    // No decrease is representable any more: the objective is minimal to
    // rounding.
    if (!accepted) return alpha;
    trial = 2.0 * step;
    alpha = std::move(next);
    value = next_value;
  }
  throw ConvergenceError("solve_alpha: projected-gradient norm " + std::to_string(last_residual) +
                             " after " + std::to_string(options.max_iterations) + " iterations",
                         alpha);
}

std::vector<double> moving_average_update(std::span<const double> old_alpha,
                                          std::span<const double> fresh, double c) {
  if (!(c > 0.0 && c < 1.0)) throw ConfigError("moving_average_update: C must lie in (0, 1)");
  if (old_alpha.size() != fresh.size())
    throw ShapeError("moving_average_update: weight vectors differ in length");
  if (!on_simplex(old_alpha) || !on_simplex(fresh))
    throw NumericError("moving_average_update: input off the simplex");
  std::vector<double> out(old_alpha.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * old_alpha[i] + (1.0 - c) * fresh[i];
  return out;
}

std::vector<double> grid_oracle(const AlphaObjective& f, std::span<const double> m, double step) {
  const std::size_t n = f.linear.size();
  if (n == 0) throw ConfigError("grid_oracle: no sources");
  if (n > 3) throw ConfigError("grid_oracle: at most 3 sources");
  if (!(step > 0.0 && step <= 0.01)) throw ConfigError("grid_oracle: step must lie in (0, 0.01]");
  check_counts(m);
  const long ticks = std::lround(1.0 / step);
  std::vector<double> best;
  double best_value = std::numeric_limits<double>::infinity();
  auto consider = [&](std::vector<double> a) {
    const double v = f.value(a, m);
    if (v < best_value) {
      best_value = v;
      best = std::move(a);
    }
  };
  const double t = static_cast<double>(ticks);
  if (n == 1) {
    consider({1.0});
  } else if (n == 2) {
    for (long i = 0; i <= ticks; ++i) consider({i / t, (ticks - i) / t});
  } else {
    for (long i = 0; i <= ticks; ++i)
      for (long j = 0; i + j <= ticks; ++j) consider({i / t, j / t, (ticks - i - j) / t});
  }
  return best;
}

}  // namespace imda
