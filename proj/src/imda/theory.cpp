#include "imda/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <limits>
#include <numeric>

#include "imda/error.hpp"

namespace imda {

GroundMetric GroundMetric::example_space(const LipschitzCertificate& cert) {
  return {LabelCost::kAbsolute, cert.predictor * cert.loss * cert.representation, "example"};
}

GroundMetric GroundMetric::representation_space(const LipschitzCertificate& cert) {
  return {LabelCost::kAbsolute, cert.predictor * cert.loss, "representation"};
}

double GroundMetric::operator()(std::span<const double> x, double y, std::span<const double> x2,
                                double y2) const {
  if (x.size() != x2.size())
    throw ShapeError("ground metric: feature widths " + std::to_string(x.size()) + " and " +
                     std::to_string(x2.size()));
  double label = 0.0;
  switch (label_cost) {
    case LabelCost::kNone: break;
    case LabelCost::kIndicator: label = y != y2 ? 1.0 : 0.0; break;
    case LabelCost::kAbsolute: label = std::fabs(y - y2); break;
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - x2[i]) * (x[i] - x2[i]);
  return label + (scale == 0.0 ? 0.0 : scale * std::sqrt(sq));
}

void DiscreteMeasurePair::validate() const {
  if (first.size() != second.size())
    throw ShapeError("measure pair: sizes " + std::to_string(first.size()) + " and " +
                     std::to_string(second.size()) + " differ");
  if (first.empty()) throw DataError("measure pair: empty supports");
  if (first.size() > kMaxExactAtoms)
    throw ConfigError("measure pair: at most " + std::to_string(kMaxExactAtoms) +
                      " atoms for exact transport");
  const std::size_t width = first.front().x.size();
  for (const auto* side : {&first, &second})
    for (const auto& p : *side)
      if (p.x.size() != width) throw ShapeError("measure pair: inconsistent feature width");
}

DiscreteMeasurePair load_measure_pair_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  auto fields = [](const std::string& line) {
    std::vector<std::string> out;
    std::string f;
    std::istringstream ss(line);
    while (std::getline(ss, f, ',')) {
      const auto b = f.find_first_not_of(" \t\r");
      const auto e = f.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? std::string() : f.substr(b, e - b + 1));
    }
    return out;
  };
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ":1: missing header");
  const auto header = fields(line);
  if (header.size() < 2 || header[0] != "set" || header[1] != "label")
    throw DataError(path + ":1: header must start with set,label");
  const std::size_t width = header.size() - 2;
  DiscreteMeasurePair pair;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = fields(line);
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    if (f.size() != width + 2)
      throw DataError(where + "expected " + std::to_string(width + 2) + " fields, found " +
                      std::to_string(f.size()));
    std::vector<LabeledPoint>* side = nullptr;
    if (f[0] == "0" || f[0] == "a") side = &pair.first;
    else if (f[0] == "1" || f[0] == "b") side = &pair.second;
    else throw DataError(where + "set must be 0/1 or a/b");
    LabeledPoint p;
    try {
      std::size_t used = 0;
      p.y = std::stod(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument("label");
      for (std::size_t j = 0; j < width; ++j) {
        p.x.push_back(std::stod(f[j + 2], &used));
        if (used != f[j + 2].size()) throw std::invalid_argument("feature");
      }
    } catch (const std::exception&) {
      throw DataError(where + "unparseable number");
    }
    side->push_back(std::move(p));
  }
  return pair;
}

double exact_w1(const DiscreteMeasurePair& pair, const GroundMetric& metric) {
  pair.validate();
  if (!(metric.scale >= 0.0)) throw ConfigError("exact_w1: negative metric scale");
  const std::size_t n = pair.first.size();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost[i * n + j] = metric(pair.first[i].x, pair.first[i].y, pair.second[j].x,
                               pair.second[j].y);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i * n + perm[i]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

namespace {

Matrix atom_matrix(std::span<const LabeledPoint> atoms) {
  Matrix x(atoms.size(), atoms.empty() ? 0 : atoms.front().x.size());
  for (std::size_t i = 0; i < atoms.size(); ++i)
    std::copy(atoms[i].x.begin(), atoms[i].x.end(), x.row(i).begin());
  return x;
}

double mean_abs_error(const Matrix& scores, std::span<const LabeledPoint> atoms) {
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) total += std::fabs(scores(i, 0) - atoms[i].y);
  return total / static_cast<double>(atoms.size());
}

}  // namespace

double regression_risk(const ModelSpec& spec, const ParameterVector& u, const ParameterVector& v,
                       std::span<const LabeledPoint> atoms) {
  if (spec.task != Task::kRegression)
    throw ConfigError("regression_risk: model is not in regression mode");
  if (atoms.empty()) throw DataError("regression_risk: no atoms");
  return mean_abs_error(predict(spec, v, represent(spec, u, atom_matrix(atoms))), atoms);
}

RiskGapCheck check_risk_gap(const ModelSpec& spec, const ParameterVector& u, const ParameterVector& v,
                       const DiscreteMeasurePair& pair, const LipschitzCertificate& cert) {
  if (spec.task != Task::kRegression)
    throw ConfigError("check_risk_gap: needs a regression-mode model with absolute loss");
  pair.validate();
  RiskGapCheck out;
  out.lhs = std::fabs(regression_risk(spec, u, v, pair.first) -
                      regression_risk(spec, u, v, pair.second));
  out.rhs = exact_w1(pair, GroundMetric::example_space(cert));
  out.holds = out.lhs <= out.rhs + 1e-9;
  return out;
}

DualCheck kantorovich_check(const MlpSpec& critic, const ParameterVector& params,
                            const DiscreteMeasurePair& pair, const GroundMetric& metric) {
  pair.validate();
  if (critic.output_width() != 1) throw ShapeError("kantorovich_check: critic must be scalar");
  if (metric.label_cost != LabelCost::kAbsolute)
    throw ConfigError("kantorovich_check: needs the absolute label cost");
  if (!(metric.scale > 0.0)) throw ConfigError("kantorovich_check: metric scale must be > 0");
  DualCheck out;
  const double l = lipschitz_upper_bound(critic, params);
  out.lipschitz = std::max(1.0, l / metric.scale);
  out.critic_gap = mean_abs_error(mlp_forward(critic, params, atom_matrix(pair.first)), pair.first) -
                   mean_abs_error(mlp_forward(critic, params, atom_matrix(pair.second)), pair.second);
  out.normalized = out.critic_gap / out.lipschitz;
  out.w1 = exact_w1(pair, metric);
  return out;
}

double subgaussian_from_range(double lower, double upper) {
  if (!(upper >= lower)) throw ConfigError("subgaussian_from_range: upper bound below lower");
  return (upper - lower) / 2.0;
}

double BoundConstants::alpha_mass() const {
  if (alpha.size() != m.size() || alpha.empty())
    throw ShapeError("bound constants: alpha and source sizes differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] == 0.0) continue;
    if (!(m[i] >= 1.0)) throw DataError("bound constants: source sizes must be >= 1");
    s += alpha[i] * alpha[i] / m[i];
  }
  return s;
}

double BoundReport::term(const std::string& name) const {
  for (const auto& t : terms)
    if (t.name == name) return t.value;
  throw ConfigError("bound report has no term '" + name + "'");
}

void BoundReport::write_csv(const std::string& path) const {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw Error("cannot write " + path);
  std::fprintf(f, "term_name,value\n");
  for (const auto& t : terms) std::fprintf(f, "%s,%.17g\n", t.name.c_str(), t.value);
  std::fprintf(f, "total,%.17g\n", total);
  if (std::fclose(f) != 0) throw Error("cannot write " + path);
}

namespace {

void require_non_negative(double v, const char* what) {
  if (!(v >= 0.0)) throw ConfigError(std::string("bound: ") + what + " must be >= 0");
}

void check_common(const BoundConstants& c) {
  require_non_negative(c.sigma, "sigma");
  if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0)) throw ConfigError("bound: epsilon outside [0, 1]");
  if (!(c.tau >= 0.0 && c.tau <= 1.0)) throw ConfigError("bound: tau outside [0, 1]");
}

double inverse_count(double m, const char* what) {
  if (!(m >= 1.0)) throw DataError(std::string("bound: ") + what + " must be >= 1");
  return 1.0 / m;
}

BoundReport finish(std::vector<BoundTerm> terms) {
  BoundReport r{std::move(terms), 0.0};
  for (const auto& t : r.terms) r.total += t.value;
  return r;
}

}  // namespace

BoundReport bound_supervised_gap(const BoundConstants& c, double i_uv, double i_u) {
  check_common(c);
  require_non_negative(i_uv, "I(U,V)");
  require_non_negative(i_u, "I(U)");
  const double eps = c.epsilon;
  const double mass = c.alpha_mass();
  const double inv_mt = inverse_count(c.m_t, "m_t");
  const double joint =
      c.sigma * std::sqrt(2.0 * ((1 - eps) * (1 - eps) * inv_mt + eps * eps * mass) * i_uv);
  const double rep = eps == 0.0 ? 0.0 : c.sigma * std::sqrt(2.0 * eps * eps * (mass + inv_mt) * i_u);
  return finish({{"joint", joint}, {"representation", rep}});
}

BoundReport bound_unsupervised_gap(const BoundConstants& c, double i_uv) {
  check_common(c);
  require_non_negative(i_uv, "I(U,V)");
  require_non_negative(c.r_star, "R*");
  require_non_negative(c.r_star_rep, "R*_rep");
  const double joint = std::sqrt(2.0 * c.sigma * c.sigma *
                                 (c.alpha_mass() + inverse_count(c.m_t_prime, "m_t'")) * i_uv);
  return finish({{"joint", joint}, {"r_star_rep", c.r_star_rep}, {"r_star", c.r_star}});
}

BoundReport bound_gradient_norm(const BoundConstants& c) {
  check_common(c);
  if (!c.delta_u || !c.delta_v)
    throw NumericError("bound_gradient_norm: gradient-norm ledger absent (noiseless run)");
  const double du = *c.delta_u;
  const double dv = *c.delta_v;
  require_non_negative(du, "delta_u");
  require_non_negative(dv, "delta_v");
  require_non_negative(c.r_star, "R*");
  require_non_negative(c.r_star_rep, "R*_rep");
  const double tau = c.tau;
  const double eps = c.epsilon;
  const double mass = c.alpha_mass();

  double sup_joint = 0.0;
  double sup_rep = 0.0;
  double unsup_joint = 0.0;
  if (tau > 0.0) {
    const double inv_mt = inverse_count(c.m_t, "m_t");
    sup_joint = tau * c.sigma *
                std::sqrt(2.0 * ((1 - eps) * (1 - eps) * inv_mt + eps * eps * mass) * (du + dv));
    if (eps > 0.0) sup_rep = tau * eps * c.sigma * std::sqrt(2.0 * (mass + inv_mt) * du);
  }
  if (tau < 1.0)
    unsup_joint = (1 - tau) * c.sigma *
                  std::sqrt(2.0 * (mass + inverse_count(c.m_t_prime, "m_t'")) * (du + dv));
  return finish({{"empirical_risk", c.empirical_risk},
                 {"sup_joint", sup_joint},
                 {"sup_representation", sup_rep},
                 {"unsup_r_star_rep", (1 - tau) * c.r_star_rep},
                 {"unsup_joint", unsup_joint},
                 {"unsup_r_star", (1 - tau) * c.r_star}});
}

}  // namespace imda
