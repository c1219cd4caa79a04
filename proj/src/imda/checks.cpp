#include "imda/checks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "imda/alpha_solver.hpp"
#include "imda/data.hpp"
#include "imda/error.hpp"
#include "imda/graph.hpp"
#include "imda/optimizer.hpp"
#include "imda/risks.hpp"

namespace imda {

RegressionInstance random_regression_instance(Rng& rng, std::size_t width, std::size_t hidden) {
  RegressionInstance inst;
  inst.spec.task = Task::kRegression;
  inst.spec.representation = {{width, hidden}, {Activation::kRelu}, 0.0};
  inst.spec.predictor = {{hidden, 1}, {Activation::kNone}, 0.0};
  std::normal_distribution<double> n(0.0, 0.7);
  inst.u = ParameterVector(inst.spec.representation.layout());
  inst.v = ParameterVector(inst.spec.predictor.layout());
  for (double& x : inst.u.values()) x = n(rng);
  for (double& x : inst.v.values()) x = n(rng);
  return inst;
}

DiscreteMeasurePair random_measure_pair(Rng& rng, std::size_t atoms, std::size_t width,
                                        bool integer_labels) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, 2);
  DiscreteMeasurePair pair;
  for (auto* side : {&pair.first, &pair.second})
    for (std::size_t i = 0; i < atoms; ++i) {
      LabeledPoint p;
      for (std::size_t j = 0; j < width; ++j) p.x.push_back(n(rng));
      p.y = integer_labels ? label(rng) : n(rng);
      side->push_back(std::move(p));
    }
  return pair;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (double& x : m.values()) x = n(rng);
  return m;
}

// Two-layer classifier with dropout and abs, summed with a weighted mean
// of its own scores: touches every differentiable op.
double graph_case(std::uint64_t seed) {
  Rng rng = make_stream(seed, {0x6772});
  const std::size_t rows = 5, in = 3, hidden = 4, classes = 3;
  Layout layout;
  layout.add("W0", in, hidden);
  layout.add("b0", 1, hidden);
  layout.add("W1", hidden, classes);
  layout.add("b1", 1, classes);
  Graph g;
  const std::size_t block = g.add_block(layout);
  const NodeId x = g.input("x");
  const NodeId y = g.input("y");
  const NodeId mask = g.input("mask");
  NodeId h = g.affine(x, g.parameter(block, 0), g.parameter(block, 1));
  h = g.dropout(g.relu(h), mask);
  const NodeId scores = g.affine(h, g.parameter(block, 2), g.parameter(block, 3));
  const NodeId nll = g.scale(g.mean(g.pick(g.log_softmax(scores), y)), -1.0);
  const NodeId mag = g.scale(g.mean(g.abs(scores)), 0.3);
  const NodeId out = g.add(nll, mag);

  g.set_input(x, random_matrix(rng, rows, in));
  Matrix labels(rows, 1);
  std::uniform_int_distribution<int> pick(0, classes - 1);
  for (std::size_t r = 0; r < rows; ++r) labels(r, 0) = pick(rng);
  g.set_input(y, labels);
  g.set_input(mask, dropout_mask(rows, hidden, 0.3, rng));
  ParameterVector p(layout);
  std::normal_distribution<double> n(0.0, 0.8);
  for (double& v : p.values()) v = n(rng);
  const ParameterVector blocks[] = {p};
  return finite_diff_check(g, out, blocks, 1e-6);
}

// Backward through reverse_gradient(lambda) equals -lambda times the plain
// gradient.
double reversal_case(std::uint64_t seed) {
  Rng rng = make_stream(seed, {0x7276});
  Layout layout;
  layout.add("W", 3, 2);
  layout.add("b", 1, 2);
  ParameterVector p(layout);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : p.values()) v = n(rng);
  const Matrix x = random_matrix(rng, 4, 3);
  auto grad = [&](bool reversed) {
    Graph g;
    const std::size_t b = g.add_block(layout);
    const NodeId in = g.input("x");
    NodeId s = g.affine(in, g.parameter(b, 0), g.parameter(b, 1));
    if (reversed) s = g.reverse_gradient(s, 0.7);
    const NodeId out = g.mean(g.abs(s));
    g.set_input(in, x);
    const ParameterVector blocks[] = {p};
    g.forward(blocks);
    return g.backward(out)[0];
  };
  const auto plain = grad(false);
  const auto rev = grad(true);
  double worst = 0.0;
  for (std::size_t i = 0; i < plain.size(); ++i)
    worst = std::max(worst, std::fabs(rev.values()[i] + 0.7 * plain.values()[i]));
  return worst;
}

double interp_penalty_case(std::uint64_t seed) {
  Rng rng = make_stream(seed, {0x6970});
  const MlpSpec critic{{3, 4, 2}, {Activation::kRelu, Activation::kNone}, 0.0};
  ParameterVector p = init_mlp(critic, rng);
  std::normal_distribution<double> n(0.0, 0.3);
  for (double& v : p.values()) v += n(rng);
  const Matrix points = random_matrix(rng, 4, 3);
  const auto analytic = jacobian_penalty(critic, p, points).gradient;
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.size(); ++i) {
    ParameterVector plus = p, minus = p;
    plus.values()[i] += h;
    minus.values()[i] -= h;
    const double c = (jacobian_penalty(critic, plus, points).value -
                      jacobian_penalty(critic, minus, points).value) / (2 * h);
    const double a = analytic.values()[i];
    worst = std::max(worst, std::fabs(a - c) / std::max({std::fabs(a), std::fabs(c), 1e-8}));
  }
  return worst;
}

CheckResult check(const std::string& name, bool ok, const std::string& detail) {
  return {name, ok, detail};
}

CheckResult graph_gradients(std::uint64_t seed) {
  double worst = 0.0, worst_rev = 0.0, worst_pen = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    worst = std::max(worst, graph_case(seed + s));
    worst_rev = std::max(worst_rev, reversal_case(seed + s));
    worst_pen = std::max(worst_pen, interp_penalty_case(seed + s));
  }
  return check("graph_gradients", worst < 1e-5 && worst_rev < 1e-12 && worst_pen < 1e-5,
               "max rel err " + fmt(worst) + ", reversal " + fmt(worst_rev) +
                   ", interpolation penalty " + fmt(worst_pen));
}

CheckResult alpha_solver(std::uint64_t seed) {
  Rng rng = make_stream(seed, {0x616c});
  std::uniform_real_distribution<double> lin(-1.0, 1.0), lam(0.0, 3.0);
  std::uniform_int_distribution<int> count(10, 500);
  double worst = -1e300;
  bool feasible = true;
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 2);
    AlphaObjective f;
    std::vector<double> m;
    for (std::size_t i = 0; i < n; ++i) {
      f.linear.push_back(lin(rng));
      m.push_back(count(rng));
    }
    f.lambda_r = lam(rng);
    const auto a = solve_alpha(f, m);
    feasible = feasible && on_simplex(a);
    worst = std::max(worst, f.value(a, m) - f.value(grid_oracle(f, m, 0.005), m));
  }
  return check("alpha_solver_vs_grid", feasible && worst <= 1e-6,
               "worst excess over grid " + fmt(worst));
}

CheckResult simplex(std::uint64_t seed) {
  Rng rng = make_stream(seed, {0x7370});
  std::normal_distribution<double> n(0.0, 2.0);
  bool ok = true;
  for (int t = 0; t < 200 && ok; ++t) {
    std::vector<double> p(1 + t % 5);
    for (double& x : p) x = n(rng);
    const auto q = simplex_project(p);
    ok = on_simplex(q, 1e-12);
    // Projection is idempotent.
    const auto q2 = simplex_project(q);
    for (std::size_t i = 0; i < q.size() && ok; ++i) ok = std::fabs(q[i] - q2[i]) < 1e-12;
  }
  return check("simplex_projection", ok, ok ? "feasible and idempotent" : "violation");
}

CheckResult w1_axioms(std::uint64_t seed) {
  Rng rng = make_stream(seed, {0x7731});
  const GroundMetric metric{LabelCost::kIndicator, 1.0, "example"};
  double worst = 0.0;
  for (int t = 0; t < 60; ++t) {
    const auto ab = random_measure_pair(rng, 4, 2, true);
    const auto cc = random_measure_pair(rng, 4, 2, true);
    const DiscreteMeasurePair ba{ab.second, ab.first};
    const DiscreteMeasurePair aa{ab.first, ab.first};
    const DiscreteMeasurePair bc{ab.second, cc.first};
    const DiscreteMeasurePair ac{ab.first, cc.first};
    worst = std::max(worst, std::fabs(exact_w1(ab, metric) - exact_w1(ba, metric)));
    worst = std::max(worst, exact_w1(aa, metric));
    worst = std::max(worst, exact_w1(ac, metric) - exact_w1(ab, metric) - exact_w1(bc, metric));
  }
  return check("w1_metric_axioms", worst <= 1e-9, "worst violation " + fmt(worst));
}

CheckResult kantorovich(std::uint64_t seed) {
  Rng rng = make_stream(seed, {0x6b72});
  double worst = -1e300;
  for (int t = 0; t < 25; ++t) {
    const auto pair = random_measure_pair(rng, 2 + t % 5, 2, false);
    const MlpSpec critic{{2, 3, 1}, {Activation::kRelu, Activation::kNone}, 0.0};
    ParameterVector p = init_mlp(critic, rng);
    const GroundMetric metric{LabelCost::kAbsolute, 0.5 + (t % 3), "representation"};
    const auto d = kantorovich_check(critic, p, pair, metric);
    worst = std::max(worst, d.normalized - d.w1);
  }
  return check("kantorovich_lower_bound", worst <= 1e-9,
               "max normalized critic minus W1 " + fmt(worst));
}

CheckResult risk_gap(std::uint64_t seed) {
  Rng rng = make_stream(seed, {0x7434});
  int failures = 0;
  for (int t = 0; t < 40; ++t) {
    const auto inst = random_regression_instance(rng, 2, 3);
    const auto pair = random_measure_pair(rng, 2 + t % 5, 2, false);
    const auto r = check_risk_gap(inst.spec, inst.u, inst.v, pair, certify(inst.spec, inst.u, inst.v));
    failures += r.holds ? 0 : 1;
  }
  return check("risk_gap_inequality", failures == 0, std::to_string(failures) + " violations");
}

CheckResult ledger(std::uint64_t seed) {
  Rng rng = make_stream(seed, {0x6c67});
  std::uniform_real_distribution<double> eta(0.01, 1.0), sq(0.0, 50.0), sigma(1e-3, 1e-1);
  GradNormLedger live;
  for (std::uint64_t k = 1; k <= 300; ++k) {
    const double s = sigma(rng);
    live.accumulate(LedgerBlock::kU, k, eta(rng), s, sq(rng));
    live.accumulate(LedgerBlock::kV, k, eta(rng), s, sq(rng));
  }
  const auto replayed = GradNormLedger::replay(live.log());
  const bool exact = replayed.delta_u() == live.delta_u() && replayed.delta_v() == live.delta_v();

  // Noise: zero gradient, variance of the increments.
  Layout layout;
  layout.add("w", 1, 1);
  ParameterVector p(layout), zero(layout);
  Rng noise = make_stream(seed, {kStreamNoise});
  const double sd = 0.01;
  double sum = 0.0, sum_sq = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double before = p.values()[0];
    sgld_step(p, zero, 0.1, sd, &noise);
    const double inc = p.values()[0] - before;
    sum += inc;
    sum_sq += inc * inc;
  }
  const double mean = sum / draws;
  const double var = (sum_sq - draws * mean * mean) / (draws - 1);
  const double ratio = var / (sd * sd);
  return check("ledger_and_noise", exact && std::fabs(ratio - 1.0) < 0.05,
               std::string(exact ? "replay exact" : "replay MISMATCH") + ", noise variance ratio " +
                   fmt(ratio));
}

CheckResult bounds(std::uint64_t seed) {
  Rng rng = make_stream(seed, {0x626e});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool ok = true;
  for (int t = 0; t < 300 && ok; ++t) {
    BoundConstants c;
    c.sigma = 0.1 + u(rng);
    c.m_t = 10 + 100 * u(rng);
    c.m_t_prime = 10 + 1000 * u(rng);
    c.m = {50 + 100 * u(rng), 50 + 100 * u(rng)};
    const double a = u(rng);
    c.alpha = {a, 1 - a};
    c.epsilon = u(rng);
    c.tau = u(rng);
    c.delta_u = 10 * u(rng);
    c.delta_v = 10 * u(rng);
    const double base = bound_gradient_norm(c).total;
    for (int which = 0; which < 3; ++which) {
      BoundConstants d = c;
      if (which == 0) d.delta_u = *c.delta_u + 1.0;
      if (which == 1) d.delta_v = *c.delta_v + 1.0;
      if (which == 2) d.sigma = c.sigma + 0.5;
      ok = ok && bound_gradient_norm(d).total >= base;
    }
    const auto report = bound_gradient_norm(c);
    double sum = 0.0;
    for (const auto& term : report.terms) sum += term.value;
    ok = ok && std::fabs(sum - report.total) <= 1e-12;
  }
  return check("bound_monotonicity", ok, ok ? "monotone in delta_u, delta_v, sigma" : "violation");
}

CheckResult batches(std::uint64_t seed) {
  bool ok = true;
  for (std::size_t size : {1u, 7u, 20u, 53u}) {
    const BatchStream stream(size, 8, seed, 3);
    for (std::uint64_t pass = 0; pass < 3 && ok; ++pass) {
      std::vector<std::size_t> seen;
      for (const auto& b : stream.epoch(pass)) seen.insert(seen.end(), b.begin(), b.end());
      std::sort(seen.begin(), seen.end());
      for (std::size_t i = 0; i < size && ok; ++i) ok = seen.size() == size && seen[i] == i;
      ok = ok && stream.epoch(pass) == stream.epoch(pass);
    }
  }
  return check("batch_stream_coverage", ok, ok ? "every example once per pass" : "violation");
}

using Suite = CheckResult (*)(std::uint64_t);

const std::vector<std::pair<std::string, Suite>>& suites() {
  static const std::vector<std::pair<std::string, Suite>> list = {
      {"graph_gradients", graph_gradients},
      {"simplex_projection", simplex},
      {"alpha_solver_vs_grid", alpha_solver},
      {"w1_metric_axioms", w1_axioms},
      {"kantorovich_lower_bound", kantorovich},
      {"risk_gap_inequality", risk_gap},
      {"ledger_and_noise", ledger},
      {"bound_monotonicity", bounds},
      {"batch_stream_coverage", batches},
  };
  return list;
}

}  // namespace

const std::vector<std::string>& property_check_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& s : suites()) out.push_back(s.first);
    return out;
  }();
  return names;
}

std::vector<CheckResult> run_property_checks(std::uint64_t seed, const CheckReporter& report) {
  std::vector<CheckResult> out;
  for (const auto& [name, suite] : suites()) {
    CheckResult r;
    try {
      r = suite(seed);
    } catch (const std::exception& e) {
      r = {name, false, std::string("error: ") + e.what()};
    }
    if (report) report(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace imda
