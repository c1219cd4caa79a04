#include "imda/harness.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <limits>

#include "imda/alpha_solver.hpp"
#include "imda/error.hpp"
#include "imda/graph.hpp"
#include "imda/risks.hpp"

namespace imda {

namespace {

constexpr double kNa = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kTagTarget = 1;
constexpr std::uint64_t kTagUnlabeled = 2;
constexpr std::uint64_t kTagSourceBase = 100;

// Coefficients of the five batch terms
//   A = R_T(u, v), B = R_T(u, v'), C = pseudo-label risk,
//   D = R_S^alpha(u, v), E = R_S^alpha(u, v')
// in the (u, v) objective and in the critic objective.
struct TermWeights {
  double a = 0.0;
  double b_uv = 0.0, b_dup = 0.0;
  double c = 0.0;
  double d = 0.0;
  double e_uv = 0.0, e_dup = 0.0;

  static TermWeights from(const ExperimentConfig& cfg) {
    TermWeights w;
    const double tau = cfg.tau, eps = cfg.epsilon;
    w.a = tau * (1.0 - eps);
    if (!cfg.alignment) {
      w.d = tau * eps + 1.0 - tau;
      return w;
    }
    w.b_uv = tau * eps * cfg.w1_sup_coef;
    w.b_dup = tau * eps;
    w.c = 1.0 - tau;
    w.d = tau * eps;
    w.e_uv = -(tau * eps * cfg.w1_sup_coef + 1.0 - tau);
    w.e_dup = -(tau * eps + 1.0 - tau);
    return w;
  }

  bool uses_target() const { return a > 0.0 || b_dup > 0.0; }
  bool uses_unlabeled() const { return c > 0.0; }
  bool uses_sources() const { return d > 0.0 || e_dup < 0.0; }
  bool uses_critic() const { return b_dup > 0.0 || c > 0.0; }
};

struct MaskSlot {
  NodeId node;
  std::size_t set;  // index into the batch list
  std::size_t cols;
  double rate;
};

// Set indices inside one step: 0 = labeled target, 1 = unlabeled target,
// 2 + i = source i.
constexpr std::size_t kSetTarget = 0;
constexpr std::size_t kSetUnlabeled = 1;
constexpr std::size_t kSetSource0 = 2;

class Trainer {
 public:
  Trainer(const ExperimentConfig& cfg, const MultiSourceDataset& data, ModelTriple& model)
      : cfg_(cfg),
        data_(data),
        model_(model),
        weights_(TermWeights::from(cfg)),
        noise_rng_(make_stream(cfg.seed, {kStreamNoise})),
        dropout_rng_(make_stream(cfg.seed, {kStreamAux, 0})),
        interp_rng_(make_stream(cfg.seed, {kStreamAux, 1})) {
    const std::size_t n = data.sources.size();
    cyclers_.resize(kSetSource0 + n);
    if (weights_.uses_target()) {
      if (data.target.empty()) throw DataError("labeled target set is empty but tau > 0");
      cyclers_[kSetTarget].emplace(data.target.size(), cfg.batch_size, cfg.seed, kTagTarget);
    }
    if (weights_.uses_unlabeled()) {
      if (data.target_unlabeled.empty()) throw DataError("unlabeled target set is empty but tau < 1");
      cyclers_[kSetUnlabeled].emplace(data.target_unlabeled.size(), cfg.batch_size, cfg.seed,
                                      kTagUnlabeled);
    }
    if (weights_.uses_sources())
      for (std::size_t i = 0; i < n; ++i) {
        if (data.sources[i].empty())
          throw DataError("source " + std::to_string(i + 1) + " is empty");
        cyclers_[kSetSource0 + i].emplace(data.sources[i].size(), cfg.batch_size, cfg.seed,
                                          kTagSourceBase + i);
      }
    steps_per_epoch_ = 0;
    for (const auto& c : cyclers_)
      if (c) steps_per_epoch_ = std::max(steps_per_epoch_, c->stream().batches_per_epoch());
    last_source_batches_.resize(n);
  }

  std::size_t steps_per_epoch() const { return steps_per_epoch_; }
  GradNormLedger& ledger() { return ledger_; }
  const std::vector<LabeledSet>& last_source_batches() const { return last_source_batches_; }

  void build(const std::vector<double>& alpha) {
    graph_ = Graph();
    masks_.clear();
    const auto& spec = model_.spec;
    const std::size_t bu = graph_.add_block(spec.representation.layout());
    const std::size_t bv = graph_.add_block(spec.predictor.layout());
    const std::size_t bd = graph_.add_block(spec.predictor.layout());
    const bool dropout = spec.representation.dropout > 0.0 || spec.predictor.dropout > 0.0;

    auto mlp = [&](const MlpSpec& s, std::size_t block, NodeId x, const std::string& prefix,
                   std::size_t set) {
      MlpNodes nodes = build_mlp(graph_, s, block, x, prefix, dropout);
      for (std::size_t i = 0; i < nodes.dropout_masks.size(); ++i)
        masks_.push_back({nodes.dropout_masks[i], set, s.widths[i + 1], s.dropout});
      return nodes.output;
    };
    auto nll = [&](NodeId scores, NodeId labels, const std::string& name) {
      return graph_.scale(graph_.mean(graph_.pick(graph_.log_softmax(scores), labels)), -1.0,
                          name);
    };
    std::vector<std::pair<double, NodeId>> uv_terms, dup_terms;
    auto add_term = [](auto& list, double w, NodeId node) {
      if (w != 0.0) list.emplace_back(w, node);
    };

    inputs_x_.assign(kSetSource0 + data_.sources.size(), std::nullopt);
    inputs_y_.assign(inputs_x_.size(), std::nullopt);
    rep_.assign(inputs_x_.size(), std::nullopt);

    if (weights_.uses_target()) {
      const NodeId x = graph_.input("x_target");
      const NodeId y = graph_.input("y_target");
      inputs_x_[kSetTarget] = x;
      inputs_y_[kSetTarget] = y;
      const NodeId rep = mlp(spec.representation, bu, x, "g.target", kSetTarget);
      rep_[kSetTarget] = rep;
      if (weights_.a > 0.0)
        add_term(uv_terms, weights_.a, nll(mlp(spec.predictor, bv, rep, "h.target", kSetTarget), y, "R_T(v)"));
      if (weights_.b_dup > 0.0) {
        const NodeId b = nll(mlp(spec.predictor, bd, rep, "h'.target", kSetTarget), y, "R_T(v')");
        add_term(uv_terms, weights_.b_uv, b);
        add_term(dup_terms, weights_.b_dup, b);
      }
    }
    if (weights_.uses_unlabeled()) {
      const NodeId x = graph_.input("x_unlabeled");
      inputs_x_[kSetUnlabeled] = x;
      yhat_ = graph_.input("pseudo_v");
      yhat_dup_ = graph_.input("pseudo_v'");
      const NodeId rep = mlp(spec.representation, bu, x, "g.unlabeled", kSetUnlabeled);
      rep_[kSetUnlabeled] = rep;
      std::optional<NodeId> c;
      if (cfg_.coef1 > 0.0)
        c = graph_.scale(nll(mlp(spec.predictor, bd, rep, "h'.unlabeled", kSetUnlabeled), yhat_, "pseudo(v')"),
                         cfg_.coef1);
      if (cfg_.coef2 > 0.0) {
        const NodeId t = graph_.scale(
            nll(mlp(spec.predictor, bv, rep, "h.unlabeled", kSetUnlabeled), yhat_dup_, "pseudo(v)"),
            cfg_.coef2);
        c = c ? graph_.add(*c, t, "pseudo_risk") : t;
      }
      if (c) {
        add_term(uv_terms, weights_.c, *c);
        add_term(dup_terms, weights_.c, *c);
      }
    }
    if (weights_.uses_sources()) {
      std::optional<NodeId> d, e;
      for (std::size_t i = 0; i < data_.sources.size(); ++i) {
        if (alpha[i] == 0.0) continue;
        const std::size_t set = kSetSource0 + i;
        const std::string tag = "source" + std::to_string(i + 1);
        const NodeId x = graph_.input("x_" + tag);
        const NodeId y = graph_.input("y_" + tag);
        inputs_x_[set] = x;
        inputs_y_[set] = y;
        const NodeId rep = mlp(spec.representation, bu, x, "g." + tag, set);
        rep_[set] = rep;
        if (weights_.d > 0.0) {
          const NodeId r = graph_.scale(nll(mlp(spec.predictor, bv, rep, "h." + tag, set), y, "R_" + tag + "(v)"), alpha[i]);
          d = d ? graph_.add(*d, r) : r;
        }
        if (weights_.e_dup < 0.0) {
          const NodeId r = graph_.scale(nll(mlp(spec.predictor, bd, rep, "h'." + tag, set), y, "R_" + tag + "(v')"), alpha[i]);
          e = e ? graph_.add(*e, r) : r;
        }
      }
      if (d) add_term(uv_terms, weights_.d, *d);
      if (e) {
        add_term(uv_terms, weights_.e_uv, *e);
        add_term(dup_terms, weights_.e_dup, *e);
      }
    }
    auto combine = [&](const std::vector<std::pair<double, NodeId>>& terms,
                       const std::string& name) -> std::optional<NodeId> {
      std::optional<NodeId> total;
      for (const auto& [w, node] : terms) {
        const NodeId t = w == 1.0 ? node : graph_.scale(node, w);
        total = total ? graph_.add(*total, t) : t;
      }
      if (total) *total = graph_.scale(*total, 1.0, name);
      return total;
    };
    j_uv_ = combine(uv_terms, "J_uv");
    j_dup_ = combine(dup_terms, "J_dup");
    alpha_ = alpha;
  }

  void step(std::size_t global_step) {
    const std::size_t k = global_step - 1;
    std::vector<std::size_t> rows(inputs_x_.size(), 0);
    std::optional<Matrix> unlabeled_x;
    for (std::size_t set = 0; set < inputs_x_.size(); ++set) {
      if (!inputs_x_[set]) continue;
      const auto& idx = cyclers_[set]->next();
      rows[set] = idx.size();
      if (set == kSetTarget) {
        const LabeledSet b = data_.target.subset(idx);
        graph_.set_input(*inputs_x_[set], b.x);
        graph_.set_input(*inputs_y_[set], b.label_column());
      } else if (set == kSetUnlabeled) {
        unlabeled_x = data_.target_unlabeled.subset(idx).x;
        graph_.set_input(*inputs_x_[set], *unlabeled_x);
      } else {
        const LabeledSet b = data_.sources[set - kSetSource0].subset(idx);
        graph_.set_input(*inputs_x_[set], b.x);
        graph_.set_input(*inputs_y_[set], b.label_column());
        last_source_batches_[set - kSetSource0] = b;
      }
    }
    if (unlabeled_x) {
      const PseudoBatch p = make_pseudo_batch(model_.spec, model_.rep, model_.pred, model_.dup, *unlabeled_x);
      graph_.set_input(yhat_, labels_to_column(p.labels));
      graph_.set_input(yhat_dup_, labels_to_column(p.dup_labels));
    }
    for (const auto& m : masks_)
      graph_.set_input(m.node, dropout_mask(rows[m.set], m.cols, m.rate, dropout_rng_));

    const std::vector<ParameterVector> blocks = {model_.rep, model_.pred, model_.dup};
    graph_.forward(blocks);

    ParameterVector g_dup = model_.dup.zeros_like();
    if (j_dup_) {
      g_dup = graph_.backward(*j_dup_)[2];
      if (cfg_.interp_penalty_weight > 0.0) {
        const auto penalty = interp_penalty(rows);
        g_dup.axpy(-cfg_.interp_penalty_weight, penalty);
      }
    }
    ParameterVector g_u = model_.rep.zeros_like();
    ParameterVector g_v = model_.pred.zeros_like();
    if (j_uv_) {
      auto grads = graph_.backward(*j_uv_);
      g_u = std::move(grads[0]);
      g_v = std::move(grads[1]);
      if (cfg_.param_penalty_weight > 0.0) add_param_penalty(blocks, g_u, g_v);
    }

    const double eta_u = cfg_.sgld.eta_u.at(k);
    const double eta_v = cfg_.sgld.eta_v.at(k);
    const double sigma = cfg_.sgld.sigma.at(k);
    Rng* noise = cfg_.sgld.noiseless ? nullptr : &noise_rng_;
    sgld_step(model_.rep, g_u, eta_u, sigma, noise);
    sgld_step(model_.pred, g_v, eta_v, sigma, noise);
    if (j_dup_) duplicate_ascent_step(model_.dup, g_dup, cfg_.sgld.eta_dup.at(k));
    if (!cfg_.sgld.noiseless) {
      ledger_.accumulate(LedgerBlock::kU, global_step, eta_u, sigma, g_u.squared_norm());
      ledger_.accumulate(LedgerBlock::kV, global_step, eta_v, sigma, g_v.squared_norm());
    }
  }

 private:
  static Matrix labels_to_column(const std::vector<int>& labels) {
    Matrix m(labels.size(), 1);
    for (std::size_t i = 0; i < labels.size(); ++i) m(i, 0) = labels[i];
    return m;
  }

  // Interpolation penalty on the critic for every critic pairing (labeled
  // target vs sources, unlabeled target vs sources). Source rows are drawn
  // per pair with probabilities alpha.
  ParameterVector interp_penalty(const std::vector<std::size_t>& rows) {
    ParameterVector total = model_.dup.zeros_like();
    std::vector<std::size_t> sources;
    std::vector<double> weights;
    for (std::size_t i = 0; i < data_.sources.size(); ++i)
      if (rep_[kSetSource0 + i]) {
        sources.push_back(i);
        weights.push_back(alpha_[i]);
      }
    if (sources.empty()) return total;
    std::discrete_distribution<std::size_t> pick_source(weights.begin(), weights.end());
    for (std::size_t set : {kSetTarget, kSetUnlabeled}) {
      if (!rep_[set]) continue;
      if (set == kSetTarget && weights_.b_dup == 0.0) continue;
      const Matrix& target = graph_.value(*rep_[set]);
      Matrix paired(target.rows(), target.cols());
      for (std::size_t r = 0; r < target.rows(); ++r) {
        const std::size_t s = kSetSource0 + sources[pick_source(interp_rng_)];
        const Matrix& src = graph_.value(*rep_[s]);
        std::uniform_int_distribution<std::size_t> row(0, rows[s] - 1);
        const auto from = src.row(row(interp_rng_));
        std::copy(from.begin(), from.end(), paired.row(r).begin());
      }
      const auto p = gradient_penalty_interp(model_.spec.predictor, model_.dup, target, paired,
                                             interp_rng_);
      total.axpy(1.0, p.gradient);
    }
    return total;
  }

  void add_param_penalty(const std::vector<ParameterVector>& base, ParameterVector& g_u,
                         ParameterVector& g_v) {
    const std::vector<ParameterVector> g = {g_u, g_v, model_.dup.zeros_like()};
    const std::size_t wrt[] = {0, 1};
    const auto p = param_penalty_gradient(graph_, *j_uv_, base, g, wrt);
    g_u.axpy(cfg_.param_penalty_weight, p[0]);
    g_v.axpy(cfg_.param_penalty_weight, p[1]);
  }

  const ExperimentConfig& cfg_;
  const MultiSourceDataset& data_;
  ModelTriple& model_;
  TermWeights weights_;
  Rng noise_rng_;
  Rng dropout_rng_;
  Rng interp_rng_;
  std::vector<std::optional<BatchCycler>> cyclers_;
  std::size_t steps_per_epoch_ = 0;
  GradNormLedger ledger_;
  std::vector<LabeledSet> last_source_batches_;

  Graph graph_;
  std::vector<MaskSlot> masks_;
  std::vector<std::optional<NodeId>> inputs_x_, inputs_y_, rep_;
  NodeId yhat_, yhat_dup_;
  std::optional<NodeId> j_uv_, j_dup_;
  std::vector<double> alpha_;
};

double mean_nll(const ModelSpec& spec, const ParameterVector& u, const ParameterVector& v,
                const LabeledSet& set) {
  const auto nll = nll_per_example(predict(spec, v, represent(spec, u, set.x)), set.labels);
  double s = 0.0;
  for (double x : nll) s += x;
  return s / static_cast<double>(nll.size());
}

double weighted(const std::vector<double>& r, const std::vector<double>& alpha) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += alpha[i] * r[i];
  return s;
}

EpochMetrics measure(const ExperimentConfig& cfg, const MultiSourceDataset& data,
                     const ModelTriple& model, const std::vector<double>& alpha,
                     std::size_t epoch) {
  const auto& spec = model.spec;
  EpochMetrics m;
  m.epoch = epoch;
  m.target_accuracy = data.target_test.empty() ? kNa : evaluate(model, data.target_test);
  for (const auto& s : data.sources) m.source_accuracy.push_back(s.empty() ? kNa : evaluate(model, s));

  const auto r_v = full_source_risks(spec, model.rep, model.pred, data.sources);
  const auto r_dup = full_source_risks(spec, model.rep, model.dup, data.sources);
  RiskBreakdown parts;
  parts.per_source_risks = r_v;
  parts.combined_source_risk = weighted(r_v, alpha);
  m.source_risk = parts.combined_source_risk;
  const bool has_target = cfg.tau > 0.0 && !data.target.empty();
  m.target_risk = has_target ? mean_nll(spec, model.rep, model.pred, data.target) : kNa;
  m.w1_supervised = has_target && cfg.alignment
                        ? mean_nll(spec, model.rep, model.dup, data.target) - weighted(r_dup, alpha)
                        : kNa;
  const bool has_unlabeled = cfg.tau < 1.0 && !data.target_unlabeled.empty();
  m.w1_pseudo = has_unlabeled && cfg.alignment
                    ? pseudo_label_risk(spec, model.rep, model.pred, model.dup,
                                        data.target_unlabeled.x, cfg.coef1, cfg.coef2) -
                          weighted(r_dup, alpha)
                    : kNa;
  parts.target_risk = std::isnan(m.target_risk) ? 0.0 : m.target_risk;
  parts.w1_supervised = std::isnan(m.w1_supervised) ? 0.0 : m.w1_supervised;
  parts.w1_pseudo = std::isnan(m.w1_pseudo) ? 0.0 : m.w1_pseudo;
  m.combined = assemble_combined(cfg.epsilon, cfg.tau, parts);
  m.alpha = alpha;
  m.lambda_r = kNa;
  m.delta_u = m.delta_v = m.bound_total = kNa;
  return m;
}

[[noreturn]] void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(context + e.what(), e.index());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(context + e.what(), e.last_iterate());
  } catch (const NumericError& e) {
    throw NumericError(context + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(context + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(context + e.what());
  } catch (const DataError& e) {
    throw DataError(context + e.what());
  } catch (const Error& e) {
    throw Error(context + e.what());
  }
}

std::string na(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double evaluate(const ModelTriple& model, const LabeledSet& set) {
  if (set.empty()) throw DataError("evaluate: empty set");
  const auto pred = argmax_rows(predict(model.spec, model.pred, represent(model.spec, model.rep, set.x)));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == set.labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

std::vector<double> full_source_risks(const ModelSpec& spec, const ParameterVector& u,
                                      const ParameterVector& v,
                                      const std::vector<LabeledSet>& sources) {
  std::vector<double> out;
  for (const auto& s : sources) out.push_back(s.empty() ? 0.0 : mean_nll(spec, u, v, s));
  return out;
}

BoundConstants bound_constants(const ExperimentConfig& cfg, const MultiSourceDataset& data,
                               const std::vector<double>& alpha, double empirical_risk,
                               const GradNormLedger* ledger) {
  BoundConstants c;
  c.sigma = cfg.bound.sigma;
  c.m_t = static_cast<double>(data.target.size());
  c.m_t_prime = static_cast<double>(data.target_unlabeled.size());
  for (auto s : data.source_sizes()) c.m.push_back(static_cast<double>(s));
  c.alpha = alpha;
  c.epsilon = cfg.epsilon;
  c.tau = cfg.tau;
  if (ledger != nullptr) {
    c.delta_u = ledger->delta_u();
    c.delta_v = ledger->delta_v();
  }
  c.r_star = cfg.bound.r_star;
  c.r_star_rep = cfg.bound.r_star_rep;
  c.empirical_risk = empirical_risk;
  return c;
}

BoundReport bound_from_config(const ExperimentConfig& cfg) {
  const auto& b = cfg.bound;
  BoundConstants c;
  c.sigma = b.sigma;
  c.epsilon = cfg.epsilon;
  c.tau = cfg.tau;
  c.r_star = b.r_star;
  c.r_star_rep = b.r_star_rep;
  c.empirical_risk = b.empirical_risk;
  c.delta_u = b.delta_u;
  c.delta_v = b.delta_v;
  const bool need_data = !b.m_t || !b.m_t_prime || b.m.empty();
  if (need_data) {
    const MultiSourceDataset data = cfg.data.load();
    c.m_t = static_cast<double>(data.target.size());
    c.m_t_prime = static_cast<double>(data.target_unlabeled.size());
    for (auto s : data.source_sizes()) c.m.push_back(static_cast<double>(s));
  }
  if (b.m_t) c.m_t = *b.m_t;
  if (b.m_t_prime) c.m_t_prime = *b.m_t_prime;
  if (!b.m.empty()) c.m = b.m;
  c.alpha = b.alpha.empty() ? std::vector<double>(c.m.size(), 1.0 / static_cast<double>(c.m.size()))
                            : b.alpha;
  if (!on_simplex(c.alpha)) throw ConfigError("bound_alpha is not on the simplex");
  if (b.kind == "supervised") return bound_supervised_gap(c, b.i_uv, b.i_u);
  if (b.kind == "unsupervised") return bound_unsupervised_gap(c, b.i_uv);
  return bound_gradient_norm(c);
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& rows,
                       std::size_t n) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw Error("cannot write " + path);
  std::fprintf(f, "epoch,target_accuracy");
  for (std::size_t i = 1; i <= n; ++i) std::fprintf(f, ",source%zu_accuracy", i);
  std::fprintf(f, ",target_risk,source_risk,w1_supervised,w1_pseudo,combined");
  for (std::size_t i = 1; i <= n; ++i) std::fprintf(f, ",alpha_%zu", i);
  std::fprintf(f, ",lambda_r,delta_u,delta_v,bound_total\n");
  for (const auto& r : rows) {
    std::fprintf(f, "%zu,%s", r.epoch, na(r.target_accuracy).c_str());
    for (double a : r.source_accuracy) std::fprintf(f, ",%s", na(a).c_str());
    for (double v : {r.target_risk, r.source_risk, r.w1_supervised, r.w1_pseudo, r.combined})
      std::fprintf(f, ",%s", na(v).c_str());
    for (double a : r.alpha) std::fprintf(f, ",%s", na(a).c_str());
    for (double v : {r.lambda_r, r.delta_u, r.delta_v, r.bound_total})
      std::fprintf(f, ",%s", na(v).c_str());
    std::fprintf(f, "\n");
  }
  if (std::fclose(f) != 0) throw Error("cannot write " + path);
}

void write_alpha_csv(const std::string& path, const std::vector<EpochMetrics>& rows) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw Error("cannot write " + path);
  const std::size_t n = rows.empty() ? 0 : rows.front().alpha.size();
  std::fprintf(f, "epoch");
  for (std::size_t i = 1; i <= n; ++i) std::fprintf(f, ",alpha_%zu", i);
  std::fprintf(f, ",lambda_R\n");
  for (const auto& r : rows) {
    std::fprintf(f, "%zu", r.epoch);
    for (double a : r.alpha) std::fprintf(f, ",%.17g", a);
    std::fprintf(f, ",%s\n", na(r.lambda_r).c_str());
  }
  if (std::fclose(f) != 0) throw Error("cannot write " + path);
}

RunResult run(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  MultiSourceDataset owned;
  if (options.dataset == nullptr) {
    try {
      owned = cfg.data.load();
    } catch (...) {
      rethrow_with_context("loading data: ");
    }
  } else {
    owned = *options.dataset;
  }
  // Unsupervised runs never see target labels; supervised runs never see
  // the unlabeled split.
  if (cfg.tau == 0.0) owned.target = LabeledSet{};
  if (cfg.tau == 1.0) owned.target_unlabeled = UnlabeledSet{};
  owned.validate();
  const MultiSourceDataset& data = owned;
  const std::size_t n = data.sources.size();

  RunResult result;
  Rng init_rng = make_stream(cfg.seed, {kStreamInit});
  result.model = ModelTriple::initialize(
      cfg.model_spec(data.feature_width, static_cast<std::size_t>(data.num_classes)), init_rng);
  std::vector<double> alpha(n, 1.0 / static_cast<double>(n));

  Trainer trainer(cfg, data, result.model);
  result.steps_per_epoch = trainer.steps_per_epoch();
  result.metrics.push_back(measure(cfg, data, result.model, alpha, 0));
  const AlphaTerms alpha_terms{cfg.epsilon, cfg.tau, cfg.c0, cfg.c1};

  std::size_t global_step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double lambda_r = kNa;
    try {
      trainer.build(alpha);
      for (std::size_t k = 0; k < trainer.steps_per_epoch(); ++k) {
        ++global_step;
        trainer.step(global_step);
        if (options.on_step) options.on_step(global_step, result.model);
      }
    } catch (...) {
      rethrow_with_context("epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(global_step) + ": ");
    }
    try {
      if (cfg.learn_alpha && cfg.alignment && n > 1 && epoch >= cfg.warmup_epochs) {
        std::vector<double> r_v, r_dup;
        const auto& m = result.model;
        if (cfg.alpha_risks == AlphaRiskSource::kFullPass) {
          r_v = full_source_risks(m.spec, m.rep, m.pred, data.sources);
          r_dup = full_source_risks(m.spec, m.rep, m.dup, data.sources);
        } else {
          r_v = full_source_risks(m.spec, m.rep, m.pred, trainer.last_source_batches());
          r_dup = full_source_risks(m.spec, m.rep, m.dup, trainer.last_source_batches());
        }
        const double* override_ptr = cfg.lambda_r ? &*cfg.lambda_r : nullptr;
        const GradNormLedger* ledger = cfg.sgld.noiseless ? nullptr : &trainer.ledger();
        const AlphaObjective f = build_objective(r_v, r_dup, alpha_terms, ledger, override_ptr);
        std::vector<double> sizes;
        for (auto s : data.source_sizes()) sizes.push_back(static_cast<double>(s));
        const auto fresh = solve_alpha(f, sizes);
        alpha = moving_average_update(alpha, fresh, cfg.moving_average);
        // Keep the weights exactly on the simplex despite rounding.
        double total = 0.0;
        for (double a : alpha) total += a;
        for (double& a : alpha) a /= total;
        lambda_r = f.lambda_r;
      }
    } catch (...) {
      rethrow_with_context("epoch " + std::to_string(epoch) + ", domain weights: ");
    }
    EpochMetrics row = measure(cfg, data, result.model, alpha, epoch);
    row.lambda_r = lambda_r;
    if (!cfg.sgld.noiseless) {
      row.delta_u = trainer.ledger().delta_u();
      row.delta_v = trainer.ledger().delta_v();
      row.bound_total =
          bound_gradient_norm(bound_constants(cfg, data, alpha, row.combined, &trainer.ledger())).total;
    }
    result.metrics.push_back(row);
  }
  result.alpha = alpha;
  result.steps = global_step;
  if (!cfg.sgld.noiseless) {
    result.ledger = trainer.ledger();
    result.bound = bound_gradient_norm(
        bound_constants(cfg, data, alpha, result.metrics.back().combined, &*result.ledger));
  }

  if (!cfg.output_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw Error("cannot create output directory " + cfg.output_dir + ": " + ec.message());
    const std::string dir = cfg.output_dir + "/";
    write_metrics_csv(dir + "metrics.csv", result.metrics, n);
    write_alpha_csv(dir + "alpha.csv", result.metrics);
    if (result.ledger) {
      result.ledger->write_csv(dir + "ledger.csv");
      result.bound->write_csv(dir + "bound.csv");
    } else {
      GradNormLedger{}.write_csv(dir + "ledger.csv");
      std::FILE* f = std::fopen((dir + "bound.csv").c_str(), "w");
      if (f == nullptr) throw Error("cannot write " + dir + "bound.csv");
      std::fprintf(f, "term_name,value\ntotal,NA\n");
      std::fclose(f);
    }
  }
  return result;
}

}  // namespace imda
