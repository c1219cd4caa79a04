#include "imda/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "imda/error.hpp"

namespace imda {

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::kSupervised: return "supervised";
    case Mode::kUnsupervised: return "unsupervised";
    case Mode::kSemi: return "semi";
  }
  return "?";
}

MultiSourceDataset DataConfig::load() const {
  if (kind == "synthetic") return synthetic.build();
  if (kind != "csv") throw ConfigError("data: kind must be synthetic or csv");
  if (source_csv.empty()) throw ConfigError("data: source_csv lists no files");
  MultiSourceDataset ds;
  for (const auto& p : source_csv) ds.sources.push_back(load_csv(p));
  if (!target_csv.empty()) ds.target = load_csv(target_csv);
  if (!target_unlabeled_csv.empty()) ds.target_unlabeled = load_unlabeled_csv(target_unlabeled_csv);
  if (!target_test_csv.empty()) ds.target_test = load_csv(target_test_csv);
  ds.feature_width = ds.sources.front().x.cols();
  int max_label = -1;
  for (const auto* set : {&ds.target, &ds.target_test})
    for (int l : set->labels) max_label = std::max(max_label, l);
  for (const auto& s : ds.sources)
    for (int l : s.labels) max_label = std::max(max_label, l);
  ds.num_classes = max_label + 1;
  ds.validate();
  return ds;
}

ModelSpec ExperimentConfig::model_spec(std::size_t input_width, std::size_t num_classes) const {
  ModelSpec spec;
  spec.task = Task::kClassification;
  spec.representation.widths.push_back(input_width);
  for (auto w : rep_hidden) {
    spec.representation.widths.push_back(w);
    spec.representation.activations.push_back(Activation::kRelu);
  }
  spec.representation.dropout = dropout;
  const std::size_t feature = spec.representation.widths.back();
  spec.predictor.widths.push_back(feature);
  for (auto w : pred_hidden) {
    spec.predictor.widths.push_back(w);
    spec.predictor.activations.push_back(Activation::kRelu);
  }
  spec.predictor.widths.push_back(num_classes);
  spec.predictor.activations.push_back(Activation::kNone);
  spec.predictor.dropout = dropout;
  spec.validate();
  return spec;
}

void ExperimentConfig::validate() const {
  auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!unit(epsilon)) throw ConfigError("epsilon must lie in [0, 1]");
  if (!unit(tau)) throw ConfigError("tau must lie in [0, 1]");
  if (mode == Mode::kSupervised && tau != 1.0)
    throw ConfigError("mode supervised requires tau = 1");
  if (mode == Mode::kUnsupervised && tau != 0.0)
    throw ConfigError("mode unsupervised requires tau = 0");
  if (!(c0 > 0.0) || !(c1 > 0.0)) throw ConfigError("c0 and c1 must be positive");
  if (!(moving_average > 0.0 && moving_average < 1.0))
    throw ConfigError("moving_average must lie in (0, 1)");
  sgld.validate();
  for (double w : {w1_sup_coef, coef1, coef2, interp_penalty_weight, param_penalty_weight})
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("penalty weights must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (lambda_r && !(*lambda_r >= 0.0)) throw ConfigError("lambda_r must be >= 0");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  std::string where;
};

[[noreturn]] void bad_value(const std::string& key, const Entry& e, const std::string& expected) {
  throw ConfigError(e.where + ": " + key + " = '" + e.value + "' is not " + expected);
}

double to_double(const std::string& key, const Entry& e) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(e.value, &used);
  } catch (const std::exception&) {
    bad_value(key, e, "a number");
  }
  if (used != e.value.size() || !std::isfinite(v)) bad_value(key, e, "a number");
  return v;
}

std::uint64_t to_uint(const std::string& key, const Entry& e) {
  if (e.value.empty() || e.value.find_first_not_of("0123456789") != std::string::npos)
    bad_value(key, e, "a non-negative integer");
  try {
    return std::stoull(e.value);
  } catch (const std::exception&) {
    bad_value(key, e, "a non-negative integer");
  }
}

bool to_bool(const std::string& key, const Entry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  bad_value(key, e, "a boolean");
}

std::vector<std::string> to_list(const Entry& e) {
  std::vector<std::string> out;
  if (trim(e.value).empty()) return out;
  std::string item;
  std::istringstream ss(e.value);
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::vector<double> to_doubles(const std::string& key, const Entry& e) {
  std::vector<double> out;
  for (const auto& item : to_list(e)) out.push_back(to_double(key, {item, e.where}));
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& key, const Entry& e) {
  std::vector<std::size_t> out;
  for (const auto& item : to_list(e)) out.push_back(to_uint(key, {item, e.where}));
  return out;
}

Schedule to_schedule(const std::string& key, const Entry& e) {
  const auto values = to_doubles(key, e);
  if (values.empty()) bad_value(key, e, "a number or list");
  return values.size() == 1 ? Schedule(values.front()) : Schedule(values);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const Entry&)>;

#define IMDA_DOUBLE(field) [](ExperimentConfig& c, const std::string& k, const Entry& e) { field = to_double(k, e); }
#define IMDA_SIZE(field) [](ExperimentConfig& c, const std::string& k, const Entry& e) { field = to_uint(k, e); }
#define IMDA_BOOL(field) [](ExperimentConfig& c, const std::string& k, const Entry& e) { field = to_bool(k, e); }
#define IMDA_STRING(field) [](ExperimentConfig& c, const std::string&, const Entry& e) { field = e.value; }
#define IMDA_OPT(field) [](ExperimentConfig& c, const std::string& k, const Entry& e) { field = to_double(k, e); }

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      // "mode" and "eta" are handled before everything else.
      {"mode", nullptr},
      {"eta", [](ExperimentConfig& c, const std::string& k, const Entry& e) {
         c.sgld.eta_u = c.sgld.eta_v = c.sgld.eta_dup = to_schedule(k, e);
       }},
      {"epsilon", IMDA_DOUBLE(c.epsilon)},
      {"tau", IMDA_DOUBLE(c.tau)},
      {"c0", IMDA_DOUBLE(c.c0)},
      {"c1", IMDA_DOUBLE(c.c1)},
      {"moving_average", IMDA_DOUBLE(c.moving_average)},
      {"eta_u", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.sgld.eta_u = to_schedule(k, e); }},
      {"eta_v", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.sgld.eta_v = to_schedule(k, e); }},
      {"eta_dup", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.sgld.eta_dup = to_schedule(k, e); }},
      {"sigma", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.sgld.sigma = to_schedule(k, e); }},
      {"noiseless", IMDA_BOOL(c.sgld.noiseless)},
      {"w1_sup_coef", IMDA_DOUBLE(c.w1_sup_coef)},
      {"w1_discri_coef1", IMDA_DOUBLE(c.coef1)},
      {"w1_discri_coef2", IMDA_DOUBLE(c.coef2)},
      {"interp_penalty_weight", IMDA_DOUBLE(c.interp_penalty_weight)},
      {"param_penalty_weight", IMDA_DOUBLE(c.param_penalty_weight)},
      {"batch_size", IMDA_SIZE(c.batch_size)},
      {"epochs", IMDA_SIZE(c.epochs)},
      {"warmup_epochs", IMDA_SIZE(c.warmup_epochs)},
      {"seed", IMDA_SIZE(c.seed)},
      {"learn_alpha", IMDA_BOOL(c.learn_alpha)},
      {"alignment", IMDA_BOOL(c.alignment)},
      {"alpha_risks", [](ExperimentConfig& c, const std::string& k, const Entry& e) {
         if (e.value == "full") c.alpha_risks = AlphaRiskSource::kFullPass;
         else if (e.value == "last_batch") c.alpha_risks = AlphaRiskSource::kLastBatch;
         else bad_value(k, e, "full or last_batch");
       }},
      {"lambda_r", IMDA_OPT(c.lambda_r)},
      {"rep_hidden", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.rep_hidden = to_sizes(k, e); }},
      {"pred_hidden", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.pred_hidden = to_sizes(k, e); }},
      {"dropout", IMDA_DOUBLE(c.dropout)},
      {"output_dir", IMDA_STRING(c.output_dir)},
      {"data", IMDA_STRING(c.data.kind)},
      {"source_csv", [](ExperimentConfig& c, const std::string&, const Entry& e) { c.data.source_csv = to_list(e); }},
      {"target_csv", IMDA_STRING(c.data.target_csv)},
      {"target_unlabeled_csv", IMDA_STRING(c.data.target_unlabeled_csv)},
      {"target_test_csv", IMDA_STRING(c.data.target_test_csv)},
      {"syn_num_sources", IMDA_SIZE(c.data.synthetic.num_sources)},
      {"syn_source_angles", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.data.synthetic.source_angles_deg = to_doubles(k, e); }},
      {"syn_target_angle", IMDA_DOUBLE(c.data.synthetic.target_angle_deg)},
      {"syn_separation", IMDA_DOUBLE(c.data.synthetic.class_separation)},
      {"syn_noise", IMDA_DOUBLE(c.data.synthetic.noise)},
      {"syn_domain_size", IMDA_SIZE(c.data.synthetic.domain_size)},
      {"syn_target_labeled", IMDA_SIZE(c.data.synthetic.target_labeled)},
      {"syn_target_unlabeled", IMDA_SIZE(c.data.synthetic.target_unlabeled)},
      {"syn_target_test", IMDA_SIZE(c.data.synthetic.target_test)},
      {"data_seed", IMDA_SIZE(c.data.synthetic.seed)},
      {"drop_rate", IMDA_DOUBLE(c.data.synthetic.drop_rate)},
      {"drop_classes", [](ExperimentConfig& c, const std::string& k, const Entry& e) {
         c.data.synthetic.drop_classes.clear();
         for (auto v : to_sizes(k, e)) c.data.synthetic.drop_classes.push_back(static_cast<int>(v));
       }},
      {"shift_apply_to", [](ExperimentConfig& c, const std::string& k, const Entry& e) {
         if (e.value == "sources") c.data.synthetic.shift_apply_to = ShiftTarget::kSources;
         else if (e.value == "target") c.data.synthetic.shift_apply_to = ShiftTarget::kTarget;
         else bad_value(k, e, "sources or target");
       }},
      {"bound_kind", [](ExperimentConfig& c, const std::string& k, const Entry& e) {
         if (e.value != "supervised" && e.value != "unsupervised" && e.value != "gradient_norm")
           bad_value(k, e, "supervised, unsupervised or gradient_norm");
         c.bound.kind = e.value;
       }},
      {"bound_sigma", IMDA_DOUBLE(c.bound.sigma)},
      {"bound_m_t", IMDA_OPT(c.bound.m_t)},
      {"bound_m_t_prime", IMDA_OPT(c.bound.m_t_prime)},
      {"bound_m", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.bound.m = to_doubles(k, e); }},
      {"bound_alpha", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.bound.alpha = to_doubles(k, e); }},
      {"bound_delta_u", IMDA_OPT(c.bound.delta_u)},
      {"bound_delta_v", IMDA_OPT(c.bound.delta_v)},
      {"bound_i_uv", IMDA_DOUBLE(c.bound.i_uv)},
      {"bound_i_u", IMDA_DOUBLE(c.bound.i_u)},
      {"r_star", IMDA_DOUBLE(c.bound.r_star)},
      {"r_star_rep", IMDA_DOUBLE(c.bound.r_star_rep)},
      {"bound_empirical_risk", IMDA_DOUBLE(c.bound.empirical_risk)},
  };
  return table;
}

#undef IMDA_DOUBLE
#undef IMDA_SIZE
#undef IMDA_BOOL
#undef IMDA_STRING
#undef IMDA_OPT

void apply_mode_defaults(ExperimentConfig& c) {
  switch (c.mode) {
    case Mode::kSupervised:
      c.tau = 1.0;
      c.epsilon = 0.5;
      c.sgld.eta_u = c.sgld.eta_v = c.sgld.eta_dup = 0.5;
      c.c1 = 0.5;
      c.epochs = 40;
      break;
    case Mode::kUnsupervised:
      c.tau = 0.0;
      c.sgld.eta_u = c.sgld.eta_v = c.sgld.eta_dup = 0.8;
      c.c1 = 1.0;
      c.epochs = 50;
      break;
    case Mode::kSemi:
      c.tau = 0.5;
      c.epsilon = 0.5;
      c.sgld.eta_u = c.sgld.eta_v = c.sgld.eta_dup = 0.5;
      c.c1 = 1.0;
      c.epochs = 40;
      break;
  }
  c.batch_size = 20;
  c.w1_sup_coef = 0.01;
  c.coef1 = 0.06;
  c.coef2 = 1.2;
  c.c0 = 1.2;
  // Without it the critic's ascent on an unbounded log-loss runs away.
  c.interp_penalty_weight = 1.0;
}

void read_line(const std::string& raw, const std::string& where, std::map<std::string, Entry>& out,
               bool require_equals) {
  std::string line = raw;
  if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
  line = trim(line);
  if (line.empty()) {
    if (require_equals) throw ConfigError(where + ": empty override");
    return;
  }
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
  const std::string key = trim(line.substr(0, eq));
  const std::string value = trim(line.substr(eq + 1));
  const auto& table = setters();
  const bool known = std::any_of(table.begin(), table.end(),
                                 [&](const auto& kv) { return kv.first == key; });
  if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  out[key] = {value, where};
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& kv : setters()) k.push_back(kv.first);
    return k;
  }();
  return keys;
}

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides,
                                   const std::string& origin) {
  std::map<std::string, Entry> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    read_line(line, origin + ":" + std::to_string(line_no), entries, false);
  }
  for (const auto& o : overrides) read_line(o, "--set " + o, entries, true);

  const auto mode = entries.find("mode");
  if (mode == entries.end()) throw ConfigError(origin + ": mode is required");
  ExperimentConfig cfg;
  const std::string& m = mode->second.value;
  if (m == "supervised") cfg.mode = Mode::kSupervised;
  else if (m == "unsupervised") cfg.mode = Mode::kUnsupervised;
  else if (m == "semi") cfg.mode = Mode::kSemi;
  else bad_value("mode", mode->second, "supervised, unsupervised or semi");
  apply_mode_defaults(cfg);

  for (const auto& [key, setter] : setters()) {
    if (!setter) continue;
    const auto it = entries.find(key);
    if (it != entries.end()) setter(cfg, key, it->second);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), overrides, path);
}

}  // namespace imda
