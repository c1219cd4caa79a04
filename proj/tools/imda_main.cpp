// imda command-line tool. Talks to the library only through imda.h.
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "imda/imda.h"

namespace {

int exit_code(imda_status s) {
  switch (s) {
    case IMDA_OK: return 0;
    case IMDA_ERR_CONFIG:
    case IMDA_ERR_IO: return 2;
    case IMDA_ERR_NUMERIC: return 3;
    default: return 1;
  }
}

int report(imda_status s) {
  if (s != IMDA_OK) std::fprintf(stderr, "imda: %s\n", imda_last_error());
  return exit_code(s);
}

// Loads the config and applies `key=value` overrides.
imda_status load_config(const std::string& path, const std::vector<std::string>& sets,
                        imda_config** out) {
  imda_status s = imda_config_load(path.c_str(), out);
  if (s != IMDA_OK) return s;
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      imda_config_destroy(*out);
      *out = nullptr;
      std::fprintf(stderr, "imda: --set expects key=value, got '%s'\n", kv.c_str());
      return IMDA_ERR_CONFIG;
    }
    s = imda_config_set(*out, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != IMDA_OK) {
      imda_config_destroy(*out);
      *out = nullptr;
      return s;
    }
  }
  return IMDA_OK;
}

int cmd_run(const std::string& path, const std::vector<std::string>& sets) {
  imda_config* cfg = nullptr;
  imda_status s = load_config(path, sets, &cfg);
  if (s != IMDA_OK) return report(s);
  imda_result* res = nullptr;
  s = imda_run(cfg, &res);
  imda_config_destroy(cfg);
  if (s != IMDA_OK) return report(s);

  size_t rows = 0, n = 0, steps = 0;
  imda_result_rows(res, &rows);
  imda_result_num_sources(res, &n);
  imda_result_steps(res, &steps);
  double acc = NAN;
  imda_result_target_accuracy(res, rows - 1, &acc);
  std::vector<double> alpha(n);
  imda_result_alpha(res, alpha.data(), alpha.size());
  double du = 0, dv = 0;
  int present = 0;
  imda_result_ledger(res, &du, &dv, &present);

  std::printf("epochs: %zu  steps: %zu\n", rows - 1, steps);
  if (std::isnan(acc)) std::printf("target accuracy: NA\n");
  else std::printf("target accuracy: %.4f\n", acc);
  std::printf("alpha:");
  for (double a : alpha) std::printf(" %.4f", a);
  std::printf("\n");
  if (present) std::printf("delta_u: %.6g  delta_v: %.6g\n", du, dv);
  else std::printf("ledger: absent (noiseless)\n");
  imda_result_destroy(res);
  return 0;
}

void print_check(const char* name, int passed, const char* detail, void*) {
  std::printf("%-26s %s  %s\n", name, passed ? "PASS" : "FAIL", detail);
}

int cmd_check(unsigned long long seed) {
  int failures = 0;
  const imda_status s = imda_check(seed, print_check, nullptr, &failures);
  if (s != IMDA_OK) return report(s);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}

int cmd_oracle(const std::string& path, const std::string& cost, double scale) {
  double w1 = 0.0;
  const imda_status s = imda_oracle_w1_csv(path.c_str(), cost.c_str(), scale, &w1);
  if (s != IMDA_OK) return report(s);
  std::printf("%.17g\n", w1);
  return 0;
}

void print_term(const char* name, double value, void*) {
  std::printf("%s,%.17g\n", name, value);
}

int cmd_bound(const std::string& path, const std::vector<std::string>& sets) {
  imda_config* cfg = nullptr;
  imda_status s = load_config(path, sets, &cfg);
  if (s != IMDA_OK) return report(s);
  double total = 0.0;
  std::printf("term_name,value\n");
  s = imda_bound_report(cfg, print_term, nullptr, &total);
  imda_config_destroy(cfg);
  if (s != IMDA_OK) return report(s);
  std::printf("total,%.17g\n", total);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source domain adaptation with learned domain weights"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  auto* run = app.add_subcommand("run", "train and write metrics, alpha, ledger and bound CSVs");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--set", sets, "override, key=value")->take_all();

  unsigned long long seed = 0;
  auto* check = app.add_subcommand("check", "run the property suites");
  check->add_option("--seed", seed, "seed for the random instances");

  std::string pair_path, cost = "abs";
  double scale = 1.0;
  auto* oracle = app.add_subcommand("oracle-w1", "exact W1 between two tiny uniform measures");
  oracle->add_option("csv", pair_path, "file with header set,label,f0,...")->required();
  oracle->add_option("--label-cost", cost, "none, indicator or abs")
      ->check(CLI::IsMember({"none", "indicator", "abs"}));
  oracle->add_option("--scale", scale, "weight of the feature distance");

  auto* bound = app.add_subcommand("bound", "print the bound report for the config");
  bound->add_option("--config", config_path, "config file")->required();
  bound->add_option("--set", sets, "override, key=value")->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (*run) return cmd_run(config_path, sets);
  if (*check) return cmd_check(seed);
  if (*oracle) return cmd_oracle(pair_path, cost, scale);
  return cmd_bound(config_path, sets);
}
