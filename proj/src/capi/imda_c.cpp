#include "imda/imda.h"

#include <cmath>
#include <cstdio>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "imda/checks.hpp"
#include "imda/config.hpp"
#include "imda/error.hpp"
#include "imda/harness.hpp"
#include "imda/theory.hpp"

struct imda_config {
  std::string text;
  std::string origin;
  std::vector<std::string> overrides;
};

struct imda_result {
  imda::RunResult run;
};

namespace {

thread_local std::string last_error;

imda_status fail(imda_status code, const std::string& message) {
  last_error = message;
  return code;
}

template <typename F>
imda_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const imda::ConfigError& e) {
    return fail(IMDA_ERR_CONFIG, e.what());
  } catch (const imda::NumericError& e) {
    return fail(IMDA_ERR_NUMERIC, e.what());
  } catch (const imda::ShapeError& e) {
    return fail(IMDA_ERR_INVALID, e.what());
  } catch (const imda::DataError& e) {
    return fail(IMDA_ERR_IO, e.what());
  } catch (const imda::Error& e) {
    return fail(IMDA_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(IMDA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(IMDA_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(IMDA_ERR_INTERNAL, "unknown error");
  }
}

imda::ExperimentConfig parsed(const imda_config& c) {
  return imda::parse_config_text(c.text, c.overrides, c.origin);
}

}  // namespace

extern "C" {

const char* imda_last_error(void) { return last_error.c_str(); }

const char* imda_version(void) { return "0.1.0"; }

imda_status imda_config_create(const char* mode, imda_config** out) {
  return guarded([&] {
    if (mode == nullptr || out == nullptr) return fail(IMDA_ERR_INVALID, "null argument");
    auto c = std::make_unique<imda_config>();
    c->text = std::string("mode = ") + mode + "\n";
    c->origin = "<created>";
    parsed(*c);
    *out = c.release();
    return IMDA_OK;
  });
}

imda_status imda_config_load(const char* path, imda_config** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr) return fail(IMDA_ERR_INVALID, "null argument");
    auto c = std::make_unique<imda_config>();
    c->origin = path;
    std::FILE* f = std::fopen(path, "r");
    if (f == nullptr) return fail(IMDA_ERR_IO, std::string("cannot open config ") + path);
    char buf[4096];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) c->text.append(buf, got);
    std::fclose(f);
    parsed(*c);
    *out = c.release();
    return IMDA_OK;
  });
}

imda_status imda_config_set(imda_config* config, const char* key, const char* value) {
  return guarded([&] {
    if (config == nullptr || key == nullptr || value == nullptr)
      return fail(IMDA_ERR_INVALID, "null argument");
    config->overrides.push_back(std::string(key) + "=" + value);
    try {
      parsed(*config);
    } catch (...) {
      config->overrides.pop_back();
      throw;
    }
    return IMDA_OK;
  });
}

void imda_config_destroy(imda_config* config) { delete config; }

imda_status imda_run(const imda_config* config, imda_result** out) {
  return guarded([&] {
    if (config == nullptr || out == nullptr) return fail(IMDA_ERR_INVALID, "null argument");
    auto r = std::make_unique<imda_result>();
    r->run = imda::run(parsed(*config));
    *out = r.release();
    return IMDA_OK;
  });
}

void imda_result_destroy(imda_result* result) { delete result; }

imda_status imda_result_rows(const imda_result* result, size_t* rows) {
  if (result == nullptr || rows == nullptr) return fail(IMDA_ERR_INVALID, "null argument");
  *rows = result->run.metrics.size();
  return IMDA_OK;
}

imda_status imda_result_num_sources(const imda_result* result, size_t* n) {
  if (result == nullptr || n == nullptr) return fail(IMDA_ERR_INVALID, "null argument");
  *n = result->run.alpha.size();
  return IMDA_OK;
}

imda_status imda_result_target_accuracy(const imda_result* result, size_t row, double* accuracy) {
  if (result == nullptr || accuracy == nullptr) return fail(IMDA_ERR_INVALID, "null argument");
  if (row >= result->run.metrics.size())
    return fail(IMDA_ERR_INVALID, "row " + std::to_string(row) + " out of range");
  *accuracy = result->run.metrics[row].target_accuracy;
  return IMDA_OK;
}

imda_status imda_result_alpha(const imda_result* result, double* alpha, size_t capacity) {
  if (result == nullptr || alpha == nullptr) return fail(IMDA_ERR_INVALID, "null argument");
  const auto& a = result->run.alpha;
  if (capacity < a.size())
    return fail(IMDA_ERR_INVALID, "alpha buffer holds " + std::to_string(capacity) + ", need " +
                                      std::to_string(a.size()));
  for (size_t i = 0; i < a.size(); ++i) alpha[i] = a[i];
  return IMDA_OK;
}

imda_status imda_result_ledger(const imda_result* result, double* delta_u, double* delta_v,
                               int* present) {
  if (result == nullptr || delta_u == nullptr || delta_v == nullptr || present == nullptr)
    return fail(IMDA_ERR_INVALID, "null argument");
  const auto& l = result->run.ledger;
  *present = l ? 1 : 0;
  *delta_u = l ? l->delta_u() : NAN;
  *delta_v = l ? l->delta_v() : NAN;
  return IMDA_OK;
}

imda_status imda_result_steps(const imda_result* result, size_t* steps) {
  if (result == nullptr || steps == nullptr) return fail(IMDA_ERR_INVALID, "null argument");
  *steps = result->run.steps;
  return IMDA_OK;
}

imda_status imda_bound_report(const imda_config* config, imda_term_callback on_term, void* user,
                              double* total) {
  return guarded([&] {
    if (config == nullptr || total == nullptr) return fail(IMDA_ERR_INVALID, "null argument");
    const auto report = imda::bound_from_config(parsed(*config));
    if (on_term != nullptr)
      for (const auto& t : report.terms) on_term(t.name.c_str(), t.value, user);
    *total = report.total;
    return IMDA_OK;
  });
}

imda_status imda_oracle_w1_csv(const char* path, const char* label_cost, double scale,
                               double* w1) {
  return guarded([&] {
    if (path == nullptr || label_cost == nullptr || w1 == nullptr)
      return fail(IMDA_ERR_INVALID, "null argument");
    imda::GroundMetric metric;
    const std::string cost = label_cost;
    if (cost == "none") metric.label_cost = imda::LabelCost::kNone;
    else if (cost == "indicator") metric.label_cost = imda::LabelCost::kIndicator;
    else if (cost == "abs") metric.label_cost = imda::LabelCost::kAbsolute;
    else return fail(IMDA_ERR_CONFIG, "label cost must be none, indicator or abs");
    if (!(scale >= 0.0)) return fail(IMDA_ERR_CONFIG, "scale must be >= 0");
    metric.scale = scale;
    *w1 = imda::exact_w1(imda::load_measure_pair_csv(path), metric);
    return IMDA_OK;
  });
}

imda_status imda_check(unsigned long long seed, imda_check_callback on_result, void* user,
                       int* failures) {
  return guarded([&] {
    if (failures == nullptr) return fail(IMDA_ERR_INVALID, "null argument");
    int failed = 0;
    imda::run_property_checks(seed, [&](const imda::CheckResult& r) {
      failed += r.passed ? 0 : 1;
      if (on_result != nullptr) on_result(r.name.c_str(), r.passed ? 1 : 0, r.detail.c_str(), user);
    });
    *failures = failed;
    return IMDA_OK;
  });
}

}  // extern "C"
