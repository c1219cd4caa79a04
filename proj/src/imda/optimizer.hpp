#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "imda/parameters.hpp"
#include "imda/rng.hpp"

namespace imda {

// Constant value, or one value per step (the last entry repeats).
class Schedule {
 public:
  Schedule() = default;
  Schedule(double constant) : values_{constant} {}  // NOLINT(implicit)
  explicit Schedule(std::vector<double> values);

  double at(std::size_t step) const;
  const std::vector<double>& values() const { return values_; }
  bool positive() const;

 private:
  std::vector<double> values_{1.0};
};

struct SgldConfig {
  Schedule eta_u = 0.5;
  Schedule eta_v = 0.5;
  Schedule eta_dup = 0.5;
  Schedule sigma = 1e-3;  // noise standard deviation per coordinate
  bool noiseless = false;

  void validate() const;
};

// params - eta * gradient + xi, xi ~ N(0, sigma^2 I). Noise is skipped when
// `rng` is null (noiseless mode).
void sgld_step(ParameterVector& params, const ParameterVector& gradient, double eta,
               double sigma, Rng* rng);

// Plain ascent: params + eta * gradient.
void duplicate_ascent_step(ParameterVector& params, const ParameterVector& gradient, double eta);

// Throws NonFiniteError naming the first non-finite coordinate.
void require_finite(const ParameterVector& v, const char* context);

enum class LedgerBlock { kU, kV };

const char* block_name(LedgerBlock block);

struct LedgerEntry {
  std::uint64_t step = 0;
  LedgerBlock block = LedgerBlock::kU;
  double eta = 0.0;
  double sigma = 0.0;
  double grad_sq_norm = 0.0;
  double delta_after = 0.0;
};

// Running sums delta_u, delta_v of eta^2 |G|^2 / (2 sigma^2), using the
// realized squared gradient norm of each step.
class GradNormLedger {
 public:
  static double increment(double eta, double sigma, double grad_sq_norm);

  void accumulate(LedgerBlock block, std::uint64_t step, double eta, double sigma,
                  double grad_sq_norm);

  double delta_u() const { return delta_u_; }
  double delta_v() const { return delta_v_; }
  const std::vector<LedgerEntry>& log() const { return log_; }

  // Recomputes the sums from a log in order. Bit-identical to the live sums
  // for the log this ledger produced.
  static GradNormLedger replay(const std::vector<LedgerEntry>& log);

  void write_csv(const std::string& path) const;
  static std::vector<LedgerEntry> read_csv(const std::string& path);

 private:
  double delta_u_ = 0.0;
  double delta_v_ = 0.0;
  std::vector<LedgerEntry> log_;
};

}  // namespace imda
