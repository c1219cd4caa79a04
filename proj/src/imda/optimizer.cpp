#include "imda/optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "imda/error.hpp"

namespace imda {

Schedule::Schedule(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ConfigError("schedule: empty list");
}

double Schedule::at(std::size_t step) const {
  return step < values_.size() ? values_[step] : values_.back();
}

bool Schedule::positive() const {
  for (double v : values_)
    if (!(v > 0.0) || !std::isfinite(v)) return false;
  return true;
}

void SgldConfig::validate() const {
  if (!eta_u.positive() || !eta_v.positive() || !eta_dup.positive())
    throw ConfigError("learning rates must be positive");
  if (!noiseless && !sigma.positive())
    throw ConfigError("noise scale sigma must be positive unless noiseless");
}

void require_finite(const ParameterVector& v, const char* context) {
  const auto values = v.values();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw NonFiniteError(std::string(context) + ": non-finite value at coordinate " +
                               std::to_string(i),
                           i);
}

void sgld_step(ParameterVector& params, const ParameterVector& gradient, double eta,
               double sigma, Rng* rng) {
  require_same_layout(params, gradient, "sgld_step");
  require_finite(gradient, "sgld_step gradient");
  if (!(eta >= 0.0)) throw ConfigError("sgld_step: negative learning rate");
  auto p = params.values();
  const auto g = gradient.values();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= eta * g[i];
  if (rng != nullptr) {
    if (!(sigma > 0.0)) throw ConfigError("sgld_step: sigma must be positive");
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& x : p) x += noise(*rng);
  }
}

void duplicate_ascent_step(ParameterVector& params, const ParameterVector& gradient, double eta) {
  require_same_layout(params, gradient, "duplicate_ascent_step");
  require_finite(gradient, "duplicate_ascent_step gradient");
  auto p = params.values();
  const auto g = gradient.values();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += eta * g[i];
}

const char* block_name(LedgerBlock block) { return block == LedgerBlock::kU ? "u" : "v"; }

double GradNormLedger::increment(double eta, double sigma, double grad_sq_norm) {
  if (!(sigma > 0.0))
    throw NumericError("ledger undefined: sigma must be positive (noiseless run?)");
  if (!(grad_sq_norm >= 0.0)) throw NumericError("ledger: negative squared gradient norm");
  return eta * eta * grad_sq_norm / (2.0 * sigma * sigma);
}

void GradNormLedger::accumulate(LedgerBlock block, std::uint64_t step, double eta, double sigma,
                                double grad_sq_norm) {
  const double inc = increment(eta, sigma, grad_sq_norm);
  double& delta = block == LedgerBlock::kU ? delta_u_ : delta_v_;
  delta += inc;
  log_.push_back({step, block, eta, sigma, grad_sq_norm, delta});
}

GradNormLedger GradNormLedger::replay(const std::vector<LedgerEntry>& log) {
  GradNormLedger out;
  for (const auto& e : log) out.accumulate(e.block, e.step, e.eta, e.sigma, e.grad_sq_norm);
  return out;
}

void GradNormLedger::write_csv(const std::string& path) const {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw Error("cannot write " + path);
  std::fprintf(f, "step,block,eta,sigma,grad_sq_norm,delta_after\n");
  for (const auto& e : log_)
    std::fprintf(f, "%llu,%s,%.17g,%.17g,%.17g,%.17g\n", static_cast<unsigned long long>(e.step),
                 block_name(e.block), e.eta, e.sigma, e.grad_sq_norm, e.delta_after);
  if (std::fclose(f) != 0) throw Error("cannot write " + path);
}

std::vector<LedgerEntry> GradNormLedger::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "step,block,eta,sigma,grad_sq_norm,delta_after")
    throw DataError(path + ":1: unexpected ledger header");
  std::vector<LedgerEntry> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string step, block, eta, sigma, g, delta;
    if (!std::getline(row, step, ',') || !std::getline(row, block, ',') ||
        !std::getline(row, eta, ',') || !std::getline(row, sigma, ',') ||
        !std::getline(row, g, ',') || !std::getline(row, delta))
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 6 fields");
    LedgerEntry e;
    try {
      e.step = std::stoull(step);
      e.eta = std::stod(eta);
      e.sigma = std::stod(sigma);
      e.grad_sq_norm = std::stod(g);
      e.delta_after = std::stod(delta);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": unparseable number");
    }
    if (block == "u") e.block = LedgerBlock::kU;
    else if (block == "v") e.block = LedgerBlock::kV;
    else throw DataError(path + ":" + std::to_string(line_no) + ": block must be u or v");
    out.push_back(e);
  }
  return out;
}

}  // namespace imda
