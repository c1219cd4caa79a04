#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "imda/matrix.hpp"
#include "imda/parameters.hpp"
#include "imda/rng.hpp"

namespace imda::test {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = n(rng);
  return m;
}

inline void randomize(ParameterVector& p, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  for (double& v : p.values()) v = n(rng);
}

// Fresh scratch directory under the build tree.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(IMDA_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline double rel_err(double a, double b) {
  return std::fabs(a - b) / (std::fabs(a) + std::fabs(b) + 1e-12);
}

}  // namespace imda::test
