#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "imda/error.hpp"
#include "imda/models.hpp"
#include "test_util.hpp"

namespace imda {
namespace {

using test::random_matrix;

double eigen_spectral(const Matrix& w) {
  Eigen::MatrixXd e(w.rows(), w.cols());
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c) e(r, c) = w(r, c);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
  return svd.singularValues()(0);
}

TEST(Models, SpectralNormMatchesSvd) {
  Rng rng = make_stream(1, {10});
  std::uniform_int_distribution<int> dim(1, 12);
  for (int t = 0; t < 40; ++t) {
    const Matrix w = random_matrix(rng, dim(rng), dim(rng));
    const double exact = eigen_spectral(w);
    const double est = spectral_norm(w);
    EXPECT_GE(est, exact * (1 - 1e-10)) << t;
    EXPECT_LE(est, exact * (1 + 1e-4)) << t;
  }
}

TEST(Models, SpectralNormDiagonal) {
  const Matrix w = Matrix::from_rows({{3, 0}, {0, -5}});
  EXPECT_NEAR(spectral_norm(w), 5.0, 1e-6);
}

TEST(Models, SpectralNormCapRaisesWithIterate) {
  // One iteration against an unreachable tolerance.
  Rng rng = make_stream(2, {10});
  const Matrix w = random_matrix(rng, 8, 8);
  PowerIterationOptions opts;
  opts.max_iterations = 1;
  opts.tolerance = 1e-300;
  try {
    spectral_norm(w, opts);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_FALSE(e.last_iterate().empty());
  }
}

TEST(Models, LipschitzBoundIsProductOfLayerNorms) {
  Rng rng = make_stream(3, {10});
  const MlpSpec spec{{4, 6, 3}, {Activation::kRelu, Activation::kNone}, 0.0};
  const auto p = init_mlp(spec, rng);
  const double expected = eigen_spectral(p.matrix(0)) * eigen_spectral(p.matrix(2));
  EXPECT_NEAR(lipschitz_upper_bound(spec, p), expected, 1e-4 * expected);
}

TEST(Models, LipschitzBoundDominatesDifferenceQuotients) {
  Rng rng = make_stream(4, {10});
  const MlpSpec spec{{3, 8, 8, 2}, {Activation::kRelu, Activation::kRelu, Activation::kNone}, 0.0};
  const auto p = init_mlp(spec, rng);
  const double k = lipschitz_upper_bound(spec, p);
  for (int t = 0; t < 200; ++t) {
    const Matrix a = random_matrix(rng, 1, 3);
    const Matrix b = random_matrix(rng, 1, 3);
    const Matrix fa = mlp_forward(spec, p, a), fb = mlp_forward(spec, p, b);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < fa.size(); ++i) num += std::pow(fa.values()[i] - fb.values()[i], 2);
    for (std::size_t i = 0; i < a.size(); ++i) den += std::pow(a.values()[i] - b.values()[i], 2);
    EXPECT_LE(std::sqrt(num), k * std::sqrt(den) * (1 + 1e-9));
  }
}

TEST(Models, GlorotInitRangeAndZeroBias) {
  Rng rng = make_stream(5, {10});
  const MlpSpec spec{{10, 20, 5}, {Activation::kRelu, Activation::kNone}, 0.0};
  const auto p = init_mlp(spec, rng);
  const double a0 = std::sqrt(6.0 / 30.0), a1 = std::sqrt(6.0 / 25.0);
  for (double w : p.entry_values(0)) EXPECT_LE(std::fabs(w), a0);
  for (double w : p.entry_values(2)) EXPECT_LE(std::fabs(w), a1);
  for (double b : p.entry_values(1)) EXPECT_EQ(b, 0.0);
  for (double b : p.entry_values(3)) EXPECT_EQ(b, 0.0);
}

TEST(Models, InitIsDeterministicPerSeed) {
  const auto spec = ModelSpec::desk_default(2, 2);
  Rng a = make_stream(6, {kStreamInit}), b = make_stream(6, {kStreamInit});
  const auto ta = ModelTriple::initialize(spec, a);
  const auto tb = ModelTriple::initialize(spec, b);
  EXPECT_EQ(ta.rep, tb.rep);
  EXPECT_EQ(ta.pred, tb.pred);
  EXPECT_EQ(ta.dup, tb.dup);
}

TEST(Models, DeskDefaultShapes) {
  const auto spec = ModelSpec::desk_default(7, 4);
  EXPECT_EQ(spec.representation.widths, (std::vector<std::size_t>{7, 32, 16}));
  EXPECT_EQ(spec.predictor.widths, (std::vector<std::size_t>{16, 4}));
  EXPECT_EQ(spec.num_classes(), 4u);
}

TEST(Models, PredictRowsAreLogProbabilities) {
  Rng rng = make_stream(7, {10});
  const auto spec = ModelSpec::desk_default(3, 4);
  const auto m = ModelTriple::initialize(spec, rng);
  const Matrix lp = predict(spec, m.pred, represent(spec, m.rep, random_matrix(rng, 9, 3)));
  for (std::size_t r = 0; r < lp.rows(); ++r) {
    double s = 0;
    for (double v : lp.row(r)) s += std::exp(v);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Models, ArgmaxTiesGoLow) {
  const auto labels = argmax_rows(Matrix::from_rows({{1, 1, 0}, {0, 2, 2}, {3, 1, 3}}));
  EXPECT_EQ(labels, (std::vector<int>{0, 1, 0}));
}

TEST(Models, DropoutMaskIsInverted) {
  Rng rng = make_stream(8, {10});
  const Matrix m = dropout_mask(200, 50, 0.3, rng);
  double sum = 0;
  for (double v : m.values()) {
    EXPECT_TRUE(v == 0.0 || std::fabs(v - 1.0 / 0.7) < 1e-15);
    sum += v;
  }
  EXPECT_NEAR(sum / m.size(), 1.0, 0.03);
}

TEST(Models, ShapeMismatchRejected) {
  Rng rng = make_stream(9, {10});
  const MlpSpec spec{{3, 2}, {Activation::kNone}, 0.0};
  const auto p = init_mlp(spec, rng);
  EXPECT_THROW(mlp_forward(spec, p, Matrix(2, 4)), ShapeError);
}

TEST(Models, CertifyUsesBothNetworks) {
  Rng rng = make_stream(10, {10});
  const auto spec = ModelSpec::desk_default(3, 2);
  const auto m = ModelTriple::initialize(spec, rng);
  const auto cert = certify(spec, m.rep, m.pred);
  EXPECT_NEAR(cert.representation, lipschitz_upper_bound(spec.representation, m.rep), 1e-12);
  EXPECT_NEAR(cert.predictor, lipschitz_upper_bound(spec.predictor, m.pred), 1e-12);
  EXPECT_EQ(cert.loss, 1.0);
}

}  // namespace
}  // namespace imda
