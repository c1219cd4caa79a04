#include <gtest/gtest.h>

#include <fstream>

#include "imda/config.hpp"
#include "imda/error.hpp"
#include "test_util.hpp"

namespace imda {
namespace {

TEST(Config, ModeDefaults) {
  const auto sup = parse_config_text("mode = supervised\n", {});
  EXPECT_EQ(sup.tau, 1.0);
  EXPECT_EQ(sup.epsilon, 0.5);
  EXPECT_EQ(sup.c1, 0.5);
  EXPECT_EQ(sup.epochs, 40u);

  const auto uns = parse_config_text("mode = unsupervised\n", {});
  EXPECT_EQ(uns.tau, 0.0);
  EXPECT_EQ(uns.sgld.eta_u.at(0), 0.8);
  EXPECT_EQ(uns.c1, 1.0);
  EXPECT_EQ(uns.c0, 1.2);
  EXPECT_EQ(uns.coef1, 0.06);
  EXPECT_EQ(uns.coef2, 1.2);
  EXPECT_EQ(uns.epochs, 50u);
  EXPECT_EQ(uns.batch_size, 20u);

  const auto semi = parse_config_text("mode = semi\n", {});
  EXPECT_EQ(semi.tau, 0.5);
}

TEST(Config, ValuesCommentsAndOverrides) {
  const auto c = parse_config_text(
      "# experiment\n"
      "mode = semi   # mixed\n"
      "tau = 0.25\n"
      "epsilon = 0.1\n"
      "rep_hidden = 8, 4\n"
      "eta = 0.3\n"
      "seed = 12\n",
      {"epsilon=0.2", "noiseless=true"});
  EXPECT_EQ(c.tau, 0.25);
  EXPECT_EQ(c.epsilon, 0.2);
  EXPECT_EQ(c.rep_hidden, (std::vector<std::size_t>{8, 4}));
  EXPECT_EQ(c.sgld.eta_v.at(0), 0.3);
  EXPECT_EQ(c.seed, 12u);
  EXPECT_TRUE(c.sgld.noiseless);
}

TEST(Config, OverrideCanChangeMode) {
  const auto c = parse_config_text("mode = supervised\n", {"mode=unsupervised"});
  EXPECT_EQ(c.mode, Mode::kUnsupervised);
  EXPECT_EQ(c.tau, 0.0);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config_text("tau = 0.5\n", {}), ConfigError);
  EXPECT_THROW(parse_config_text("mode = other\n", {}), ConfigError);
  EXPECT_THROW(parse_config_text("mode = supervised\nnot_a_key = 1\n", {}), ConfigError);
  EXPECT_THROW(parse_config_text("mode = supervised\nepsilon = 1.5\n", {}), ConfigError);
  EXPECT_THROW(parse_config_text("mode = supervised\nepsilon = abc\n", {}), ConfigError);
  EXPECT_THROW(parse_config_text("mode = supervised\ntau = 0.5\n", {}), ConfigError);
  EXPECT_THROW(parse_config_text("mode = supervised\nbatch_size = -3\n", {}), ConfigError);
  EXPECT_THROW(parse_config_text("mode = supervised\n", {"epsilon"}), ConfigError);
  EXPECT_THROW(parse_config("/nonexistent/file.conf", {}), ConfigError);
}

TEST(Config, ErrorNamesLineAndKey) {
  try {
    parse_config_text("mode = supervised\n\nepochs = x\n", {}, "exp.conf");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("exp.conf:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("epochs"), std::string::npos) << msg;
  }
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"supervised.conf", "unsupervised.conf", "bound_example.conf"}) {
    const std::string path = std::string(IMDA_SOURCE_DIR) + "/configs/" + name;
    EXPECT_NO_THROW(parse_config(path, {})) << name;
  }
}

TEST(Config, KeysListed) {
  const auto& keys = config_keys();
  for (const char* k : {"mode", "tau", "epsilon", "sigma", "seed", "output_dir", "bound_kind"})
    EXPECT_NE(std::find(keys.begin(), keys.end(), k), keys.end()) << k;
}

TEST(Config, ModelSpecFromConfig) {
  const auto c = parse_config_text("mode = supervised\nrep_hidden = 6\npred_hidden = 5\n", {});
  const auto spec = c.model_spec(3, 4);
  EXPECT_EQ(spec.representation.widths, (std::vector<std::size_t>{3, 6}));
  EXPECT_EQ(spec.predictor.widths, (std::vector<std::size_t>{6, 5, 4}));
}

}  // namespace
}  // namespace imda
