// Copyright 2026 The agglab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "agglab/checks.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "test_support.hpp"

namespace agglab {
namespace {

TEST(HoeffdingWor, ConstantPopulationNeverDeviates) {
  const std::vector<double> population(200, 3.5);
  const CheckReport r = check_hoeffding_wor(population, 50, 0.01, 500, 1);
  EXPECT_EQ(r.empirical, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(HoeffdingWor, ExhaustiveDrawIsExact) {
  std::vector<double> population(100);
  for (std::size_t i = 0; i < population.size(); ++i) {
    population[i] = i < 50 ? 0.0 : 1.0;
  }
  const CheckReport r = check_hoeffding_wor(
      population, static_cast<Index>(population.size()), 1e-12, 200, 2);
  EXPECT_EQ(r.empirical, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(HoeffdingWor, UniformPopulationRespectsBound) {
  SplitRng rng(3);
  std::vector<double> population(1000);
  for (auto& v : population) v = rng.next_unit();
  const CheckReport r = check_hoeffding_wor(population, 100, 0.1, 10000, 4);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.empirical, r.bound + r.margin);
  EXPECT_THROW(check_hoeffding_wor({-1.0}, 1, 0.1, 10, 5), std::invalid_argument);
}

TEST(HansonWright, ZeroCoefficientsAreDegenerate) {
  const CheckReport r = check_hanson_wright({0.0, 0.0}, 0.5, 100, 6);
  EXPECT_EQ(r.empirical, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(HansonWright, SingleCoefficientMatchesChiSquareTail) {
  // S ~ chi^2_1; Pr[|S - 1| > 10] = Pr[S > 11] = erfc(sqrt(11/2)).
  const double exact = std::erfc(std::sqrt(11.0 / 2.0));
  const Index trials = 2000000;
  const CheckReport r = check_hanson_wright({1.0}, 10.0, trials, 7);
  const double stderr_exact = std::sqrt(exact * (1.0 - exact) / trials);
  EXPECT_NEAR(r.empirical, exact, 4.0 * stderr_exact);
  EXPECT_TRUE(r.pass);
}

TEST(HansonWright, HundredOnesHoldsWithConfiguredConstant) {
  const CheckReport r =
      check_hanson_wright(std::vector<double>(100, 1.0), 50.0, 100000, 8);
  EXPECT_TRUE(r.pass);
  EXPECT_NE(r.params.find("c0=0.125"), std::string::npos);
}

TEST(MatrixChernoff, IdenticalUnitRowsNeverViolate) {
  Dataset ds;
  ds.features = Eigen::MatrixXd::Zero(200, 3);
  ds.features.col(0).setOnes();
  ds.labels = Eigen::VectorXd::Constant(200, 0.5);
  ds.label_bound = 1.0;
  ds.feature_bound = 1.0;
  const CheckReport r = check_matrix_chernoff_bags(ds, 20, 0.5, 2000, 9);
  EXPECT_EQ(r.empirical, 0.0);
  EXPECT_TRUE(r.pass);
  EXPECT_NE(r.params.find("dim=1"), std::string::npos);
}

TEST(MatrixChernoff, BasisCycleAndSyntheticRespectBound) {
  const CheckReport basis =
      check_matrix_chernoff_bags(basis_cycle_dataset(5, 40), 10, 0.5, 5000, 10);
  EXPECT_TRUE(basis.pass);

  const Dataset ds = synth_dataset(5000, 5, 0.2, 3.0, 1.0, 11);
  const CheckReport synth = check_matrix_chernoff_bags(ds, 200, 0.5, 3000, 12);
  EXPECT_TRUE(synth.pass);
  EXPECT_LT(synth.bound, 0.5) << "fixture should give a non-vacuous bound";
}

TEST(BagResidual, ZeroGammaIsVacuouslySatisfied) {
  const Dataset ds = synth_dataset(1000, 4, 0.0, 3.0, 1.0, 13);
  const CheckReport r = check_bag_residual(ds, 20, 100, 300, 14);
  EXPECT_EQ(r.empirical, 0.0);
  EXPECT_TRUE(r.pass);
  EXPECT_NE(r.note.find("hypothesis"), std::string::npos);
}

TEST(BagResidual, WholeDatasetBagIsDeterministic) {
  const Dataset ds = synth_dataset(300, 4, 0.4, 3.0, 1.0, 15);
  const CheckReport r = check_bag_residual(ds, ds.n(), ds.n(), 5, 16);
  EXPECT_EQ(r.empirical, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(BagResidual, FailureFrequencyDecaysWithBagSize) {
  const Dataset ds = synth_dataset(5000, 10, 0.5, 3.0, 1.0, 17);
  const CheckReport r = check_bag_residual(ds, 30, 300, 400, 18);
  EXPECT_TRUE(r.pass);
}

TEST(LbaUtility, ZeroResidualModelNeverViolates) {
  const Dataset ds = synth_dataset(2000, 4, 0.0, 3.0, 1.0, 19);
  const LinearModel model{compute_stats(ds).best_linear, 5.0};
  const CheckReport r = check_lba_utility(ds, 50, 8, model, 0.1, 100, 20);
  EXPECT_EQ(r.empirical, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(LbaUtility, WideIntervalAtThetaOne) {
  const Dataset ds = synth_dataset(3000, 5, 0.4, 3.0, 1.0, 21);
  const LinearModel model = fit_linear(ds.features, ds.labels, 2.0);
  const CheckReport wide = check_lba_utility(ds, 200, 10, model, 0.999, 200, 22);
  EXPECT_LE(wide.empirical, 0.02);
  EXPECT_TRUE(wide.pass);
}

TEST(LbaUtility, ReferenceParametersPass) {
  const Dataset ds = synth_dataset(20000, 10, 0.5, 3.0, 1.0, 23);
  const DatasetStats stats = compute_stats(ds);
  const LinearModel model =
      fit_linear(ds.features, ds.labels, 2.0 * stats.best_linear.norm());
  const CheckReport r = check_lba_utility(ds, 500, 10, model, 0.1, 60, 24);
  EXPECT_TRUE(r.pass);
}

TEST(LlpDecomposition, PerfectModelConcentratesAtRho) {
  const Dataset ds = synth_dataset(20000, 5, 0.0, 3.0, 1.0, 25);
  const LinearModel model{compute_stats(ds).best_linear, 10.0};
  const CheckReport r = check_llp_decomposition(ds, 100, 1000, 10, 1.0, model,
                                                std::nullopt, 60, 26);
  EXPECT_TRUE(r.pass) << r.note;
  EXPECT_NE(r.params.find("target=1"), std::string::npos);
}

TEST(LlpDecomposition, MlpTrendOverBagCount) {
  const Dataset ds = synth_dataset(20000, 10, 0.5, 3.0, 1.0, 27);
  const MlpModel net = make_mlp(10, {8, 4, 1}, SplitRng(28));
  const CheckReport r = check_llp_decomposition(ds, 100, 1000, 10, 0.5, net,
                                                std::nullopt, 60, 29);
  EXPECT_TRUE(r.pass) << r.note;
}

TEST(GaussianDeviation, NoViolationsOnAdmissiblePairs) {
  const CheckReport r = check_gaussian_deviation(3000, 30);
  EXPECT_EQ(r.empirical, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(Suites, ReportsSerializeAndAreReproducible) {
  const std::vector<CheckReport> a = run_check_suite("divergence", 42);
  const std::vector<CheckReport> b = run_check_suite("divergence", 42);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].empirical, b[i].empirical);
    EXPECT_EQ(a[i].pass, b[i].pass);
  }
  EXPECT_THROW(run_check_suite("nope", 1), std::invalid_argument);

  const std::string path =
      (std::filesystem::temp_directory_path() / "agglab_checks.csv").string();
  write_check_reports_csv(a, path, "suite=divergence");
  const CsvTable table = read_csv(path);
  ASSERT_EQ(table.rows.size(), a.size());
  EXPECT_EQ(table.header[0], "name");
  std::remove(path.c_str());
}

}  // namespace
}  // namespace agglab
