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

#include "agglab/audit.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "test_support.hpp"

namespace agglab {
namespace {

TEST(BagConditional, ColspaceLabelsHaveZeroVariance) {
  SplitRng rng(70);
  Eigen::MatrixXd x(6, 3);
  for (Index i = 0; i < 6; ++i) {
    for (Index j = 0; j < 3; ++j) x(i, j) = rng.next_gaussian();
  }
  Eigen::VectorXd h(3);
  h << 0.4, -1.2, 0.3;
  const BagConditional bc = bag_conditional(x, x * h);
  EXPECT_EQ(bc.variance, 0.0);
  EXPECT_EQ(bc.rank, 3);
}

TEST(BagConditional, OrthogonalLabelsKeepFullNorm) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 2);
  x(0, 0) = 1.0;
  x(1, 1) = 1.0;  // colspace = span(e0, e1) of R^4
  Eigen::VectorXd y(4);
  y << 0.0, 0.0, 1.5, -0.5;
  const BagConditional bc = bag_conditional(x, y);
  EXPECT_NEAR(bc.variance, y.squaredNorm(), 1e-12);
  for (Index i = 0; i < bc.rank; ++i) {
    EXPECT_NEAR(bc.mean_coeffs[i], 0.0, 1e-12);
  }
}

TEST(BagConditional, VarianceMatchesLeastSquaresOracle) {
  SplitRng rng(71);
  Eigen::MatrixXd x(8, 3);
  Eigen::VectorXd y(8);
  for (Index i = 0; i < 8; ++i) {
    for (Index j = 0; j < 3; ++j) x(i, j) = rng.next_gaussian();
    y[i] = rng.next_gaussian();
  }
  const BagConditional bc = bag_conditional(x, y);
  const Eigen::VectorXd fit = agglab_test::normal_equations_solve(x, y);
  const double oracle = (y - x * fit).squaredNorm();
  EXPECT_NEAR(bc.variance, oracle, 1e-9 * oracle);
}

TEST(BagConditional, RankZeroFeatureMatrix) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, -1.0;
  const BagConditional bc = bag_conditional(x, y);
  EXPECT_EQ(bc.rank, 0);
  EXPECT_NEAR(bc.variance, y.squaredNorm(), 1e-12);
  EXPECT_EQ(bc.conditional_mean(Eigen::RowVectorXd::Zero(2)), 0.0);
}

TEST(BagConditional, ConditionalMomentsMatchMonteCarlo) {
  // Law of w.y given w.X = z: draw w, keep draws whose aggregate feature is
  // close to a reference z, and compare the conditional moments.
  SplitRng rng(72);
  Eigen::MatrixXd x(5, 1);
  Eigen::VectorXd y(5);
  for (Index i = 0; i < 5; ++i) {
    x(i, 0) = rng.next_gaussian();
    y[i] = rng.next_gaussian();
  }
  const BagConditional bc = bag_conditional(x, y);

  const double z_ref = 0.8;
  double sum = 0.0, sum_sq = 0.0;
  Index kept = 0;
  SplitRng mc(73);
  for (int t = 0; t < 4000000 && kept < 20000; ++t) {
    Eigen::VectorXd w(5);
    for (Index i = 0; i < 5; ++i) w[i] = mc.next_gaussian();
    const double z = (w.transpose() * x)(0, 0);
    if (std::abs(z - z_ref) > 0.01) continue;
    const double s = w.dot(y);
    sum += s;
    sum_sq += s * s;
    ++kept;
  }
  ASSERT_GT(kept, 5000);
  const double mc_mean = sum / static_cast<double>(kept);
  const double mc_var =
      sum_sq / static_cast<double>(kept) - mc_mean * mc_mean;
  Eigen::RowVectorXd z(1);
  z << z_ref;
  EXPECT_NEAR(mc_mean, bc.conditional_mean(z), 0.05);
  EXPECT_NEAR(mc_var, bc.variance, 0.05 * bc.variance);
}

TEST(HockeyStick, ClosedFormReferenceValues) {
  EXPECT_EQ(hockey_stick_gauss(0.0, 1.0, 0.0, 1.0, 0.7), 0.0);
  // Frozen from the quadrature oracle (agreement verified below to 1e-6).
  EXPECT_NEAR(hockey_stick_gauss(0.0, 1.0, 1.0, 1.0, 1.0), 0.1269367375, 1e-8);
  EXPECT_NEAR(agglab_test::hockey_stick_numeric(0.0, 1.0, 1.0, 1.0, 1.0),
              0.1269367375, 1e-6);
  // Total variation at eps = 0 for unit shift: 2 Phi(1/2) - 1.
  EXPECT_NEAR(hockey_stick_gauss(0.0, 1.0, 1.0, 1.0, 0.0),
              2.0 * agglab_test::normal_cdf(0.5) - 1.0, 1e-12);
}

TEST(HockeyStick, DegenerateScales) {
  EXPECT_EQ(hockey_stick_gauss(0.3, 0.0, 0.3, 0.0, 1.0), 0.0);
  EXPECT_EQ(hockey_stick_gauss(0.3, 0.0, 0.4, 0.0, 5.0), 1.0);
  EXPECT_EQ(hockey_stick_gauss(0.0, 1.0, 0.0, 0.0, 2.0), 1.0);
  EXPECT_EQ(hockey_stick_gauss(0.0, 0.0, 0.0, 1.0, 2.0), 1.0);
}

TEST(HockeyStick, MatchesNumericIntegration) {
  SplitRng rng(74);
  for (int t = 0; t < 200; ++t) {
    const double mu0 = 2.0 * rng.next_gaussian();
    const double mu1 = mu0 + 3.0 * (rng.next_unit() - 0.5);
    const double s0 = 0.3 + 2.0 * rng.next_unit();
    const double s1 = rng.next_unit() < 0.3 ? s0 : 0.3 + 2.0 * rng.next_unit();
    const double eps = 3.0 * rng.next_unit();
    const double exact = hockey_stick_gauss(mu0, s0, mu1, s1, eps);
    const double numeric = agglab_test::hockey_stick_numeric(mu0, s0, mu1, s1, eps);
    ASSERT_NEAR(exact, numeric, 1e-6)
        << "mu0=" << mu0 << " s0=" << s0 << " mu1=" << mu1 << " s1=" << s1
        << " eps=" << eps;
  }
}

TEST(HockeyStick, LargeEpsilonUnderflowsToZero) {
  EXPECT_EQ(hockey_stick_gauss(0.0, 1.0, 0.5, 1.0, 1e6), 0.0);
  EXPECT_EQ(hockey_stick_gauss(0.0, 1.0, 0.5, 1.2, 1e6), 0.0);
  EXPECT_GE(hockey_stick_gauss(0.0, 1.0, 0.5, 1.2, 800.0), 0.0);
}

TEST(HockeyStick, MonotoneInEpsilonAndInvariantUnderAffineRecode) {
  SplitRng rng(75);
  for (int t = 0; t < 50; ++t) {
    const double mu0 = rng.next_gaussian();
    const double mu1 = mu0 + rng.next_unit();
    const double s0 = 0.5 + rng.next_unit();
    const double s1 = 0.5 + rng.next_unit();
    double prev = 2.0;
    for (const double eps : {0.0, 0.3, 1.0, 2.5, 6.0}) {
      const double d = hockey_stick_gauss(mu0, s0, mu1, s1, eps);
      ASSERT_LE(d, prev + 1e-12);
      prev = d;
      // Invertible post-processing (affine recode) preserves the divergence.
      const double scale = 2.5, offset = -1.75;
      const double recoded = hockey_stick_gauss(
          scale * mu0 + offset, scale * s0, scale * mu1 + offset, scale * s1, eps);
      ASSERT_NEAR(d, recoded, 1e-12);
    }
  }
}

TEST(DeviationBound, IdenticalPairIsDominatedForAnyTheta) {
  for (const double theta : {0.1, 0.5, 0.9}) {
    const DeviationBound b = gaussian_deviation_bound(0.0, 1.0, 0.0, 1.0, theta);
    ASSERT_TRUE(b.applicable);
    EXPECT_LE(hockey_stick_gauss(0.0, 1.0, 0.0, 1.0, b.eps), b.delta);
  }
}

TEST(DeviationBound, SmallPerturbationIsDominated) {
  const DeviationBound b = gaussian_deviation_bound(0.0, 1.0, 0.05,
                                                    std::sqrt(1.01), 0.5);
  ASSERT_TRUE(b.applicable);
  const double exact = hockey_stick_gauss(0.0, 1.0, 0.05, std::sqrt(1.01), b.eps);
  EXPECT_LE(exact, b.delta);
}

TEST(DeviationBound, LargeVarianceRatioIsInapplicable) {
  const DeviationBound b =
      gaussian_deviation_bound(0.0, 1.0, 0.0, std::sqrt(3.0), 0.5);
  EXPECT_FALSE(b.applicable);
  EXPECT_FALSE(b.reason.empty());
}

TEST(DeviationBound, RefDeltaDominatesExactOnGrid) {
  SplitRng rng(76);
  for (int t = 0; t < 500; ++t) {
    const double s0 = 0.5 + rng.next_unit();
    const double ratio_sq = 1.0 + 0.4 * rng.next_unit();
    const double s1 = s0 * std::sqrt(ratio_sq);
    const double mu1 = 0.9 * s0 * rng.next_unit();
    for (const double eps : {0.5, 1.0, 2.0, 5.0}) {
      const double ref = gaussian_deviation_ref(0.0, s0, mu1, s1, eps);
      if (std::isnan(ref)) continue;
      ASSERT_LE(hockey_stick_gauss(0.0, s0, mu1, s1, eps), ref + 1e-15);
    }
  }
}

TEST(AuditWtdLba, ColspaceDatasetHasNoPrivacy) {
  const Dataset ds = synth_dataset(500, 5, 0.0, 3.0, 1.0, 77);
  const LabelPerturbation perturb = worst_case_perturbation(ds);
  const PrivacyCurve curve =
      audit_wtd_lba(ds, 20, perturb, {0.5, 1.0, 4.0}, 50, 78);
  EXPECT_TRUE(curve.zero_variance_seen);
  for (const auto& p : curve.points) {
    EXPECT_EQ(p.delta, 1.0);
  }
}

TEST(AuditWtdLba, DeltaDecreasesWithBagSize) {
  const Dataset ds = synth_dataset(4000, 5, 0.5, 3.0, 1.0, 79);
  const LabelPerturbation perturb = worst_case_perturbation(ds);
  const std::vector<double> grid = {1.0};
  const PrivacyCurve small_bags = audit_wtd_lba(ds, 8, perturb, grid, 400, 80);
  const PrivacyCurve large_bags = audit_wtd_lba(ds, 80, perturb, grid, 400, 81);
  // k = 8 with d = 5 leaves almost no residual variance; k = 80 does.
  const double gap = small_bags.points[0].delta - large_bags.points[0].delta;
  const double err = 2.0 * std::hypot(small_bags.points[0].std_err,
                                      large_bags.points[0].std_err);
  EXPECT_GT(gap, err);
}

TEST(AuditWtdLba, LargeEpsilonDrivesDeltaToZero) {
  const Dataset ds = synth_dataset(2000, 5, 0.5, 3.0, 1.0, 82);
  const PrivacyCurve curve =
      audit_wtd_lba(ds, 50, worst_case_perturbation(ds), {20.0}, 200, 83);
  EXPECT_LE(curve.points[0].delta, 3.0 * curve.points[0].std_err + 1e-9);
}

TEST(AuditWtdLba, DeltaIsMonotoneInEpsilon) {
  const Dataset ds = synth_dataset(2000, 5, 0.5, 3.0, 1.0, 84);
  const PrivacyCurve curve = audit_wtd_lba(
      ds, 40, worst_case_perturbation(ds), {0.25, 0.5, 1.0, 2.0, 4.0}, 300, 85);
  for (std::size_t g = 1; g < curve.points.size(); ++g) {
    EXPECT_LE(curve.points[g].delta,
              curve.points[g - 1].delta +
                  2.0 * (curve.points[g].std_err + curve.points[g - 1].std_err));
  }
}

TEST(AuditNoisyLlp, ZeroFractionMatchesMembershipProbability) {
  const Dataset ds = synth_dataset(1000, 4, 0.3, 3.0, 1.0, 86);
  const PrivacyCurve curve =
      audit_noisy_llp(ds, 10, 10, NoiseSpec::fraction(0.0),
                      worst_case_perturbation(ds), {1.0, 3.0}, 2000, 87);
  const double expected = 10.0 * 10.0 / 1000.0;
  for (const auto& p : curve.points) {
    EXPECT_NEAR(p.delta, expected, 3.0 * p.std_err + 1e-9);
  }
  EXPECT_TRUE(curve.zero_variance_seen);
}

TEST(AuditNoisyLlp, NoChangeMeansNoLeak) {
  const Dataset ds = synth_dataset(400, 3, 0.3, 3.0, 1.0, 88);
  LabelPerturbation same;
  same.index = 5;
  same.new_label = ds.labels[5];
  const PrivacyCurve curve = audit_noisy_llp(
      ds, 8, 10, NoiseSpec::fraction(0.5), same, {0.5, 1.0}, 300, 89);
  for (const auto& p : curve.points) {
    EXPECT_EQ(p.delta, 0.0);
  }
}

TEST(AuditNoisyLlp, DeltaDecreasesWithBagSizeAtFixedBudget) {
  const Dataset ds = synth_dataset(4000, 4, 0.5, 3.0, 1.0, 90);
  const LabelPerturbation perturb = worst_case_perturbation(ds);
  const std::vector<double> grid = {1.0};
  // Fixed release budget m*k: membership probability is held constant.
  const PrivacyCurve small_bags = audit_noisy_llp(
      ds, 80, 10, NoiseSpec::fraction(1.0), perturb, grid, 1500, 91);
  const PrivacyCurve large_bags = audit_noisy_llp(
      ds, 8, 100, NoiseSpec::fraction(1.0), perturb, grid, 1500, 92);
  const double gap = small_bags.points[0].delta - large_bags.points[0].delta;
  const double err = 2.0 * std::hypot(small_bags.points[0].std_err,
                                      large_bags.points[0].std_err);
  EXPECT_GT(gap, err);
}

TEST(NaiveFloor, ExactValuesAndEmpiricalFrequency) {
  EXPECT_DOUBLE_EQ(naive_lower_bound(2, 1, 1), 0.5);
  EXPECT_DOUBLE_EQ(naive_lower_bound(10, 2, 5), 1.0);
  EXPECT_THROW(naive_lower_bound(4, 5, 1), CapacityError);

  const double freq = naive_membership_frequency(2, 1, 1, 10000, 93);
  EXPECT_NEAR(freq, 0.5, 0.02);
  const double freq2 = naive_membership_frequency(50, 4, 3, 10000, 94);
  EXPECT_NEAR(freq2, naive_lower_bound(50, 4, 3), 0.02);
}

TEST(PrivacyCurveIo, WritesCsvAndJson) {
  const Dataset ds = synth_dataset(400, 3, 0.3, 3.0, 1.0, 95);
  const PrivacyCurve curve = audit_noisy_llp(
      ds, 5, 8, NoiseSpec::fraction(0.5), worst_case_perturbation(ds),
      {0.5, 1.0}, 100, 96);
  const auto dir = std::filesystem::temp_directory_path() / "agglab_curve";
  std::filesystem::create_directories(dir);
  const std::string csv = (dir / "curve.csv").string();
  const std::string json = (dir / "curve.json").string();
  save_privacy_curve(curve, csv, json, "test run");

  const CsvTable table = read_csv(csv);
  EXPECT_EQ(table.header,
            (std::vector<std::string>{"eps", "delta_hat", "stderr",
                                      "analytic_ref", "applicable_flag"}));
  EXPECT_EQ(table.rows.size(), 2u);

  const auto meta = nlohmann::json::parse(read_file(json));
  EXPECT_EQ(meta["mechanism"], "noisy-wtd-llp");
  EXPECT_EQ(meta["n_cond"], 100);
  EXPECT_EQ(meta["seed"], 96);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace agglab
