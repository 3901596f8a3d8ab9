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

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "agglab/linear_model.hpp"
#include "agglab/mlp.hpp"
#include "test_support.hpp"

namespace agglab {
namespace {

TEST(FitLinearLba, RecoversPlantedModelAtZeroResidual) {
  const Dataset ds = synth_dataset(2000, 6, 0.0, 3.0, 1.0, 31);
  const Eigen::VectorXd planted = compute_stats(ds).best_linear;
  const LbaDataset lba = wtd_lba(ds, 50, 8, SplitRng(32));
  const LinearModel model = fit_linear_lba(lba, planted.norm() + 1.0);
  EXPECT_LE((model.coef - planted).norm(), 1e-6);
}

TEST(FitLinearLba, ZeroCapGivesZeroModel) {
  const Dataset ds = synth_dataset(500, 4, 0.2, 2.0, 1.0, 33);
  const LbaDataset lba = wtd_lba(ds, 30, 5, SplitRng(34));
  const LinearModel model = fit_linear_lba(lba, 0.0);
  EXPECT_EQ(model.coef.norm(), 0.0);
  const double loss = (lba.agg_labels - lba.agg_features * model.coef).squaredNorm();
  EXPECT_NEAR(loss, lba.agg_labels.squaredNorm(), 1e-12);
}

TEST(FitLinearLba, ConstrainedSolutionMatchesMultistartOracle) {
  const Dataset ds = synth_dataset(4000, 5, 0.4, 3.0, 1.0, 35);
  const LbaDataset lba = wtd_lba(ds, 200, 5, SplitRng(36));
  // A cap well below the unconstrained optimum forces the projected path.
  const double cap =
      0.4 * fit_linear_lba(lba, 1e9).coef.norm();
  const LinearModel model = fit_linear_lba(lba, cap);
  EXPECT_LE(model.coef.norm(), cap + 1e-9);

  const double loss =
      (lba.agg_labels - lba.agg_features * model.coef).squaredNorm();
  const double oracle = agglab_test::multistart_pgd_loss(
      lba.agg_features, lba.agg_labels, cap, 20, 37);
  EXPECT_NEAR(loss, oracle, 1e-4 * oracle);
}

TEST(LlpLoss, ZeroModelSumsSquaredAggregates) {
  const Dataset ds = synth_dataset(300, 3, 0.2, 2.0, 1.0, 38);
  const LlpResult llp =
      noisy_wtd_llp(ds, 20, 4, NoiseSpec::fraction(0.3), SplitRng(39));
  LinearModel zero;
  zero.coef = Eigen::VectorXd::Zero(ds.d());
  zero.norm_cap = 1.0;
  EXPECT_NEAR(llp_loss(llp.data, zero), llp.data.agg_labels.squaredNorm(), 1e-10);
}

TEST(LlpLoss, PerfectInterpolatorOnSingletonBagsIsZero) {
  const Dataset ds = synth_dataset(400, 4, 0.0, 3.0, 1.0, 40);
  const LinearModel model{compute_stats(ds).best_linear, 10.0};
  const LlpResult llp = naive_llp(ds, 50, 1, SplitRng(41));
  EXPECT_LE(llp_loss(llp.data, model), 1e-14);
}

TEST(LlpLoss, LinearModelMatchesAggregateFormIdentity) {
  const Dataset ds = synth_dataset(600, 5, 0.3, 2.0, 1.0, 42);
  const LlpResult llp =
      noisy_wtd_llp(ds, 40, 6, NoiseSpec::fraction(0.5), SplitRng(43));
  SplitRng rng(44);
  Eigen::VectorXd coef(ds.d());
  for (Index j = 0; j < ds.d(); ++j) coef[j] = rng.next_gaussian();
  const LinearModel model{coef, coef.norm()};

  // Independent route: collapse each bag to its weighted feature sum.
  Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(llp.data.bag_count(), ds.d());
  for (Index j = 0; j < llp.data.bag_count(); ++j) {
    for (Index r = 0; r < llp.data.bag_size(); ++r) {
      agg.row(j) += llp.data.plan.weights(j, r) *
                    llp.data.member_features.row(j * llp.data.bag_size() + r);
    }
  }
  const double via_aggregates =
      (llp.data.agg_labels - agg * coef).squaredNorm();
  const double direct = llp_loss(llp.data, model);
  EXPECT_NEAR(direct, via_aggregates, 1e-10 * std::max(1.0, via_aggregates));
}

TEST(GradLlpLoss, LinearSingleBagClosedForm) {
  const Dataset ds = synth_dataset(50, 3, 0.2, 2.0, 1.0, 45);
  const LlpResult llp =
      noisy_wtd_llp(ds, 1, 5, NoiseSpec::fraction(0.0), SplitRng(46));
  Eigen::VectorXd coef(3);
  coef << 0.3, -0.2, 0.7;
  const LinearModel model{coef, 1.0};

  Eigen::RowVectorXd xbar = Eigen::RowVectorXd::Zero(3);
  for (Index r = 0; r < 5; ++r) {
    xbar += llp.data.plan.weights(0, r) * llp.data.member_features.row(r);
  }
  const double resid = llp.data.agg_labels[0] - xbar * coef;
  const Eigen::VectorXd expected = -2.0 * resid * xbar.transpose();
  EXPECT_TRUE(grad_llp_loss(llp.data, model).isApprox(expected, 1e-12));
}

TEST(GradLlpLoss, VanishesAtZeroResidual) {
  const Dataset ds = synth_dataset(300, 4, 0.0, 3.0, 1.0, 47);
  const LinearModel model{compute_stats(ds).best_linear, 10.0};
  const LlpResult llp =
      noisy_wtd_llp(ds, 30, 4, NoiseSpec::fraction(0.0), SplitRng(48));
  EXPECT_LE(grad_llp_loss(llp.data, model).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(GradLlpLoss, MlpMatchesFiniteDifferences) {
  const Dataset ds = synth_dataset(60, 8, 0.3, 2.0, 1.0, 49);
  const LlpResult llp =
      noisy_wtd_llp(ds, 5, 6, NoiseSpec::fraction(0.5), SplitRng(50));
  MlpModel model = make_mlp(8, {4, 1}, SplitRng(51));

  const Eigen::VectorXd analytic = grad_llp_loss(llp.data, model);
  const Eigen::VectorXd at = model.params();
  MlpModel probe = model;
  const auto loss_at = [&](const Eigen::VectorXd& params) {
    probe.set_params(params);
    return llp_loss(llp.data, probe);
  };
  const Eigen::VectorXd numeric =
      agglab_test::finite_difference_gradient(loss_at, at, 1e-5);
  for (Index i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
    ASSERT_LE(std::abs(analytic[i] - numeric[i]) / scale, 1e-4)
        << "component " << i;
  }
}

TEST(FitMlpLlp, LearnsRealizableTarget) {
  const Dataset ds = synth_dataset(2000, 4, 0.0, 3.0, 1.0, 52);
  const LlpResult llp =
      noisy_wtd_llp(ds, 200, 4, NoiseSpec::fraction(0.0), SplitRng(53));
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.initial_lr = 1e-2;
  cfg.batch_bags = 32;
  cfg.seed = 54;
  const MlpModel model = fit_mlp_llp(llp.data, {8, 1}, cfg);
  EXPECT_LE(mse(ds, model), 1e-3);
}

TEST(FitMlpLlp, DeterministicGivenSeed) {
  const Dataset ds = synth_dataset(500, 4, 0.2, 2.0, 1.0, 55);
  const LlpResult llp =
      noisy_wtd_llp(ds, 40, 5, NoiseSpec::fraction(0.2), SplitRng(56));
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 57;
  const MlpModel a = fit_mlp_llp(llp.data, {6, 1}, cfg);
  const MlpModel b = fit_mlp_llp(llp.data, {6, 1}, cfg);
  EXPECT_EQ(a.params(), b.params());
}

TEST(FitMlpLlp, ReturnsBestHoldoutSnapshot) {
  const Dataset ds = synth_dataset(500, 4, 0.3, 2.0, 1.0, 58);
  const LlpResult llp =
      noisy_wtd_llp(ds, 50, 5, NoiseSpec::fraction(0.5), SplitRng(59));
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.initial_lr = 5e-2;  // deliberately jumpy so the holdout curve wiggles
  cfg.seed = 60;
  std::vector<double> history;
  const MlpModel model = fit_mlp_llp(llp.data, {6, 1}, cfg, {}, &history);
  ASSERT_FALSE(history.empty());

  // Recompute the holdout loss of the returned model; it must equal the best
  // epoch the trainer observed.
  const Index m = llp.data.bag_count();
  const Index holdout = std::max<Index>(1, m / 10);
  std::vector<Index> holdout_ids;
  for (Index j = m - holdout; j < m; ++j) holdout_ids.push_back(j);
  double best = history[0];
  for (const double h : history) best = std::min(best, h);
  const double returned =
      internal::llp_loss_subset(llp.data, model, holdout_ids, nullptr);
  EXPECT_NEAR(returned, best, 1e-9 * std::max(1.0, best));
}

TEST(FitMlpLlp, FrobeniusProjectionHoldsAndIsIdempotent) {
  MlpModel model = make_mlp(4, {8, 1}, SplitRng(61));
  for (auto& w : model.weights) w *= 10.0;
  project_frobenius(&model, 2.0);
  for (const auto& w : model.weights) EXPECT_LE(w.norm(), 2.0 + 1e-12);
  MlpModel again = model;
  project_frobenius(&again, 2.0);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    EXPECT_EQ(model.weights[l], again.weights[l]);
  }

  const Dataset ds = synth_dataset(400, 4, 0.2, 2.0, 1.0, 62);
  const LlpResult llp =
      noisy_wtd_llp(ds, 30, 5, NoiseSpec::fraction(0.2), SplitRng(63));
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.seed = 64;
  const MlpModel capped = fit_mlp_llp(llp.data, {6, 1}, cfg, 1.5);
  for (const auto& w : capped.weights) EXPECT_LE(w.norm(), 1.5 + 1e-12);
}

TEST(Mse, PerfectAndZeroModels) {
  const Dataset ds = synth_dataset(200, 3, 0.0, 2.0, 1.0, 65);
  const LinearModel perfect{compute_stats(ds).best_linear, 10.0};
  EXPECT_LE(mse(ds, perfect), 1e-14);
  const LinearModel zero{Eigen::VectorXd::Zero(3), 1.0};
  EXPECT_NEAR(mse(ds, zero), ds.labels.squaredNorm() / ds.n(), 1e-12);
  LinearModel wrong_dim{Eigen::VectorXd::Zero(5), 1.0};
  EXPECT_THROW(mse(ds, wrong_dim), std::invalid_argument);
}

TEST(NnBounds, ClosedFormValues) {
  EXPECT_NEAR(nn_output_bound(1.0, 2), std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(nn_output_bound(2.0, 1), 2.0 * std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(nn_lipschitz_bound(2.0, 2), std::sqrt(2.0 * 21.0), 1e-12);
  EXPECT_NEAR(nn_lipschitz_bound(1.0, 2), std::sqrt(6.0), 1e-12);
  EXPECT_NEAR(nn_lipschitz_bound(0.5, 3), 3.0, 1e-12);
}

TEST(NnBounds, EmpiricalOutputAndLipschitz) {
  const double cap = 2.0;
  const int depth = 2;
  const double out_bound = nn_output_bound(cap, depth);
  const double lip_bound = nn_lipschitz_bound(cap, depth);
  SplitRng root(66);
  for (int net = 0; net < 100; ++net) {
    SplitRng rng = root.child(static_cast<std::uint64_t>(net));
    MlpModel a = make_mlp(3, {4, 1}, rng.child(0), cap);
    MlpModel b = make_mlp(3, {4, 1}, rng.child(1), cap);
    const Eigen::VectorXd sa = a.params(), sb = b.params();
    const double param_dist = (sa - sb).norm();
    SplitRng input_rng = rng.child(2);
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::RowVectorXd x(3);
      for (int j = 0; j < 3; ++j) x[j] = input_rng.next_gaussian();
      if (x.norm() > 0.0) x *= cap * input_rng.next_unit() / x.norm();
      const double fa = a.predict(x);
      ASSERT_LE(std::abs(fa), out_bound + 1e-9);
      ASSERT_LE(std::abs(fa - b.predict(x)), lip_bound * param_dist + 1e-9);
    }
  }
}

TEST(MlpIo, RoundTripsExactly) {
  MlpModel model = make_mlp(5, {7, 3, 1}, SplitRng(67), 2.5);
  const std::string path =
      (std::filesystem::temp_directory_path() / "agglab_model.txt").string();
  save_mlp(model, path);
  const MlpModel loaded = load_mlp(path);
  ASSERT_EQ(loaded.depth(), model.depth());
  for (int l = 0; l < model.depth(); ++l) {
    EXPECT_EQ(model.weights[static_cast<std::size_t>(l)],
              loaded.weights[static_cast<std::size_t>(l)]);
  }
  ASSERT_TRUE(loaded.frob_cap.has_value());
  EXPECT_EQ(*loaded.frob_cap, 2.5);
  std::remove(path.c_str());
}

TEST(LinearIo, FitOnInstanceViewMatchesDirectFit) {
  const Dataset ds = synth_dataset(300, 4, 0.25, 2.0, 1.0, 68);
  const LlpDataset view = llp_from_instances(ds);
  LinearModel direct = fit_linear(ds.features, ds.labels, 3.0);
  // The instance view contains the same rows with unit weights, so the
  // bag objective equals the instance objective.
  EXPECT_NEAR(llp_loss(view, direct),
              (ds.labels - ds.features * direct.coef).squaredNorm(), 1e-10);
}

}  // namespace
}  // namespace agglab
