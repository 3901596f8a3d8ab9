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

#ifndef AGGLAB_LINEAR_MODEL_HPP_
#define AGGLAB_LINEAR_MODEL_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "agglab/dataset.hpp"
#include "agglab/mechanisms.hpp"

namespace agglab {

// Homogeneous linear regressor with an ℓ2 cap on its coefficient vector.
struct LinearModel {
  Eigen::VectorXd coef;
  double norm_cap = 0.0;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return x * coef;
  }
};

// Least squares over the norm_cap ball.
//
// The unconstrained problem is solved by normal equations with a tiny ridge
// (1e-10 * trace) for conditioning; when that solution violates the cap,
// projected gradient descent polishes from the rescaled solution until the
// relative loss change drops below 1e-10 (or 1e4 steps).
inline LinearModel fit_linear(const Eigen::MatrixXd& features,
                              const Eigen::VectorXd& targets, double norm_cap) {
  if (features.rows() < 1) throw std::invalid_argument("fit_linear: empty data");
  if (features.rows() != targets.size()) {
    throw std::invalid_argument("fit_linear: shape mismatch");
  }
  if (norm_cap < 0.0) throw std::invalid_argument("fit_linear: negative cap");

  const Index d = features.cols();
  LinearModel model;
  model.norm_cap = norm_cap;
  if (norm_cap == 0.0) {
    model.coef = Eigen::VectorXd::Zero(d);
    return model;
  }

  const Eigen::MatrixXd gram = features.transpose() * features;
  const Eigen::VectorXd rhs = features.transpose() * targets;
  const double trace = gram.trace();
  if (!(trace > 0.0)) {
    model.coef = Eigen::VectorXd::Zero(d);
    return model;
  }
  Eigen::MatrixXd regularized = gram;
  regularized.diagonal().array() += 1e-10 * trace;
  Eigen::VectorXd solution = regularized.ldlt().solve(rhs);

  if (solution.norm() <= norm_cap) {
    model.coef = solution;
    return model;
  }

  // Projected gradient descent on the cap ball, step 1/L with
  // L = 2 * lambda_max(gram).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double lipschitz = 2.0 * eig.eigenvalues().maxCoeff();
  const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

  Eigen::VectorXd coef = solution * (norm_cap / solution.norm());
  double loss = (targets - features * coef).squaredNorm();
  for (int iter = 0; iter < 10000; ++iter) {
    const Eigen::VectorXd grad = 2.0 * (gram * coef - rhs);
    coef -= step * grad;
    const double norm = coef.norm();
    if (norm > norm_cap) coef *= norm_cap / norm;
    const double next_loss = (targets - features * coef).squaredNorm();
    if (std::abs(loss - next_loss) <= 1e-10 * std::max(loss, 1e-300)) {
      loss = next_loss;
      break;
    }
    loss = next_loss;
  }
  model.coef = coef;
  return model;
}

inline LinearModel fit_linear_lba(const LbaDataset& lba, double norm_cap) {
  if (lba.plan.m < 1) throw std::invalid_argument("fit_linear_lba: empty input");
  return fit_linear(lba.agg_features, lba.agg_labels, norm_cap);
}

inline double mse(const Dataset& ds, const LinearModel& model) {
  if (model.coef.size() != ds.d()) {
    throw std::invalid_argument("mse: dimension mismatch");
  }
  return (ds.labels - ds.features * model.coef).squaredNorm() /
         static_cast<double>(ds.n());
}

// Bag-level squared loss: sum over bags of
// (aggregate label - weighted sum of member predictions)^2. Accumulation is
// bag-major and member-ascending so results are reproducible.
inline double llp_loss(const LlpDataset& llp, const LinearModel& model) {
  if (model.coef.size() != llp.member_features.cols()) {
    throw std::invalid_argument("llp_loss: dimension mismatch");
  }
  const Index m = llp.bag_count();
  const Index k = llp.bag_size();
  const Eigen::VectorXd preds = llp.member_features * model.coef;
  double loss = 0.0;
  for (Index j = 0; j < m; ++j) {
    double agg = 0.0;
    for (Index r = 0; r < k; ++r) {
      agg += llp.plan.weights(j, r) * preds[j * k + r];
    }
    const double e = llp.agg_labels[j] - agg;
    loss += e * e;
  }
  return loss;
}

// Gradient of llp_loss with respect to the coefficient vector.
inline Eigen::VectorXd grad_llp_loss(const LlpDataset& llp,
                                     const LinearModel& model) {
  if (model.coef.size() != llp.member_features.cols()) {
    throw std::invalid_argument("grad_llp_loss: dimension mismatch");
  }
  const Index m = llp.bag_count();
  const Index k = llp.bag_size();
  const Eigen::VectorXd preds = llp.member_features * model.coef;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.coef.size());
  for (Index j = 0; j < m; ++j) {
    double agg = 0.0;
    for (Index r = 0; r < k; ++r) {
      agg += llp.plan.weights(j, r) * preds[j * k + r];
    }
    const double e = llp.agg_labels[j] - agg;
    for (Index r = 0; r < k; ++r) {
      grad -= 2.0 * e * llp.plan.weights(j, r) *
              llp.member_features.row(j * k + r).transpose();
    }
  }
  return grad;
}

}  // namespace agglab

#endif  // AGGLAB_LINEAR_MODEL_HPP_
