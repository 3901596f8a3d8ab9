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

#ifndef AGGLAB_AUDIT_HPP_
#define AGGLAB_AUDIT_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agglab/csv_io.hpp"
#include "agglab/dataset.hpp"
#include "agglab/mechanisms.hpp"
#include "agglab/rng.hpp"

namespace agglab {

// ---------------------------------------------------------------------------
// Gaussian tail helpers. Everything downstream needs tails that stay accurate
// (in log space) far beyond where erfc underflows.
// ---------------------------------------------------------------------------

namespace gauss {

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double norm_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// log of the upper tail; asymptotic expansion once erfc loses precision.
inline double log_norm_sf(double z) {
  if (z < 37.0) return std::log(norm_sf(z));
  const double z2 = z * z;
  return -0.5 * z2 - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2));
}

inline double log_norm_cdf(double z) { return log_norm_sf(-z); }

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log(e^a - e^b) for a >= b; -inf when the difference vanishes.
inline double log_diff_exp(double a, double b) {
  if (b >= a) return -std::numeric_limits<double>::infinity();
  return a + std::log1p(-std::exp(b - a));
}

}  // namespace gauss

namespace internal {

struct Region {
  enum Kind { kEmpty, kInterval, kTails, kAll };
  Kind kind = kEmpty;
  double lo = 0.0;
  double hi = 0.0;
};

inline double prob_interval(double mean, double sd, double lo, double hi) {
  const double zl = (lo - mean) / sd;
  const double zh = (hi - mean) / sd;
  double p;
  if (zl + zh >= 0.0) {
    p = gauss::norm_sf(zl) - gauss::norm_sf(zh);
  } else {
    p = gauss::norm_cdf(zh) - gauss::norm_cdf(zl);
  }
  return std::clamp(p, 0.0, 1.0);
}

inline double prob_region(double mean, double sd, const Region& region) {
  switch (region.kind) {
    case Region::kEmpty:
      return 0.0;
    case Region::kAll:
      return 1.0;
    case Region::kInterval:
      return prob_interval(mean, sd, region.lo, region.hi);
    case Region::kTails:
      return std::clamp(gauss::norm_cdf((region.lo - mean) / sd) +
                            gauss::norm_sf((region.hi - mean) / sd),
                        0.0, 1.0);
  }
  return 0.0;
}

inline double log_prob_region(double mean, double sd, const Region& region) {
  switch (region.kind) {
    case Region::kEmpty:
      return -std::numeric_limits<double>::infinity();
    case Region::kAll:
      return 0.0;
    case Region::kInterval: {
      const double zl = (region.lo - mean) / sd;
      const double zh = (region.hi - mean) / sd;
      if (zl + zh >= 0.0) {
        return gauss::log_diff_exp(gauss::log_norm_sf(zl), gauss::log_norm_sf(zh));
      }
      return gauss::log_diff_exp(gauss::log_norm_cdf(zh), gauss::log_norm_cdf(zl));
    }
    case Region::kTails:
      return gauss::log_sum_exp(gauss::log_norm_cdf((region.lo - mean) / sd),
                                gauss::log_norm_sf((region.hi - mean) / sd));
  }
  return -std::numeric_limits<double>::infinity();
}

// exp(eps) * p0, evaluated in log space when exp(eps) would overflow.
inline double scaled_reference_mass(double eps, double p0_plain, double log_p0) {
  if (eps <= 600.0) return std::exp(eps) * p0_plain;
  const double log_term = eps + log_p0;
  if (log_term > 700.0) return std::numeric_limits<double>::infinity();
  return std::exp(log_term);
}

}  // namespace internal

// Exact hockey-stick divergence sup_S [ Pr_{N(mu1,sigma1^2)}(S)
// - e^eps * Pr_{N(mu0,sigma0^2)}(S) ] between two Gaussians, i.e. the
// smallest delta at privacy level eps in the ordered direction D1 vs D0.
//
// Degenerate scales follow the sup definition: two point masses give 0 or 1
// depending on whether the means coincide; a point mass against a continuous
// distribution gives 1 in either order.
inline double hockey_stick_gauss(double mu0, double sigma0, double mu1,
                                 double sigma1, double eps) {
  if (!std::isfinite(mu0) || !std::isfinite(mu1) || !std::isfinite(sigma0) ||
      !std::isfinite(sigma1)) {
    throw std::invalid_argument("hockey_stick_gauss: non-finite input");
  }
  if (sigma0 < 0.0 || sigma1 < 0.0 || eps < 0.0) {
    throw std::invalid_argument("hockey_stick_gauss: sigma and eps must be >= 0");
  }

  if (sigma0 == 0.0 && sigma1 == 0.0) {
    const double tol = 1e-12 * std::max({1.0, std::abs(mu0), std::abs(mu1)});
    return std::abs(mu1 - mu0) > tol ? 1.0 : 0.0;
  }
  if (sigma0 == 0.0 || sigma1 == 0.0) return 1.0;

  const double shift = std::abs(mu1 - mu0);

  // Equal scales: the likelihood-ratio boundary is a half-line.
  if (std::abs(sigma1 - sigma0) <= 1e-14 * sigma0) {
    if (shift == 0.0) return 0.0;
    const double sd = sigma0;
    const double ratio = shift / sd;
    const double p1 = gauss::norm_cdf(0.5 * ratio - eps / ratio);
    const double z0 = -0.5 * ratio - eps / ratio;
    const double sub = internal::scaled_reference_mass(
        eps, gauss::norm_cdf(z0), gauss::log_norm_cdf(z0));
    return std::clamp(p1 - sub, 0.0, 1.0);
  }

  // General case: log p1(x) - log p0(x) = a x^2 + b x + c is quadratic; the
  // favored set {ratio > eps} is an interval (sigma1 < sigma0) or the
  // complement of one (sigma1 > sigma0).
  const double inv0 = 1.0 / (sigma0 * sigma0);
  const double inv1 = 1.0 / (sigma1 * sigma1);
  const double a = 0.5 * (inv0 - inv1);
  const double b = mu1 * inv1 - mu0 * inv0;
  const double c =
      0.5 * (mu0 * mu0 * inv0 - mu1 * mu1 * inv1) + std::log(sigma0 / sigma1) - eps;

  internal::Region region;
  const double disc = b * b - 4.0 * a * c;
  if (disc <= 0.0) {
    region.kind = a > 0.0 ? internal::Region::kAll : internal::Region::kEmpty;
  } else {
    double r1, r2;
    if (b != 0.0) {
      const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
      r1 = q / a;
      r2 = c / q;
    } else {
      r1 = std::sqrt(-c / a);
      r2 = -r1;
    }
    region.lo = std::min(r1, r2);
    region.hi = std::max(r1, r2);
    region.kind =
        a < 0.0 ? internal::Region::kInterval : internal::Region::kTails;
  }

  const double p1 = internal::prob_region(mu1, sigma1, region);
  const double sub = internal::scaled_reference_mass(
      eps, internal::prob_region(mu0, sigma0, region),
      internal::log_prob_region(mu0, sigma0, region));
  return std::clamp(p1 - sub, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Conditional law of the aggregate label given the aggregate feature row.
// ---------------------------------------------------------------------------

// SVD cutoff below which a singular value counts as zero.
inline constexpr double kSvdRankCutoff = 1e-10;

// Factorization of one bag: given the bag's feature matrix X (k x d) and
// label vector y, the law of w.y conditioned on w.X = z (w standard normal)
// is Gaussian. Its variance is the bag's least-squares residual, and its
// mean is a fixed linear functional of z.
struct BagConditional {
  Eigen::MatrixXd svd_u;            // k x r, left singular vectors (thin)
  Eigen::MatrixXd svd_v;            // d x r, right singular vectors (thin)
  Eigen::VectorXd singular_values;  // r
  Index rank = 0;                   // numerical rank under kSvdRankCutoff
  Eigen::VectorXd projected_labels;  // first `rank` coords of U^T y
  Eigen::VectorXd mean_coeffs;       // projected_labels[i] / singular_values[i]
  double variance = 0.0;             // squared residual of y off colspace(X)

  // Conditional mean for a released feature aggregate z (a length-d row).
  double conditional_mean(const Eigen::RowVectorXd& z) const {
    if (rank == 0) return 0.0;
    const Eigen::RowVectorXd zt = z * svd_v.leftCols(rank);
    double mean = 0.0;
    for (Index i = 0; i < rank; ++i) {
      mean += zt[i] / singular_values[i] * projected_labels[i];
    }
    return mean;
  }
};

namespace internal {

inline BagConditional conditional_from_svd(const Eigen::MatrixXd& svd_u,
                                           const Eigen::MatrixXd& svd_v,
                                           const Eigen::VectorXd& singulars,
                                           Index rank,
                                           const Eigen::VectorXd& labels) {
  BagConditional bc;
  bc.svd_u = svd_u;
  bc.svd_v = svd_v;
  bc.singular_values = singulars;
  bc.rank = rank;
  bc.projected_labels = svd_u.leftCols(rank).transpose() * labels;
  bc.mean_coeffs.resize(rank);
  for (Index i = 0; i < rank; ++i) {
    bc.mean_coeffs[i] = bc.projected_labels[i] / singulars[i];
  }
  // Residual computed as the norm of an explicit residual vector; avoids the
  // cancellation of ||y||^2 - ||proj||^2 near the column space.
  const Eigen::VectorXd residual =
      labels - svd_u.leftCols(rank) * bc.projected_labels;
  double variance = residual.squaredNorm();
  const double scale = labels.norm();
  if (variance <= (1e-9 * scale) * (1e-9 * scale)) variance = 0.0;
  bc.variance = variance;
  return bc;
}

}  // namespace internal

inline BagConditional bag_conditional(const Eigen::MatrixXd& bag_features,
                                      const Eigen::VectorXd& bag_labels) {
  if (!bag_features.allFinite() || !bag_labels.allFinite()) {
    throw std::invalid_argument("bag_conditional: non-finite input");
  }
  if (bag_features.rows() != bag_labels.size()) {
    throw std::invalid_argument("bag_conditional: shape mismatch");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      bag_features, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd singulars = svd.singularValues();
  Index rank = 0;
  if (singulars.size() > 0) {
    const double cutoff = kSvdRankCutoff * singulars[0];
    for (Index i = 0; i < singulars.size(); ++i) {
      if (singulars[i] > cutoff && singulars[i] > 0.0) ++rank;
    }
  }
  return internal::conditional_from_svd(svd.matrixU(), svd.matrixV(), singulars,
                                        rank, bag_labels);
}

// Conditional law for a different label vector over the same bag features,
// reusing the factorization.
inline BagConditional bag_conditional_with_basis(const BagConditional& basis,
                                                 const Eigen::VectorXd& labels) {
  return internal::conditional_from_svd(basis.svd_u, basis.svd_v,
                                        basis.singular_values, basis.rank,
                                        labels);
}

// ---------------------------------------------------------------------------
// Deviation bound between perturbed Gaussians (analytic reference).
// ---------------------------------------------------------------------------

// Outcome of instantiating the perturbed-Gaussian deviation bound: at privacy
// level `eps`, the divergence of the pair is at most `delta`.
struct DeviationBound {
  bool applicable = false;
  double eps = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double zeta = std::numeric_limits<double>::quiet_NaN();
  std::string reason;
};

// (eps, delta) pair for given bound parameters; valid whenever the pair of
// distributions satisfies the kappa/zeta hypotheses.
inline std::pair<double, double> deviation_bound_pair(double kappa, double zeta,
                                                      double theta) {
  const double sk = std::sqrt(kappa);
  const double eps = 16.0 * (sk / zeta + theta / zeta + kappa);
  const double delta = std::exp(-theta * theta / (4.0 * kappa));
  return {eps, delta};
}

// Checks the hypotheses for the ordered pair (D0, D1) and evaluates the
// bound at parameter theta. kappa is taken as max(2*((sigma1/sigma0)^2 - 1),
// 1e-12) and zeta as sqrt(kappa)*sigma0/|mu1-mu0| (infinite for equal
// means), which makes sqrt(kappa)/zeta the normalized mean shift.
inline DeviationBound gaussian_deviation_bound(double mu0, double sigma0,
                                               double mu1, double sigma1,
                                               double theta) {
  DeviationBound out;
  if (!(theta > 0.0 && theta < 1.0)) {
    out.reason = "theta outside (0,1)";
    return out;
  }
  if (!(sigma0 > 0.0) || !(sigma1 > 0.0)) {
    out.reason = "degenerate scale";
    return out;
  }
  const double ratio_sq = (sigma1 / sigma0) * (sigma1 / sigma0);
  const double kappa = std::max(2.0 * (ratio_sq - 1.0), 1e-12);
  if (ratio_sq < 0.5 || ratio_sq > 1.0 + kappa || kappa > 1.0) {
    out.kappa = kappa;
    out.reason = "variance ratio outside hypothesis range";
    return out;
  }
  const double shift = std::abs(mu1 - mu0);
  const double zeta = shift > 0.0
                          ? std::sqrt(kappa) * sigma0 / shift
                          : std::numeric_limits<double>::infinity();
  if (shift / sigma0 >= 1.0) {
    out.kappa = kappa;
    out.zeta = zeta;
    out.reason = "mean shift too large";
    return out;
  }
  const auto [eps, delta] = deviation_bound_pair(kappa, zeta, theta);
  out.applicable = true;
  out.eps = eps;
  out.delta = delta;
  out.kappa = kappa;
  out.zeta = zeta;
  return out;
}

// Tightest delta the deviation bound certifies at privacy level `eps` for
// the ordered pair, by choosing theta; NaN when the hypotheses fail or no
// admissible theta reaches `eps`.
inline double gaussian_deviation_ref(double mu0, double sigma0, double mu1,
                                     double sigma1, double eps) {
  constexpr double kThetaMax = 1.0 - 1e-9;
  if (!(sigma0 > 0.0) || !(sigma1 > 0.0)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double ratio_sq = (sigma1 / sigma0) * (sigma1 / sigma0);
  const double kappa = std::max(2.0 * (ratio_sq - 1.0), 1e-12);
  if (ratio_sq < 0.5 || ratio_sq > 1.0 + kappa || kappa > 1.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double shift = std::abs(mu1 - mu0);
  if (shift / sigma0 >= 1.0) return std::numeric_limits<double>::quiet_NaN();
  double theta;
  if (shift > 0.0) {
    const double zeta = std::sqrt(kappa) * sigma0 / shift;
    // Invert eps = 16*(sqrt(kappa)/zeta + theta/zeta + kappa) for theta; any
    // smaller admissible theta certifies a smaller eps, which still bounds
    // delta at `eps` since the divergence is non-increasing in eps.
    theta = zeta * eps / 16.0 - std::sqrt(kappa) - zeta * kappa;
  } else {
    theta = eps >= 16.0 * kappa ? kThetaMax : 0.0;
  }
  theta = std::min(theta, kThetaMax);
  if (!(theta > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::exp(-theta * theta / (4.0 * kappa));
}

// ---------------------------------------------------------------------------
// Mechanism audits.
// ---------------------------------------------------------------------------

struct LabelPerturbation {
  Index index = 0;
  double new_label = 0.0;
};

// Default neighbor: flip the label at `index` to its negation, clamped to
// the label range (the largest admissible single-label move).
inline LabelPerturbation worst_case_perturbation(const Dataset& ds, Index index) {
  LabelPerturbation p;
  p.index = index;
  p.new_label =
      std::clamp(-ds.labels[index], -ds.label_bound, ds.label_bound);
  return p;
}

// Same, at the row whose label has the largest magnitude.
inline LabelPerturbation worst_case_perturbation(const Dataset& ds) {
  Index best = 0;
  for (Index i = 1; i < ds.n(); ++i) {
    if (std::abs(ds.labels[i]) > std::abs(ds.labels[best])) best = i;
  }
  return worst_case_perturbation(ds, best);
}

struct PrivacyCurvePoint {
  double eps = 0.0;
  double delta = 0.0;          // Monte Carlo estimate, max over both directions
  double std_err = 0.0;        // MC standard error of the reported direction
  double analytic_ref =
      std::numeric_limits<double>::quiet_NaN();  // mean deviation-bound delta
  double applicable_fraction = 0.0;  // share of conditionings the bound covers
};

struct PrivacyCurve {
  std::vector<PrivacyCurvePoint> points;
  std::string mechanism;
  Index n = 0;
  Index m = 0;
  Index k = 0;
  double rho = 0.0;
  Index perturbed_index = -1;
  double perturbed_label = 0.0;
  Index n_cond = 0;
  std::uint64_t seed = 0;
  bool zero_variance_seen = false;  // some conditioning was a point mass
};

namespace internal {

// Accumulates per-epsilon statistics over conditionings for both neighbor
// directions, then reports the worse direction per point.
struct CurveAccumulator {
  explicit CurveAccumulator(std::size_t grid) {
    sum[0].assign(grid, 0.0);
    sum[1].assign(grid, 0.0);
    sum_sq[0].assign(grid, 0.0);
    sum_sq[1].assign(grid, 0.0);
    ref_sum.assign(grid, 0.0);
    ref_count.assign(grid, 0);
  }

  void add(std::size_t g, double delta_fwd, double delta_bwd) {
    sum[0][g] += delta_fwd;
    sum_sq[0][g] += delta_fwd * delta_fwd;
    sum[1][g] += delta_bwd;
    sum_sq[1][g] += delta_bwd * delta_bwd;
  }

  void add_ref(std::size_t g, double ref) {
    if (std::isnan(ref)) return;
    ref_sum[g] += ref;
    ref_count[g] += 1;
  }

  void finalize(const std::vector<double>& eps_grid, Index n_cond,
                PrivacyCurve* curve) const {
    const double n = static_cast<double>(n_cond);
    for (std::size_t g = 0; g < eps_grid.size(); ++g) {
      PrivacyCurvePoint point;
      point.eps = eps_grid[g];
      const int dir = sum[0][g] >= sum[1][g] ? 0 : 1;
      const double mean = sum[dir][g] / n;
      point.delta = mean;
      if (n_cond > 1) {
        const double var =
            std::max(0.0, (sum_sq[dir][g] - n * mean * mean) / (n - 1.0));
        point.std_err = std::sqrt(var / n);
      }
      if (ref_count[g] > 0) {
        point.analytic_ref = ref_sum[g] / static_cast<double>(ref_count[g]);
      }
      point.applicable_fraction = static_cast<double>(ref_count[g]) / n;
      curve->points.push_back(point);
    }
  }

  std::vector<double> sum[2], sum_sq[2];
  std::vector<double> ref_sum;
  std::vector<Index> ref_count;
};

}  // namespace internal

// Audits the aggregated-feature mechanism on a single bag containing the
// perturbed index (disjoint bags make the single-bag view sufficient). For
// each conditioning: a uniform k-subset through the index is
// rejection-sampled, the weight draw fixes the released feature aggregate,
// and the exact divergence between the two conditional label laws is
// evaluated on the epsilon grid. The reported delta is the conditioning
// average, maximized over neighbor direction.
inline PrivacyCurve audit_wtd_lba(const Dataset& ds, Index k,
                                  const LabelPerturbation& perturb,
                                  const std::vector<double>& eps_grid,
                                  Index n_cond, std::uint64_t seed) {
  const Index n = ds.n();
  if (k < 1 || k > n) throw std::invalid_argument("audit_wtd_lba: bad bag size");
  if (perturb.index < 0 || perturb.index >= n) {
    throw std::invalid_argument("audit_wtd_lba: perturbed index out of range");
  }
  if (std::abs(perturb.new_label) > ds.label_bound * (1.0 + 1e-12)) {
    throw std::invalid_argument("audit_wtd_lba: perturbed label exceeds bound");
  }
  if (n_cond < 1 || eps_grid.empty()) {
    throw std::invalid_argument("audit_wtd_lba: need conditionings and a grid");
  }

  PrivacyCurve curve;
  curve.mechanism = "wtd-lba";
  curve.n = n;
  curve.k = k;
  curve.rho = 0.0;
  curve.perturbed_index = perturb.index;
  curve.perturbed_label = perturb.new_label;
  curve.n_cond = n_cond;
  curve.seed = seed;

  internal::CurveAccumulator acc(eps_grid.size());
  SplitRng root(seed);

  Eigen::MatrixXd bag_features(k, ds.d());
  Eigen::VectorXd bag_labels(k), bag_labels_alt(k);
  for (Index c = 0; c < n_cond; ++c) {
    SplitRng sub = root.child(static_cast<std::uint64_t>(c));
    SplitRng bag_rng = sub.child(0);
    std::vector<Index> bag;
    for (;;) {
      bag = sample_subset_floyd(n, k, bag_rng);
      if (std::find(bag.begin(), bag.end(), perturb.index) != bag.end()) break;
    }

    Index hit = 0;
    for (Index r = 0; r < k; ++r) {
      bag_features.row(r) = ds.features.row(bag[static_cast<std::size_t>(r)]);
      bag_labels[r] = ds.labels[bag[static_cast<std::size_t>(r)]];
      if (bag[static_cast<std::size_t>(r)] == perturb.index) hit = r;
    }
    bag_labels_alt = bag_labels;
    bag_labels_alt[hit] = perturb.new_label;

    const BagConditional base = bag_conditional(bag_features, bag_labels);
    const BagConditional alt = bag_conditional_with_basis(base, bag_labels_alt);

    SplitRng weight_rng = sub.child(1);
    Eigen::VectorXd w(k);
    for (Index r = 0; r < k; ++r) w[r] = weight_rng.next_gaussian();
    const Eigen::RowVectorXd z = w.transpose() * bag_features;

    const double mu0 = base.conditional_mean(z);
    const double mu1 = alt.conditional_mean(z);
    const double s0 = std::sqrt(base.variance);
    const double s1 = std::sqrt(alt.variance);
    if (s0 == 0.0 || s1 == 0.0) curve.zero_variance_seen = true;

    for (std::size_t g = 0; g < eps_grid.size(); ++g) {
      const double eps = eps_grid[g];
      acc.add(g, hockey_stick_gauss(mu0, s0, mu1, s1, eps),
              hockey_stick_gauss(mu1, s1, mu0, s0, eps));
      acc.add_ref(g, gaussian_deviation_ref(mu0, s0, mu1, s1, eps));
    }
  }
  acc.finalize(eps_grid, n_cond, &curve);
  return curve;
}

// Audits the per-instance mechanism over full-plan conditionings: the
// perturbed index lands in a bag with probability mk/n; given its bag and
// weights the two conditional laws share their variance (the noise does not
// depend on the labels) and differ only by a mean shift, so the
// equal-variance closed form applies. Conditionings missing the index
// contribute zero.
inline PrivacyCurve audit_noisy_llp(const Dataset& ds, Index m, Index k,
                                    const NoiseSpec& noise,
                                    const LabelPerturbation& perturb,
                                    const std::vector<double>& eps_grid,
                                    Index n_cond, std::uint64_t seed) {
  const Index n = ds.n();
  if (m < 1 || k < 1 || m * k > n) {
    throw CapacityError("audit_noisy_llp: m*k exceeds n");
  }
  if (perturb.index < 0 || perturb.index >= n) {
    throw std::invalid_argument("audit_noisy_llp: perturbed index out of range");
  }
  if (std::abs(perturb.new_label) > ds.label_bound * (1.0 + 1e-12)) {
    throw std::invalid_argument("audit_noisy_llp: perturbed label exceeds bound");
  }
  if (n_cond < 1 || eps_grid.empty()) {
    throw std::invalid_argument("audit_noisy_llp: need conditionings and a grid");
  }

  PrivacyCurve curve;
  curve.mechanism = "noisy-wtd-llp";
  curve.n = n;
  curve.m = m;
  curve.k = k;
  curve.perturbed_index = perturb.index;
  curve.perturbed_label = perturb.new_label;
  curve.n_cond = n_cond;
  curve.seed = seed;

  std::vector<Index> fixed_noise;
  double fraction = 0.0;
  const bool fractional = std::holds_alternative<double>(noise.value);
  if (fractional) {
    fraction = std::get<double>(noise.value);
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
      throw std::invalid_argument("audit_noisy_llp: fraction outside [0,1]");
    }
  } else {
    fixed_noise = std::get<std::vector<Index>>(noise.value);
    std::sort(fixed_noise.begin(), fixed_noise.end());
    for (const Index i : fixed_noise) {
      if (i < 0 || i >= n) {
        throw std::invalid_argument("audit_noisy_llp: noise index out of range");
      }
    }
    fraction = static_cast<double>(fixed_noise.size()) / static_cast<double>(n);
  }
  curve.rho = fraction;

  const double label_shift = std::abs(perturb.new_label - ds.labels[perturb.index]);
  internal::CurveAccumulator acc(eps_grid.size());
  SplitRng root(seed);
  std::vector<char> noisy(static_cast<std::size_t>(n), 0);
  if (!fractional) {
    for (const Index i : fixed_noise) noisy[static_cast<std::size_t>(i)] = 1;
  }

  for (Index c = 0; c < n_cond; ++c) {
    SplitRng sub = root.child(static_cast<std::uint64_t>(c));
    if (fractional) {
      std::fill(noisy.begin(), noisy.end(), 0);
      const Index count = static_cast<Index>(
          std::ceil(fraction * static_cast<double>(n)));
      SplitRng perm_rng = sub.child(0);
      for (const Index i :
           sample_without_replacement(n, std::min(count, n), perm_rng)) {
        noisy[static_cast<std::size_t>(i)] = 1;
      }
    }

    const std::vector<Index> bags =
        sample_disjoint_bags(n, m, k, sub.child(1));
    Index position = -1;
    for (std::size_t i = 0; i < bags.size(); ++i) {
      if (bags[i] == perturb.index) {
        position = static_cast<Index>(i);
        break;
      }
    }
    if (position < 0) {
      for (std::size_t g = 0; g < eps_grid.size(); ++g) {
        acc.add(g, 0.0, 0.0);
        acc.add_ref(g, 0.0);  // identical laws; the bound holds with 0
      }
      continue;
    }

    const Index bag_idx = position / k;
    SplitRng weight_rng = sub.child(2).child(static_cast<std::uint64_t>(bag_idx));
    double noise_variance = 0.0;
    double perturbed_weight = 0.0;
    for (Index r = 0; r < k; ++r) {
      const double w = weight_rng.next_gaussian();
      const Index member = bags[static_cast<std::size_t>(bag_idx * k + r)];
      if (noisy[static_cast<std::size_t>(member)]) noise_variance += w * w;
      if (member == perturb.index) perturbed_weight = w;
    }
    const double sd = std::sqrt(noise_variance);
    const double shift = std::abs(perturbed_weight) * label_shift;
    if (sd == 0.0 && shift > 0.0) curve.zero_variance_seen = true;

    for (std::size_t g = 0; g < eps_grid.size(); ++g) {
      const double eps = eps_grid[g];
      const double delta =
          shift == 0.0 ? 0.0 : hockey_stick_gauss(0.0, sd, shift, sd, eps);
      acc.add(g, delta, delta);
      acc.add_ref(g, gaussian_deviation_ref(0.0, sd, shift, sd, eps));
    }
  }
  acc.finalize(eps_grid, n_cond, &curve);
  return curve;
}

// Privacy floor of the unit-weight mechanisms: any (eps, delta) guarantee
// needs delta >= mk/n, since a changed label is detected whenever its index
// is sampled.
inline double naive_lower_bound(Index n, Index m, Index k) {
  if (m < 1 || k < 1 || m * k > n) {
    throw CapacityError("naive_lower_bound: m*k exceeds n");
  }
  return static_cast<double>(m) * static_cast<double>(k) / static_cast<double>(n);
}

// Empirical frequency with which a fixed index lands in the sampled bags.
inline double naive_membership_frequency(Index n, Index m, Index k, Index runs,
                                         std::uint64_t seed) {
  SplitRng root(seed);
  Index hits = 0;
  for (Index t = 0; t < runs; ++t) {
    const std::vector<Index> bags =
        sample_disjoint_bags(n, m, k, root.child(static_cast<std::uint64_t>(t)));
    if (std::find(bags.begin(), bags.end(), Index{0}) != bags.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(runs);
}

// ---------------------------------------------------------------------------
// Serialization: CSV of points plus a JSON metadata sidecar.
// ---------------------------------------------------------------------------

inline void save_privacy_curve(const PrivacyCurve& curve,
                               const std::string& csv_path,
                               const std::string& json_path,
                               const std::string& header_comment = "") {
  std::ostringstream csv;
  if (!header_comment.empty()) csv << "# " << header_comment << "\n";
  csv << "eps,delta_hat,stderr,analytic_ref,applicable_flag\n";
  for (const auto& p : curve.points) {
    csv << format_double(p.eps) << "," << format_double(p.delta) << ","
        << format_double(p.std_err) << "," << format_double(p.analytic_ref)
        << "," << format_double(p.applicable_fraction) << "\n";
  }
  write_file_atomic(csv_path, csv.str());

  nlohmann::json meta;
  meta["mechanism"] = curve.mechanism;
  meta["n"] = curve.n;
  meta["m"] = curve.m;
  meta["k"] = curve.k;
  meta["rho"] = curve.rho;
  meta["perturbed_index"] = curve.perturbed_index;
  meta["perturbed_label"] = curve.perturbed_label;
  meta["n_cond"] = curve.n_cond;
  meta["seed"] = curve.seed;
  meta["zero_variance_seen"] = curve.zero_variance_seen;
  write_file_atomic(json_path, meta.dump(2) + "\n");
}

}  // namespace agglab

#endif  // AGGLAB_AUDIT_HPP_
