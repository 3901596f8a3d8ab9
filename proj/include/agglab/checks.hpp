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

#ifndef AGGLAB_CHECKS_HPP_
#define AGGLAB_CHECKS_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agglab/audit.hpp"
#include "agglab/csv_io.hpp"
#include "agglab/dataset.hpp"
#include "agglab/linear_model.hpp"
#include "agglab/mechanisms.hpp"
#include "agglab/mlp.hpp"
#include "agglab/rng.hpp"

namespace agglab {

// One statistical verification: an empirical frequency (or deviation)
// against a theoretical bound, with an explicit pass margin. Reproducible
// bit-for-bit from (name, parameters, seed).
struct CheckReport {
  std::string name;
  std::string params;
  Index trials = 0;
  double empirical = 0.0;
  double bound = 0.0;
  double margin = 0.0;
  bool pass = false;
  std::uint64_t seed = 0;
  std::string note;
};

namespace internal {

inline double binomial_margin(double frequency, Index trials) {
  const double n = static_cast<double>(trials);
  return 3.0 * std::sqrt(std::max(frequency * (1.0 - frequency), 0.0) / n);
}

inline std::string join_params(std::initializer_list<std::string> parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += " ";
    out += p;
  }
  return out;
}

}  // namespace internal

// Tail bound for the mean of draws without replacement from a non-negative
// population: Pr[|mean - mu| > t] <= exp(-2 n t^2 / a_max^2), each draw lying
// in [0, a_max].
inline CheckReport check_hoeffding_wor(const std::vector<double>& population,
                                       Index n_draw, double t, Index trials,
                                       std::uint64_t seed) {
  if (population.empty() || n_draw < 1 ||
      n_draw > static_cast<Index>(population.size())) {
    throw std::invalid_argument("check_hoeffding_wor: bad draw count");
  }
  double a_max = 0.0, total = 0.0;
  for (const double v : population) {
    if (v < 0.0) throw std::invalid_argument("check_hoeffding_wor: negative value");
    a_max = std::max(a_max, v);
    total += v;
  }
  const double mu = total / static_cast<double>(population.size());

  SplitRng root(seed);
  Index violations = 0;
  for (Index trial = 0; trial < trials; ++trial) {
    SplitRng rng = root.child(static_cast<std::uint64_t>(trial));
    const std::vector<Index> draw = sample_without_replacement(
        static_cast<Index>(population.size()), n_draw, rng);
    double sum = 0.0;
    for (const Index i : draw) sum += population[static_cast<std::size_t>(i)];
    if (std::abs(sum / static_cast<double>(n_draw) - mu) > t) ++violations;
  }

  CheckReport report;
  report.name = "hoeffding_wor";
  report.params = internal::join_params(
      {"pop=" + std::to_string(population.size()),
       "draw=" + std::to_string(n_draw), "t=" + format_double(t)});
  report.trials = trials;
  report.empirical = static_cast<double>(violations) / static_cast<double>(trials);
  report.bound =
      a_max > 0.0
          ? std::exp(-2.0 * static_cast<double>(n_draw) * t * t / (a_max * a_max))
          : 0.0;
  report.margin = internal::binomial_margin(report.empirical, trials);
  report.pass = report.empirical <= report.bound + report.margin;
  report.seed = seed;
  return report;
}

// Tail of a weighted sum of squared Gaussians S = sum (a_i X_i)^2 around its
// mean, with the quadratic-concentration shape
// 2 exp(-c0 min(t^2/||v||_2^2, t/||v||_inf)), v = (a_i^2). The absolute
// constant is configurable; 1/8 is the default used by the suite.
inline CheckReport check_hanson_wright(const std::vector<double>& coeffs,
                                       double t, Index trials,
                                       std::uint64_t seed, double c0 = 0.125) {
  double norm2_sq = 0.0, norm_inf = 0.0, mean = 0.0;
  for (const double a : coeffs) {
    const double v = a * a;
    norm2_sq += v * v;
    norm_inf = std::max(norm_inf, v);
    mean += v;
  }

  SplitRng root(seed);
  Index violations = 0;
  for (Index trial = 0; trial < trials; ++trial) {
    SplitRng rng = root.child(static_cast<std::uint64_t>(trial));
    double s = 0.0;
    for (const double a : coeffs) {
      const double x = a * rng.next_gaussian();
      s += x * x;
    }
    if (std::abs(s - mean) > t) ++violations;
  }

  CheckReport report;
  report.name = "hanson_wright";
  report.params = internal::join_params({"n=" + std::to_string(coeffs.size()),
                                         "t=" + format_double(t),
                                         "c0=" + format_double(c0)});
  report.trials = trials;
  report.empirical = static_cast<double>(violations) / static_cast<double>(trials);
  report.bound =
      norm_inf > 0.0
          ? 2.0 * std::exp(-c0 * std::min(t * t / norm2_sq, t / norm_inf))
          : 0.0;
  report.margin = internal::binomial_margin(report.empirical, trials);
  report.pass = report.empirical <= report.bound + report.margin;
  report.seed = seed;
  return report;
}

// Minimum eigenvalue of a random bag's feature scatter matrix (in the
// non-degenerate feature subspace) against its without-replacement Chernoff
// bound: Pr[lmin <= (1-delta) k lstar] <= d' (e^-delta/(1-delta)^(1-delta))^(k lstar / R)
// with R the squared feature norm bound.
inline CheckReport check_matrix_chernoff_bags(const Dataset& ds, Index k,
                                              double delta_frac, Index trials,
                                              std::uint64_t seed) {
  if (!(delta_frac > 0.0 && delta_frac < 1.0)) {
    throw std::invalid_argument("check_matrix_chernoff_bags: delta in (0,1)");
  }
  const DatasetStats stats = compute_stats(ds);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(stats.second_moment);
  const double cutoff = kEigenvalueCutoff * eig.eigenvalues().maxCoeff();
  std::vector<Index> keep;
  for (Index i = 0; i < eig.eigenvalues().size(); ++i) {
    if (eig.eigenvalues()[i] > cutoff) keep.push_back(i);
  }
  Eigen::MatrixXd basis(ds.d(), static_cast<Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    basis.col(static_cast<Index>(i)) = eig.eigenvectors().col(keep[i]);
  }
  const Index reduced_dim = basis.cols();
  const double lstar = stats.min_nonzero_eig;
  const double threshold = (1.0 - delta_frac) * static_cast<double>(k) * lstar;

  SplitRng root(seed);
  Index violations = 0;
  for (Index trial = 0; trial < trials; ++trial) {
    SplitRng rng = root.child(static_cast<std::uint64_t>(trial));
    const std::vector<Index> bag = sample_subset_floyd(ds.n(), k, rng);
    Eigen::MatrixXd rows(k, reduced_dim);
    for (Index r = 0; r < k; ++r) {
      rows.row(r) = ds.features.row(bag[static_cast<std::size_t>(r)]) * basis;
    }
    const Eigen::MatrixXd scatter = rows.transpose() * rows;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> bag_eig(scatter);
    if (bag_eig.eigenvalues().minCoeff() <= threshold) ++violations;
  }

  const double exponent =
      static_cast<double>(k) * lstar / (ds.feature_bound * ds.feature_bound);
  const double base =
      std::exp(-delta_frac) / std::pow(1.0 - delta_frac, 1.0 - delta_frac);

  CheckReport report;
  report.name = "matrix_chernoff_bags";
  report.params = internal::join_params(
      {"k=" + std::to_string(k), "delta=" + format_double(delta_frac),
       "lstar=" + format_double(lstar), "dim=" + std::to_string(reduced_dim)});
  report.trials = trials;
  report.empirical = static_cast<double>(violations) / static_cast<double>(trials);
  report.bound = static_cast<double>(reduced_dim) * std::pow(base, exponent);
  report.margin = internal::binomial_margin(report.empirical, trials);
  report.pass = report.empirical <= report.bound + report.margin;
  report.seed = seed;
  return report;
}

// Per-bag least-squares residual against the k*gamma/4 floor, compared at two
// bag sizes: the failure frequency must not grow with k and must be at most
// 5% at the larger size.
inline CheckReport check_bag_residual(const Dataset& ds, Index k_small,
                                      Index k_large, Index trials,
                                      std::uint64_t seed) {
  const DatasetStats stats = compute_stats(ds);
  const double gamma = stats.best_linear_mse;

  const auto frequency = [&](Index k, std::uint64_t sub_seed) {
    SplitRng root(sub_seed);
    Index below = 0;
    Eigen::MatrixXd rows(k, ds.d());
    Eigen::VectorXd labels(k);
    for (Index trial = 0; trial < trials; ++trial) {
      SplitRng rng = root.child(static_cast<std::uint64_t>(trial));
      const std::vector<Index> bag = sample_subset_floyd(ds.n(), k, rng);
      for (Index r = 0; r < k; ++r) {
        rows.row(r) = ds.features.row(bag[static_cast<std::size_t>(r)]);
        labels[r] = ds.labels[bag[static_cast<std::size_t>(r)]];
      }
      const double residual = bag_conditional(rows, labels).variance;
      if (residual < static_cast<double>(k) * gamma / 4.0) ++below;
    }
    return static_cast<double>(below) / static_cast<double>(trials);
  };

  const double freq_small = frequency(k_small, seed ^ 0x51u);
  const double freq_large = frequency(k_large, seed ^ 0x52u);

  CheckReport report;
  report.name = "bag_residual_floor";
  report.params = internal::join_params(
      {"k_small=" + std::to_string(k_small), "k_large=" + std::to_string(k_large),
       "gamma=" + format_double(gamma)});
  report.trials = trials;
  report.empirical = freq_large;
  report.bound = 0.05;
  report.margin = 0.0;
  report.pass = freq_large <= 0.05 && freq_large <= freq_small;
  report.seed = seed;
  std::ostringstream note;
  note << "freq(k=" << k_small << ")=" << format_double(freq_small)
       << " freq(k=" << k_large << ")=" << format_double(freq_large);
  if (gamma <= 0.0) note << " [hypothesis gamma>0 violated; floor is 0]";
  report.note = note.str();
  return report;
}

// Two-sided concentration of the aggregated loss of a fixed capped linear
// regressor around k*m*omega (omega = its mean instance loss), with failure
// probability 4 exp(-m theta^2 omega^2 / (2 B^4)), B = label_bound +
// feature_bound * norm_cap.
inline CheckReport check_lba_utility(const Dataset& ds, Index m, Index k,
                                     const LinearModel& model, double theta,
                                     Index trials, std::uint64_t seed) {
  if (!(theta > 0.0)) throw std::invalid_argument("check_lba_utility: theta > 0");
  const double omega =
      (ds.labels - ds.features * model.coef).squaredNorm() /
      static_cast<double>(ds.n());
  const double center =
      static_cast<double>(k) * static_cast<double>(m) * omega;
  const double lo = (1.0 - 2.0 * theta) * center;
  const double hi = (1.0 + 2.0 * theta) * center;

  SplitRng root(seed);
  Index violations = 0;
  for (Index trial = 0; trial < trials; ++trial) {
    const LbaDataset lba =
        wtd_lba(ds, m, k, root.child(static_cast<std::uint64_t>(trial)));
    const double loss =
        (lba.agg_labels - lba.agg_features * model.coef).squaredNorm();
    if (loss < lo || loss > hi) ++violations;
  }

  const double big_b = ds.label_bound + ds.feature_bound * model.norm_cap;
  const double bound =
      4.0 * std::exp(-static_cast<double>(m) * theta * theta * omega * omega /
                     (2.0 * std::pow(big_b, 4)));

  CheckReport report;
  report.name = "lba_loss_concentration";
  report.params = internal::join_params(
      {"m=" + std::to_string(m), "k=" + std::to_string(k),
       "theta=" + format_double(theta), "omega=" + format_double(omega),
       "B=" + format_double(big_b)});
  report.trials = trials;
  report.empirical = static_cast<double>(violations) / static_cast<double>(trials);
  report.bound = bound;
  report.margin = internal::binomial_margin(report.empirical, trials);
  report.pass = report.empirical <= report.bound + report.margin;
  report.seed = seed;
  return report;
}

// Normalized bag-level loss against its decomposition target
// rho + (instance loss)/n, compared at two bag counts. theta defaults to 10%
// of the target. The deviation frequency must not grow with m and must be at
// most 5% at the larger m.
template <typename Model>
CheckReport check_llp_decomposition(const Dataset& ds, Index m_small,
                                    Index m_large, Index k, double rho,
                                    const Model& model,
                                    std::optional<double> theta, Index trials,
                                    std::uint64_t seed) {
  const double instance_mse = mse(ds, model);
  const double target = rho + instance_mse;
  const double tol = theta ? *theta : 0.1 * target;

  const auto frequency = [&](Index m, std::uint64_t sub_seed) {
    SplitRng root(sub_seed);
    Index deviations = 0;
    for (Index trial = 0; trial < trials; ++trial) {
      const LlpResult result =
          noisy_wtd_llp(ds, m, k, NoiseSpec::fraction(rho),
                        root.child(static_cast<std::uint64_t>(trial)));
      const double normalized =
          llp_loss(result.data, model) /
          (static_cast<double>(m) * static_cast<double>(k));
      if (std::abs(normalized - target) > tol) ++deviations;
    }
    return static_cast<double>(deviations) / static_cast<double>(trials);
  };

  const double freq_small = frequency(m_small, seed ^ 0x61u);
  const double freq_large = frequency(m_large, seed ^ 0x62u);

  CheckReport report;
  report.name = "llp_decomposition";
  report.params = internal::join_params(
      {"m_small=" + std::to_string(m_small), "m_large=" + std::to_string(m_large),
       "k=" + std::to_string(k), "rho=" + format_double(rho),
       "target=" + format_double(target), "theta=" + format_double(tol)});
  report.trials = trials;
  report.empirical = freq_large;
  report.bound = 0.05;
  report.margin = 0.0;
  report.pass = freq_large <= 0.05 && freq_large <= freq_small;
  report.seed = seed;
  report.note = "freq(m_small)=" + format_double(freq_small) +
                " freq(m_large)=" + format_double(freq_large);
  return report;
}

// Exact divergence of admissible Gaussian pairs at the deviation bound's
// certified privacy level must never exceed the certified delta. Includes
// the variance-ratio boundary (kappa = 1) every hundredth trial.
inline CheckReport check_gaussian_deviation(Index trials, std::uint64_t seed) {
  SplitRng root(seed);
  Index violations = 0;
  Index evaluated = 0;
  for (Index trial = 0; trial < trials; ++trial) {
    SplitRng rng = root.child(static_cast<std::uint64_t>(trial));
    const double sigma0 = std::exp(rng.next_unit() - 0.5);
    const double mu0 = 2.0 * rng.next_unit() - 1.0;
    const double shift = 0.99 * sigma0 * rng.next_unit();
    const double mu1 = mu0 + (rng.next_unit() < 0.5 ? shift : -shift);
    const double theta = 0.01 + 0.98 * rng.next_unit();

    double eps, delta_bound, sigma1;
    if (trial % 100 == 99) {
      // Boundary instantiation: kappa = 1, variance ratio exactly 2.
      sigma1 = sigma0 * std::numbers::sqrt2;
      const double zeta = shift > 0.0 ? sigma0 / shift
                                      : std::numeric_limits<double>::infinity();
      std::tie(eps, delta_bound) = deviation_bound_pair(1.0, zeta, theta);
    } else {
      const double ratio_sq = rng.next_unit() < 0.5
                                  ? 1.0 + 0.49 * rng.next_unit()
                                  : 0.5 + 0.5 * rng.next_unit();
      sigma1 = sigma0 * std::sqrt(ratio_sq);
      const DeviationBound bound =
          gaussian_deviation_bound(mu0, sigma0, mu1, sigma1, theta);
      if (!bound.applicable) continue;  // generator guarantees admissibility
      eps = bound.eps;
      delta_bound = bound.delta;
    }
    ++evaluated;
    if (hockey_stick_gauss(mu0, sigma0, mu1, sigma1, eps) > delta_bound) {
      ++violations;
    }
  }

  CheckReport report;
  report.name = "gaussian_deviation_dominance";
  report.params = internal::join_params({"pairs=" + std::to_string(evaluated)});
  report.trials = trials;
  report.empirical = static_cast<double>(violations);
  report.bound = 0.0;
  report.margin = 0.0;
  report.pass = violations == 0 && evaluated == trials;
  report.seed = seed;
  return report;
}

// --- fixtures and suites ----------------------------------------------------

// Reference synthetic dataset used across the verification suite.
inline const Dataset& reference_dataset() {
  static const Dataset ds = synth_dataset(20000, 10, 0.5, 3.0, 1.0, 7);
  return ds;
}

// Larger variant whose size supports m*k = 50000 bag layouts.
inline const Dataset& wide_reference_dataset() {
  static const Dataset ds = synth_dataset(100000, 10, 0.5, 3.0, 1.0, 11);
  return ds;
}

// Rows cycle through the standard basis of R^d; the scatter of any bag is
// diagonal with entries counting basis occurrences.
inline Dataset basis_cycle_dataset(Index d, Index copies) {
  Dataset ds;
  ds.features = Eigen::MatrixXd::Zero(d * copies, d);
  ds.labels.resize(d * copies);
  for (Index i = 0; i < d * copies; ++i) {
    ds.features(i, i % d) = 1.0;
    ds.labels[i] = (i % 2 == 0) ? 0.5 : -0.5;
  }
  ds.label_bound = 1.0;
  ds.feature_bound = 1.0;
  return ds;
}

inline std::vector<CheckReport> run_check_suite(const std::string& suite,
                                                std::uint64_t seed) {
  std::vector<CheckReport> reports;
  SplitRng root(seed);

  const auto concentration = [&] {
    std::vector<double> population(1000);
    SplitRng pop_rng = root.child(100);
    for (auto& v : population) v = pop_rng.next_unit();
    reports.push_back(check_hoeffding_wor(population, 100, 0.1, 10000, seed ^ 1));

    reports.push_back(
        check_hanson_wright(std::vector<double>(100, 1.0), 50.0, 100000, seed ^ 2));
    std::vector<double> coeffs(50);
    SplitRng coeff_rng = root.child(101);
    for (auto& v : coeffs) v = 0.2 + coeff_rng.next_unit();
    reports.push_back(check_hanson_wright(coeffs, 40.0, 100000, seed ^ 3));

    reports.push_back(
        check_matrix_chernoff_bags(reference_dataset(), 200, 0.5, 10000, seed ^ 4));
    reports.push_back(
        check_matrix_chernoff_bags(basis_cycle_dataset(5, 40), 10, 0.5, 10000, seed ^ 5));

    reports.push_back(check_bag_residual(reference_dataset(), 50, 500, 2000, seed ^ 6));
  };

  const auto utility = [&] {
    const Dataset& ds = reference_dataset();
    const DatasetStats stats = compute_stats(ds);
    const double cap = std::max(1.0, 2.0 * stats.best_linear.norm());
    const LinearModel model = fit_linear(ds.features, ds.labels, cap);
    reports.push_back(check_lba_utility(ds, 2000, 10, model, 0.1, 200, seed ^ 7));

    const Dataset& wide = wide_reference_dataset();
    const MlpModel net = make_mlp(wide.d(), {8, 4, 1}, SplitRng(seed ^ 8));
    reports.push_back(check_llp_decomposition(wide, 500, 5000, 10, 0.5, net,
                                              std::nullopt, 100, seed ^ 9));
  };

  const auto divergence = [&] {
    reports.push_back(check_gaussian_deviation(10000, seed ^ 10));
  };

  if (suite == "concentration") {
    concentration();
  } else if (suite == "utility") {
    utility();
  } else if (suite == "divergence") {
    divergence();
  } else if (suite == "all") {
    concentration();
    utility();
    divergence();
  } else {
    throw std::invalid_argument("run_check_suite: unknown suite '" + suite + "'");
  }
  return reports;
}

inline void write_check_reports_csv(const std::vector<CheckReport>& reports,
                                    const std::string& path,
                                    const std::string& header_comment = "") {
  std::ostringstream out;
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "name,params,trials,empirical,bound,margin,verdict,seed,note\n";
  for (const auto& r : reports) {
    out << r.name << "," << r.params << "," << r.trials << ","
        << format_double(r.empirical) << "," << format_double(r.bound) << ","
        << format_double(r.margin) << "," << (r.pass ? "pass" : "fail") << ","
        << r.seed << "," << r.note << "\n";
  }
  write_file_atomic(path, out.str());
}

}  // namespace agglab

#endif  // AGGLAB_CHECKS_HPP_
