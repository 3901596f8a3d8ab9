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

#ifndef AGGLAB_MECHANISMS_HPP_
#define AGGLAB_MECHANISMS_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "agglab/csv_io.hpp"
#include "agglab/dataset.hpp"
#include "agglab/rng.hpp"

namespace agglab {

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The recorded randomness of one aggregation run: m disjoint k-sized bags of
// instance indices, the per-slot aggregation weights, and the index set that
// received additive label noise (empty for the label-bag-aggregate
// mechanism). Aggregated outputs are recomputable from a plan plus the
// source data, which is what the replay tests rely on.
struct BagPlan {
  Index n = 0;
  Index m = 0;
  Index k = 0;
  std::vector<Index> bags;    // flat, bag j occupies [j*k, (j+1)*k)
  Eigen::MatrixXd weights;    // m x k
  std::vector<Index> noise_set;  // sorted, duplicate-free
  double noise_fraction = 0.0;   // |noise_set| / n

  const Index* bag(Index j) const { return bags.data() + j * k; }

  void validate() const {
    if (m < 1 || k < 1 || m * k > n) {
      throw std::invalid_argument("BagPlan: bad shape");
    }
    if (static_cast<Index>(bags.size()) != m * k || weights.rows() != m ||
        weights.cols() != k) {
      throw std::invalid_argument("BagPlan: size mismatch");
    }
    std::vector<Index> sorted = bags;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i] < 0 || sorted[i] >= n) {
        throw std::invalid_argument("BagPlan: index out of range");
      }
      if (i > 0 && sorted[i] == sorted[i - 1]) {
        throw std::invalid_argument("BagPlan: bags are not disjoint");
      }
    }
    if (!weights.allFinite()) throw std::invalid_argument("BagPlan: non-finite weight");
    for (std::size_t i = 0; i < noise_set.size(); ++i) {
      if (noise_set[i] < 0 || noise_set[i] >= n) {
        throw std::invalid_argument("BagPlan: noise index out of range");
      }
      if (i > 0 && noise_set[i] <= noise_set[i - 1]) {
        throw std::invalid_argument("BagPlan: noise set not sorted/unique");
      }
    }
  }
};

// Output of the aggregated-feature mechanism: per bag, the weighted sum of
// feature rows and of labels.
struct LbaDataset {
  Eigen::MatrixXd agg_features;  // m x d
  Eigen::VectorXd agg_labels;    // m
  BagPlan plan;
};

// Output of the per-instance mechanism: member rows are revealed together
// with their weights; labels only through the per-bag weighted sums, which
// are computed from the noisy intermediate labels. Neither the raw labels
// nor the noise draws are part of this value.
struct LlpDataset {
  Eigen::MatrixXd member_features;  // (m*k) x d, bag-major, member-ascending
  Eigen::VectorXd agg_labels;       // m
  BagPlan plan;

  Index bag_count() const { return plan.m; }
  Index bag_size() const { return plan.k; }
};

// m disjoint k-sized bags as a uniformly random ordered sample of m*k
// distinct indices from [0, n), partitioned sequentially.
inline std::vector<Index> sample_disjoint_bags(Index n, Index m, Index k,
                                               SplitRng rng) {
  if (m < 1 || k < 1) throw std::invalid_argument("sample_disjoint_bags: m, k >= 1");
  if (m * k > n) {
    throw CapacityError("sample_disjoint_bags: m*k = " + std::to_string(m * k) +
                        " exceeds n = " + std::to_string(n));
  }
  return sample_without_replacement(n, m * k, rng);
}

namespace internal {

// Substream layout shared by all mechanisms so that, for a fixed seed, the
// noiseless per-instance run uses exactly the same bags and weights as the
// aggregated-feature run.
inline constexpr std::uint64_t kBagStream = 0;
inline constexpr std::uint64_t kWeightStream = 1;
inline constexpr std::uint64_t kLabelNoiseStream = 2;
inline constexpr std::uint64_t kNoiseSetStream = 3;

enum class WeightKind { kGaussian, kUnit };

inline BagPlan make_plan(Index n, Index m, Index k, WeightKind kind,
                         const SplitRng& rng) {
  BagPlan plan;
  plan.n = n;
  plan.m = m;
  plan.k = k;
  plan.bags = sample_disjoint_bags(n, m, k, rng.child(kBagStream));
  plan.weights.resize(m, k);
  const SplitRng weight_root = rng.child(kWeightStream);
  for (Index j = 0; j < m; ++j) {
    SplitRng bag_rng = weight_root.child(static_cast<std::uint64_t>(j));
    for (Index r = 0; r < k; ++r) {
      plan.weights(j, r) =
          kind == WeightKind::kGaussian ? bag_rng.next_gaussian() : 1.0;
    }
  }
  return plan;
}

inline LbaDataset aggregate_lba(const Dataset& ds, const BagPlan& plan) {
  LbaDataset out;
  out.plan = plan;
  out.agg_features = Eigen::MatrixXd::Zero(plan.m, ds.d());
  out.agg_labels = Eigen::VectorXd::Zero(plan.m);
  for (Index j = 0; j < plan.m; ++j) {
    const Index* bag = plan.bag(j);
    for (Index r = 0; r < plan.k; ++r) {
      const double w = plan.weights(j, r);
      out.agg_features.row(j) += w * ds.features.row(bag[r]);
      out.agg_labels[j] += w * ds.labels[bag[r]];
    }
  }
  return out;
}

}  // namespace internal

inline LbaDataset wtd_lba(const Dataset& ds, Index m, Index k, SplitRng rng) {
  const BagPlan plan =
      internal::make_plan(ds.n(), m, k, internal::WeightKind::kGaussian, rng);
  return internal::aggregate_lba(ds, plan);
}

// Unit-weight baseline; exists so the auditor can exhibit its privacy floor.
inline LbaDataset naive_lba(const Dataset& ds, Index m, Index k, SplitRng rng) {
  const BagPlan plan =
      internal::make_plan(ds.n(), m, k, internal::WeightKind::kUnit, rng);
  return internal::aggregate_lba(ds, plan);
}

// Noise-set selection: either an explicit index set or a fraction, realized
// as the first ceil(fraction*n) indices of a seeded permutation of [0, n).
struct NoiseSpec {
  static NoiseSpec fraction(double rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) {
      throw std::invalid_argument("NoiseSpec: fraction must lie in [0, 1]");
    }
    NoiseSpec s;
    s.value = rho;
    return s;
  }
  static NoiseSpec explicit_set(std::vector<Index> indices) {
    NoiseSpec s;
    s.value = std::move(indices);
    return s;
  }
  std::variant<double, std::vector<Index>> value;
};

struct LlpResult {
  LlpDataset data;
  // Intermediate noisy labels; populated only when the mechanism runs in
  // audit mode. Never serialized with the mechanism output.
  std::optional<Eigen::VectorXd> intermediate_labels;
};

inline LlpResult noisy_wtd_llp(const Dataset& ds, Index m, Index k,
                               const NoiseSpec& noise, SplitRng rng,
                               bool audit_mode = false) {
  const Index n = ds.n();
  BagPlan plan =
      internal::make_plan(n, m, k, internal::WeightKind::kGaussian, rng);
  if (m * k > n / 2) {
    std::cerr << "noisy_wtd_llp: warning: m*k = " << m * k << " exceeds n/2 = "
              << n / 2 << "; the mechanism expects bags to cover a small "
              << "fraction of the data\n";
  }

  if (std::holds_alternative<double>(noise.value)) {
    const double rho = std::get<double>(noise.value);
    const Index count = static_cast<Index>(
        std::ceil(rho * static_cast<double>(n)) + 0.0);
    SplitRng perm_rng = rng.child(internal::kNoiseSetStream);
    plan.noise_set =
        sample_without_replacement(n, std::min(count, n), perm_rng);
    std::sort(plan.noise_set.begin(), plan.noise_set.end());
  } else {
    plan.noise_set = std::get<std::vector<Index>>(noise.value);
    std::sort(plan.noise_set.begin(), plan.noise_set.end());
    plan.noise_set.erase(
        std::unique(plan.noise_set.begin(), plan.noise_set.end()),
        plan.noise_set.end());
    for (const Index i : plan.noise_set) {
      if (i < 0 || i >= n) {
        throw std::invalid_argument("noisy_wtd_llp: noise index out of range");
      }
    }
  }
  plan.noise_fraction =
      static_cast<double>(plan.noise_set.size()) / static_cast<double>(n);

  // Intermediate labels: additive unit-variance Gaussian noise on the noise
  // set. Each index draws from its own substream, so the result does not
  // depend on iteration order.
  Eigen::VectorXd intermediate = ds.labels;
  const SplitRng noise_root = rng.child(internal::kLabelNoiseStream);
  for (const Index i : plan.noise_set) {
    intermediate[i] +=
        noise_root.child(static_cast<std::uint64_t>(i)).next_gaussian();
  }

  LlpResult result;
  result.data.plan = plan;
  result.data.member_features.resize(m * k, ds.d());
  result.data.agg_labels = Eigen::VectorXd::Zero(m);
  for (Index j = 0; j < m; ++j) {
    const Index* bag = plan.bag(j);
    for (Index r = 0; r < k; ++r) {
      result.data.member_features.row(j * k + r) = ds.features.row(bag[r]);
      result.data.agg_labels[j] += plan.weights(j, r) * intermediate[bag[r]];
    }
  }
  if (audit_mode) result.intermediate_labels = std::move(intermediate);
  return result;
}

// Unit weights, no additive noise.
inline LlpResult naive_llp(const Dataset& ds, Index m, Index k, SplitRng rng,
                           bool audit_mode = false) {
  const Index n = ds.n();
  BagPlan plan = internal::make_plan(n, m, k, internal::WeightKind::kUnit, rng);
  LlpResult result;
  result.data.plan = plan;
  result.data.member_features.resize(m * k, ds.d());
  result.data.agg_labels = Eigen::VectorXd::Zero(m);
  for (Index j = 0; j < m; ++j) {
    const Index* bag = plan.bag(j);
    for (Index r = 0; r < k; ++r) {
      result.data.member_features.row(j * k + r) = ds.features.row(bag[r]);
      result.data.agg_labels[j] += ds.labels[bag[r]];
    }
  }
  if (audit_mode) result.intermediate_labels = ds.labels;
  return result;
}

// --- replay helpers ---------------------------------------------------------

// Recomputes aggregated features/labels from a plan and the source dataset.
inline LbaDataset replay_lba(const Dataset& ds, const BagPlan& plan) {
  return internal::aggregate_lba(ds, plan);
}

// Recomputes per-bag aggregate labels from a plan and intermediate labels.
inline Eigen::VectorXd replay_llp_labels(const BagPlan& plan,
                                         const Eigen::VectorXd& intermediate) {
  Eigen::VectorXd agg = Eigen::VectorXd::Zero(plan.m);
  for (Index j = 0; j < plan.m; ++j) {
    const Index* bag = plan.bag(j);
    for (Index r = 0; r < plan.k; ++r) {
      agg[j] += plan.weights(j, r) * intermediate[bag[r]];
    }
  }
  return agg;
}

// --- serialization ----------------------------------------------------------
//
// A mechanism output serializes into a directory as plan.csv
// (j,r,index,weight,in_noise_set) and agg.csv (j,y_agg[,xbar...]).

namespace internal {

inline std::string plan_csv(const BagPlan& plan) {
  std::ostringstream out;
  out << "j,r,index,weight,in_noise_set\n";
  std::vector<bool> noisy(static_cast<std::size_t>(plan.n), false);
  for (const Index i : plan.noise_set) noisy[static_cast<std::size_t>(i)] = true;
  for (Index j = 0; j < plan.m; ++j) {
    for (Index r = 0; r < plan.k; ++r) {
      const Index idx = plan.bag(j)[r];
      out << j << "," << r << "," << idx << ","
          << format_double(plan.weights(j, r)) << ","
          << (noisy[static_cast<std::size_t>(idx)] ? 1 : 0) << "\n";
    }
  }
  return out.str();
}

}  // namespace internal

inline void save_lba(const LbaDataset& lba, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir + "/plan.csv", internal::plan_csv(lba.plan));
  std::ostringstream agg;
  agg << "j,y_agg";
  for (Index c = 0; c < lba.agg_features.cols(); ++c) agg << ",xbar" << c;
  agg << "\n";
  for (Index j = 0; j < lba.plan.m; ++j) {
    agg << j << "," << format_double(lba.agg_labels[j]);
    for (Index c = 0; c < lba.agg_features.cols(); ++c) {
      agg << "," << format_double(lba.agg_features(j, c));
    }
    agg << "\n";
  }
  write_file_atomic(dir + "/agg.csv", agg.str());
}

inline void save_llp(const LlpDataset& llp, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir + "/plan.csv", internal::plan_csv(llp.plan));
  std::ostringstream agg;
  agg << "j,y_agg\n";
  for (Index j = 0; j < llp.plan.m; ++j) {
    agg << j << "," << format_double(llp.agg_labels[j]) << "\n";
  }
  write_file_atomic(dir + "/agg.csv", agg.str());
}

}  // namespace agglab

#endif  // AGGLAB_MECHANISMS_HPP_
