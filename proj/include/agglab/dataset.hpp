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

#ifndef AGGLAB_DATASET_HPP_
#define AGGLAB_DATASET_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agglab/csv_io.hpp"
#include "agglab/rng.hpp"

namespace agglab {

struct DegenerateDatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleTargetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A labeled regression dataset together with its bound certificates: every
// label lies in [-label_bound, label_bound] and every feature row has
// ℓ2-norm at most feature_bound. All downstream privacy and utility
// statements condition on these certificates, so construction enforces them.
struct Dataset {
  Eigen::MatrixXd features;  // n x d, row i is one example
  Eigen::VectorXd labels;    // n
  double label_bound = 0.0;
  double feature_bound = 0.0;
  bool has_bias_column = false;

  Index n() const { return features.rows(); }
  Index d() const { return features.cols(); }

  // Throws std::invalid_argument when any invariant fails.
  void validate() const {
    if (features.rows() < 1 || features.cols() < 1) {
      throw std::invalid_argument("Dataset: need n >= 1 and d >= 1");
    }
    if (labels.size() != features.rows()) {
      throw std::invalid_argument("Dataset: labels/features row mismatch");
    }
    if (!(label_bound > 0.0) || !(feature_bound > 0.0)) {
      throw std::invalid_argument("Dataset: bounds must be positive");
    }
    if (!features.allFinite() || !labels.allFinite()) {
      throw std::invalid_argument("Dataset: non-finite entry");
    }
    const double label_tol = label_bound * 1e-12 + 1e-12;
    const double norm_tol = feature_bound * 1e-12 + 1e-12;
    for (Index i = 0; i < n(); ++i) {
      if (std::abs(labels[i]) > label_bound + label_tol) {
        throw std::invalid_argument("Dataset: label exceeds label_bound at row " +
                                    std::to_string(i));
      }
      if (features.row(i).norm() > feature_bound + norm_tol) {
        throw std::invalid_argument("Dataset: feature norm exceeds feature_bound at row " +
                                    std::to_string(i));
      }
      if (has_bias_column && features(i, d() - 1) != 1.0) {
        throw std::invalid_argument("Dataset: bias column entry != 1 at row " +
                                    std::to_string(i));
      }
    }
  }
};

// Dataset-level statistics: the feature second-moment matrix, its minimum
// non-zero eigenvalue (linear non-degeneracy of the features), and the
// optimal linear mse together with an argmin witness.
struct DatasetStats {
  Eigen::MatrixXd second_moment;  // (1/n) * sum_i x_i x_i^T, d x d psd
  double min_nonzero_eig = 0.0;   // smallest retained eigenvalue
  double best_linear_mse = 0.0;         // optimal residual / n
  double best_linear_residual = 0.0;    // optimal sum of squared residuals
  Eigen::VectorXd best_linear;          // minimum-norm least-squares witness
};

// Relative eigenvalue cutoff under which a direction counts as degenerate.
inline constexpr double kEigenvalueCutoff = 1e-9;

// Computes DatasetStats. The least-squares witness uses minimum-norm
// (pseudo-inverse) semantics so rank-deficient feature matrices are handled
// without ridge bias. Eigenvalues below kEigenvalueCutoff * lambda_max are
// treated as zero when selecting the minimum non-zero eigenvalue.
inline DatasetStats compute_stats(const Dataset& ds) {
  const Index n = ds.n();
  DatasetStats stats;
  stats.second_moment =
      (ds.features.transpose() * ds.features) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(stats.second_moment);
  const double eig_max = eig.eigenvalues().maxCoeff();
  if (!(eig_max > 0.0)) {
    throw DegenerateDatasetError("compute_stats: all features are zero");
  }
  const double cutoff = kEigenvalueCutoff * eig_max;
  double min_nonzero = eig_max;
  for (Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double v = eig.eigenvalues()[i];
    if (v > cutoff) min_nonzero = std::min(min_nonzero, v);
  }
  stats.min_nonzero_eig = min_nonzero;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(ds.features,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  stats.best_linear = svd.solve(ds.labels);
  stats.best_linear_residual =
      (ds.labels - ds.features * stats.best_linear).squaredNorm();
  stats.best_linear_mse = stats.best_linear_residual / static_cast<double>(n);
  return stats;
}

enum class ColumnRole { kFeature, kLabel, kIgnore };

// Column roles keyed by header name. Columns absent from the map default to
// kFeature, so a schema usually only needs to name the label (and any
// columns to drop).
struct CsvSchema {
  std::map<std::string, ColumnRole> roles;
};

struct ClipBounds {
  double label_bound;
  double feature_bound;
};

// Loads a numeric CSV (header row required) into a Dataset.
//
// Rows whose label cell is missing or does not parse are dropped. A feature
// cell that does not parse is an error naming the row and column. When
// `clip` is given the stored data is made to satisfy the certificates:
// the bias coordinate is appended first, then feature rows are rescaled to
// norm <= feature_bound, then labels are clamped. Without `clip` the
// certificates are inferred from the data.
inline Dataset load_csv(const std::string& path, const CsvSchema& schema,
                        bool add_bias, std::optional<ClipBounds> clip) {
  const CsvTable table = read_csv(path);

  std::vector<Index> feature_cols;
  Index label_col = -1;
  for (Index c = 0; c < static_cast<Index>(table.header.size()); ++c) {
    const std::string& name = table.header[static_cast<std::size_t>(c)];
    ColumnRole role = ColumnRole::kFeature;
    const auto it = schema.roles.find(name);
    if (it != schema.roles.end()) role = it->second;
    if (role == ColumnRole::kLabel) {
      if (label_col >= 0) throw ParseError("load_csv: multiple label columns");
      label_col = c;
    } else if (role == ColumnRole::kFeature) {
      feature_cols.push_back(c);
    }
  }
  if (label_col < 0) throw ParseError("load_csv: no label column in schema");
  if (feature_cols.empty()) throw ParseError("load_csv: no feature columns");

  const Index d_raw = static_cast<Index>(feature_cols.size());
  const Index d = d_raw + (add_bias ? 1 : 0);
  std::vector<double> feature_data;
  std::vector<double> label_data;

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (static_cast<Index>(row.size()) <= label_col) continue;  // short row: no label
    double label;
    if (!parse_double(row[static_cast<std::size_t>(label_col)], &label) ||
        !std::isfinite(label)) {
      continue;  // missing or unparseable target: drop the row
    }
    std::vector<double> feats(static_cast<std::size_t>(d));
    for (Index j = 0; j < d_raw; ++j) {
      const Index c = feature_cols[static_cast<std::size_t>(j)];
      if (static_cast<Index>(row.size()) <= c) {
        throw ParseError("load_csv: row " + std::to_string(r + 2) +
                         " is missing column '" +
                         table.header[static_cast<std::size_t>(c)] + "'");
      }
      double v;
      if (!parse_double(row[static_cast<std::size_t>(c)], &v) || !std::isfinite(v)) {
        throw ParseError("load_csv: non-numeric feature at row " +
                         std::to_string(r + 2) + ", column '" +
                         table.header[static_cast<std::size_t>(c)] + "'");
      }
      feats[static_cast<std::size_t>(j)] = v;
    }
    if (add_bias) feats[static_cast<std::size_t>(d_raw)] = 1.0;
    feature_data.insert(feature_data.end(), feats.begin(), feats.end());
    label_data.push_back(label);
  }

  const Index n = static_cast<Index>(label_data.size());
  if (n == 0) throw ParseError("load_csv: no usable rows in " + path);

  Dataset ds;
  ds.features.resize(n, d);
  ds.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      ds.features(i, j) = feature_data[static_cast<std::size_t>(i * d + j)];
    }
    ds.labels[i] = label_data[static_cast<std::size_t>(i)];
  }
  ds.has_bias_column = add_bias;

  if (clip) {
    ds.label_bound = clip->label_bound;
    ds.feature_bound = clip->feature_bound;
    for (Index i = 0; i < n; ++i) {
      const double norm = ds.features.row(i).norm();
      if (norm > ds.feature_bound && norm > 0.0) {
        ds.features.row(i) *= ds.feature_bound / norm;
        // Rescaling a row that carried a bias coordinate breaks the ==1
        // invariant; in that case the bias flag no longer certifies.
        if (ds.has_bias_column && ds.features(i, d - 1) != 1.0) {
          ds.has_bias_column = false;
        }
      }
      ds.labels[i] = std::clamp(ds.labels[i], -ds.label_bound, ds.label_bound);
    }
  } else {
    double max_label = 0.0, max_norm = 0.0;
    for (Index i = 0; i < n; ++i) {
      max_label = std::max(max_label, std::abs(ds.labels[i]));
      max_norm = std::max(max_norm, ds.features.row(i).norm());
    }
    ds.label_bound = max_label > 0.0 ? max_label : 1.0;
    ds.feature_bound = max_norm > 0.0 ? max_norm : 1.0;
  }
  ds.validate();
  return ds;
}

// Deterministic synthetic dataset with a requested optimal linear mse.
//
// Features are drawn uniformly in the feature_bound ball; labels follow a
// planted linear model plus bounded uniform noise, whose scale is adjusted
// (one rescale-and-retry pass) until the realized least-squares residual per
// row is within 5% of target_mse. Throws InfeasibleTargetError when that
// tolerance cannot be met (e.g. label clamping binds too hard).
inline Dataset synth_dataset(Index n, Index d, double target_mse,
                             double label_bound, double feature_bound,
                             std::uint64_t seed) {
  if (n < d) throw std::invalid_argument("synth_dataset: need n >= d");
  if (!(label_bound > 0.0) || !(feature_bound > 0.0)) {
    throw std::invalid_argument("synth_dataset: bounds must be positive");
  }
  if (target_mse < 0.0 || target_mse > label_bound * label_bound / 3.0) {
    throw std::invalid_argument(
        "synth_dataset: target mse must lie in [0, label_bound^2 / 3]");
  }

  SplitRng rng(seed);
  SplitRng feature_rng = rng.child(0);
  SplitRng model_rng = rng.child(1);
  SplitRng noise_rng = rng.child(2);

  Dataset ds;
  ds.features.resize(n, d);
  ds.labels.resize(n);
  ds.label_bound = label_bound;
  ds.feature_bound = feature_bound;

  for (Index i = 0; i < n; ++i) {
    Eigen::VectorXd g(d);
    for (Index j = 0; j < d; ++j) g[j] = feature_rng.next_gaussian();
    double norm = g.norm();
    while (norm == 0.0) {
      for (Index j = 0; j < d; ++j) g[j] = feature_rng.next_gaussian();
      norm = g.norm();
    }
    const double radius =
        feature_bound * std::pow(feature_rng.next_unit(), 1.0 / static_cast<double>(d));
    ds.features.row(i) = (g / norm * radius).transpose();
  }

  Eigen::VectorXd planted(d);
  for (Index j = 0; j < d; ++j) planted[j] = model_rng.next_gaussian();
  if (planted.norm() == 0.0) planted[0] = 1.0;
  // Keep the signal well inside the label range so clamping rarely binds.
  planted *= 0.3 * label_bound / feature_bound / planted.norm();

  Eigen::VectorXd signal = ds.features * planted;
  Eigen::VectorXd noise(n);
  const double noise_scale = std::sqrt(3.0 * target_mse);
  for (Index i = 0; i < n; ++i) {
    noise[i] = noise_scale * (2.0 * noise_rng.next_unit() - 1.0);
  }

  const auto realize = [&](double scale) {
    for (Index i = 0; i < n; ++i) {
      ds.labels[i] =
          std::clamp(signal[i] + scale * noise[i], -label_bound, label_bound);
    }
    return compute_stats(ds).best_linear_mse;
  };

  if (target_mse == 0.0) {
    for (Index i = 0; i < n; ++i) {
      ds.labels[i] = std::clamp(signal[i], -label_bound, label_bound);
    }
    ds.validate();
    return ds;
  }

  double realized = realize(1.0);
  if (std::abs(realized - target_mse) > 0.05 * target_mse) {
    if (!(realized > 0.0)) {
      throw InfeasibleTargetError("synth_dataset: zero realized residual");
    }
    realized = realize(std::sqrt(target_mse / realized));
    if (std::abs(realized - target_mse) > 0.05 * target_mse) {
      throw InfeasibleTargetError(
          "synth_dataset: could not realize target mse " + format_double(target_mse) +
          " (got " + format_double(realized) + ")");
    }
  }
  ds.validate();
  return ds;
}

// --- dataset (de)serialization: metadata key=value file + CSV body ---------
//
// Decimal values use shortest-round-trip formatting, so save/load round-trips
// bit-exactly.

inline void save_dataset(const Dataset& ds, const std::string& meta_path,
                         const std::string& body_path) {
  std::ostringstream meta;
  meta << "n=" << ds.n() << "\n";
  meta << "d=" << ds.d() << "\n";
  meta << "b1=" << format_double(ds.label_bound) << "\n";
  meta << "b2=" << format_double(ds.feature_bound) << "\n";
  meta << "has_bias_column=" << (ds.has_bias_column ? 1 : 0) << "\n";
  write_file_atomic(meta_path, meta.str());

  std::ostringstream body;
  for (Index j = 0; j < ds.d(); ++j) body << "x" << j << ",";
  body << "y\n";
  for (Index i = 0; i < ds.n(); ++i) {
    for (Index j = 0; j < ds.d(); ++j) {
      body << format_double(ds.features(i, j)) << ",";
    }
    body << format_double(ds.labels[i]) << "\n";
  }
  write_file_atomic(body_path, body.str());
}

inline Dataset load_dataset(const std::string& meta_path,
                            const std::string& body_path) {
  std::map<std::string, std::string> meta;
  {
    std::istringstream in(read_file(meta_path));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto pos = line.find('=');
      if (pos == std::string::npos) continue;
      meta[line.substr(0, pos)] = line.substr(pos + 1);
    }
  }
  const auto need = [&](const std::string& key) -> std::string {
    const auto it = meta.find(key);
    if (it == meta.end()) {
      throw ParseError("load_dataset: missing metadata key '" + key + "'");
    }
    return it->second;
  };

  Dataset ds;
  const Index n = std::stoll(need("n"));
  const Index d = std::stoll(need("d"));
  if (!parse_double(need("b1"), &ds.label_bound) ||
      !parse_double(need("b2"), &ds.feature_bound)) {
    throw ParseError("load_dataset: bad bound value");
  }
  ds.has_bias_column = need("has_bias_column") == "1";

  const CsvTable table = read_csv(body_path);
  if (static_cast<Index>(table.rows.size()) != n ||
      static_cast<Index>(table.header.size()) != d + 1) {
    throw ParseError("load_dataset: body shape does not match metadata");
  }
  ds.features.resize(n, d);
  ds.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    if (static_cast<Index>(row.size()) != d + 1) {
      throw ParseError("load_dataset: short row " + std::to_string(i + 2));
    }
    for (Index j = 0; j <= d; ++j) {
      double v;
      if (!parse_double(row[static_cast<std::size_t>(j)], &v)) {
        throw ParseError("load_dataset: bad cell at row " + std::to_string(i + 2));
      }
      if (j < d) {
        ds.features(i, j) = v;
      } else {
        ds.labels[i] = v;
      }
    }
  }
  ds.validate();
  return ds;
}

}  // namespace agglab

#endif  // AGGLAB_DATASET_HPP_
