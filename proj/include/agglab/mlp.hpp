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

#ifndef AGGLAB_MLP_HPP_
#define AGGLAB_MLP_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agglab/csv_io.hpp"
#include "agglab/dataset.hpp"
#include "agglab/mechanisms.hpp"
#include "agglab/rng.hpp"

namespace agglab {

// Multi-layer perceptron with rectifier hidden units. Every layer consumes
// its input with an appended 1 (the bias convention the norm bounds are
// stated for), i.e. layer l is a matrix of shape out_l x (in_l + 1). The
// output layer is linear and scalar.
struct MlpModel {
  std::vector<Eigen::MatrixXd> weights;
  std::optional<double> frob_cap;

  int depth() const { return static_cast<int>(weights.size()); }
  Index input_dim() const { return weights.front().cols() - 1; }

  Index param_count() const {
    Index total = 0;
    for (const auto& w : weights) total += w.size();
    return total;
  }

  // ℓ2 cap on the flattened parameter vector implied by a per-layer
  // Frobenius cap: sqrt(depth) * frob_cap.
  double param_norm_cap() const {
    if (!frob_cap) throw std::logic_error("param_norm_cap: no frobenius cap set");
    return std::sqrt(static_cast<double>(depth())) * *frob_cap;
  }

  // Flattened parameters, layers in order, each row-major.
  Eigen::VectorXd params() const {
    Eigen::VectorXd out(param_count());
    Index pos = 0;
    for (const auto& w : weights) {
      for (Index r = 0; r < w.rows(); ++r) {
        for (Index c = 0; c < w.cols(); ++c) out[pos++] = w(r, c);
      }
    }
    return out;
  }

  void set_params(const Eigen::VectorXd& flat) {
    if (flat.size() != param_count()) {
      throw std::invalid_argument("set_params: size mismatch");
    }
    Index pos = 0;
    for (auto& w : weights) {
      for (Index r = 0; r < w.rows(); ++r) {
        for (Index c = 0; c < w.cols(); ++c) w(r, c) = flat[pos++];
      }
    }
  }

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& rows) const;
};

// Rescales each layer onto its Frobenius ball; idempotent and never
// increases a layer norm.
inline void project_frobenius(MlpModel* model, double cap) {
  for (auto& w : model->weights) {
    const double norm = w.norm();
    if (norm > cap && norm > 0.0) w *= cap / norm;
  }
}

namespace internal {

struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;   // inputs[l]: activations entering layer l
  std::vector<Eigen::MatrixXd> preacts;  // preacts[l]: rows x out_l
};

inline Eigen::MatrixXd layer_apply(const Eigen::MatrixXd& weights,
                                   const Eigen::MatrixXd& input) {
  const Index in = weights.cols() - 1;
  Eigen::MatrixXd z = input * weights.leftCols(in).transpose();
  z.rowwise() += weights.col(in).transpose();
  return z;
}

inline Eigen::VectorXd mlp_forward(const MlpModel& model,
                                   const Eigen::MatrixXd& rows,
                                   ForwardCache* cache) {
  const int layers = model.depth();
  Eigen::MatrixXd act = rows;
  if (cache) {
    cache->inputs.assign(static_cast<std::size_t>(layers), Eigen::MatrixXd());
    cache->preacts.assign(static_cast<std::size_t>(layers), Eigen::MatrixXd());
  }
  for (int l = 0; l < layers; ++l) {
    if (cache) cache->inputs[static_cast<std::size_t>(l)] = act;
    Eigen::MatrixXd z = layer_apply(model.weights[static_cast<std::size_t>(l)], act);
    if (cache) cache->preacts[static_cast<std::size_t>(l)] = z;
    if (l + 1 < layers) {
      act = z.cwiseMax(0.0);
    } else {
      act = std::move(z);
    }
  }
  return act.col(0);
}

// Backpropagates per-row output gradients into per-layer weight gradients.
inline std::vector<Eigen::MatrixXd> mlp_backward(const MlpModel& model,
                                                 const ForwardCache& cache,
                                                 const Eigen::VectorXd& out_grad) {
  const int layers = model.depth();
  std::vector<Eigen::MatrixXd> grads(static_cast<std::size_t>(layers));
  Eigen::MatrixXd delta = out_grad;  // rows x 1
  for (int l = layers - 1; l >= 0; --l) {
    const auto& w = model.weights[static_cast<std::size_t>(l)];
    const auto& input = cache.inputs[static_cast<std::size_t>(l)];
    const Index in = w.cols() - 1;
    Eigen::MatrixXd g(w.rows(), w.cols());
    g.leftCols(in) = delta.transpose() * input;
    g.col(in) = delta.colwise().sum().transpose();
    grads[static_cast<std::size_t>(l)] = std::move(g);
    if (l > 0) {
      Eigen::MatrixXd back = delta * w.leftCols(in);
      const auto& z = cache.preacts[static_cast<std::size_t>(l - 1)];
      delta = back.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    }
  }
  return grads;
}

inline Eigen::VectorXd flatten_grads(const std::vector<Eigen::MatrixXd>& grads) {
  Index total = 0;
  for (const auto& g : grads) total += g.size();
  Eigen::VectorXd flat(total);
  Index pos = 0;
  for (const auto& g : grads) {
    for (Index r = 0; r < g.rows(); ++r) {
      for (Index c = 0; c < g.cols(); ++c) flat[pos++] = g(r, c);
    }
  }
  return flat;
}

}  // namespace internal

inline double MlpModel::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  Eigen::MatrixXd row = x;
  return internal::mlp_forward(*this, row, nullptr)[0];
}

inline Eigen::VectorXd MlpModel::predict_batch(const Eigen::MatrixXd& rows) const {
  return internal::mlp_forward(*this, rows, nullptr);
}

inline double mse(const Dataset& ds, const MlpModel& model) {
  if (model.input_dim() != ds.d()) throw std::invalid_argument("mse: dimension mismatch");
  return (ds.labels - model.predict_batch(ds.features)).squaredNorm() /
         static_cast<double>(ds.n());
}

namespace internal {

// Loss and flattened gradient of the bag-level objective restricted to a set
// of bags. Bags are visited in the given order, members ascending.
inline double llp_loss_subset(const LlpDataset& llp, const MlpModel& model,
                              const std::vector<Index>& bag_ids,
                              Eigen::VectorXd* grad_out) {
  const Index k = llp.bag_size();
  const Index rows = static_cast<Index>(bag_ids.size()) * k;
  Eigen::MatrixXd batch(rows, llp.member_features.cols());
  for (Index b = 0; b < static_cast<Index>(bag_ids.size()); ++b) {
    batch.middleRows(b * k, k) = llp.member_features.middleRows(bag_ids[static_cast<std::size_t>(b)] * k, k);
  }
  ForwardCache cache;
  const Eigen::VectorXd preds =
      mlp_forward(model, batch, grad_out ? &cache : nullptr);

  double loss = 0.0;
  Eigen::VectorXd out_grad =
      grad_out ? Eigen::VectorXd::Zero(rows) : Eigen::VectorXd();
  for (Index b = 0; b < static_cast<Index>(bag_ids.size()); ++b) {
    const Index j = bag_ids[static_cast<std::size_t>(b)];
    double agg = 0.0;
    for (Index r = 0; r < k; ++r) {
      agg += llp.plan.weights(j, r) * preds[b * k + r];
    }
    const double e = llp.agg_labels[j] - agg;
    loss += e * e;
    if (grad_out) {
      for (Index r = 0; r < k; ++r) {
        out_grad[b * k + r] = -2.0 * e * llp.plan.weights(j, r);
      }
    }
  }
  if (grad_out) {
    *grad_out = flatten_grads(mlp_backward(model, cache, out_grad));
  }
  return loss;
}

inline std::vector<Index> all_bags(const LlpDataset& llp) {
  std::vector<Index> ids(static_cast<std::size_t>(llp.bag_count()));
  for (Index j = 0; j < llp.bag_count(); ++j) ids[static_cast<std::size_t>(j)] = j;
  return ids;
}

}  // namespace internal

inline double llp_loss(const LlpDataset& llp, const MlpModel& model) {
  if (model.input_dim() != llp.member_features.cols()) {
    throw std::invalid_argument("llp_loss: dimension mismatch");
  }
  return internal::llp_loss_subset(llp, model, internal::all_bags(llp), nullptr);
}

// Analytic reverse-mode gradient of llp_loss over the flattened parameters.
inline Eigen::VectorXd grad_llp_loss(const LlpDataset& llp, const MlpModel& model) {
  if (model.input_dim() != llp.member_features.cols()) {
    throw std::invalid_argument("grad_llp_loss: dimension mismatch");
  }
  Eigen::VectorXd grad;
  internal::llp_loss_subset(llp, model, internal::all_bags(llp), &grad);
  return grad;
}

struct TrainConfig {
  int epochs = 200;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double initial_lr = 1e-3;
  double cosine_alpha = 1e-3;  // floor fraction of the cosine schedule
  Index batch_bags = 32;
  int patience = 3;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs >= 1");
    if (!(initial_lr > 0.0)) throw std::invalid_argument("TrainConfig: lr > 0");
    if (batch_bags < 1) throw std::invalid_argument("TrainConfig: batch >= 1");
  }
};

// Seeded He-style initialization; `layer_sizes` lists output widths, ending
// in 1.
inline MlpModel make_mlp(Index input_dim, const std::vector<Index>& layer_sizes,
                         SplitRng rng, std::optional<double> frob_cap = {}) {
  if (layer_sizes.empty() || layer_sizes.back() != 1) {
    throw std::invalid_argument("make_mlp: layer sizes must end in 1");
  }
  MlpModel model;
  model.frob_cap = frob_cap;
  Index in = input_dim;
  for (std::size_t l = 0; l < layer_sizes.size(); ++l) {
    const Index out = layer_sizes[l];
    Eigen::MatrixXd w(out, in + 1);
    SplitRng layer_rng = rng.child(l);
    const double scale = std::sqrt(2.0 / static_cast<double>(in + 1));
    for (Index r = 0; r < out; ++r) {
      for (Index c = 0; c < in + 1; ++c) w(r, c) = scale * layer_rng.next_gaussian();
    }
    model.weights.push_back(std::move(w));
    in = out;
  }
  if (frob_cap) project_frobenius(&model, *frob_cap);
  return model;
}

// Minibatch Adam on the bag-level loss with a cosine learning-rate schedule
// and early stopping on a held-out split (the last 10% of bags). When a
// Frobenius cap is given every layer is projected after each step. Training
// is deterministic given cfg.seed.
inline MlpModel fit_mlp_llp(const LlpDataset& llp,
                            const std::vector<Index>& layer_sizes,
                            const TrainConfig& cfg,
                            std::optional<double> frob_cap = {},
                            std::vector<double>* holdout_history = nullptr) {
  cfg.validate();
  const Index m = llp.bag_count();
  if (m < 1) throw std::invalid_argument("fit_mlp_llp: empty input");

  SplitRng rng(cfg.seed);
  MlpModel model =
      make_mlp(llp.member_features.cols(), layer_sizes, rng.child(0), frob_cap);

  const Index holdout = m >= 2 ? std::max<Index>(1, m / 10) : 0;
  const Index train_m = m - holdout;
  std::vector<Index> train_ids(static_cast<std::size_t>(train_m));
  for (Index j = 0; j < train_m; ++j) train_ids[static_cast<std::size_t>(j)] = j;
  std::vector<Index> holdout_ids;
  for (Index j = train_m; j < m; ++j) holdout_ids.push_back(j);

  const Index batch = std::min(cfg.batch_bags, train_m);
  const Index steps_per_epoch = (train_m + batch - 1) / batch;
  const double total_steps =
      static_cast<double>(cfg.epochs) * static_cast<double>(steps_per_epoch);

  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(model.param_count());
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(model.param_count());
  Index step = 0;

  double best_holdout = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_params = model.params();
  int epochs_since_best = 0;

  SplitRng shuffle_root = rng.child(1);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SplitRng shuffle_rng = shuffle_root.child(static_cast<std::uint64_t>(epoch));
    for (Index i = train_m - 1; i > 0; --i) {
      const Index j = static_cast<Index>(
          shuffle_rng.next_below(static_cast<std::uint64_t>(i + 1)));
      std::swap(train_ids[static_cast<std::size_t>(i)],
                train_ids[static_cast<std::size_t>(j)]);
    }

    for (Index start = 0; start < train_m; start += batch) {
      const Index count = std::min(batch, train_m - start);
      const std::vector<Index> batch_ids(
          train_ids.begin() + start, train_ids.begin() + start + count);
      Eigen::VectorXd grad;
      const double loss =
          internal::llp_loss_subset(llp, model, batch_ids, &grad);
      if (!std::isfinite(loss)) {
        throw std::runtime_error(
            "fit_mlp_llp: non-finite loss at epoch " + std::to_string(epoch) +
            ", step " + std::to_string(step) + " (training diverged)");
      }
      ++step;
      const double progress =
          std::min(1.0, static_cast<double>(step) / total_steps);
      const double decay =
          cfg.cosine_alpha +
          (1.0 - cfg.cosine_alpha) *
              0.5 * (1.0 + std::cos(std::numbers::pi * progress));
      const double lr = cfg.initial_lr * decay;

      adam_m = cfg.adam_beta1 * adam_m + (1.0 - cfg.adam_beta1) * grad;
      adam_v = cfg.adam_beta2 * adam_v.array().matrix() +
               (1.0 - cfg.adam_beta2) * grad.array().square().matrix();
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      Eigen::VectorXd params = model.params();
      params -= (lr * (adam_m / bc1).array() /
                 ((adam_v / bc2).array().sqrt() + cfg.adam_epsilon))
                    .matrix();
      model.set_params(params);
      if (frob_cap) project_frobenius(&model, *frob_cap);
    }

    if (holdout > 0) {
      const double holdout_loss =
          internal::llp_loss_subset(llp, model, holdout_ids, nullptr);
      if (!std::isfinite(holdout_loss)) {
        throw std::runtime_error("fit_mlp_llp: non-finite holdout loss at epoch " +
                                 std::to_string(epoch));
      }
      if (holdout_history) holdout_history->push_back(holdout_loss);
      if (holdout_loss < best_holdout) {
        best_holdout = holdout_loss;
        best_params = model.params();
        epochs_since_best = 0;
      } else {
        ++epochs_since_best;
        if (epochs_since_best >= cfg.patience) break;
      }
    }
  }

  if (holdout > 0) model.set_params(best_params);
  return model;
}

// Wraps raw instances as one-member bags with unit weights, which turns the
// bag-level objective into the plain instance objective. Used for the
// instance-trained baseline.
inline LlpDataset llp_from_instances(const Dataset& ds) {
  LlpDataset llp;
  llp.plan.n = ds.n();
  llp.plan.m = ds.n();
  llp.plan.k = 1;
  llp.plan.bags.resize(static_cast<std::size_t>(ds.n()));
  for (Index i = 0; i < ds.n(); ++i) llp.plan.bags[static_cast<std::size_t>(i)] = i;
  llp.plan.weights = Eigen::MatrixXd::Ones(ds.n(), 1);
  llp.member_features = ds.features;
  llp.agg_labels = ds.labels;
  return llp;
}

// --- norm bounds for the capped network class -------------------------------

namespace internal {
// sum_{t=0}^{depth} cap^(2t); the closed form (cap^(2depth+2)-1)/(cap^2-1)
// including its cap -> 1 limit.
inline double weight_geometric_sum(double cap, int depth) {
  double sum = 0.0;
  double term = 1.0;
  for (int t = 0; t <= depth; ++t) {
    sum += term;
    term *= cap * cap;
  }
  return sum;
}
}  // namespace internal

// Largest output magnitude a depth-`depth` network with per-layer Frobenius
// cap `cap` can produce on inputs of ℓ2 norm at most `cap`.
inline double nn_output_bound(double cap, int depth) {
  if (!(cap > 0.0) || depth < 1) {
    throw std::invalid_argument("nn_output_bound: cap > 0, depth >= 1");
  }
  return cap * std::sqrt(internal::weight_geometric_sum(cap, depth));
}

// Lipschitz constant of the network output with respect to the flattened
// parameter vector, over the same class and input ball.
inline double nn_lipschitz_bound(double cap, int depth) {
  if (!(cap > 0.0) || depth < 1) {
    throw std::invalid_argument("nn_lipschitz_bound: cap > 0, depth >= 1");
  }
  return std::max(
      std::sqrt(static_cast<double>(depth) * internal::weight_geometric_sum(cap, depth)),
      static_cast<double>(depth));
}

// --- model serialization (text, shortest-round-trip decimals) ---------------

inline void save_mlp(const MlpModel& model, const std::string& path) {
  std::ostringstream out;
  out << "agglab_mlp_v1\n";
  out << "num_layers=" << model.depth() << "\n";
  out << "frob_cap=" << (model.frob_cap ? format_double(*model.frob_cap) : "none")
      << "\n";
  for (const auto& w : model.weights) {
    out << "layer " << w.rows() << " " << w.cols() << "\n";
    for (Index r = 0; r < w.rows(); ++r) {
      for (Index c = 0; c < w.cols(); ++c) {
        if (c > 0) out << " ";
        out << format_double(w(r, c));
      }
      out << "\n";
    }
  }
  write_file_atomic(path, out.str());
}

inline MlpModel load_mlp(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "agglab_mlp_v1") {
    throw ParseError("load_mlp: bad magic in " + path);
  }
  MlpModel model;
  int num_layers = 0;
  if (!std::getline(in, line) || line.rfind("num_layers=", 0) != 0) {
    throw ParseError("load_mlp: missing num_layers");
  }
  num_layers = std::stoi(line.substr(11));
  if (!std::getline(in, line) || line.rfind("frob_cap=", 0) != 0) {
    throw ParseError("load_mlp: missing frob_cap");
  }
  if (line.substr(9) != "none") {
    double cap;
    if (!parse_double(line.substr(9), &cap)) throw ParseError("load_mlp: bad cap");
    model.frob_cap = cap;
  }
  for (int l = 0; l < num_layers; ++l) {
    Index rows, cols;
    std::string tag;
    in >> tag >> rows >> cols;
    if (tag != "layer") throw ParseError("load_mlp: missing layer header");
    Eigen::MatrixXd w(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        std::string cell;
        in >> cell;
        double v;
        if (!parse_double(cell, &v)) throw ParseError("load_mlp: bad value");
        w(r, c) = v;
      }
    }
    model.weights.push_back(std::move(w));
  }
  return model;
}

}  // namespace agglab

#endif  // AGGLAB_MLP_HPP_
