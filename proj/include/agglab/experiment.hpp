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

#ifndef AGGLAB_EXPERIMENT_HPP_
#define AGGLAB_EXPERIMENT_HPP_

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "agglab/csv_io.hpp"
#include "agglab/dataset.hpp"
#include "agglab/linear_model.hpp"
#include "agglab/mechanisms.hpp"
#include "agglab/mlp.hpp"
#include "agglab/rng.hpp"

namespace agglab {

enum class MechanismKind { kWtdLba, kNoisyWtdLlp, kNaiveLba, kNaiveLlp };

inline std::string mechanism_name(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::kWtdLba: return "wtd-lba";
    case MechanismKind::kNoisyWtdLlp: return "noisy-wtd-llp";
    case MechanismKind::kNaiveLba: return "naive-lba";
    case MechanismKind::kNaiveLlp: return "naive-llp";
  }
  return "?";
}

inline MechanismKind parse_mechanism(const std::string& name) {
  if (name == "wtd-lba") return MechanismKind::kWtdLba;
  if (name == "noisy-wtd-llp") return MechanismKind::kNoisyWtdLlp;
  if (name == "naive-lba") return MechanismKind::kNaiveLba;
  if (name == "naive-llp") return MechanismKind::kNaiveLlp;
  throw std::invalid_argument("unknown mechanism '" + name + "'");
}

inline bool is_llp(MechanismKind kind) {
  return kind == MechanismKind::kNoisyWtdLlp || kind == MechanismKind::kNaiveLlp;
}

// --- configuration ----------------------------------------------------------
//
// Config files are sectioned key=value text:
//
//   seeds = 1,2,3
//   [dataset]
//   source = synth
//   ...
//
// '#' starts a comment. CLI flags override entries via "section.key=value".

using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line, section;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = strip(line.substr(1, line.size() - 2));
      continue;
    }
    const auto pos = line.find('=');
    if (pos == std::string::npos) {
      throw std::invalid_argument("config: expected key=value, got '" + line + "'");
    }
    const std::string key = strip(line.substr(0, pos));
    const std::string value = strip(line.substr(pos + 1));
    map[section.empty() ? key : section + "." + key] = value;
  }
  return map;
}

inline void apply_override(ConfigMap* map, const std::string& assignment) {
  const auto pos = assignment.find('=');
  if (pos == std::string::npos) {
    throw std::invalid_argument("override: expected key=value, got '" + assignment + "'");
  }
  (*map)[assignment.substr(0, pos)] = assignment.substr(pos + 1);
}

// Hash of the resolved configuration (sorted canonical form), stamped into
// every output file.
inline std::uint64_t config_hash(const ConfigMap& map) {
  std::string canonical;
  for (const auto& [key, value] : map) {
    canonical += key;
    canonical += "=";
    canonical += value;
    canonical += "\n";
  }
  return fnv1a_hash(canonical);
}

namespace internal {

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (const char c : text) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else if (c != ' ' && c != '\t') {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

inline std::vector<Index> parse_index_list(const std::string& text) {
  std::vector<Index> out;
  for (const auto& p : split_list(text)) out.push_back(std::stoll(p));
  return out;
}

inline std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& p : split_list(text)) {
    double v;
    if (!parse_double(p, &v)) throw std::invalid_argument("bad number '" + p + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace internal

struct DatasetSpec {
  enum class Source { kSynth, kCsv, kSaved };
  Source source = Source::kSynth;
  // synth
  Index n = 20000;
  Index d = 10;
  double gamma = 0.5;
  double b1 = 3.0;
  double b2 = 1.0;
  std::uint64_t dataset_seed = 7;
  // csv
  std::string path;
  std::string label_column;
  std::vector<std::string> ignore_columns;
  bool add_bias = false;
  std::optional<ClipBounds> clip;
  // saved (two-file format)
  std::string meta_path, body_path;

  Dataset build() const {
    switch (source) {
      case Source::kSynth:
        return synth_dataset(n, d, gamma, b1, b2, dataset_seed);
      case Source::kCsv: {
        CsvSchema schema;
        schema.roles[label_column] = ColumnRole::kLabel;
        for (const auto& c : ignore_columns) schema.roles[c] = ColumnRole::kIgnore;
        return load_csv(path, schema, add_bias, clip);
      }
      case Source::kSaved:
        return load_dataset(meta_path, body_path);
    }
    throw std::logic_error("DatasetSpec: bad source");
  }
};

struct ModelSpec {
  enum class Kind { kLinear, kMlp };
  Kind kind = Kind::kLinear;
  double norm_cap = 5.0;             // linear
  std::vector<Index> arch = {128, 64, 1};  // mlp
  std::optional<double> frob_cap;

  std::string label() const {
    if (kind == Kind::kLinear) return "linear";
    std::string s = "mlp";
    for (const Index w : arch) s += "-" + std::to_string(w);
    return s;
  }
};

struct ExperimentConfig {
  DatasetSpec dataset;
  double split_fraction = 0.8;
  MechanismKind mechanism = MechanismKind::kWtdLba;
  std::vector<Index> grid_m = {100};
  std::vector<Index> grid_k = {10};
  std::vector<double> grid_rho = {0.0};
  ModelSpec model;
  TrainConfig train;
  Index batch_instances = 1024;  // mapped to ceil(batch/k) bags for bag data
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::string output_dir;

  void validate(Index dataset_rows) const {
    if (grid_m.empty() || grid_k.empty() || grid_rho.empty()) {
      throw std::invalid_argument("experiment: empty grid");
    }
    if (seeds.empty()) throw std::invalid_argument("experiment: no seeds");
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      for (std::size_t j = i + 1; j < seeds.size(); ++j) {
        if (seeds[i] == seeds[j]) {
          throw std::invalid_argument("experiment: duplicate seed");
        }
      }
    }
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
      throw std::invalid_argument("experiment: split fraction in (0,1)");
    }
    const Index train_rows = static_cast<Index>(
        std::llround(split_fraction * static_cast<double>(dataset_rows)));
    for (const Index m : grid_m) {
      for (const Index k : grid_k) {
        if (m * k > train_rows) {
          throw CapacityError("experiment: grid point m=" + std::to_string(m) +
                              ", k=" + std::to_string(k) + " needs " +
                              std::to_string(m * k) + " rows but the train split has " +
                              std::to_string(train_rows));
        }
      }
    }
    if (!is_llp(mechanism) && model.kind != ModelSpec::Kind::kLinear) {
      throw std::invalid_argument(
          "experiment: aggregated-feature mechanisms support linear models only");
    }
  }
};

inline ExperimentConfig config_from_map(const ConfigMap& map) {
  ExperimentConfig cfg;
  const auto get = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = map.find(key);
    if (it == map.end()) return std::nullopt;
    return it->second;
  };
  const auto get_double = [&](const std::string& key, double fallback) {
    const auto v = get(key);
    if (!v) return fallback;
    double out;
    if (!parse_double(*v, &out)) throw std::invalid_argument("config: bad number for " + key);
    return out;
  };

  if (const auto v = get("dataset.source")) {
    if (*v == "synth") {
      cfg.dataset.source = DatasetSpec::Source::kSynth;
    } else if (*v == "csv") {
      cfg.dataset.source = DatasetSpec::Source::kCsv;
    } else if (*v == "saved") {
      cfg.dataset.source = DatasetSpec::Source::kSaved;
    } else {
      throw std::invalid_argument("config: unknown dataset source '" + *v + "'");
    }
  }
  if (const auto v = get("dataset.n")) cfg.dataset.n = std::stoll(*v);
  if (const auto v = get("dataset.d")) cfg.dataset.d = std::stoll(*v);
  cfg.dataset.gamma = get_double("dataset.gamma", cfg.dataset.gamma);
  cfg.dataset.b1 = get_double("dataset.b1", cfg.dataset.b1);
  cfg.dataset.b2 = get_double("dataset.b2", cfg.dataset.b2);
  if (const auto v = get("dataset.dataset_seed")) cfg.dataset.dataset_seed = std::stoull(*v);
  if (const auto v = get("dataset.path")) cfg.dataset.path = *v;
  if (const auto v = get("dataset.label")) cfg.dataset.label_column = *v;
  if (const auto v = get("dataset.ignore")) {
    cfg.dataset.ignore_columns = internal::split_list(*v);
  }
  if (const auto v = get("dataset.add_bias")) cfg.dataset.add_bias = *v == "true" || *v == "1";
  if (get("dataset.clip_b1") || get("dataset.clip_b2")) {
    cfg.dataset.clip = ClipBounds{get_double("dataset.clip_b1", 1.0),
                                  get_double("dataset.clip_b2", 1.0)};
  }
  if (const auto v = get("dataset.meta_path")) cfg.dataset.meta_path = *v;
  if (const auto v = get("dataset.body_path")) cfg.dataset.body_path = *v;
  cfg.split_fraction = get_double("dataset.split", cfg.split_fraction);

  if (const auto v = get("mechanism.kind")) cfg.mechanism = parse_mechanism(*v);

  if (const auto v = get("grid.m")) cfg.grid_m = internal::parse_index_list(*v);
  if (const auto v = get("grid.k")) cfg.grid_k = internal::parse_index_list(*v);
  if (const auto v = get("grid.rho")) cfg.grid_rho = internal::parse_double_list(*v);

  if (const auto v = get("model.kind")) {
    if (*v == "linear") {
      cfg.model.kind = ModelSpec::Kind::kLinear;
    } else if (*v == "mlp") {
      cfg.model.kind = ModelSpec::Kind::kMlp;
    } else {
      throw std::invalid_argument("config: unknown model kind '" + *v + "'");
    }
  }
  cfg.model.norm_cap = get_double("model.b3", cfg.model.norm_cap);
  if (const auto v = get("model.arch")) cfg.model.arch = internal::parse_index_list(*v);
  if (const auto v = get("model.frob_cap")) {
    if (!v->empty() && *v != "none") {
      double cap;
      if (!parse_double(*v, &cap)) throw std::invalid_argument("config: bad frob_cap");
      cfg.model.frob_cap = cap;
    }
  }

  if (const auto v = get("train.epochs")) cfg.train.epochs = std::stoi(*v);
  cfg.train.initial_lr = get_double("train.lr", cfg.train.initial_lr);
  cfg.train.cosine_alpha = get_double("train.alpha", cfg.train.cosine_alpha);
  cfg.train.adam_beta1 = get_double("train.beta1", cfg.train.adam_beta1);
  cfg.train.adam_beta2 = get_double("train.beta2", cfg.train.adam_beta2);
  cfg.train.adam_epsilon = get_double("train.adam_eps", cfg.train.adam_epsilon);
  if (const auto v = get("train.patience")) cfg.train.patience = std::stoi(*v);
  if (const auto v = get("train.batch")) cfg.batch_instances = std::stoll(*v);

  if (const auto v = get("seeds")) {
    cfg.seeds.clear();
    for (const auto& s : internal::split_list(*v)) cfg.seeds.push_back(std::stoull(s));
  }
  if (const auto v = get("output.dir")) cfg.output_dir = *v;
  return cfg;
}

// --- runner -----------------------------------------------------------------

struct RunRecord {
  Index m = 0, k = 0;
  double rho = 0.0;
  std::uint64_t seed = 0;
  double bag_mse = 0.0;
  double instance_mse = 0.0;
};

struct ResultRow {
  Index m = 0, k = 0;
  double rho = 0.0;
  std::string model;
  Index n_seeds = 0;
  double bag_mean = 0.0, bag_std = 0.0;
  double instance_mean = 0.0, instance_std = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<RunRecord> runs;
};

namespace internal {

inline Dataset take_rows(const Dataset& ds, const std::vector<Index>& rows,
                         Index begin, Index end) {
  Dataset out;
  out.features.resize(end - begin, ds.d());
  out.labels.resize(end - begin);
  for (Index i = begin; i < end; ++i) {
    out.features.row(i - begin) = ds.features.row(rows[static_cast<std::size_t>(i)]);
    out.labels[i - begin] = ds.labels[rows[static_cast<std::size_t>(i)]];
  }
  out.label_bound = ds.label_bound;
  out.feature_bound = ds.feature_bound;
  out.has_bias_column = ds.has_bias_column;
  return out;
}

// Aggregated features per bag from an LLP plan, which turns the bag-level
// objective for linear models into an ordinary least-squares problem.
inline LbaDataset lba_view_of_llp(const LlpDataset& llp) {
  LbaDataset lba;
  lba.plan = llp.plan;
  lba.agg_labels = llp.agg_labels;
  lba.agg_features =
      Eigen::MatrixXd::Zero(llp.bag_count(), llp.member_features.cols());
  for (Index j = 0; j < llp.bag_count(); ++j) {
    for (Index r = 0; r < llp.bag_size(); ++r) {
      lba.agg_features.row(j) += llp.plan.weights(j, r) *
                                 llp.member_features.row(j * llp.bag_size() + r);
    }
  }
  return lba;
}

// Runs tasks [0, count) over a small worker pool; results land in
// caller-provided slots so the output is independent of scheduling.
template <typename Fn>
void parallel_for(Index count, const Fn& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      static_cast<unsigned>(std::min<Index>(count, static_cast<Index>(hw)));
  if (workers <= 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const Index i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace internal

// Executes the configured grid: per grid point and seed, split the data,
// aggregate the train part, fit the configured model on the aggregate, and
// evaluate test MSE on raw instances; the same model class trained on the
// un-aggregated train split provides the baseline column. Deterministic
// given the config and seeds.
inline ResultTable run_experiment(const ExperimentConfig& cfg) {
  const Dataset ds = cfg.dataset.build();
  cfg.validate(ds.n());

  const Index n = ds.n();
  const Index train_rows = static_cast<Index>(
      std::llround(cfg.split_fraction * static_cast<double>(n)));

  struct Split {
    Dataset train, test;
  };
  const Index n_seeds = static_cast<Index>(cfg.seeds.size());
  std::vector<Split> splits(static_cast<std::size_t>(n_seeds));
  std::vector<double> baseline(static_cast<std::size_t>(n_seeds), 0.0);
  std::vector<LinearModel> linear_baselines(static_cast<std::size_t>(n_seeds));
  std::vector<MlpModel> mlp_baselines(static_cast<std::size_t>(n_seeds));

  internal::parallel_for(n_seeds, [&](Index si) {
    const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(si)];
    SplitRng rng(seed);
    SplitRng split_rng = rng.child(0);
    std::vector<Index> perm = sample_without_replacement(n, n, split_rng);
    auto& split = splits[static_cast<std::size_t>(si)];
    split.train = internal::take_rows(ds, perm, 0, train_rows);
    split.test = internal::take_rows(ds, perm, train_rows, n);

    if (cfg.model.kind == ModelSpec::Kind::kLinear) {
      linear_baselines[static_cast<std::size_t>(si)] =
          fit_linear(split.train.features, split.train.labels, cfg.model.norm_cap);
      baseline[static_cast<std::size_t>(si)] =
          mse(split.test, linear_baselines[static_cast<std::size_t>(si)]);
    } else {
      TrainConfig tc = cfg.train;
      tc.seed = rng.child(3).next_u64();
      tc.batch_bags = std::max<Index>(1, cfg.batch_instances);
      mlp_baselines[static_cast<std::size_t>(si)] = fit_mlp_llp(
          llp_from_instances(split.train), cfg.model.arch, tc, cfg.model.frob_cap);
      baseline[static_cast<std::size_t>(si)] =
          mse(split.test, mlp_baselines[static_cast<std::size_t>(si)]);
    }
  });

  struct GridPoint {
    Index m, k;
    double rho;
  };
  std::vector<GridPoint> grid;
  for (const Index m : cfg.grid_m) {
    for (const Index k : cfg.grid_k) {
      if (is_llp(cfg.mechanism)) {
        for (const double rho : cfg.grid_rho) grid.push_back({m, k, rho});
      } else {
        grid.push_back({m, k, 0.0});
      }
    }
  }

  const Index n_tasks = static_cast<Index>(grid.size()) * n_seeds;
  std::vector<RunRecord> runs(static_cast<std::size_t>(n_tasks));
  internal::parallel_for(n_tasks, [&](Index task) {
    const Index gi = task / n_seeds;
    const Index si = task % n_seeds;
    const GridPoint& point = grid[static_cast<std::size_t>(gi)];
    const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(si)];
    const Split& split = splits[static_cast<std::size_t>(si)];

    SplitRng rng(seed);
    SplitRng mech_rng = rng.child(1);

    double bag_mse = 0.0;
    switch (cfg.mechanism) {
      case MechanismKind::kWtdLba:
      case MechanismKind::kNaiveLba: {
        const LbaDataset lba =
            cfg.mechanism == MechanismKind::kWtdLba
                ? wtd_lba(split.train, point.m, point.k, mech_rng)
                : naive_lba(split.train, point.m, point.k, mech_rng);
        const LinearModel model = fit_linear_lba(lba, cfg.model.norm_cap);
        bag_mse = mse(split.test, model);
        break;
      }
      case MechanismKind::kNoisyWtdLlp:
      case MechanismKind::kNaiveLlp: {
        const LlpResult result =
            cfg.mechanism == MechanismKind::kNoisyWtdLlp
                ? noisy_wtd_llp(split.train, point.m, point.k,
                                NoiseSpec::fraction(point.rho), mech_rng)
                : naive_llp(split.train, point.m, point.k, mech_rng);
        if (cfg.model.kind == ModelSpec::Kind::kLinear) {
          const LinearModel model = fit_linear_lba(
              internal::lba_view_of_llp(result.data), cfg.model.norm_cap);
          bag_mse = mse(split.test, model);
        } else {
          TrainConfig tc = cfg.train;
          tc.seed = rng.child(2).next_u64();
          tc.batch_bags = std::max<Index>(
              1, (cfg.batch_instances + point.k - 1) / point.k);
          const MlpModel model = fit_mlp_llp(result.data, cfg.model.arch, tc,
                                             cfg.model.frob_cap);
          bag_mse = mse(split.test, model);
        }
        break;
      }
    }

    runs[static_cast<std::size_t>(task)] = RunRecord{
        point.m, point.k, point.rho, seed, bag_mse,
        baseline[static_cast<std::size_t>(si)]};
  });

  ResultTable table;
  table.runs = runs;
  for (Index gi = 0; gi < static_cast<Index>(grid.size()); ++gi) {
    const GridPoint& point = grid[static_cast<std::size_t>(gi)];
    double bag_sum = 0.0, bag_sq = 0.0, inst_sum = 0.0, inst_sq = 0.0;
    for (Index si = 0; si < n_seeds; ++si) {
      const RunRecord& run = runs[static_cast<std::size_t>(gi * n_seeds + si)];
      bag_sum += run.bag_mse;
      bag_sq += run.bag_mse * run.bag_mse;
      inst_sum += run.instance_mse;
      inst_sq += run.instance_mse * run.instance_mse;
    }
    const double count = static_cast<double>(n_seeds);
    ResultRow row;
    row.m = point.m;
    row.k = point.k;
    row.rho = point.rho;
    row.model = cfg.model.label();
    row.n_seeds = n_seeds;
    row.bag_mean = bag_sum / count;
    row.instance_mean = inst_sum / count;
    if (n_seeds > 1) {
      row.bag_std = std::sqrt(
          std::max(0.0, (bag_sq - count * row.bag_mean * row.bag_mean) / (count - 1.0)));
      row.instance_std = std::sqrt(std::max(
          0.0, (inst_sq - count * row.instance_mean * row.instance_mean) / (count - 1.0)));
    }
    table.rows.push_back(row);
  }
  return table;
}

// --- output -----------------------------------------------------------------

inline std::string results_csv(const ResultTable& table, const std::string& stamp) {
  std::ostringstream out;
  out << "# " << stamp << "\n";
  out << "m,k,rho,model,seeds,bag_mse_mean,bag_mse_std,instance_mse_mean,instance_mse_std\n";
  for (const auto& r : table.rows) {
    out << r.m << "," << r.k << "," << format_double(r.rho) << "," << r.model
        << "," << r.n_seeds << "," << format_double(r.bag_mean) << ","
        << format_double(r.bag_std) << "," << format_double(r.instance_mean)
        << "," << format_double(r.instance_std) << "\n";
  }
  return out.str();
}

inline std::string results_markdown(const ResultTable& table, const std::string& stamp) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"m", "k", "rho", "model", "seeds", "bag mse (mean ± std)",
                   "instance mse (mean ± std)"});
  for (const auto& r : table.rows) {
    char bag[64], inst[64];
    std::snprintf(bag, sizeof(bag), "%.6g ± %.2g", r.bag_mean, r.bag_std);
    std::snprintf(inst, sizeof(inst), "%.6g ± %.2g", r.instance_mean, r.instance_std);
    cells.push_back({std::to_string(r.m), std::to_string(r.k),
                     format_double(r.rho), r.model, std::to_string(r.n_seeds),
                     bag, inst});
  }
  std::vector<std::size_t> widths(cells[0].size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], row[c].size());
    }
  }
  std::ostringstream out;
  out << "<!-- " << stamp << " -->\n";
  for (std::size_t r = 0; r < cells.size(); ++r) {
    out << "|";
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      out << " " << cells[r][c]
          << std::string(widths[c] - cells[r][c].size(), ' ') << " |";
    }
    out << "\n";
    if (r == 0) {
      out << "|";
      for (std::size_t c = 0; c < widths.size(); ++c) {
        out << std::string(widths[c] + 2, '-') << "|";
      }
      out << "\n";
    }
  }
  return out.str();
}

inline std::string runs_log(const ResultTable& table, const std::string& stamp) {
  std::ostringstream out;
  out << "# " << stamp << "\n";
  for (const auto& run : table.runs) {
    out << "m=" << run.m << " k=" << run.k << " rho=" << format_double(run.rho)
        << " seed=" << run.seed << " bag_mse=" << format_double(run.bag_mse)
        << " instance_mse=" << format_double(run.instance_mse) << "\n";
  }
  return out.str();
}

// Stamp string shared by all output files of one invocation.
inline std::string output_stamp(const ConfigMap& map,
                                const std::vector<std::uint64_t>& seeds) {
  std::string stamp = "config_hash=" + hash_hex(config_hash(map)) + " seeds=";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) stamp += ",";
    stamp += std::to_string(seeds[i]);
  }
  return stamp;
}

inline void write_results(const ResultTable& table, const ConfigMap& map,
                          const ExperimentConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string stamp = output_stamp(map, cfg.seeds);
  write_file_atomic(dir + "/results.csv", results_csv(table, stamp));
  write_file_atomic(dir + "/results.md", results_markdown(table, stamp));
  write_file_atomic(dir + "/runs.log", runs_log(table, stamp));
}

}  // namespace agglab

#endif  // AGGLAB_EXPERIMENT_HPP_
