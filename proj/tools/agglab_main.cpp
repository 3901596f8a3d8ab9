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

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agglab/agglab.hpp"

namespace {

using agglab::Index;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("AGGLAB_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 1;
}

// Shared dataset-source flags: either a saved dataset (meta+body paths), a
// CSV, or synthetic parameters.
struct DatasetFlags {
  std::string saved_base;  // expects <base>.meta and <base>.csv
  std::string csv_path, csv_label;
  std::vector<std::string> csv_ignore;
  bool add_bias = false;
  double clip_b1 = 0.0, clip_b2 = 0.0;
  Index n = 20000, d = 10;
  double gamma = 0.5, b1 = 3.0, b2 = 1.0;
  std::uint64_t dataset_seed = 7;

  void attach(CLI::App* cmd) {
    cmd->add_option("--dataset", saved_base,
                    "load a saved dataset from <base>.meta / <base>.csv");
    cmd->add_option("--csv", csv_path, "load a CSV file");
    cmd->add_option("--label", csv_label, "label column name for --csv");
    cmd->add_option("--ignore", csv_ignore, "columns to drop for --csv");
    cmd->add_flag("--add-bias", add_bias, "append a constant-1 coordinate");
    cmd->add_option("--clip-b1", clip_b1, "clamp labels to [-b1, b1]");
    cmd->add_option("--clip-b2", clip_b2, "rescale feature rows to norm <= b2");
    cmd->add_option("--n", n, "synthetic: number of rows");
    cmd->add_option("--d", d, "synthetic: feature dimension");
    cmd->add_option("--gamma", gamma, "synthetic: target optimal linear mse");
    cmd->add_option("--b1", b1, "synthetic: label bound");
    cmd->add_option("--b2", b2, "synthetic: feature norm bound");
    cmd->add_option("--dataset-seed", dataset_seed, "synthetic: generator seed");
  }

  agglab::Dataset build() const {
    if (!saved_base.empty()) {
      return agglab::load_dataset(saved_base + ".meta", saved_base + ".csv");
    }
    if (!csv_path.empty()) {
      agglab::CsvSchema schema;
      if (csv_label.empty()) {
        throw CLI::ValidationError("--csv requires --label");
      }
      schema.roles[csv_label] = agglab::ColumnRole::kLabel;
      for (const auto& c : csv_ignore) schema.roles[c] = agglab::ColumnRole::kIgnore;
      std::optional<agglab::ClipBounds> clip;
      if (clip_b1 > 0.0 || clip_b2 > 0.0) {
        clip = agglab::ClipBounds{clip_b1 > 0.0 ? clip_b1 : 1.0,
                                  clip_b2 > 0.0 ? clip_b2 : 1.0};
      }
      return agglab::load_csv(csv_path, schema, add_bias, clip);
    }
    return agglab::synth_dataset(n, d, gamma, b1, b2, dataset_seed);
  }
};

int run_synth(const DatasetFlags& flags, const std::string& out_base) {
  const agglab::Dataset ds =
      agglab::synth_dataset(flags.n, flags.d, flags.gamma, flags.b1, flags.b2,
                            flags.dataset_seed);
  agglab::save_dataset(ds, out_base + ".meta", out_base + ".csv");
  std::cout << "wrote " << out_base << ".meta and " << out_base << ".csv (n="
            << ds.n() << ", d=" << ds.d() << ")\n";
  return 0;
}

int run_stats(const DatasetFlags& flags) {
  const agglab::Dataset ds = flags.build();
  const agglab::DatasetStats stats = agglab::compute_stats(ds);
  std::cout << "n=" << ds.n() << " d=" << ds.d()
            << " b1=" << agglab::format_double(ds.label_bound)
            << " b2=" << agglab::format_double(ds.feature_bound) << "\n";
  std::cout << "min_nonzero_eig=" << agglab::format_double(stats.min_nonzero_eig)
            << "\n";
  std::cout << "best_linear_mse=" << agglab::format_double(stats.best_linear_mse)
            << "\n";
  std::cout << "best_linear_norm=" << agglab::format_double(stats.best_linear.norm())
            << "\n";
  return 0;
}

int run_aggregate(const DatasetFlags& flags, const std::string& mech, Index m,
                  Index k, double rho, std::uint64_t seed,
                  const std::string& out_dir) {
  const agglab::Dataset ds = flags.build();
  const agglab::MechanismKind kind = agglab::parse_mechanism(mech);
  agglab::SplitRng rng(seed);
  switch (kind) {
    case agglab::MechanismKind::kWtdLba:
      agglab::save_lba(agglab::wtd_lba(ds, m, k, rng), out_dir);
      break;
    case agglab::MechanismKind::kNaiveLba:
      agglab::save_lba(agglab::naive_lba(ds, m, k, rng), out_dir);
      break;
    case agglab::MechanismKind::kNoisyWtdLlp:
      agglab::save_llp(
          agglab::noisy_wtd_llp(ds, m, k, agglab::NoiseSpec::fraction(rho), rng)
              .data,
          out_dir);
      break;
    case agglab::MechanismKind::kNaiveLlp:
      agglab::save_llp(agglab::naive_llp(ds, m, k, rng).data, out_dir);
      break;
  }
  std::cout << "wrote " << out_dir << "/plan.csv and " << out_dir << "/agg.csv\n";
  return 0;
}

int run_audit_cmd(const DatasetFlags& flags, const std::string& mech,
                  const std::vector<Index>& k_values, Index m, double rho,
                  const std::vector<double>& eps_grid, Index n_cond,
                  Index perturb_index, std::uint64_t seed,
                  const std::string& out_dir) {
  const agglab::Dataset ds = flags.build();
  std::filesystem::create_directories(out_dir);
  const agglab::MechanismKind kind = agglab::parse_mechanism(mech);

  std::string stamp = "mechanism=" + mech + " seed=" + std::to_string(seed);

  if (kind == agglab::MechanismKind::kNaiveLba ||
      kind == agglab::MechanismKind::kNaiveLlp) {
    // The unit-weight mechanisms fail label privacy outright; report the
    // delta floor and the measured membership frequency behind it.
    std::ostringstream out;
    out << "# " << stamp << "\n";
    out << "n,m,k,delta_floor,empirical_membership,runs\n";
    for (const Index k : k_values) {
      const double floor = agglab::naive_lower_bound(ds.n(), m, k);
      const Index runs = 10000;
      const double freq =
          agglab::naive_membership_frequency(ds.n(), m, k, runs, seed);
      out << ds.n() << "," << m << "," << k << ","
          << agglab::format_double(floor) << "," << agglab::format_double(freq)
          << "," << runs << "\n";
    }
    const std::string path = out_dir + "/naive_floor.csv";
    agglab::write_file_atomic(path, out.str());
    std::cout << "wrote " << path << "\n";
    return 0;
  }

  for (const Index k : k_values) {
    const agglab::LabelPerturbation perturb =
        perturb_index >= 0 ? agglab::worst_case_perturbation(ds, perturb_index)
                           : agglab::worst_case_perturbation(ds);
    agglab::PrivacyCurve curve;
    if (kind == agglab::MechanismKind::kWtdLba) {
      curve = agglab::audit_wtd_lba(ds, k, perturb, eps_grid, n_cond, seed);
    } else {
      curve = agglab::audit_noisy_llp(ds, m, k, agglab::NoiseSpec::fraction(rho),
                                      perturb, eps_grid, n_cond, seed);
    }
    const std::string base = out_dir + "/" + mech + "_k" + std::to_string(k);
    agglab::save_privacy_curve(curve, base + ".csv", base + ".json", stamp);
    std::cout << "wrote " << base << ".csv";
    if (curve.zero_variance_seen) std::cout << "  [zero-variance conditionings seen]";
    std::cout << "\n";
  }
  return 0;
}

int run_checks_cmd(const std::string& suite, std::uint64_t seed,
                   const std::string& out_path) {
  const std::vector<agglab::CheckReport> reports =
      agglab::run_check_suite(suite, seed);
  const std::string stamp = "suite=" + suite + " seed=" + std::to_string(seed);
  agglab::write_check_reports_csv(reports, out_path, stamp);
  bool all_pass = true;
  for (const auto& r : reports) {
    std::cout << (r.pass ? "pass" : "FAIL") << "  " << r.name << "  "
              << r.params << "\n";
    all_pass = all_pass && r.pass;
  }
  std::cout << "wrote " << out_path << "\n";
  return all_pass ? 0 : 1;
}

int run_experiment_cmd(const std::string& config_path,
                       const std::vector<std::string>& overrides,
                       const std::string& out_dir_flag) {
  agglab::ConfigMap map = agglab::parse_config_text(agglab::read_file(config_path));
  for (const auto& o : overrides) agglab::apply_override(&map, o);
  const agglab::ExperimentConfig cfg = agglab::config_from_map(map);
  const agglab::ResultTable table = agglab::run_experiment(cfg);
  const std::string dir =
      !out_dir_flag.empty() ? out_dir_flag
                            : (!cfg.output_dir.empty() ? cfg.output_dir : "out");
  agglab::write_results(table, map, cfg, dir);
  std::cout << agglab::results_markdown(table, agglab::output_stamp(map, cfg.seeds));
  std::cout << "wrote " << dir << "/results.csv, results.md, runs.log\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"label-private aggregation mechanisms: experiments, audits, checks"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  DatasetFlags synth_flags;
  synth->add_option("--n", synth_flags.n, "rows");
  synth->add_option("--d", synth_flags.d, "feature dimension");
  synth->add_option("--gamma", synth_flags.gamma, "target optimal linear mse");
  synth->add_option("--b1", synth_flags.b1, "label bound");
  synth->add_option("--b2", synth_flags.b2, "feature norm bound");
  synth->add_option("--dataset-seed", synth_flags.dataset_seed, "generator seed");
  std::string synth_out = "dataset";
  synth->add_option("--out", synth_out, "output base path")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "dataset-level statistics");
  DatasetFlags stats_flags;
  stats_flags.attach(stats);

  // aggregate
  auto* aggregate = app.add_subcommand("aggregate", "run a mechanism and serialize it");
  DatasetFlags agg_flags;
  agg_flags.attach(aggregate);
  std::string agg_mech = "wtd-lba";
  Index agg_m = 100, agg_k = 10;
  double agg_rho = 0.0;
  std::uint64_t agg_seed = default_seed();
  std::string agg_out = "aggregated";
  aggregate->add_option("--mech", agg_mech, "mechanism kind")->required();
  aggregate->add_option("--m", agg_m, "number of bags")->required();
  aggregate->add_option("--k", agg_k, "bag size")->required();
  aggregate->add_option("--rho", agg_rho, "noisy label fraction");
  aggregate->add_option("--seed", agg_seed, "mechanism seed");
  aggregate->add_option("--out", agg_out, "output directory");

  // audit
  auto* audit = app.add_subcommand("audit", "numeric privacy audit");
  DatasetFlags audit_flags;
  audit_flags.attach(audit);
  std::string audit_mech = "wtd-lba";
  std::vector<Index> audit_k = {10};
  Index audit_m = 10;
  double audit_rho = 0.5;
  std::vector<double> audit_eps = {0.5, 1.0, 2.0};
  Index audit_ncond = 2000;
  Index audit_index = -1;
  std::uint64_t audit_seed = default_seed();
  std::string audit_out = "audit_out";
  audit->add_option("--mech", audit_mech, "mechanism kind")->required();
  audit->add_option("--k", audit_k, "bag sizes (comma separated)")->delimiter(',');
  audit->add_option("--m", audit_m, "number of bags (per-instance mechanisms)");
  audit->add_option("--rho", audit_rho, "noisy label fraction");
  audit->add_option("--eps", audit_eps, "epsilon grid")->delimiter(',');
  audit->add_option("--n-cond", audit_ncond, "conditioning samples");
  audit->add_option("--perturb-index", audit_index,
                    "row to perturb (default: largest-magnitude label)");
  audit->add_option("--seed", audit_seed, "audit seed");
  audit->add_option("--out", audit_out, "output directory");

  // checks
  auto* checks = app.add_subcommand("checks", "statistical verification harness");
  auto* checks_run = checks->add_subcommand("run", "run a check suite");
  std::string suite = "all";
  std::uint64_t checks_seed = default_seed();
  std::string checks_out = "report.csv";
  checks_run->add_option("--suite", suite, "concentration | utility | divergence | all");
  checks_run->add_option("--seed", checks_seed, "suite seed");
  checks_run->add_option("--out", checks_out, "report CSV path");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "config-driven grid runner");
  std::string config_path;
  std::vector<std::string> overrides;
  std::string exp_out;
  experiment->add_option("--config", config_path, "config file")->required();
  experiment->add_option("--set", overrides, "override section.key=value");
  experiment->add_option("--out-dir", exp_out, "output directory override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(synth_flags, synth_out);
    if (*stats) return run_stats(stats_flags);
    if (*aggregate) {
      return run_aggregate(agg_flags, agg_mech, agg_m, agg_k, agg_rho, agg_seed,
                           agg_out);
    }
    if (*audit) {
      return run_audit_cmd(audit_flags, audit_mech, audit_k, audit_m, audit_rho,
                           audit_eps, audit_ncond, audit_index, audit_seed,
                           audit_out);
    }
    if (*checks_run) return run_checks_cmd(suite, checks_seed, checks_out);
    if (*experiment) return run_experiment_cmd(config_path, overrides, exp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
