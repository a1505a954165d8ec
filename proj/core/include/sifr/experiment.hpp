#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sifr/dataset.hpp"
#include "sifr/error.hpp"
#include "sifr/metrics.hpp"
#include "sifr/scm.hpp"
#include "sifr/training.hpp"

namespace sifr {

struct ConfigError : Error {
  using Error::Error;
};

// Flat key-value configuration with [section] headers; lists are
// comma-separated. See configs/ for the shipped experiment files.
struct ExperimentConfig {
  // [dataset]
  bool synth = true;
  std::string dataset_path;
  SynthParams synth_params;

  // [scm]
  ScmConfig scm;

  // [train]
  TrainConfig train_base;
  double val_fraction = 0.2;

  // [run]
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds{1};
  std::size_t sessions = 50000;
  std::vector<int> cutoffs{3, 5, 10};
  std::string out_dir = "runs";
  int threads = 1;
  bool oracle = false;
  int replay_rounds = 3;
};

ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::string& path);

// Known method names: naive, regress_em, ips_oracle, ips_learned, snips, dr,
// sif_e, sif_d, sif_ed, sif_ed_dr.
TrainConfig method_train_config(const std::string& method, const TrainConfig& base);
bool method_uses_learned_propensity(const std::string& method);

struct RunRecord {
  std::string method;
  std::uint64_t seed = 0;
  int round = -1;  // replay round; -1 for offline runs
  MetricReport metrics;
  ChannelLeakage final_exposure;
  ChannelLeakage final_decision;
  // Total clamped leakage at the end of the baseline phase and at the last
  // step, for contraction diagnostics.
  double leakage_initial_total = 0.0;
  double leakage_final_total = 0.0;
  double propensity_mae = -1.0;  // -1 when the method has no learned propensity
  double ess_final = 0.0;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string error;
};

// Builds (or loads) the dataset, splits off a validation set, and runs every
// (method, seed) pair: simulate, train, evaluate, audit. Per-run artifacts
// land under out_dir/<method>_seed<seed>/; a failing run is recorded and the
// remaining runs continue.
std::vector<RunRecord> run_offline(const ExperimentConfig& cfg);

// Online-style replay: round 0 logs with w_S, round r >= 1 logs with the
// round r-1 ranker as the logging policy.
std::vector<RunRecord> run_replay(const ExperimentConfig& cfg, int n_rounds);

// Table-style summary with per-method seed mean +- std and paired sign counts
// against the first method.
void write_summary_csv(const std::vector<RunRecord>& records, const ExperimentConfig& cfg,
                       std::ostream& out);

// Trace CSV emission (leakage/ESS/lambda/NDCG vs step).
inline void emit_diagnostics(const TrainTrace& trace, const std::string& out_dir,
                             const std::string& prefix = "trace") {
  write_trace_csv(trace, out_dir, prefix);
}

// Splits a dataset into train/validation groups by query index stride.
void split_dataset(const Dataset& full, double val_fraction, Dataset& train,
                   std::vector<const QueryGroup*>& val_groups);

// Exposure-propensity audit grid: oracle vs learned over (validation doc,
// position) pairs, both normalized by their position-1 mean.
struct PropensityAudit {
  double mae = 0.0;
  std::vector<double> oracle_by_position;   // averaged over the grid
  std::vector<double> learned_by_position;
};

PropensityAudit audit_exposure_propensity(
    const std::vector<const QueryGroup*>& groups, const ScmConfig& scm,
    const std::vector<int>& g_indices, int cutoff,
    const std::function<double(const Document&, int)>& learned);

}  // namespace sifr
