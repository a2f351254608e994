// SPDX-License-Identifier: Apache-2.0
//
// Experiment runners behind the command-line tool: training, paired-seed
// evaluation, and axis sweeps. All outputs are schema-stable CSV plus a
// resolved config snapshot.

#pragma once

#include "eesim/agent.hpp"
#include "eesim/baselines.hpp"
#include "eesim/config.hpp"

#include <string>
#include <vector>

namespace eesim {

/// Resolves an output directory against the EESIM_OUT_ROOT override and
/// creates it.
std::string prepare_out_dir(const std::string& out);

struct TrainArtifacts {
  std::string report_csv;
  std::string checkpoint;
  std::string resolved_config;
};

/// Trains from scratch and writes train_report.csv, checkpoint.bin, and
/// resolved_config.json under out_dir.
TrainArtifacts run_train(const Config& cfg, std::uint64_t seed, const std::string& out_dir);

struct EvalRow {
  std::string policy;
  std::uint64_t seed = 0;
  Real ee_lb = 0.0;
  Real bits_total = 0.0;
  Real energy_ub = 0.0;
  Real max_pu_intf_dbm = 0.0;
};

struct EvalSummary {
  std::vector<EvalRow> per_seed;
  // mean/std over seeds, in row order ee_lb, bits, energy, max_pu_intf_dbm
  Vec mean = Vec::Zero(4);
  Vec stddev = Vec::Zero(4);
};

extern const char* kEvalCsvHeader;
extern const char* kAggregateCsvHeader;
extern const char* kSweepCsvHeader;

/// Evaluates one policy ("random", "no_irs", "ao", or a checkpoint path) on
/// each seed; writes per-seed traces, eval_seeds.csv, and aggregate.csv.
EvalSummary run_eval(const std::string& policy, const Config& cfg,
                     const std::vector<std::uint64_t>& seeds, const std::string& out_dir);

struct SweepPoint {
  std::string policy;
  std::string axis;
  Real value = 0.0;
  std::uint64_t seed = 0;
  Real mean_sum_rate_bps = 0.0;
  Real ee_lb = 0.0;
  Real bits_total = 0.0;
  Real energy_ub = 0.0;
};

/// Sweeps p_max_dbm or mission_seconds over the given values for each policy
/// and seed; writes sweep.csv and an index.json last.
std::vector<SweepPoint> run_sweep(const Config& cfg, const std::string& axis,
                                  const std::vector<Real>& values,
                                  const std::vector<std::string>& policies,
                                  const std::vector<std::uint64_t>& seeds,
                                  const std::string& out_dir);

/// Full command-line entry point; returns the process exit code
/// (0 success, 1 runtime failure, 2 usage or config error).
int cli_main(const std::vector<std::string>& args);

}  // namespace eesim
