// SPDX-License-Identifier: Apache-2.0

#include "eesim/experiments.hpp"

#include "eesim/csv.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace eesim {

namespace fs = std::filesystem;

std::string prepare_out_dir(const std::string& out) {
  fs::path p(out);
  if (p.is_relative()) {
    if (const char* root = std::getenv("EESIM_OUT_ROOT")) p = fs::path(root) / p;
  }
  fs::create_directories(p);
  return p.string();
}

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write file: " + path);
  f << content;
}

PolicyFn build_policy(const std::string& policy, const SystemConfig& sys_cfg, const Config& cfg,
                      std::uint64_t seed, std::vector<std::shared_ptr<void>>& keep_alive) {
  if (policy == "random") return make_random_policy(sys_cfg, derive_seed(seed, 0xba5e));
  if (policy == "no_irs") return make_no_irs_policy(sys_cfg);
  if (policy == "ao") {
    auto plan = std::make_shared<AoResult>(ao_lite(sys_cfg, seed, 3));
    keep_alive.push_back(plan);
    return make_ao_policy(*plan);
  }
  // Anything else is a checkpoint path.
  auto agent = std::make_shared<HybridAgent>(HybridAgent::load_checkpoint(policy, cfg));
  keep_alive.push_back(agent);
  return make_agent_policy(*agent);
}

SystemConfig system_for_policy(const std::string& policy, const SystemConfig& base) {
  SystemConfig s = base;
  if (policy == "no_irs") s.irs_enabled = false;
  return s;
}

}  // namespace

TrainArtifacts run_train(const Config& cfg, std::uint64_t seed, const std::string& out_dir) {
  const std::string dir = prepare_out_dir(out_dir);
  HybridAgent agent(cfg, seed);
  const TrainReport report = train_agent(agent, cfg.train.episodes);

  TrainArtifacts art;
  art.report_csv = dir + "/train_report.csv";
  art.checkpoint = dir + "/checkpoint.bin";
  art.resolved_config = dir + "/resolved_config.json";
  write_file(art.report_csv, train_report_to_csv(report));
  agent.save_checkpoint(art.checkpoint);
  write_file(art.resolved_config, resolved_config_json(cfg) + "\n");
  return art;
}

const char* kEvalCsvHeader = "policy,seed,ee_lb,bits_total,energy_ub,max_pu_intf_dbm";
const char* kAggregateCsvHeader =
    "policy,n_seeds,ee_lb_mean,ee_lb_std,bits_total_mean,bits_total_std,energy_ub_mean,"
    "energy_ub_std,max_pu_intf_dbm_mean,max_pu_intf_dbm_std";
const char* kSweepCsvHeader =
    "policy,axis,value,seed,mean_sum_rate_bps,ee_lb,bits_total,energy_ub";

EvalSummary run_eval(const std::string& policy, const Config& cfg,
                     const std::vector<std::uint64_t>& seeds, const std::string& out_dir) {
  if (seeds.empty()) throw ConfigError("eval: need at least one seed");
  const std::string dir = prepare_out_dir(out_dir);
  const SystemConfig sys_cfg = system_for_policy(policy, cfg.system);

  EvalSummary summary;
  Mat metrics(4, static_cast<Eigen::Index>(seeds.size()));
  const std::string tag = policy == "random" || policy == "no_irs" || policy == "ao"
                              ? policy
                              : "checkpoint";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    std::vector<std::shared_ptr<void>> keep_alive;
    const PolicyFn fn = build_policy(policy, sys_cfg, cfg, seeds[i], keep_alive);
    Environment env(sys_cfg, seeds[i]);
    const EpisodeResult res = rollout(env, fn);

    EvalRow row;
    row.policy = tag;
    row.seed = seeds[i];
    row.ee_lb = res.ee_lb;
    row.bits_total = res.bits_total;
    row.energy_ub = res.energy_ub;
    row.max_pu_intf_dbm = watt_to_dbm(res.max_pu_intf_w);
    summary.per_seed.push_back(row);
    metrics.col(static_cast<Eigen::Index>(i)) =
        Eigen::Vector4d(row.ee_lb, row.bits_total, row.energy_ub, row.max_pu_intf_dbm);

    write_trace_csv(dir + "/trace_" + tag + "_seed" + std::to_string(seeds[i]) + ".csv",
                    res.trace);
  }
  summary.mean = metrics.rowwise().mean();
  for (int r = 0; r < 4; ++r) {
    const Real m = summary.mean[r];
    Real acc = 0.0;
    for (Eigen::Index c = 0; c < metrics.cols(); ++c) acc += (metrics(r, c) - m) * (metrics(r, c) - m);
    summary.stddev[r] = std::sqrt(acc / metrics.cols());
  }

  std::string per_seed_csv(kEvalCsvHeader);
  per_seed_csv += "\n";
  for (const auto& r : summary.per_seed) {
    csv::Row row;
    row.add(r.policy);
    row.add(static_cast<unsigned long long>(r.seed));
    row.add(r.ee_lb);
    row.add(r.bits_total);
    row.add(r.energy_ub);
    row.add(r.max_pu_intf_dbm);
    per_seed_csv += row.str();
    per_seed_csv += "\n";
  }
  write_file(dir + "/eval_seeds.csv", per_seed_csv);

  std::string agg(kAggregateCsvHeader);
  agg += "\n";
  {
    csv::Row row;
    row.add(tag);
    row.add(static_cast<int>(seeds.size()));
    for (int r = 0; r < 4; ++r) {
      row.add(summary.mean[r]);
      row.add(summary.stddev[r]);
    }
    agg += row.str();
    agg += "\n";
  }
  write_file(dir + "/aggregate.csv", agg);
  return summary;
}

std::vector<SweepPoint> run_sweep(const Config& cfg, const std::string& axis,
                                  const std::vector<Real>& values,
                                  const std::vector<std::string>& policies,
                                  const std::vector<std::uint64_t>& seeds,
                                  const std::string& out_dir) {
  if (axis != "p_max_dbm" && axis != "mission_seconds")
    throw ConfigError("sweep: unknown axis '" + axis + "'");
  if (values.size() < 2) throw ConfigError("sweep: need at least two axis values");
  if (policies.empty() || seeds.empty()) throw ConfigError("sweep: need policies and seeds");
  const std::string dir = prepare_out_dir(out_dir);

  std::vector<SweepPoint> points;
  for (const auto& policy : policies) {
    for (Real value : values) {
      Config point_cfg = cfg;
      if (axis == "p_max_dbm") {
        point_cfg.system.p_max_dbm = value;
      } else {
        const int slots = static_cast<int>(std::round(value / point_cfg.system.slot_seconds));
        if (slots < 1) throw ConfigError("sweep: mission_seconds too small");
        point_cfg.system.num_slots = slots;
      }
      point_cfg.validate();
      const SystemConfig sys_cfg = system_for_policy(policy, point_cfg.system);
      for (std::uint64_t seed : seeds) {
        std::vector<std::shared_ptr<void>> keep_alive;
        const PolicyFn fn = build_policy(policy, sys_cfg, point_cfg, seed, keep_alive);
        Environment env(sys_cfg, seed);
        const EpisodeResult res = rollout(env, fn);
        SweepPoint p;
        p.policy = policy;
        p.axis = axis;
        p.value = value;
        p.seed = seed;
        p.mean_sum_rate_bps = res.bits_total / (sys_cfg.num_slots * sys_cfg.slot_seconds);
        p.ee_lb = res.ee_lb;
        p.bits_total = res.bits_total;
        p.energy_ub = res.energy_ub;
        points.push_back(p);
      }
    }
  }

  std::string out(kSweepCsvHeader);
  out += "\n";
  for (const auto& p : points) {
    csv::Row row;
    row.add(p.policy);
    row.add(p.axis);
    row.add(p.value);
    row.add(static_cast<unsigned long long>(p.seed));
    row.add(p.mean_sum_rate_bps);
    row.add(p.ee_lb);
    row.add(p.bits_total);
    row.add(p.energy_ub);
    out += row.str();
    out += "\n";
  }
  write_file(dir + "/sweep.csv", out);

  // Index written last so readers can treat its presence as completion.
  nlohmann::json index;
  index["files"] = {"sweep.csv"};
  index["axis"] = axis;
  index["policies"] = policies;
  write_file(dir + "/index.json", index.dump(2) + "\n");
  return points;
}

namespace {

std::vector<std::uint64_t> parse_seeds(const std::vector<std::string>& raw) {
  std::vector<std::uint64_t> seeds;
  for (const auto& s : raw) seeds.push_back(std::stoull(s));
  return seeds;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"IRS-assisted UAV spectrum-sharing simulator and learner"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", policy = "random", axis = "p_max_dbm";
  std::uint64_t seed = 1;
  std::vector<std::string> seed_strs;
  std::vector<Real> values;
  std::vector<std::string> policies;

  auto* train_cmd = app.add_subcommand("train", "train the hybrid agent");
  train_cmd->add_option("--config", config_path, "config JSON path")->required();
  train_cmd->add_option("--seed", seed, "training seed");
  train_cmd->add_option("--out", out_dir, "output directory");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a policy or checkpoint");
  eval_cmd->add_option("--config", config_path, "config JSON path")->required();
  eval_cmd->add_option("--policy", policy, "random | no_irs | ao | <checkpoint path>");
  eval_cmd->add_option("--seeds", seed_strs, "evaluation seeds")->required();
  eval_cmd->add_option("--out", out_dir, "output directory");

  auto* sweep_cmd = app.add_subcommand("sweep", "sweep an axis over policies and seeds");
  sweep_cmd->add_option("--config", config_path, "config JSON path")->required();
  sweep_cmd->add_option("--axis", axis, "p_max_dbm | mission_seconds");
  sweep_cmd->add_option("--values", values, "axis values")->required();
  sweep_cmd->add_option("--policies", policies, "policies to sweep")->required();
  sweep_cmd->add_option("--seeds", seed_strs, "seeds")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory");

  std::vector<std::string> argv_vec = args;
  std::vector<const char*> argv;
  argv.push_back("eesim");
  for (const auto& a : argv_vec) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    const Config cfg = load_config(config_path);
    if (train_cmd->parsed()) {
      run_train(cfg, seed, out_dir);
    } else if (eval_cmd->parsed()) {
      run_eval(policy, cfg, parse_seeds(seed_strs), out_dir);
    } else if (sweep_cmd->parsed()) {
      run_sweep(cfg, axis, values, policies, parse_seeds(seed_strs), out_dir);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace eesim
