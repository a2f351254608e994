// SPDX-License-Identifier: Apache-2.0
//
// System, agent, and run configuration. A config fully determines a run
// together with a seed; the resolved JSON snapshot round-trips bit-exactly.

#pragma once

#include "eesim/types.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace eesim {

/// Thrown on invalid or unreadable configuration; message names the field.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Physical and protocol constants of the simulated system.
struct SystemConfig {
  // Radio
  Real carrier_freq_hz = 2.5e9;
  Real bandwidth_hz = 10e6;
  int num_subcarriers = 64;   // D
  int num_bs_antennas = 4;    // N_t
  int num_irs_elements = 64;  // N_I
  int num_sus = 4;            // K
  int num_pus = 4;            // D_p
  Real noise_psd_dbm_hz = -174.0;
  Real noise_figure_db = 9.0;
  Real p_max_dbm = 30.0;
  Real gamma_d_dbm = -90.0;  // per-subcarrier PU interference threshold

  // Kinematics and mission
  Real v_max = 20.0;
  Real v_min = 3.0;
  Real a_max = 5.0;
  Real altitude_m = 100.0;
  Real slot_seconds = 1.0;
  int num_slots = 40;  // N
  Real c1 = 9.26e-4;
  Real c2 = 2250.0;
  Real gravity = 9.8;
  Real uav_mass_kg = 10.0;
  Vec3 q0{-200.0, 0.0, 100.0};
  Vec3 qF{200.0, 0.0, 100.0};

  // Reward shaping
  Vec6 beta = (Vec6() << 1.0, 1.0, 1.0, 1.0, 1.0, 10.0).finished();
  Real epsilon = 1e-6;
  Real ema_rho = 0.1;

  // Channel model
  Real rician_k_db = 10.0;
  Real pathloss_exp_los = 2.2;
  Real pathloss_exp_nlos = 3.5;
  bool irs_enabled = true;
  Real pu_extra_noise_w = 0.0;  // optional fixed primary-interference floor at SUs

  // Node geometry (ground z = 0; BS elevated)
  Vec3 bs_position{0.0, -30.0, 25.0};
  std::vector<Vec3> su_positions;  // defaults synthesized when empty
  std::vector<Vec3> pu_positions;

  // Continuous-action packing: full per-(user,subcarrier) beamformers up to
  // this many subcarriers, one direction per user plus power scalars beyond.
  int wideband_threshold = 8;

  Real noise_psd_w_hz() const { return dbm_to_watt(noise_psd_dbm_hz); }
  Real noise_figure_linear() const { return db_to_linear(noise_figure_db); }
  Real p_max_w() const { return dbm_to_watt(p_max_dbm); }
  Real gamma_d_w() const { return dbm_to_watt(gamma_d_dbm); }
  Real wavelength_m() const { return kSpeedOfLight / carrier_freq_hz; }
  Real subcarrier_bw_hz() const { return bandwidth_hz / num_subcarriers; }
  bool wideband_mode() const { return num_subcarriers > wideband_threshold; }

  /// PU protected on subcarrier d (0-based round-robin).
  int pu_of_subcarrier(int d) const { return d % num_pus; }

  /// Fills su/pu positions with deterministic placements along the mission
  /// corridor when none are configured.
  void synthesize_positions();

  /// Validates every invariant; throws ConfigError naming the first bad field.
  void validate() const;
};

/// Learner hyperparameters.
struct AgentConfig {
  Real gamma = 0.99;
  Real tau = 0.005;
  Real lr_q = 3e-4;
  Real lr_critic = 3e-4;
  Real lr_actor = 3e-4;
  Real lr_alpha = 3e-4;
  int batch_size = 64;
  int grad_steps = 1;  // G
  int buffer_capacity = 100000;
  Real target_entropy = 0.0;  // 0 -> auto: -dim(continuous action)
  Real eps_start = 1.0;
  Real eps_end = 0.05;
  Real eps_decay_frac = 0.3;  // fraction of episodes for the linear decay
  std::vector<int> encoder_hidden{128, 128};
  std::vector<int> head_hidden{64, 64};
  Real reward_scale = 1e-5;  // applied to rewards inside TD targets only
  Real log_std_min = -20.0;
  Real log_std_max = 2.0;
  Real init_alpha = 0.2;

  void validate() const;
};

/// Episode counts for training runs.
struct TrainConfig {
  int episodes = 300;
  int eval_episodes = 20;

  void validate() const;
};

struct Config {
  SystemConfig system;
  AgentConfig agent;
  TrainConfig train;

  void validate() const {
    system.validate();
    agent.validate();
    train.validate();
  }
};

/// Paper-scale defaults.
Config paper_profile();

/// Small profile used by CI and the acceptance suite.
Config desk_profile();

/// Loads a config from a JSON file; unknown keys are rejected.
Config load_config(const std::string& path);

/// Parses a config from a JSON string (same rules as load_config).
Config parse_config(const std::string& json_text);

/// Serializes with every default materialized; reloading reproduces the
/// run bit-exactly.
std::string resolved_config_json(const Config& cfg);

/// FNV-1a hash of the resolved snapshot; stored in checkpoints.
std::uint64_t config_hash(const Config& cfg);

}  // namespace eesim
