// SPDX-License-Identifier: Apache-2.0
//
// The slotted decision process: observation encoding, feasibility
// projections, constraint penalties, reward, and the per-slot transition.

#pragma once

#include "eesim/channel.hpp"
#include "eesim/config.hpp"
#include "eesim/uav.hpp"

#include <string>
#include <vector>

namespace eesim {

/// Flattened state vector. Channel features are normalized by the
/// geometry-predicted per-link RMS magnitude; kinematics pass through.
struct Observation {
  Vec features;
  int slot = 0;
};

/// Feature block offsets for a given config; the layout is fixed:
/// BS-surface matrix row-major (re, im per entry), surface->SU vectors in
/// user order, BS->SU vectors in user order, effective protection rows per
/// PU, previous phase angles, q, v, a, EE moving average, slot index.
struct ObservationLayout {
  int bs_irs = 0;
  int irs_su = 0;
  int bs_su = 0;
  int pu_eff = 0;
  int phases = 0;
  int kinematics = 0;
  int ee_ema = 0;
  int slot = 0;
  int total = 0;

  static ObservationLayout make(const SystemConfig& cfg);
  /// Span of user k's surface-side block.
  std::pair<int, int> irs_su_block(const SystemConfig& cfg, int k) const;
  std::pair<int, int> bs_su_block(const SystemConfig& cfg, int k) const;
};

int observation_length(const SystemConfig& cfg);

Observation encode_observation(const SystemConfig& cfg, const ChannelRealization& ch,
                               const IrsPhase& irs_prev, const UavState& uav, Real ee_ema,
                               int slot);

/// Joint discrete/continuous action. Raw fields are the pre-projection
/// values the learner emitted (and the replay stores); projected fields are
/// what the system executes.
struct HybridAction {
  MatInt x;          // (K+1) x D one-hot columns, row 0 = idle
  CMat w_raw;        // N_t x (K*D), column k*D+d
  CMat w;
  IrsPhase phi_raw;
  IrsPhase phi;
  Vec3 a_raw = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Vec raw_cont;      // flat (-1,1) sample backing the continuous fields

  Real total_tx_power_raw() const { return w_raw.squaredNorm(); }
  Real total_tx_power() const { return w.squaredNorm(); }
};

/// Per-slot diagnostics; the reward is recomputable from these.
struct SlotInfo {
  int slot = 0;
  Real scheduled_rate_bps = 0.0;  // S[t]
  Real e_prop_w = 0.0;
  Vec6 penalties = Vec6::Zero();  // G_pow, G_irs, G_spd, G_acc, G_intf, G_term
  Real reward = 0.0;
  Mat rates;                      // K x D
  Vec pu_intf_w;                  // D, from the executed (projected) action
  Vec3 q = Vec3::Zero();
  Real speed = 0.0;
};

struct StepOutcome {
  Real reward = 0.0;
  Observation next_observation;
  bool terminal = false;
  SlotInfo info;
};

/// Closed-form feasibility repairs: power ball for the beamformers, unit
/// circle for the reflection coefficients, acceleration ball (vertical
/// component zeroed first; flight is fixed-altitude). Raw fields are kept.
HybridAction project_actions(const HybridAction& raw, const SystemConfig& cfg);

/// Checks column-wise one-hot structure of an assignment matrix.
bool valid_assignment(const MatInt& x);

/// S[t] = sum_d sum_k x_{k,d} R_{k,d}; idle columns contribute nothing.
Real scheduled_sum_rate(const MatInt& x, const Mat& rates);

/// Relative constraint violations evaluated on the raw action and the raw
/// next kinematic state, so repairs by projection still produce pressure.
Vec6 compute_penalties(const HybridAction& action, const UavState& uav_raw_next,
                       const ChannelRealization& ch, const SystemConfig& cfg, int slot,
                       bool is_terminal);

/// S/(e_prop + eps) minus the weighted penalty sum; the terminal shaping
/// term fires only on the last slot.
Real reward(Real sum_rate, Real e_prop_ub, const Vec6& penalties, const Vec6& beta, Real epsilon,
            bool is_terminal);

/// The environment's slot dynamics for an already-projected acceleration:
/// Euler update, speed annulus projection, fixed altitude. Shared with the
/// planning baselines so their rollouts replay bit-exactly.
UavState advance_uav(const UavState& s, const Vec3& a_projected, const SystemConfig& cfg);

/// Episode state machine. Channels for (episode, slot) derive from the base
/// seed alone, so a trajectory replays bit-exactly from (config, seed).
class Environment {
 public:
  Environment(const SystemConfig& cfg, std::uint64_t seed);

  Observation reset();
  StepOutcome step(const HybridAction& action);

  const SystemConfig& config() const { return cfg_; }
  const ChannelRealization& channels() const { return channels_; }
  const IrsPhase& previous_phases() const { return irs_prev_; }
  const UavState& uav() const { return uav_; }
  const EnergyLedger& ledger() const { return ledger_; }
  const std::vector<SlotInfo>& episode_trace() const { return trace_; }
  Real ee_ema() const { return ee_ema_; }
  int slot() const { return slot_; }
  bool done() const { return done_; }
  int episode_index() const { return episode_ - 1; }

  /// Restores the per-run episode counter (used when resuming training).
  void set_next_episode(int episode) { episode_ = episode; }
  std::uint64_t seed() const { return seed_; }

  /// Final-mission energy efficiency from the ledger.
  Real episode_ee_lb() const { return ledger_.e_ub_j > 0 ? ledger_.bits_total / ledger_.e_ub_j : 0.0; }

 private:
  void draw_channels();
  Observation observe() const;

  SystemConfig cfg_;
  std::uint64_t seed_ = 0;
  int episode_ = 0;  // next episode index handed out by reset()
  int slot_ = 0;
  bool done_ = true;
  UavState uav_;
  Real v0_speed_ = 0.0;
  IrsPhase irs_prev_;
  ChannelRealization channels_;
  Real ee_ema_ = 0.0;
  EnergyLedger ledger_;
  std::vector<SlotInfo> trace_;
};

/// Trace export, one row per slot; header is schema-stable.
extern const char* kTraceCsvHeader;
std::string trace_to_csv(const std::vector<SlotInfo>& trace);
void write_trace_csv(const std::string& path, const std::vector<SlotInfo>& trace);

}  // namespace eesim
