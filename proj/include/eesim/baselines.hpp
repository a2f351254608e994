// SPDX-License-Identifier: Apache-2.0
//
// Reference policies for comparison runs: random-feasible, direct-link-only,
// and a deterministic alternating-improvement heuristic over a restricted
// trajectory family. Plus the shared episode rollout plumbing.

#pragma once

#include "eesim/agent.hpp"
#include "eesim/env.hpp"

#include <functional>

namespace eesim {

/// Channels a policy can reconstruct from an observation (normalization is
/// invertible given the geometry carried in the same observation).
struct DecodedChannels {
  CMat h_bs_irs;
  std::vector<CVec> h_irs_su;
  std::vector<CVec> h_bs_su;
  UavState uav;
  IrsPhase phases_prev;
  int slot = 0;
};

DecodedChannels decode_observation(const Observation& obs, const SystemConfig& cfg);

/// Uniform feasible action: one-hot columns uniform over users plus idle,
/// continuous raws uniform in (-1,1), projections applied.
HybridAction policy_random(const Observation& obs, const SystemConfig& cfg, RngStream& rng);

/// Direct-link policy: maximum-ratio directions on the BS->SU channels with
/// the full power budget split equally across subcarriers, greedy assignment
/// to the highest-rate user, and a straight tracked flight toward qF.
/// Meant to run against a config with irs_enabled = false.
HybridAction policy_no_irs(const Observation& obs, const SystemConfig& cfg);

/// Maximum-ratio beamformers for an assignment: the user scheduled on each
/// subcarrier gets sqrt(p) g_k / |g_k| with power split equally over the
/// assigned subcarriers (zero-channel assignments are left idle).
CMat mrt_beamformers(const CMat& g_rows, const MatInt& x, Real p_total, int num_subcarriers);

/// Single-beam variant used where no assignment exists yet.
CVec mrt_single(const CRowVec& g_row, Real power);

/// Phases that co-phase every reflected term with the direct term of one
/// target user, maximizing |g^H w| over unit-modulus coefficients for the
/// given beamformer.
IrsPhase align_irs_phases(const CVec& h_d, const CVec& h_r, const CMat& h_bs_irs, const CVec& w);

struct AoOptions {
  int rounds = 3;
  int grid_half = 2;             // (2*grid_half+1)^2 candidate mid-waypoints per round
  Real init_spacing_frac = 0.25; // of the mission span; halves each round
};

struct AoResult {
  std::vector<UavState> trajectory;     // N+1 states
  std::vector<HybridAction> actions;    // N slot actions, feasible as built
  Real ee_lb = 0.0;
  std::vector<Real> round_ee;           // nondecreasing
};

/// Deterministic coordinate improvement: greedy scheduling, MRT beamforming,
/// surface phases aligned to the strongest scheduled user, and a mid-waypoint
/// line search over a refining grid. Current-slot channel knowledge only.
AoResult ao_lite(const SystemConfig& cfg, std::uint64_t seed, int num_rounds);
AoResult ao_lite(const SystemConfig& cfg, std::uint64_t seed, const AoOptions& options);

// --- rollout plumbing -------------------------------------------------

using PolicyFn = std::function<HybridAction(const Observation&)>;

struct EpisodeResult {
  Real ret = 0.0;
  Real ee_lb = 0.0;
  Real bits_total = 0.0;
  Real energy_ub = 0.0;
  Real max_pu_intf_w = 0.0;
  std::vector<SlotInfo> trace;
};

EpisodeResult rollout(Environment& env, const PolicyFn& policy);

/// Policy adapters for evaluation runs.
PolicyFn make_random_policy(const SystemConfig& cfg, std::uint64_t seed);
PolicyFn make_no_irs_policy(const SystemConfig& cfg);
PolicyFn make_agent_policy(const HybridAgent& agent);
/// Replays the planned slot actions of an ao_lite solution.
PolicyFn make_ao_policy(const AoResult& plan);

}  // namespace eesim
