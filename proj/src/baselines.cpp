// SPDX-License-Identifier: Apache-2.0

#include "eesim/baselines.hpp"

#include <memory>

namespace eesim {

DecodedChannels decode_observation(const Observation& obs, const SystemConfig& cfg) {
  const ObservationLayout l = ObservationLayout::make(cfg);
  if (obs.features.size() != l.total)
    throw std::invalid_argument("decode_observation: feature length mismatch");
  DecodedChannels out;
  const Vec& x = obs.features;

  out.uav.q = Vec3(x[l.kinematics], x[l.kinematics + 1], x[l.kinematics + 2]);
  out.uav.v = Vec3(x[l.kinematics + 3], x[l.kinematics + 4], x[l.kinematics + 5]);
  out.uav.a = Vec3(x[l.kinematics + 6], x[l.kinematics + 7], x[l.kinematics + 8]);
  out.slot = obs.slot;

  const LinkScales s = link_scales(cfg, out.uav.q);

  out.h_bs_irs.resize(cfg.num_irs_elements, cfg.num_bs_antennas);
  int pos = l.bs_irs;
  for (int r = 0; r < cfg.num_irs_elements; ++r)
    for (int c = 0; c < cfg.num_bs_antennas; ++c) {
      out.h_bs_irs(r, c) = s.bs_irs * Complex(x[pos], x[pos + 1]);
      pos += 2;
    }

  out.h_irs_su.resize(cfg.num_sus);
  pos = l.irs_su;
  for (int k = 0; k < cfg.num_sus; ++k) {
    out.h_irs_su[k].resize(cfg.num_irs_elements);
    for (int i = 0; i < cfg.num_irs_elements; ++i) {
      out.h_irs_su[k][i] = s.irs_su[k] * Complex(x[pos], x[pos + 1]);
      pos += 2;
    }
  }

  out.h_bs_su.resize(cfg.num_sus);
  pos = l.bs_su;
  for (int k = 0; k < cfg.num_sus; ++k) {
    out.h_bs_su[k].resize(cfg.num_bs_antennas);
    for (int i = 0; i < cfg.num_bs_antennas; ++i) {
      out.h_bs_su[k][i] = s.bs_su[k] * Complex(x[pos], x[pos + 1]);
      pos += 2;
    }
  }

  Vec theta(cfg.num_irs_elements);
  for (int i = 0; i < cfg.num_irs_elements; ++i) theta[i] = x[l.phases + i];
  out.phases_prev = IrsPhase::from_phases(theta);
  return out;
}

HybridAction policy_random(const Observation& obs, const SystemConfig& cfg, RngStream& rng) {
  (void)obs;
  const ContinuousLayout l = ContinuousLayout::make(cfg);
  Vec raw(l.dim);
  for (int i = 0; i < l.dim; ++i) raw[i] = rng.uniform(-1.0, 1.0);
  HybridAction a = decode_continuous(raw, cfg);
  a.x = MatInt::Zero(cfg.num_sus + 1, cfg.num_subcarriers);
  for (int d = 0; d < cfg.num_subcarriers; ++d) a.x(rng.uniform_int(cfg.num_sus + 1), d) = 1;
  return project_actions(a, cfg);
}

namespace {

// Tracked flight toward a target point: chase the speed needed to arrive on
// time, clamped to the admissible range.
Vec3 tracking_accel(const UavState& uav, const Vec3& target, int slots_remaining,
                    const SystemConfig& cfg) {
  Vec3 to_target = target - uav.q;
  to_target.z() = 0.0;
  const Real dist = to_target.norm();
  const Real horizon = std::max(1, slots_remaining) * cfg.slot_seconds;
  const Real speed = std::clamp(dist / horizon, cfg.v_min, cfg.v_max);
  const Vec3 dir = dist > 1e-9 ? Vec3(to_target / dist) : Vec3(uav.v.x(), uav.v.y(), 0.0).normalized();
  Vec3 a = (speed * dir - uav.v) / cfg.slot_seconds;
  a.z() = 0.0;
  const Real an = a.norm();
  if (an > cfg.a_max) a *= cfg.a_max / an;
  return a;
}

}  // namespace

HybridAction policy_no_irs(const Observation& obs, const SystemConfig& cfg) {
  const DecodedChannels ch = decode_observation(obs, cfg);
  const int n_d = cfg.num_subcarriers;
  const Real p_per_sc = cfg.p_max_w() / n_d;
  const Real sigma2 = noise_variance(cfg.noise_psd_w_hz(), cfg.bandwidth_hz, n_d,
                                     cfg.noise_figure_linear()) +
                      cfg.pu_extra_noise_w;

  // Direct-only rate of each user under its own maximum-ratio beam; the
  // highest-rate user takes every subcarrier.
  int best = 0;
  Real best_rate = -1.0;
  for (int k = 0; k < cfg.num_sus; ++k) {
    const Real gain = ch.h_bs_su[k].squaredNorm();
    const Real rate = su_rate(p_per_sc * gain / sigma2, cfg.bandwidth_hz, n_d);
    if (rate > best_rate + 1e-15) {
      best = k;
      best_rate = rate;
    }
  }

  HybridAction a;
  a.x = MatInt::Zero(cfg.num_sus + 1, n_d);
  a.w_raw = CMat::Zero(cfg.num_bs_antennas, cfg.num_sus * n_d);
  const Real gn = ch.h_bs_su[best].norm();
  for (int d = 0; d < n_d; ++d) {
    a.x(best + 1, d) = 1;
    if (gn > 0) a.w_raw.col(beam_col(best, d, n_d)) = std::sqrt(p_per_sc) / gn * ch.h_bs_su[best];
  }
  a.phi_raw = IrsPhase::zeros(cfg.num_irs_elements);
  a.a_raw = tracking_accel(ch.uav, cfg.qF, cfg.num_slots - ch.slot, cfg);
  return project_actions(a, cfg);
}

CVec mrt_single(const CRowVec& g_row, Real power) {
  const Real n = g_row.norm();
  if (n == 0) return CVec::Zero(g_row.size());
  return std::sqrt(power) / n * g_row.adjoint();
}

CMat mrt_beamformers(const CMat& g_rows, const MatInt& x, Real p_total, int num_subcarriers) {
  const int k_users = static_cast<int>(g_rows.rows());
  const int n_t = static_cast<int>(g_rows.cols());
  if (x.rows() != k_users + 1 || x.cols() != num_subcarriers)
    throw std::invalid_argument("mrt_beamformers: assignment shape mismatch");
  int active = 0;
  for (int d = 0; d < num_subcarriers; ++d)
    for (int k = 0; k < k_users; ++k)
      if (x(k + 1, d) == 1 && g_rows.row(k).norm() > 0) ++active;
  CMat w = CMat::Zero(n_t, k_users * num_subcarriers);
  if (active == 0) return w;
  const Real p = p_total / active;
  for (int d = 0; d < num_subcarriers; ++d)
    for (int k = 0; k < k_users; ++k)
      if (x(k + 1, d) == 1)
        w.col(beam_col(k, d, num_subcarriers)) = mrt_single(g_rows.row(k), p);
  return w;
}

IrsPhase align_irs_phases(const CVec& h_d, const CVec& h_r, const CMat& h_bs_irs, const CVec& w) {
  const Complex direct = h_d.adjoint() * w;
  const Real target = std::abs(direct) > 0 ? std::arg(direct) : 0.0;
  const CVec hw = h_bs_irs * w;
  Vec theta(h_r.size());
  for (int i = 0; i < h_r.size(); ++i) {
    const Complex cascade = std::conj(h_r[i]) * hw[i];
    theta[i] = std::abs(cascade) > 0 ? target - std::arg(cascade) : 0.0;
  }
  return IrsPhase::from_phases(theta);
}

namespace {

struct SlotPlan {
  MatInt x;
  CMat w;
  IrsPhase phi;
  Real scheduled_rate = 0.0;
};

// Greedy schedule, MRT beams, phases aligned to the strongest scheduled
// user, then final rates. Deterministic.
SlotPlan plan_slot_radio(const SystemConfig& cfg, const ChannelRealization& ch) {
  const int n_d = cfg.num_subcarriers;
  const int k_users = cfg.num_sus;
  SlotPlan plan;

  // Tentative per-user rates under neutral phases.
  const IrsPhase phi0 = IrsPhase::zeros(cfg.num_irs_elements);
  CMat g0(k_users, cfg.num_bs_antennas);
  for (int k = 0; k < k_users; ++k)
    g0.row(k) = cfg.irs_enabled
                    ? effective_channel(ch.h_bs_su[k], ch.h_irs_su[k], phi0, ch.h_bs_irs)
                    : CRowVec(ch.h_bs_su[k].adjoint());
  const Real p_per_sc = cfg.p_max_w() / n_d;
  Vec tentative(k_users);
  for (int k = 0; k < k_users; ++k) {
    const Real sigma2 = ch.noise_var_w(k, 0) + cfg.pu_extra_noise_w;
    tentative[k] = su_rate(p_per_sc * g0.row(k).squaredNorm() / sigma2, cfg.bandwidth_hz, n_d);
  }
  int best = 0;
  for (int k = 1; k < k_users; ++k)
    if (tentative[k] > tentative[best]) best = k;

  plan.x = MatInt::Zero(k_users + 1, n_d);
  for (int d = 0; d < n_d; ++d) plan.x(best + 1, d) = 1;

  if (cfg.irs_enabled && cfg.num_irs_elements > 0) {
    const CVec w_probe = mrt_single(g0.row(best), p_per_sc);
    plan.phi = align_irs_phases(ch.h_bs_su[best], ch.h_irs_su[best], ch.h_bs_irs, w_probe);
  } else {
    plan.phi = IrsPhase::zeros(cfg.num_irs_elements);
  }

  CMat g(k_users, cfg.num_bs_antennas);
  for (int k = 0; k < k_users; ++k)
    g.row(k) = cfg.irs_enabled
                   ? effective_channel(ch.h_bs_su[k], ch.h_irs_su[k], plan.phi, ch.h_bs_irs)
                   : CRowVec(ch.h_bs_su[k].adjoint());
  plan.w = mrt_beamformers(g, plan.x, cfg.p_max_w(), n_d);
  plan.scheduled_rate = scheduled_sum_rate(plan.x, rate_matrix(cfg, ch, plan.phi, plan.w));
  return plan;
}

UavState initial_state(const SystemConfig& cfg) {
  UavState s;
  s.q = cfg.q0;
  s.q.z() = cfg.altitude_m;
  Vec3 dir = cfg.qF - cfg.q0;
  dir.z() = 0.0;
  s.v = dir.norm() > 0 ? Vec3(dir.normalized() * cfg.v_min) : Vec3(cfg.v_min, 0.0, 0.0);
  s.a = Vec3::Zero();
  return s;
}

struct CandidateEval {
  Real ee = 0.0;
  std::vector<UavState> traj;
  std::vector<HybridAction> actions;
};

CandidateEval evaluate_waypoint(const SystemConfig& cfg, std::uint64_t seed, const Vec3& mid) {
  CandidateEval ev;
  UavState s = initial_state(cfg);
  ev.traj.push_back(s);
  Real bits = 0.0, energy = 0.0;
  bool phase1 = (mid - cfg.q0).norm() > 1e-9;
  for (int t = 0; t < cfg.num_slots; ++t) {
    Vec3 hq = s.q;
    if (phase1 && (mid - hq).head<2>().norm() < cfg.v_max * cfg.slot_seconds) phase1 = false;
    const Vec3 target = phase1 ? mid : cfg.qF;
    int slots_left = cfg.num_slots - t;
    // Budget slots proportionally when still heading for the waypoint.
    if (phase1) {
      const Real l1 = (mid - s.q).head<2>().norm();
      const Real l2 = (cfg.qF - mid).head<2>().norm();
      if (l1 + l2 > 0) slots_left = std::max(1, static_cast<int>(std::round(slots_left * l1 / (l1 + l2))));
    }
    const Vec3 a_cmd = tracking_accel(s, target, slots_left, cfg);

    RngStream rng(derive_seed(seed, 0, static_cast<std::uint64_t>(t)));
    const ChannelRealization ch = generate_channels(cfg, s.q, cfg.su_positions, cfg.pu_positions,
                                                    cfg.bs_position, rng);
    const SlotPlan plan = plan_slot_radio(cfg, ch);

    HybridAction act;
    act.x = plan.x;
    act.w_raw = plan.w;
    act.w = plan.w;
    act.phi_raw = plan.phi;
    act.phi = plan.phi;
    act.a_raw = a_cmd;
    act.a = a_cmd;
    ev.actions.push_back(act);

    bits += plan.scheduled_rate * cfg.slot_seconds;
    energy += cfg.slot_seconds * propulsion_integrand_ub(s.v, a_cmd, cfg.c1, cfg.c2, cfg.gravity);
    s = advance_uav(s, a_cmd, cfg);
    ev.traj.push_back(s);
  }
  ev.ee = energy > 0 ? bits / energy : 0.0;
  return ev;
}

}  // namespace

AoResult ao_lite(const SystemConfig& cfg, std::uint64_t seed, int num_rounds) {
  AoOptions opt;
  opt.rounds = num_rounds;
  return ao_lite(cfg, seed, opt);
}

AoResult ao_lite(const SystemConfig& cfg, std::uint64_t seed, const AoOptions& options) {
  if (options.rounds < 1) throw std::invalid_argument("ao_lite: num_rounds must be >= 1");
  SystemConfig c = cfg;
  if (c.su_positions.empty() || c.pu_positions.empty()) c.synthesize_positions();

  const Vec3 along = (c.qF - c.q0).normalized();
  const Vec3 lateral = Vec3(-along.y(), along.x(), 0.0).norm() > 1e-9
                           ? Vec3(-along.y(), along.x(), 0.0).normalized()
                           : Vec3(0.0, 1.0, 0.0);
  const Real span = (c.qF - c.q0).norm();

  Vec3 incumbent_mid = 0.5 * (c.q0 + c.qF);
  CandidateEval best = evaluate_waypoint(c, seed, incumbent_mid);

  AoResult result;
  Real spacing = options.init_spacing_frac * span;
  for (int round = 0; round < options.rounds; ++round) {
    bool improved = false;
    for (int ia = -options.grid_half; ia <= options.grid_half; ++ia) {
      for (int il = -options.grid_half; il <= options.grid_half; ++il) {
        if (ia == 0 && il == 0) continue;
        Vec3 mid = incumbent_mid + spacing * (ia * along + il * lateral);
        mid.z() = c.altitude_m;
        const CandidateEval ev = evaluate_waypoint(c, seed, mid);
        if (ev.ee > best.ee) {
          best = ev;
          incumbent_mid = mid;
          improved = true;
        }
      }
    }
    result.round_ee.push_back(best.ee);
    spacing *= 0.5;
    if (!improved && round > 0) break;
  }

  result.trajectory = best.traj;
  result.actions = best.actions;
  result.ee_lb = best.ee;
  return result;
}

EpisodeResult rollout(Environment& env, const PolicyFn& policy) {
  EpisodeResult res;
  Observation obs = env.reset();
  bool done = false;
  while (!done) {
    const StepOutcome out = env.step(policy(obs));
    res.ret += out.reward;
    if (out.info.pu_intf_w.size() > 0)
      res.max_pu_intf_w = std::max(res.max_pu_intf_w, out.info.pu_intf_w.maxCoeff());
    obs = out.next_observation;
    done = out.terminal;
  }
  res.ee_lb = env.episode_ee_lb();
  res.bits_total = env.ledger().bits_total;
  res.energy_ub = env.ledger().e_ub_j;
  res.trace = env.episode_trace();
  return res;
}

PolicyFn make_random_policy(const SystemConfig& cfg, std::uint64_t seed) {
  auto rng = std::make_shared<RngStream>(seed);
  return [cfg, rng](const Observation& obs) { return policy_random(obs, cfg, *rng); };
}

PolicyFn make_no_irs_policy(const SystemConfig& cfg) {
  return [cfg](const Observation& obs) { return policy_no_irs(obs, cfg); };
}

PolicyFn make_agent_policy(const HybridAgent& agent) {
  return [&agent](const Observation& obs) { return agent.greedy_action(obs); };
}

PolicyFn make_ao_policy(const AoResult& plan) {
  auto step = std::make_shared<int>(0);
  return [plan, step](const Observation&) {
    if (*step >= static_cast<int>(plan.actions.size()))
      throw std::logic_error("ao policy replayed past its horizon");
    return plan.actions[(*step)++];
  };
}

}  // namespace eesim
