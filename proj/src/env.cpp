// SPDX-License-Identifier: Apache-2.0

#include "eesim/env.hpp"

#include "eesim/csv.hpp"

#include <fstream>

namespace eesim {

ObservationLayout ObservationLayout::make(const SystemConfig& cfg) {
  ObservationLayout l;
  int off = 0;
  l.bs_irs = off;
  off += 2 * cfg.num_irs_elements * cfg.num_bs_antennas;
  l.irs_su = off;
  off += 2 * cfg.num_sus * cfg.num_irs_elements;
  l.bs_su = off;
  off += 2 * cfg.num_sus * cfg.num_bs_antennas;
  l.pu_eff = off;
  off += 2 * cfg.num_pus * cfg.num_bs_antennas;
  l.phases = off;
  off += cfg.num_irs_elements;
  l.kinematics = off;
  off += 9;
  l.ee_ema = off++;
  l.slot = off++;
  l.total = off;
  return l;
}

std::pair<int, int> ObservationLayout::irs_su_block(const SystemConfig& cfg, int k) const {
  const int w = 2 * cfg.num_irs_elements;
  return {irs_su + k * w, w};
}

std::pair<int, int> ObservationLayout::bs_su_block(const SystemConfig& cfg, int k) const {
  const int w = 2 * cfg.num_bs_antennas;
  return {bs_su + k * w, w};
}

int observation_length(const SystemConfig& cfg) { return ObservationLayout::make(cfg).total; }

namespace {

void put_complex(Vec& x, int& pos, Complex c, Real scale) {
  x[pos++] = c.real() / scale;
  x[pos++] = c.imag() / scale;
}

}  // namespace

Observation encode_observation(const SystemConfig& cfg, const ChannelRealization& ch,
                               const IrsPhase& irs_prev, const UavState& uav, Real ee_ema,
                               int slot) {
  const ObservationLayout l = ObservationLayout::make(cfg);
  const LinkScales s = link_scales(cfg, uav.q);
  Observation obs;
  obs.slot = slot;
  obs.features = Vec::Zero(l.total);
  Vec& x = obs.features;

  int pos = l.bs_irs;
  for (int r = 0; r < cfg.num_irs_elements; ++r)
    for (int c = 0; c < cfg.num_bs_antennas; ++c) put_complex(x, pos, ch.h_bs_irs(r, c), s.bs_irs);

  pos = l.irs_su;
  for (int k = 0; k < cfg.num_sus; ++k)
    for (int i = 0; i < cfg.num_irs_elements; ++i) put_complex(x, pos, ch.h_irs_su[k][i], s.irs_su[k]);

  pos = l.bs_su;
  for (int k = 0; k < cfg.num_sus; ++k)
    for (int i = 0; i < cfg.num_bs_antennas; ++i) put_complex(x, pos, ch.h_bs_su[k][i], s.bs_su[k]);

  pos = l.pu_eff;
  for (int j = 0; j < cfg.num_pus; ++j) {
    const CRowVec row = cfg.irs_enabled
                            ? effective_channel(ch.h_bs_pu[j], ch.h_irs_pu[j], irs_prev, ch.h_bs_irs)
                            : CRowVec(ch.h_bs_pu[j].adjoint());
    for (int i = 0; i < cfg.num_bs_antennas; ++i) put_complex(x, pos, row[i], s.pu_eff[j]);
  }

  pos = l.phases;
  for (int i = 0; i < cfg.num_irs_elements; ++i) x[pos++] = irs_prev.phases[i];

  pos = l.kinematics;
  for (int i = 0; i < 3; ++i) x[pos++] = uav.q[i];
  for (int i = 0; i < 3; ++i) x[pos++] = uav.v[i];
  for (int i = 0; i < 3; ++i) x[pos++] = uav.a[i];

  x[l.ee_ema] = ee_ema;
  x[l.slot] = static_cast<Real>(slot);
  return obs;
}

HybridAction project_actions(const HybridAction& raw, const SystemConfig& cfg) {
  HybridAction out = raw;

  const Real total = raw.w_raw.squaredNorm();
  const Real p_max = cfg.p_max_w();
  out.w = raw.w_raw;
  if (total > p_max && total > 0) out.w *= std::sqrt(p_max / total);

  out.phi = raw.phi_raw.projected();

  Vec3 a_flat = raw.a_raw;
  a_flat.z() = 0.0;  // fixed-altitude flight
  const Real an = a_flat.norm();
  out.a = an > cfg.a_max ? Vec3(a_flat * (cfg.a_max / an)) : a_flat;
  return out;
}

bool valid_assignment(const MatInt& x) {
  for (int d = 0; d < x.cols(); ++d) {
    int ones = 0;
    for (int r = 0; r < x.rows(); ++r) {
      if (x(r, d) != 0 && x(r, d) != 1) return false;
      ones += x(r, d);
    }
    if (ones != 1) return false;
  }
  return true;
}

Real scheduled_sum_rate(const MatInt& x, const Mat& rates) {
  if (!valid_assignment(x)) throw std::invalid_argument("scheduled_sum_rate: malformed assignment");
  if (x.rows() != rates.rows() + 1 || x.cols() != rates.cols())
    throw std::invalid_argument("scheduled_sum_rate: shape mismatch");
  if ((rates.array() < 0).any()) throw std::invalid_argument("scheduled_sum_rate: negative rate");
  Real s = 0.0;
  for (int d = 0; d < x.cols(); ++d)
    for (int k = 0; k < rates.rows(); ++k)
      if (x(k + 1, d) == 1) s += rates(k, d);
  return s;
}

Vec6 compute_penalties(const HybridAction& action, const UavState& uav_raw_next,
                       const ChannelRealization& ch, const SystemConfig& cfg, int /*slot*/,
                       bool is_terminal) {
  auto pos_part = [](Real u) { return u > 0 ? u : 0.0; };
  Vec6 g = Vec6::Zero();

  const Real p_max = cfg.p_max_w();
  g[0] = pos_part(action.w_raw.squaredNorm() - p_max) / p_max;

  const int n_i = static_cast<int>(action.phi_raw.coefficients.size());
  if (n_i > 0) {
    Real dev = 0.0;
    for (int i = 0; i < n_i; ++i) dev += pos_part(std::abs(action.phi_raw.coefficients[i]) - 1.0);
    g[1] = dev / n_i;
  }

  const Real speed = uav_raw_next.v.norm();
  g[2] = pos_part(speed - cfg.v_max) / cfg.v_max + pos_part(cfg.v_min - speed) / cfg.v_min;

  g[3] = pos_part(action.a_raw.norm() - cfg.a_max) / cfg.a_max;

  // Worst protected subcarrier, relative excess over the threshold.
  const Real gamma_w = cfg.gamma_d_w();
  const Vec intf = pu_interference_per_subcarrier(cfg, ch, action.phi_raw, action.w_raw);
  Real worst = 0.0;
  for (int d = 0; d < intf.size(); ++d) worst = std::max(worst, pos_part(intf[d] - gamma_w) / gamma_w);
  g[4] = worst;

  if (is_terminal)
    g[5] = (uav_raw_next.q - cfg.qF).norm() / ((cfg.qF - cfg.q0).norm() + cfg.epsilon);
  return g;
}

Real reward(Real sum_rate, Real e_prop_ub, const Vec6& penalties, const Vec6& beta, Real epsilon,
            bool is_terminal) {
  Real r = sum_rate / (e_prop_ub + epsilon);
  for (int i = 0; i < 5; ++i) r -= beta[i] * penalties[i];
  if (is_terminal) r -= beta[5] * penalties[5];
  return r;
}

UavState advance_uav(const UavState& s, const Vec3& a_projected, const SystemConfig& cfg) {
  UavState nxt = step_kinematics(s, a_projected, cfg.slot_seconds);
  auto [v_proj, a_keep] = project_kinematics(nxt.v, nxt.a, cfg.v_min, cfg.v_max, cfg.a_max);
  nxt.v = v_proj;
  nxt.v.z() = 0.0;
  nxt.q.z() = cfg.altitude_m;
  return nxt;
}

Environment::Environment(const SystemConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
  cfg_.validate();
  if (cfg_.su_positions.empty() || cfg_.pu_positions.empty())
    cfg_.synthesize_positions();
}

void Environment::draw_channels() {
  RngStream rng(derive_seed(seed_, static_cast<std::uint64_t>(episode_ - 1),
                            static_cast<std::uint64_t>(slot_)));
  channels_ = generate_channels(cfg_, uav_.q, cfg_.su_positions, cfg_.pu_positions,
                                cfg_.bs_position, rng);
}

Observation Environment::observe() const {
  return encode_observation(cfg_, channels_, irs_prev_, uav_, ee_ema_, slot_);
}

Observation Environment::reset() {
  if ((cfg_.qF - cfg_.q0).norm() == 0) throw ConfigError("reset: q0 equals qF");
  ++episode_;
  slot_ = 0;
  done_ = false;
  uav_.q = cfg_.q0;
  uav_.q.z() = cfg_.altitude_m;
  Vec3 dir = cfg_.qF - cfg_.q0;
  dir.z() = 0.0;
  uav_.v = dir.norm() > 0 ? Vec3(dir.normalized() * cfg_.v_min) : Vec3(cfg_.v_min, 0.0, 0.0);
  uav_.a = Vec3::Zero();
  v0_speed_ = uav_.v.norm();
  irs_prev_ = IrsPhase::zeros(cfg_.num_irs_elements);
  ee_ema_ = 0.0;
  ledger_ = EnergyLedger{};
  trace_.clear();
  draw_channels();
  return observe();
}

StepOutcome Environment::step(const HybridAction& action) {
  if (done_) throw std::logic_error("step called on finished episode; reset first");
  const HybridAction act = project_actions(action, cfg_);
  if (!valid_assignment(act.x) || act.x.rows() != cfg_.num_sus + 1 ||
      act.x.cols() != cfg_.num_subcarriers)
    throw std::invalid_argument("step: malformed assignment matrix");

  const bool terminal = slot_ + 1 == cfg_.num_slots;

  const Mat rates = rate_matrix(cfg_, channels_, act.phi, act.w);
  const Real s_rate = scheduled_sum_rate(act.x, rates);
  const Real e_prop = propulsion_integrand_ub(uav_.v, act.a, cfg_.c1, cfg_.c2, cfg_.gravity);

  // Penalties see the raw command and the state it would reach unprojected.
  const UavState raw_next = step_kinematics(uav_, act.a_raw, cfg_.slot_seconds);
  const Vec6 pen = compute_penalties(act, raw_next, channels_, cfg_, slot_, terminal);
  const Real r = reward(s_rate, e_prop, pen, cfg_.beta, cfg_.epsilon, terminal);

  ledger_.bits_total += s_rate * cfg_.slot_seconds;
  ledger_.e_exact_j +=
      cfg_.slot_seconds * propulsion_integrand_exact(uav_.v, act.a, cfg_.c1, cfg_.c2, cfg_.gravity);
  ledger_.e_ub_j += cfg_.slot_seconds * e_prop;

  ee_ema_ = (1.0 - cfg_.ema_rho) * ee_ema_ + cfg_.ema_rho * s_rate / (e_prop + cfg_.epsilon);

  SlotInfo info;
  info.slot = slot_;
  info.scheduled_rate_bps = s_rate;
  info.e_prop_w = e_prop;
  info.penalties = pen;
  info.reward = r;
  info.rates = rates;
  info.pu_intf_w = pu_interference_per_subcarrier(cfg_, channels_, act.phi, act.w);

  uav_ = advance_uav(uav_, act.a, cfg_);

  info.q = uav_.q;
  info.speed = uav_.v.norm();
  trace_.push_back(info);

  ++slot_;
  if (terminal) {
    done_ = true;
    ledger_.e_exact_j += 0.5 * cfg_.uav_mass_kg * (uav_.v.squaredNorm() - v0_speed_ * v0_speed_);
  }
  irs_prev_ = act.phi;
  draw_channels();

  StepOutcome out;
  out.reward = r;
  out.terminal = terminal;
  out.info = info;
  out.next_observation = observe();
  return out;
}

const char* kTraceCsvHeader =
    "slot,S,e_prop,G1,G2,G3,G4,G5,G6,reward,qx,qy,qz,speed,pu_intf_max_dbm";

std::string trace_to_csv(const std::vector<SlotInfo>& trace) {
  std::string out(kTraceCsvHeader);
  out += "\n";
  for (const auto& s : trace) {
    csv::Row row;
    row.add(s.slot);
    row.add(s.scheduled_rate_bps);
    row.add(s.e_prop_w);
    for (int i = 0; i < 6; ++i) row.add(s.penalties[i]);
    row.add(s.reward);
    row.add(s.q.x());
    row.add(s.q.y());
    row.add(s.q.z());
    row.add(s.speed);
    row.add(watt_to_dbm(s.pu_intf_w.size() > 0 ? s.pu_intf_w.maxCoeff() : 0.0));
    out += row.str();
    out += "\n";
  }
  return out;
}

void write_trace_csv(const std::string& path, const std::vector<SlotInfo>& trace) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write trace file: " + path);
  f << trace_to_csv(trace);
}

}  // namespace eesim
