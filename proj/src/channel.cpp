// SPDX-License-Identifier: Apache-2.0

#include "eesim/channel.hpp"

namespace eesim {

namespace {

struct RicianWeights {
  Real los;
  Real nlos;
};

RicianWeights rician_weights(Real k_db) {
  if (std::isinf(k_db) && k_db > 0) return {1.0, 0.0};
  const Real k = db_to_linear(k_db);
  if (std::isinf(k)) return {1.0, 0.0};
  return {std::sqrt(k / (k + 1.0)), std::sqrt(1.0 / (k + 1.0))};
}

Real checked_distance(const Vec3& a, const Vec3& b) {
  const Real d = (a - b).norm();
  if (!(d > 0)) throw std::domain_error("generate_channels: zero-distance geometry");
  return d;
}

// Direction cosine along the x axis, the assumed array orientation for both
// the BS ULA and the surface.
Real dir_cosine(const Vec3& from, const Vec3& to, Real dist) {
  return (to.x() - from.x()) / dist;
}

CVec rician_vector(int n, const CVec& los, const RicianWeights& w, Real amp, RngStream& rng) {
  CVec z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.cnormal();
  return amp * (w.los * los + w.nlos * z);
}

}  // namespace

ChannelRealization generate_channels(const SystemConfig& cfg, const Vec3& uav_pos,
                                     const std::vector<Vec3>& su_positions,
                                     const std::vector<Vec3>& pu_positions,
                                     const Vec3& bs_position, RngStream& rng) {
  if (!(uav_pos.z() > 0)) throw std::domain_error("generate_channels: UAV altitude must be > 0");
  const int n_t = cfg.num_bs_antennas;
  const int n_i = cfg.num_irs_elements;
  const int k_users = static_cast<int>(su_positions.size());
  const int n_pus = static_cast<int>(pu_positions.size());
  const Real lambda = cfg.wavelength_m();
  const RicianWeights rw = rician_weights(cfg.rician_k_db);

  ChannelRealization ch;

  // BS -> surface, Rician around the steering outer product.
  {
    const Real d = checked_distance(bs_position, uav_pos);
    const Real amp = std::sqrt(path_loss(lambda, d, cfg.pathloss_exp_los));
    const CVec a_irs = steering_vector(n_i, dir_cosine(uav_pos, bs_position, d));
    const CVec a_bs = steering_vector(n_t, dir_cosine(bs_position, uav_pos, d));
    CMat z(n_i, n_t);
    for (int r = 0; r < n_i; ++r)
      for (int c = 0; c < n_t; ++c) z(r, c) = rng.cnormal();
    ch.h_bs_irs = amp * (rw.los * (a_irs * a_bs.adjoint()) + rw.nlos * z);
  }

  // Surface -> each SU (Rician), then BS -> SU direct (Rayleigh).
  ch.h_irs_su.resize(k_users);
  ch.h_bs_su.resize(k_users);
  for (int k = 0; k < k_users; ++k) {
    const Real d_r = checked_distance(uav_pos, su_positions[k]);
    const Real amp_r = std::sqrt(path_loss(lambda, d_r, cfg.pathloss_exp_los));
    const CVec los = steering_vector(n_i, dir_cosine(uav_pos, su_positions[k], d_r));
    ch.h_irs_su[k] = rician_vector(n_i, los, rw, amp_r, rng);

    const Real d_d = checked_distance(bs_position, su_positions[k]);
    const Real amp_d = std::sqrt(path_loss(lambda, d_d, cfg.pathloss_exp_nlos));
    CVec z(n_t);
    for (int i = 0; i < n_t; ++i) z[i] = rng.cnormal();
    ch.h_bs_su[k] = amp_d * z;
  }

  // Protection paths toward each PU.
  ch.h_irs_pu.resize(n_pus);
  ch.h_bs_pu.resize(n_pus);
  for (int j = 0; j < n_pus; ++j) {
    const Real d_r = checked_distance(uav_pos, pu_positions[j]);
    const Real amp_r = std::sqrt(path_loss(lambda, d_r, cfg.pathloss_exp_los));
    const CVec los = steering_vector(n_i, dir_cosine(uav_pos, pu_positions[j], d_r));
    ch.h_irs_pu[j] = rician_vector(n_i, los, rw, amp_r, rng);

    const Real d_d = checked_distance(bs_position, pu_positions[j]);
    const Real amp_d = std::sqrt(path_loss(lambda, d_d, cfg.pathloss_exp_nlos));
    CVec z(n_t);
    for (int i = 0; i < n_t; ++i) z[i] = rng.cnormal();
    ch.h_bs_pu[j] = amp_d * z;
  }

  const Real sigma2 = noise_variance(cfg.noise_psd_w_hz(), cfg.bandwidth_hz,
                                     cfg.num_subcarriers, cfg.noise_figure_linear());
  ch.noise_var_w = Mat::Constant(k_users, cfg.num_subcarriers, sigma2);
  return ch;
}

Mat rate_matrix(const SystemConfig& cfg, const ChannelRealization& ch, const IrsPhase& irs,
                const CMat& w_all) {
  const int k_users = static_cast<int>(ch.h_bs_su.size());
  const int n_d = cfg.num_subcarriers;
  if (w_all.cols() != k_users * n_d || w_all.rows() != cfg.num_bs_antennas)
    throw std::invalid_argument("rate_matrix: beamformer bundle shape mismatch");

  CMat g_rows(k_users, cfg.num_bs_antennas);
  for (int k = 0; k < k_users; ++k) {
    if (cfg.irs_enabled)
      g_rows.row(k) = effective_channel(ch.h_bs_su[k], ch.h_irs_su[k], irs, ch.h_bs_irs);
    else
      g_rows.row(k) = ch.h_bs_su[k].adjoint();
  }

  Mat rates(k_users, n_d);
  CMat w_d(cfg.num_bs_antennas, k_users);
  for (int d = 0; d < n_d; ++d) {
    for (int k = 0; k < k_users; ++k) w_d.col(k) = w_all.col(beam_col(k, d, n_d));
    for (int k = 0; k < k_users; ++k) {
      const Real noise = ch.noise_var_w(k, d) + cfg.pu_extra_noise_w;
      rates(k, d) = su_rate(su_sinr(k, g_rows, w_d, noise), cfg.bandwidth_hz, n_d);
    }
  }
  return rates;
}

CRowVec pu_effective_row(const SystemConfig& cfg, const ChannelRealization& ch,
                         const IrsPhase& irs, int d) {
  const int j = cfg.pu_of_subcarrier(d);
  if (cfg.irs_enabled)
    return effective_channel(ch.h_bs_pu[j], ch.h_irs_pu[j], irs, ch.h_bs_irs);
  return ch.h_bs_pu[j].adjoint();
}

Vec pu_interference_per_subcarrier(const SystemConfig& cfg, const ChannelRealization& ch,
                                   const IrsPhase& irs, const CMat& w_all) {
  const int n_d = cfg.num_subcarriers;
  const int k_users = static_cast<int>(ch.h_bs_su.size());
  Vec out(n_d);
  CMat w_d(cfg.num_bs_antennas, k_users);
  for (int d = 0; d < n_d; ++d) {
    for (int k = 0; k < k_users; ++k) w_d.col(k) = w_all.col(beam_col(k, d, n_d));
    out[d] = pu_interference_power(pu_effective_row(cfg, ch, irs, d), w_d);
  }
  return out;
}

LinkScales link_scales(const SystemConfig& cfg, const Vec3& uav_pos) {
  const Real lambda = cfg.wavelength_m();
  LinkScales s;
  const Real d_bu = (cfg.bs_position - uav_pos).norm();
  const Real pl_bu = path_loss(lambda, d_bu, cfg.pathloss_exp_los);
  s.bs_irs = std::sqrt(pl_bu);
  s.irs_su.resize(cfg.num_sus);
  s.bs_su.resize(cfg.num_sus);
  for (int k = 0; k < cfg.num_sus; ++k) {
    s.irs_su[k] = std::sqrt(path_loss(lambda, (uav_pos - cfg.su_positions[k]).norm(),
                                      cfg.pathloss_exp_los));
    s.bs_su[k] = std::sqrt(path_loss(lambda, (cfg.bs_position - cfg.su_positions[k]).norm(),
                                     cfg.pathloss_exp_nlos));
  }
  s.pu_eff.resize(cfg.num_pus);
  for (int j = 0; j < cfg.num_pus; ++j) {
    const Real pl_direct = path_loss(lambda, (cfg.bs_position - cfg.pu_positions[j]).norm(),
                                     cfg.pathloss_exp_nlos);
    const Real pl_up = path_loss(lambda, (uav_pos - cfg.pu_positions[j]).norm(),
                                 cfg.pathloss_exp_los);
    s.pu_eff[j] = std::sqrt(pl_direct + cfg.num_irs_elements * pl_bu * pl_up);
  }
  return s;
}

}  // namespace eesim
