// SPDX-License-Identifier: Apache-2.0
//
// Geometry-driven channel generation and per-subcarrier SINR / rate /
// primary-protection evaluation. Everything here is a pure function of its
// inputs; RNG enters only as an explicit stream.

#pragma once

#include "eesim/config.hpp"
#include "eesim/types.hpp"

#include <stdexcept>
#include <vector>

namespace eesim {

/// Per-element reflection state of the surface. Constructed from phase
/// angles the coefficients are exactly unit modulus; constructed from raw
/// coefficients they may not be (the projected() form restores feasibility).
struct IrsPhase {
  Vec phases;        // radians in [0, 2*pi)
  CVec coefficients;

  IrsPhase() = default;

  static IrsPhase from_phases(const Vec& theta) {
    IrsPhase p;
    p.phases = theta;
    for (int i = 0; i < theta.size(); ++i) p.phases[i] = wrap_angle(theta[i]);
    p.coefficients.resize(theta.size());
    for (int i = 0; i < theta.size(); ++i)
      p.coefficients[i] = std::polar<Real>(1.0, p.phases[i]);
    return p;
  }

  static IrsPhase from_coefficients(const CVec& c) {
    IrsPhase p;
    p.coefficients = c;
    p.phases.resize(c.size());
    for (int i = 0; i < c.size(); ++i) p.phases[i] = wrap_angle(std::arg(c[i]));
    return p;
  }

  static IrsPhase zeros(int n) { return from_phases(Vec::Zero(n)); }

  /// Radial projection onto the unit circle; zero coefficients map to 1.
  IrsPhase projected() const {
    CVec c(coefficients.size());
    for (int i = 0; i < coefficients.size(); ++i) {
      const Real m = std::abs(coefficients[i]);
      c[i] = m > 0.0 ? coefficients[i] / m : Complex(1.0, 0.0);
    }
    return from_coefficients(c);
  }

  bool unit_modulus(Real tol = 1e-12) const {
    for (int i = 0; i < coefficients.size(); ++i)
      if (std::abs(std::abs(coefficients[i]) - 1.0) > tol) return false;
    return true;
  }

  static Real wrap_angle(Real a) {
    Real w = std::fmod(a, 2.0 * kPi);
    if (w < 0) w += 2.0 * kPi;
    return w;
  }
};

/// One slot's worth of channels. Surface-side links are frequency flat;
/// dimensions follow the SystemConfig that produced the realization.
struct ChannelRealization {
  CMat h_bs_irs;                // N_I x N_t
  std::vector<CVec> h_irs_su;   // K vectors of length N_I
  std::vector<CVec> h_bs_su;    // K vectors of length N_t
  std::vector<CVec> h_irs_pu;   // D_p vectors of length N_I
  std::vector<CVec> h_bs_pu;    // D_p vectors of length N_t
  Mat noise_var_w;              // K x D, per-(user,subcarrier) noise variance
};

/// Per-subcarrier thermal noise power: N0 * (B/D) * F.
inline Real noise_variance(Real n0_psd_w_hz, Real bandwidth_hz, int num_subcarriers,
                           Real noise_figure_linear) {
  if (!(n0_psd_w_hz > 0) || !(bandwidth_hz > 0) || num_subcarriers <= 0 ||
      !(noise_figure_linear > 0))
    throw std::domain_error("noise_variance: inputs must be strictly positive");
  return n0_psd_w_hz * (bandwidth_hz / num_subcarriers) * noise_figure_linear;
}

/// Free-space-referenced amplitude path loss at distance d (power units).
inline Real path_loss(Real wavelength_m, Real distance_m, Real exponent) {
  if (!(distance_m > 0)) throw std::domain_error("path_loss: zero-distance geometry");
  const Real ref = wavelength_m / (4.0 * kPi);
  return ref * ref * std::pow(distance_m, -exponent);
}

/// Uniform-linear-array steering vector, half-wavelength spacing, for a
/// direction cosine along the array axis.
inline CVec steering_vector(int n_elems, Real dir_cosine) {
  CVec a(n_elems);
  for (int n = 0; n < n_elems; ++n) a[n] = std::polar<Real>(1.0, kPi * n * dir_cosine);
  return a;
}

/// Draws the slot's channels for the given node geometry. Deterministic in
/// (geometry, stream state): same seed and positions give bit-identical
/// output. Surface-involved links are Rician around ULA steering outer
/// products; ground direct links are Rayleigh.
ChannelRealization generate_channels(const SystemConfig& cfg, const Vec3& uav_pos,
                                     const std::vector<Vec3>& su_positions,
                                     const std::vector<Vec3>& pu_positions,
                                     const Vec3& bs_position, RngStream& rng);

/// Combined direct-plus-reflected row channel: g^H = h_d^H + h_r^H diag(phi) H.
template <typename VD, typename VR, typename VP, typename MH>
CRowVec effective_channel_coeffs(const Eigen::MatrixBase<VD>& h_bs_su_k,
                                 const Eigen::MatrixBase<VR>& h_irs_su_k,
                                 const Eigen::MatrixBase<VP>& phi_coeffs,
                                 const Eigen::MatrixBase<MH>& h_bs_irs) {
  if (h_irs_su_k.size() != phi_coeffs.size() || h_bs_irs.rows() != h_irs_su_k.size() ||
      (h_bs_irs.rows() > 0 && h_bs_irs.cols() != h_bs_su_k.size()))
    throw std::invalid_argument("effective_channel: dimension mismatch");
  CRowVec g = h_bs_su_k.adjoint();
  if (h_irs_su_k.size() > 0)
    g += h_irs_su_k.adjoint() * phi_coeffs.asDiagonal() * h_bs_irs;
  return g;
}

inline CRowVec effective_channel(const CVec& h_bs_su_k, const CVec& h_irs_su_k,
                                 const IrsPhase& irs, const CMat& h_bs_irs) {
  return effective_channel_coeffs(h_bs_su_k, h_irs_su_k, irs.coefficients, h_bs_irs);
}

/// Instantaneous SINR of user k on one subcarrier. `g_rows` stacks the K
/// effective row channels; `w_d` holds the K beamformers active on that
/// subcarrier as columns.
inline Real su_sinr(int k, const CMat& g_rows, const CMat& w_d, Real noise_var) {
  if (!(noise_var > 0)) throw std::domain_error("su_sinr: noise variance must be > 0");
  if (g_rows.cols() != w_d.rows() || k < 0 || k >= g_rows.rows() || g_rows.rows() != w_d.cols())
    throw std::invalid_argument("su_sinr: dimension mismatch");
  const Real sig = std::norm(Complex(g_rows.row(k) * w_d.col(k)));
  Real intf = 0.0;
  for (int i = 0; i < w_d.cols(); ++i) {
    if (i == k) continue;
    intf += std::norm(Complex(g_rows.row(k) * w_d.col(i)));
  }
  return sig / (intf + noise_var);
}

/// Achievable rate in bit/s: (B/D) * log2(1 + sinr).
inline Real su_rate(Real sinr, Real bandwidth_hz, int num_subcarriers) {
  if (sinr < 0) throw std::invalid_argument("su_rate: negative sinr");
  return (bandwidth_hz / num_subcarriers) * std::log2(1.0 + sinr);
}

/// Total leakage power onto one protected subcarrier: sum_k |h^H w_{k,d}|^2.
inline Real pu_interference_power(const CRowVec& h_pu_eff, const CMat& w_d) {
  if (h_pu_eff.size() != w_d.rows())
    throw std::invalid_argument("pu_interference_power: dimension mismatch");
  Real total = 0.0;
  for (int i = 0; i < w_d.cols(); ++i) total += std::norm(Complex(h_pu_eff * w_d.col(i)));
  return total;
}

/// Beamformer bundle: column k*D+d holds w_{k,d}.
inline int beam_col(int k, int d, int num_subcarriers) { return k * num_subcarriers + d; }

/// K x D rate matrix for a full beamformer bundle under the given surface
/// state. Honors cfg.irs_enabled (reflection dropped when off) and the
/// optional fixed primary-interference noise floor.
Mat rate_matrix(const SystemConfig& cfg, const ChannelRealization& ch, const IrsPhase& irs,
                const CMat& w_all);

/// Effective protection row channel toward the PU guarding subcarrier d.
CRowVec pu_effective_row(const SystemConfig& cfg, const ChannelRealization& ch,
                         const IrsPhase& irs, int d);

/// Leakage power per subcarrier (length D) for a beamformer bundle.
Vec pu_interference_per_subcarrier(const SystemConfig& cfg, const ChannelRealization& ch,
                                   const IrsPhase& irs, const CMat& w_all);

/// Geometry-predicted RMS entry magnitudes used to normalize observation
/// features; per link type, strictly positive.
struct LinkScales {
  Real bs_irs = 1.0;
  Vec irs_su;  // K
  Vec bs_su;   // K
  Vec pu_eff;  // D_p, scale of the combined protection row
};

LinkScales link_scales(const SystemConfig& cfg, const Vec3& uav_pos);

}  // namespace eesim
