// SPDX-License-Identifier: Apache-2.0
//
// Fixed-wing kinematics, propulsion-energy accounting, and the
// bits-per-joule objective. All pure functions.

#pragma once

#include "eesim/types.hpp"

#include <stdexcept>
#include <utility>
#include <vector>

namespace eesim {

struct UavState {
  Vec3 q = Vec3::Zero();  // m
  Vec3 v = Vec3::Zero();  // m/s
  Vec3 a = Vec3::Zero();  // m/s^2, command applied during the slot
};

/// Mission energy/throughput tallies. e_ub_j integrates the tractable upper
/// bound; e_exact_j additionally carries the terminal kinetic adjustment.
struct EnergyLedger {
  Real e_exact_j = 0.0;
  Real e_ub_j = 0.0;
  Real bits_total = 0.0;
};

/// Forward-Euler slot update: q' = q + v dt, v' = v + a dt. No projection.
inline UavState step_kinematics(const UavState& s, const Vec3& a_cmd, Real dt) {
  if (!(dt > 0)) throw std::invalid_argument("step_kinematics: dt must be > 0");
  UavState n;
  n.q = s.q + s.v * dt;
  n.v = s.v + a_cmd * dt;
  n.a = a_cmd;
  return n;
}

/// c1 |v|^3 + (c2/|v|) (1 + (|a|^2 - (a.v)^2/|v|^2) / g^2), watts.
inline Real propulsion_integrand_exact(const Vec3& v, const Vec3& a, Real c1, Real c2, Real g) {
  const Real speed = v.norm();
  if (!(speed > 0)) throw std::domain_error("propulsion integrand: zero speed");
  const Real tangential = a.dot(v) / speed;
  const Real normal_sq = a.squaredNorm() - tangential * tangential;
  return c1 * speed * speed * speed + (c2 / speed) * (1.0 + normal_sq / (g * g));
}

/// Tractable bound: drops the tangential cancellation, never below exact.
inline Real propulsion_integrand_ub(const Vec3& v, const Vec3& a, Real c1, Real c2, Real g) {
  const Real speed = v.norm();
  if (!(speed > 0)) throw std::domain_error("propulsion integrand: zero speed");
  return c1 * speed * speed * speed + (c2 / speed) * (1.0 + a.squaredNorm() / (g * g));
}

/// Discrete mission energy with the kinetic boundary term. The integrand of
/// each slot is evaluated at the state opening it; a trajectory of M states
/// covers M-1 slots.
inline Real mission_energy_exact(const std::vector<UavState>& traj, Real dt, Real mass_kg,
                                 Real c1, Real c2, Real g) {
  if (traj.size() < 2) throw std::invalid_argument("mission_energy: trajectory too short");
  Real e = 0.0;
  for (std::size_t n = 0; n + 1 < traj.size(); ++n)
    e += propulsion_integrand_exact(traj[n].v, traj[n].a, c1, c2, g);
  e *= dt;
  e += 0.5 * mass_kg * (traj.back().v.squaredNorm() - traj.front().v.squaredNorm());
  return e;
}

inline Real mission_energy_ub(const std::vector<UavState>& traj, Real dt, Real c1, Real c2,
                              Real g) {
  if (traj.size() < 2) throw std::invalid_argument("mission_energy: trajectory too short");
  Real e = 0.0;
  for (std::size_t n = 0; n + 1 < traj.size(); ++n)
    e += propulsion_integrand_ub(traj[n].v, traj[n].a, c1, c2, g);
  return e * dt;
}

/// Lower-bounded energy efficiency, bits per joule.
inline Real ee_lb(Real bits_total, Real energy_ub_j) {
  if (!(energy_ub_j > 0)) throw std::domain_error("ee_lb: energy must be > 0");
  return bits_total / energy_ub_j;
}

/// Radial projections onto the feasible kinematic sets: acceleration onto
/// the a_max ball, velocity onto the [v_min, v_max] speed annulus with
/// direction preserved. A zero velocity is lifted to v_min along +x.
inline std::pair<Vec3, Vec3> project_kinematics(const Vec3& v, const Vec3& a, Real v_min,
                                                Real v_max, Real a_max) {
  Vec3 a_p = a;
  const Real a_norm = a.norm();
  if (a_norm > a_max) a_p *= a_max / a_norm;

  Vec3 v_p = v;
  const Real speed = v.norm();
  if (speed == 0.0) {
    v_p = Vec3(v_min, 0.0, 0.0);
  } else if (speed < v_min) {
    v_p *= v_min / speed;
  } else if (speed > v_max) {
    v_p *= v_max / speed;
  }
  return {v_p, a_p};
}

}  // namespace eesim
