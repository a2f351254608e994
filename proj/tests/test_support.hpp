// SPDX-License-Identifier: Apache-2.0
//
// Shared test oracles: brute-force SINR expansion, finite differences,
// simple statistics. Everything here is independent of the library's own
// computation paths.

#pragma once

#include "eesim/types.hpp"

#include <functional>
#include <vector>

namespace eesim::test {

// Entry-by-entry expansion of g^H = h_d^H + sum_l conj(h_r_l) phi_l H(l,:).
inline CRowVec effective_channel_bruteforce(const CVec& h_d, const CVec& h_r, const CVec& phi,
                                            const CMat& h) {
  CRowVec g(h_d.size());
  for (int t = 0; t < h_d.size(); ++t) {
    Complex acc = std::conj(h_d[t]);
    for (int l = 0; l < h_r.size(); ++l) acc += std::conj(h_r[l]) * phi[l] * h(l, t);
    g[t] = acc;
  }
  return g;
}

// Scalar loop expansion of the SINR of user k given per-user beamformers.
inline Real sinr_bruteforce(int k, const std::vector<CVec>& g_cols /* conj of g^H rows */,
                            const std::vector<CVec>& w, Real noise_var) {
  auto inner = [](const CVec& grow_conj, const CVec& wv) {
    Complex acc(0, 0);
    for (int t = 0; t < grow_conj.size(); ++t) acc += std::conj(grow_conj[t]) * wv[t];
    return acc;
  };
  const Real sig = std::norm(inner(g_cols[k], w[k]));
  Real intf = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (static_cast<int>(i) != k) intf += std::norm(inner(g_cols[k], w[i]));
  return sig / (intf + noise_var);
}

// Central finite difference of a scalar function of one coordinate of a
// flat parameter vector.
inline Real central_difference(const std::function<Real(const Vec&)>& f, Vec params, int index,
                               Real h = 1e-5) {
  const Real saved = params[index];
  params[index] = saved + h;
  const Real up = f(params);
  params[index] = saved - h;
  const Real down = f(params);
  return (up - down) / (2.0 * h);
}

// Relative-error agreement with an absolute floor for near-zero gradients.
inline bool grad_close(Real analytic, Real numeric, Real rel_tol = 1e-4, Real abs_tol = 1e-7) {
  const Real diff = std::abs(analytic - numeric);
  if (diff <= abs_tol) return true;
  return diff <= rel_tol * std::max(std::abs(analytic), std::abs(numeric));
}

// Chi-squared statistic for an observed histogram against uniform expected
// counts.
inline Real chi_squared_uniform(const std::vector<int>& counts, int total) {
  const Real expected = static_cast<Real>(total) / counts.size();
  Real stat = 0.0;
  for (int c : counts) stat += (c - expected) * (c - expected) / expected;
  return stat;
}

// Upper 1% critical values of the chi-squared distribution by degrees of
// freedom (1..10).
inline Real chi2_crit_1pct(int dof) {
  static const Real table[] = {6.635, 9.210, 11.345, 13.277, 15.086,
                               16.812, 18.475, 20.090, 21.666, 23.209};
  return table[dof - 1];
}

inline CVec random_cvec(int n, RngStream& rng) {
  CVec v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.cnormal();
  return v;
}

inline CMat random_cmat(int r, int c, RngStream& rng) {
  CMat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.cnormal();
  return m;
}

}  // namespace eesim::test
