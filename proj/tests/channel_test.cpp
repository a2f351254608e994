// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eesim/baselines.hpp"
#include "eesim/channel.hpp"
#include "test_support.hpp"

using namespace eesim;

namespace {

SystemConfig small_config() {
  Config cfg = desk_profile();
  return cfg.system;
}

}  // namespace

TEST_CASE("noise_variance matches hand arithmetic") {
  // -174 dBm/Hz over a 10 MHz / 64 grid.
  const Real n0 = dbm_to_watt(-174.0);
  CHECK(noise_variance(n0, 1e7, 64, 1.0) == doctest::Approx(6.221e-16).epsilon(1e-3));
  CHECK(noise_variance(1.0, 1.0, 1, 1.0) == doctest::Approx(1.0));
  CHECK(noise_variance(n0, 1e7, 64, db_to_linear(9.0)) ==
        doctest::Approx(4.941e-15).epsilon(1e-3));
  // Independent oracle: plain product.
  CHECK(noise_variance(n0, 1e7, 64, db_to_linear(9.0)) ==
        doctest::Approx(n0 * (1e7 / 64.0) * std::pow(10.0, 0.9)).epsilon(1e-12));
}

TEST_CASE("noise_variance rejects non-positive input") {
  CHECK_THROWS_AS(noise_variance(0.0, 1.0, 1, 1.0), std::domain_error);
  CHECK_THROWS_AS(noise_variance(1.0, -1.0, 1, 1.0), std::domain_error);
  CHECK_THROWS_AS(noise_variance(1.0, 1.0, 0, 1.0), std::domain_error);
}

TEST_CASE("generate_channels is deterministic per seed") {
  const SystemConfig cfg = small_config();
  RngStream r1(42), r2(42);
  const Vec3 uav(0, 0, 100);
  const auto c1 = generate_channels(cfg, uav, cfg.su_positions, cfg.pu_positions,
                                    cfg.bs_position, r1);
  const auto c2 = generate_channels(cfg, uav, cfg.su_positions, cfg.pu_positions,
                                    cfg.bs_position, r2);
  CHECK(c1.h_bs_irs == c2.h_bs_irs);
  for (int k = 0; k < cfg.num_sus; ++k) {
    CHECK(c1.h_irs_su[k] == c2.h_irs_su[k]);
    CHECK(c1.h_bs_su[k] == c2.h_bs_su[k]);
  }
  for (int j = 0; j < cfg.num_pus; ++j) CHECK(c1.h_bs_pu[j] == c2.h_bs_pu[j]);
}

TEST_CASE("infinite Rician factor collapses surface links to steering-only") {
  SystemConfig cfg = small_config();
  cfg.rician_k_db = std::numeric_limits<Real>::infinity();
  RngStream r1(1), r2(99);
  const Vec3 uav(10, 5, 100);
  const auto c1 = generate_channels(cfg, uav, cfg.su_positions, cfg.pu_positions,
                                    cfg.bs_position, r1);
  const auto c2 = generate_channels(cfg, uav, cfg.su_positions, cfg.pu_positions,
                                    cfg.bs_position, r2);
  CHECK((c1.h_bs_irs - c2.h_bs_irs).norm() == 0.0);
  for (int k = 0; k < cfg.num_sus; ++k) CHECK((c1.h_irs_su[k] - c2.h_irs_su[k]).norm() == 0.0);
  // Entries have unit magnitude times the path-loss amplitude.
  const Real amp = std::abs(c1.h_bs_irs(0, 0));
  for (int r = 0; r < cfg.num_irs_elements; ++r)
    for (int c = 0; c < cfg.num_bs_antennas; ++c)
      CHECK(std::abs(c1.h_bs_irs(r, c)) == doctest::Approx(amp).epsilon(1e-12));
}

TEST_CASE("doubling the BS-UAV distance scales the link by the path-loss exponent") {
  SystemConfig cfg = small_config();
  cfg.pathloss_exp_los = 2.2;
  const Vec3 bs(0, 0, 0);
  const Vec3 uav1(0, 0, 100), uav2(0, 0, 200);
  Real sum1 = 0.0, sum2 = 0.0;
  const int draws = 10000;
  RngStream rng(7);
  for (int i = 0; i < draws; ++i) {
    const auto ca = generate_channels(cfg, uav1, cfg.su_positions, cfg.pu_positions, bs, rng);
    const auto cb = generate_channels(cfg, uav2, cfg.su_positions, cfg.pu_positions, bs, rng);
    sum1 += ca.h_bs_irs.norm();
    sum2 += cb.h_bs_irs.norm();
  }
  CHECK(sum2 / sum1 == doctest::Approx(std::pow(2.0, -1.1)).epsilon(0.02));
}

TEST_CASE("generate_channels rejects degenerate geometry") {
  const SystemConfig cfg = small_config();
  RngStream rng(3);
  CHECK_THROWS_AS(generate_channels(cfg, Vec3(0, 0, -5), cfg.su_positions, cfg.pu_positions,
                                    cfg.bs_position, rng),
                  std::domain_error);
  // UAV on top of the BS: zero-distance link.
  CHECK_THROWS_AS(generate_channels(cfg, cfg.bs_position, cfg.su_positions, cfg.pu_positions,
                                    cfg.bs_position, rng),
                  std::domain_error);
}

TEST_CASE("effective_channel handles the degenerate and scalar cases") {
  RngStream rng(5);
  // Reflection path vanishes.
  const CVec h_d = test::random_cvec(3, rng);
  const CVec h_r = CVec::Zero(4);
  const CMat h = test::random_cmat(4, 3, rng);
  const IrsPhase irs = IrsPhase::zeros(4);
  CHECK((effective_channel(h_d, h_r, irs, h) - CRowVec(h_d.adjoint())).norm() == 0.0);

  // Scalar co-phased sum.
  CVec d1(1), r1(1);
  d1 << Complex(1, 0);
  r1 << Complex(1, 0);
  CMat h1(1, 1);
  h1 << Complex(1, 0);
  const CRowVec g = effective_channel(d1, r1, IrsPhase::zeros(1), h1);
  CHECK(std::abs(g[0] - Complex(2, 0)) < 1e-15);
}

TEST_CASE("effective_channel matches the brute-force expansion") {
  RngStream rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const CVec h_d = test::random_cvec(2, rng);
    const CVec h_r = test::random_cvec(3, rng);
    const CMat h = test::random_cmat(3, 2, rng);
    Vec theta(3);
    for (int i = 0; i < 3; ++i) theta[i] = rng.uniform(0, 2 * kPi);
    const IrsPhase irs = IrsPhase::from_phases(theta);
    const CRowVec got = effective_channel(h_d, h_r, irs, h);
    const CRowVec want = test::effective_channel_bruteforce(h_d, h_r, irs.coefficients, h);
    CHECK((got - want).norm() < 1e-12 * std::max(1.0, want.norm()));
  }
}

TEST_CASE("effective_channel is linear in the direct channel and the phases") {
  RngStream rng(13);
  const CVec h_d1 = test::random_cvec(2, rng), h_d2 = test::random_cvec(2, rng);
  const CVec h_r = test::random_cvec(3, rng);
  const CMat h = test::random_cmat(3, 2, rng);
  const IrsPhase p1 = IrsPhase::from_coefficients(test::random_cvec(3, rng));
  const IrsPhase p2 = IrsPhase::from_coefficients(test::random_cvec(3, rng));

  const CRowVec lhs = effective_channel_coeffs(CVec(h_d1 + h_d2), h_r, p1.coefficients, h);
  const CRowVec rhs = effective_channel(h_d1, h_r, p1, h) +
                      effective_channel(h_d2, CVec(CVec::Zero(3)), p1, h);
  CHECK((lhs - rhs).norm() < 1e-12);

  const CRowVec sum_phase =
      effective_channel_coeffs(h_d1, h_r, CVec(p1.coefficients + p2.coefficients), h);
  const CRowVec split = effective_channel(h_d1, h_r, p1, h) +
                        effective_channel(CVec(CVec::Zero(2)), h_r, p2, h);
  CHECK((sum_phase - split).norm() < 1e-12);
}

TEST_CASE("effective_channel rejects mismatched shapes") {
  CHECK_THROWS_AS(effective_channel(CVec::Zero(2), CVec::Zero(3), IrsPhase::zeros(4),
                                    CMat::Zero(3, 2)),
                  std::invalid_argument);
}

TEST_CASE("su_sinr basic values") {
  CMat g(1, 1), w(1, 1);
  g << Complex(1, 0);
  w << Complex(1, 0);
  CHECK(su_sinr(0, g, w, 1.0) == doctest::Approx(1.0));

  // Signal 4, one interferer 1, noise 1 -> 2.
  CMat g2(2, 1), w2(1, 2);
  g2 << Complex(1, 0), Complex(1, 0);
  w2 << Complex(2, 0), Complex(1, 0);
  CHECK(su_sinr(0, g2, w2, 1.0) == doctest::Approx(2.0));

  w << Complex(0, 0);
  CHECK(su_sinr(0, g, w, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("su_sinr equals scalar brute force on random instances") {
  RngStream rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int n_t = 1 + rng.uniform_int(3);
    const int k_users = 1 + rng.uniform_int(3);
    CMat g(k_users, n_t);
    std::vector<CVec> g_cols(k_users), w(k_users);
    for (int k = 0; k < k_users; ++k) {
      g_cols[k] = test::random_cvec(n_t, rng);
      g.row(k) = g_cols[k].adjoint();
      w[k] = test::random_cvec(n_t, rng);
    }
    CMat w_mat(n_t, k_users);
    for (int k = 0; k < k_users; ++k) w_mat.col(k) = w[k];
    const Real noise = 0.1 + rng.uniform();
    for (int k = 0; k < k_users; ++k) {
      const Real got = su_sinr(k, g, w_mat, noise);
      const Real want = test::sinr_bruteforce(k, g_cols, w, noise);
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("su_rate values and monotonicity") {
  CHECK(su_rate(0.0, 1e7, 64) == 0.0);
  CHECK(su_rate(1.0, 1e7, 64) == doctest::Approx(156250.0));
  CHECK(su_rate(3.0, 1e7, 64) == doctest::Approx(312500.0));
  CHECK_THROWS_AS(su_rate(-0.5, 1e7, 64), std::invalid_argument);

  RngStream rng(19);
  Real prev = 0.0;
  for (Real s = 0.0; s < 10.0; s += 0.37) {
    const Real r = su_rate(s, 1e7, 64);
    if (s > 0) CHECK(r > prev);
    prev = r;
  }
  // Scaling the desired beamformer up never hurts the SINR.
  for (int trial = 0; trial < 50; ++trial) {
    const int n_t = 2;
    CMat g(2, n_t);
    g.row(0) = test::random_cvec(n_t, rng).adjoint();
    g.row(1) = test::random_cvec(n_t, rng).adjoint();
    CMat w(n_t, 2);
    w.col(0) = test::random_cvec(n_t, rng);
    w.col(1) = test::random_cvec(n_t, rng);
    const Real base = su_sinr(0, g, w, 0.5);
    CMat w_scaled = w;
    w_scaled.col(0) *= 1.0 + rng.uniform();
    CHECK(su_sinr(0, g, w_scaled, 0.5) >= base - 1e-15);
  }
}

TEST_CASE("pu_interference_power cases") {
  CMat w = CMat::Zero(2, 2);
  CRowVec h(2);
  h << Complex(1, 0), Complex(0, 0);
  CHECK(pu_interference_power(h, w) == 0.0);

  // Orthogonal beam leaks nothing.
  CMat w1(2, 1);
  w1 << Complex(0, 0), Complex(1, 0);
  CHECK(pu_interference_power(h, w1) == doctest::Approx(0.0));

  // Scalar channel, two users: 1^2 + 2^2.
  CRowVec hs(1);
  hs << Complex(1, 0);
  CMat w2(1, 2);
  w2 << Complex(1, 0), Complex(2, 0);
  CHECK(pu_interference_power(hs, w2) == doctest::Approx(5.0));
}

TEST_CASE("co-phased alignment beats random phase draws") {
  RngStream rng(23);
  for (int n_i : {2, 4, 8}) {
    const int n_t = 2;
    const CVec h_d = test::random_cvec(n_t, rng);
    const CVec h_r = test::random_cvec(n_i, rng);
    const CMat h = test::random_cmat(n_i, n_t, rng);
    const CVec w = test::random_cvec(n_t, rng);

    const IrsPhase aligned = align_irs_phases(h_d, h_r, h, w);
    const Real best = std::abs(Complex(effective_channel(h_d, h_r, aligned, h) * w));
    for (int trial = 0; trial < 10000; ++trial) {
      Vec theta(n_i);
      for (int i = 0; i < n_i; ++i) theta[i] = rng.uniform(0, 2 * kPi);
      const Real mag =
          std::abs(Complex(effective_channel(h_d, h_r, IrsPhase::from_phases(theta), h) * w));
      CHECK(best >= mag - 1e-9 * best);
    }
  }
}

TEST_CASE("surface phase wrapper keeps coefficients on the unit circle") {
  Vec theta(3);
  theta << -1.0, 7.0, 100.0;
  const IrsPhase p = IrsPhase::from_phases(theta);
  CHECK(p.unit_modulus());
  for (int i = 0; i < 3; ++i) {
    CHECK(p.phases[i] >= 0.0);
    CHECK(p.phases[i] < 2 * kPi);
  }
  RngStream rng(29);
  const IrsPhase q = IrsPhase::from_coefficients(test::random_cvec(3, rng));
  CHECK(q.projected().unit_modulus());
}
