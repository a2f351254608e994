// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eesim/uav.hpp"
#include "test_support.hpp"

using namespace eesim;

namespace {
constexpr Real kC1 = 9.26e-4;
constexpr Real kC2 = 2250.0;
constexpr Real kG = 9.8;

// Independent evaluation of the two integrands, written as literal formulas.
Real oracle_exact(const Vec3& v, const Vec3& a) {
  const Real s = v.norm();
  const Real tang = a.dot(v) / s;
  return kC1 * std::pow(s, 3) + kC2 / s * (1.0 + (a.squaredNorm() - tang * tang) / (kG * kG));
}
Real oracle_ub(const Vec3& v, const Vec3& a) {
  const Real s = v.norm();
  return kC1 * std::pow(s, 3) + kC2 / s * (1.0 + a.squaredNorm() / (kG * kG));
}
}  // namespace

TEST_CASE("step_kinematics applies the Euler update") {
  UavState s;
  s.q = Vec3(0, 0, 100);
  s.v = Vec3(10, 0, 0);
  const UavState n = step_kinematics(s, Vec3::Zero(), 1.0);
  CHECK(n.q == Vec3(10, 0, 100));
  CHECK(n.v == Vec3(10, 0, 0));

  const UavState m = step_kinematics(s, Vec3(0, 5, 0), 1.0);
  CHECK(m.v == Vec3(10, 5, 0));
  CHECK(m.a == Vec3(0, 5, 0));

  // Two half steps equal one full step only under zero acceleration.
  const UavState two = step_kinematics(step_kinematics(s, Vec3::Zero(), 0.5), Vec3::Zero(), 0.5);
  const UavState one = step_kinematics(s, Vec3::Zero(), 1.0);
  CHECK((two.q - one.q).norm() < 1e-12);
  const UavState two_a =
      step_kinematics(step_kinematics(s, Vec3(1, 0, 0), 0.5), Vec3(1, 0, 0), 0.5);
  const UavState one_a = step_kinematics(s, Vec3(1, 0, 0), 1.0);
  CHECK((two_a.q - one_a.q).norm() > 0.0);
}

TEST_CASE("forward Euler position error shrinks quadratically per slot") {
  // Constant acceleration: closed form q(t) = q0 + v0 t + a t^2 / 2.
  const Vec3 v0(10, 0, 0), a(0, 2, 0);
  auto euler_error = [&](Real dt) {
    UavState s;
    s.v = v0;
    const UavState n = step_kinematics(s, a, dt);
    const Vec3 closed = v0 * dt + 0.5 * a * dt * dt;
    return (n.q - Vec3(closed)).norm();
  };
  const Real e1 = euler_error(1.0);
  const Real e2 = euler_error(0.5);
  CHECK(e2 / e1 == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("propulsion integrands match hand values") {
  const Vec3 v(10, 0, 0);
  CHECK(propulsion_integrand_exact(v, Vec3::Zero(), kC1, kC2, kG) ==
        doctest::Approx(225.926).epsilon(1e-5));
  // Tangential acceleration cancels in the exact model.
  CHECK(propulsion_integrand_exact(v, Vec3(5, 0, 0), kC1, kC2, kG) ==
        doctest::Approx(225.926).epsilon(1e-5));
  CHECK(propulsion_integrand_exact(v, Vec3(0, 5, 0), kC1, kC2, kG) ==
        doctest::Approx(284.495).epsilon(1e-5));

  CHECK(propulsion_integrand_ub(v, Vec3::Zero(), kC1, kC2, kG) ==
        doctest::Approx(propulsion_integrand_exact(v, Vec3::Zero(), kC1, kC2, kG)));
  CHECK(propulsion_integrand_ub(v, Vec3(5, 0, 0), kC1, kC2, kG) ==
        doctest::Approx(284.495).epsilon(1e-5));
  CHECK(propulsion_integrand_ub(v, Vec3(0, 5, 0), kC1, kC2, kG) ==
        doctest::Approx(284.495).epsilon(1e-5));

  CHECK_THROWS_AS(propulsion_integrand_exact(Vec3::Zero(), Vec3::Zero(), kC1, kC2, kG),
                  std::domain_error);
}

TEST_CASE("upper bound dominates the exact integrand pointwise") {
  RngStream rng(31);
  for (int i = 0; i < 1000; ++i) {
    Vec3 v(rng.uniform(-20, 20), rng.uniform(-20, 20), 0.0);
    if (v.norm() < 0.5) v.x() += 1.0;
    const Vec3 a(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    const Real exact = propulsion_integrand_exact(v, a, kC1, kC2, kG);
    const Real ub = propulsion_integrand_ub(v, a, kC1, kC2, kG);
    CHECK(ub >= exact - 1e-12 * std::abs(exact));
    CHECK(exact == doctest::Approx(oracle_exact(v, a)).epsilon(1e-12));
    CHECK(ub == doctest::Approx(oracle_ub(v, a)).epsilon(1e-12));

    // Orthogonal command: the two integrands coincide.
    const Vec3 perp = Vec3(-v.y(), v.x(), 0.0).normalized() * a.norm();
    CHECK(propulsion_integrand_ub(v, perp, kC1, kC2, kG) ==
          doctest::Approx(propulsion_integrand_exact(v, perp, kC1, kC2, kG)).epsilon(1e-12));
  }
}

TEST_CASE("mission energies over simple trajectories") {
  std::vector<UavState> traj(41);
  for (auto& s : traj) {
    s.v = Vec3(10, 0, 0);
    s.a = Vec3::Zero();
  }
  CHECK(mission_energy_exact(traj, 1.0, 10.0, kC1, kC2, kG) ==
        doctest::Approx(9037.04).epsilon(1e-4));
  CHECK(mission_energy_ub(traj, 1.0, kC1, kC2, kG) ==
        doctest::Approx(mission_energy_exact(traj, 1.0, 10.0, kC1, kC2, kG)).epsilon(1e-12));

  // Single slot with a perpendicular command.
  std::vector<UavState> one(2);
  one[0].v = Vec3(10, 0, 0);
  one[0].a = Vec3(0, 5, 0);
  one[1].v = Vec3(10, 5, 0);
  CHECK(mission_energy_ub(one, 1.0, kC1, kC2, kG) == doctest::Approx(284.495).epsilon(1e-5));

  CHECK_THROWS_AS(mission_energy_exact({UavState{}}, 1.0, 10.0, kC1, kC2, kG),
                  std::invalid_argument);
}

TEST_CASE("bound holds over random feasible trajectories with non-decreasing final speed") {
  RngStream rng(37);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<UavState> traj;
    UavState s;
    s.v = Vec3(5 + rng.uniform(0, 5), 0, 0);
    const Real v0 = s.v.norm();
    traj.push_back(s);
    for (int t = 0; t < 10; ++t) {
      const Vec3 a(rng.uniform(-3, 3), rng.uniform(-3, 3), 0.0);
      UavState n = step_kinematics(traj.back(), a, 1.0);
      auto [v, ap] = project_kinematics(n.v, n.a, 3.0, 20.0, 5.0);
      n.v = v;
      traj.push_back(n);
    }
    if (traj.back().v.norm() < v0) continue;
    CHECK(mission_energy_ub(traj, 1.0, kC1, kC2, kG) >=
          mission_energy_exact(traj, 1.0, 10.0, kC1, kC2, kG) - 1e-9);
  }
}

TEST_CASE("ee_lb is the plain ratio") {
  CHECK(ee_lb(1e9, 1e5) == doctest::Approx(1e4));
  CHECK(ee_lb(0.0, 5.0) == 0.0);
  CHECK(ee_lb(2e9, 1e5) == doctest::Approx(2.0 * ee_lb(1e9, 1e5)));
  CHECK_THROWS_AS(ee_lb(1.0, 0.0), std::domain_error);
}

TEST_CASE("kinematic projection satisfies and preserves") {
  // Over-limit acceleration shrinks radially.
  {
    auto [v, a] = project_kinematics(Vec3(10, 0, 0), Vec3(8, 6, 0), 3, 20, 5);
    CHECK(a.norm() == doctest::Approx(5.0));
    CHECK(a.normalized().isApprox(Vec3(0.8, 0.6, 0.0), 1e-12));
  }
  // Feasible velocity untouched.
  {
    auto [v, a] = project_kinematics(Vec3(10, 2, 0), Vec3::Zero(), 3, 20, 5);
    CHECK(v == Vec3(10, 2, 0));
  }
  // Slow velocity lifted to the annulus.
  {
    auto [v, a] = project_kinematics(Vec3(1.5, 0, 0), Vec3::Zero(), 3, 20, 5);
    CHECK(v.isApprox(Vec3(3, 0, 0), 1e-12));
  }

  RngStream rng(41);
  for (int i = 0; i < 500; ++i) {
    const Vec3 v(rng.uniform(-40, 40), rng.uniform(-40, 40), 0.0);
    const Vec3 a(rng.uniform(-15, 15), rng.uniform(-15, 15), rng.uniform(-15, 15));
    auto [v1, a1] = project_kinematics(v, a, 3, 20, 5);
    CHECK(a1.norm() <= 5.0 + 1e-12);
    CHECK(v1.norm() >= 3.0 - 1e-12);
    CHECK(v1.norm() <= 20.0 + 1e-12);
    auto [v2, a2] = project_kinematics(v1, a1, 3, 20, 5);
    CHECK((v2 - v1).norm() < 1e-12);
    CHECK((a2 - a1).norm() < 1e-12);
  }
}

TEST_CASE("velocity projection is the nearest point on the speed annulus") {
  RngStream rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 v(rng.uniform(-30, 30), rng.uniform(-30, 30), 0.0);
    auto [vp, ap] = project_kinematics(v, Vec3::Zero(), 3, 20, 5);
    const Real proj_dist = (vp - v).norm();
    // Polar grid over the feasible annulus.
    Real best = 1e18;
    for (int ir = 0; ir <= 400; ++ir) {
      const Real r = 3.0 + (20.0 - 3.0) * ir / 400.0;
      for (int it = 0; it < 1440; ++it) {
        const Real th = 2 * kPi * it / 1440;
        const Vec3 cand(r * std::cos(th), r * std::sin(th), 0.0);
        best = std::min(best, (cand - v).norm());
      }
    }
    CHECK(proj_dist <= best + 1e-6 + 0.1);  // grid resolution slack
    CHECK(proj_dist <= best + 0.1);
  }
}
