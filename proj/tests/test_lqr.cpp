#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gflsync/design.hpp"
#include "gflsync/lqr.hpp"

using namespace gflsync;

TEST_CASE("plant matrix structure") {
  const LclParams p;
  for (auto conv : {UnitConvention::per_unit, UnitConvention::si}) {
    const auto m = build_plant(p, conv);
    const double inv_l1 = conv == UnitConvention::per_unit ? 1.0 / p.l1_pu() : 1.0 / p.lf1;
    const double inv_l2 = conv == UnitConvention::per_unit ? 1.0 / p.l2_pu() : 1.0 / p.lf2;
    CHECK(m.a(0, 4) == Catch::Approx(-inv_l1));
    CHECK(m.a(2, 4) == Catch::Approx(inv_l2));
    CHECK(m.b1(0, 0) == Catch::Approx(inv_l1));
    CHECK(m.b2(2, 0) == Catch::Approx(-inv_l2));

    // Rotation cross-coupling is skew: the symmetric part has no omega terms.
    const Matrix sym = m.a + m.a.transpose();
    CHECK(sym(0, 1) == Catch::Approx(0.0).margin(1e-12));
    CHECK(sym(2, 3) == Catch::Approx(0.0).margin(1e-12));
    CHECK(sym(4, 5) == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("per-unit ratings from the published base") {
  const LclParams p;
  CHECK(p.z_base() == Catch::Approx(415.0 * 415.0 / 110e3));
  CHECK(p.x2_pu() == Catch::Approx(0.1003).margin(2e-4));
  CHECK(p.b_pu() == Catch::Approx(0.0492).margin(2e-4));
}

TEST_CASE("equilibrium cases and the zero-derivative certificate") {
  const LclParams p;
  const auto zero = equilibrium(p, {0.0, 0.0}, {0.0, 0.0});
  CHECK(zero.x_bar.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.u_bar.norm() == 0.0);

  const Dq i_ref{std::cos(kPi / 6.0), std::sin(kPi / 6.0)};
  const Dq v_op{1.0, 0.0};
  const auto eq = equilibrium(p, i_ref, v_op);
  const Vector6 residual = continuous_derivatives(p, eq.x_bar, eq.u_bar, v_op);
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);

  // Without the shunt path the branch currents coincide.
  LclParams tiny_c = p;
  tiny_c.cf = 1e-15;
  const auto eq2 = equilibrium(tiny_c, i_ref, v_op);
  CHECK(eq2.x_bar(2) == Catch::Approx(eq2.x_bar(0)).margin(1e-9));
  CHECK(eq2.x_bar(3) == Catch::Approx(eq2.x_bar(1)).margin(1e-9));

  // Series-resonant parameters are rejected: 1 - w^2 L2 C = 0.
  LclParams resonant = p;
  resonant.cf = 1.0 / (p.omega_g * p.omega_g * p.lf2);
  CHECK_THROWS_AS(equilibrium(resonant, i_ref, v_op), NumericalError);
}

TEST_CASE("designed gains have the d-q symmetry and stabilize the loop") {
  const LclParams p;
  for (auto conv : {UnitConvention::per_unit, UnitConvention::si}) {
    for (const auto& w : {LqrWeights::low(), LqrWeights::high()}) {
      const auto d = design_lqr(p, w, 1e-4, conv);
      CHECK(gain_symmetry_defect(d.k) < 1e-8);
      CHECK(d.closed_loop_spectrum().max_abs() < 1.0);
      CHECK(d.dare_residual() <= 1e-8 * d.q.cwiseAbs().maxCoeff());
    }
  }
}

TEST_CASE("expensive control drives the gain to zero") {
  const LclParams p;
  LqrWeights w = LqrWeights::low();
  w.r = 1e9;
  const auto d = design_lqr(p, w, 1e-4);
  CHECK(d.k.cwiseAbs().maxCoeff() < 1e-3);

  LqrWeights zero_q{0.0, 0.0, 0.0, 1e-2};
  const auto dz = design_lqr(p, zero_q, 1e-4);
  CHECK(dz.k.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("control law holds the equilibrium and clamps") {
  const LclParams p;
  const auto d = design_lqr(p, LqrWeights::high(), 1e-4);
  const Dq i_ref{0.3, 0.2};
  const auto eq = equilibrium(p, i_ref, {1.0, 0.0});

  const Dq hold = control_step(d, eq.x_bar, eq, 10.0);
  CHECK(hold.d == Catch::Approx(eq.u_bar.d).margin(1e-12));
  CHECK(hold.q == Catch::Approx(eq.u_bar.q).margin(1e-12));

  Vector6 far = eq.x_bar;
  far(0) += 50.0;  // force a big raw command
  const Dq clamped = control_step(d, far, eq, 1.0);
  CHECK(clamped.norm() == Catch::Approx(1.0).margin(1e-12));
  const Dq unclamped = control_step(d, far, eq, 0.0);
  // Direction preserved by the clamp.
  const double cross = unclamped.d * clamped.q - unclamped.q * clamped.d;
  CHECK(cross == Catch::Approx(0.0).margin(1e-9));
  CHECK(unclamped.d * clamped.d + unclamped.q * clamped.q > 0.0);

  LqrWeights zero_q{0.0, 0.0, 0.0, 1e-2};
  const auto dz = design_lqr(p, zero_q, 1e-4);
  const Dq u0 = control_step(dz, far, eq, 0.0);
  CHECK(u0.d == Catch::Approx(eq.u_bar.d).margin(1e-9));
  CHECK(u0.q == Catch::Approx(eq.u_bar.q).margin(1e-9));
}

TEST_CASE("closed loop recovers from a perturbed state") {
  const LclParams p;
  const auto d = design_lqr(p, LqrWeights::high(), 1e-4);
  const Dq i_ref{std::cos(kPi / 6.0), std::sin(kPi / 6.0)};
  const Dq v_op{1.0, 0.0};
  const auto eq = equilibrium(p, i_ref, v_op);

  // Discretize the disturbance input as well so the model closes exactly.
  auto [ad, bd_all] =
      zoh_discretize(d.plant.a, (Matrix(6, 4) << d.plant.b1, d.plant.b2).finished(), 1e-4);
  const Matrix b1d = bd_all.leftCols(2);
  const Matrix b2d = bd_all.rightCols(2);

  Vector6 x = eq.x_bar;
  x(0) += 0.5;
  x(3) -= 0.4;
  const double initial = (x - eq.x_bar).norm();
  for (int k = 0; k < 400; ++k) {
    const Dq u = control_step(d, x, eq, 0.0);
    x = ad * x + b1d * Eigen::Vector2d(u.d, u.q) + b2d * Eigen::Vector2d(v_op.d, v_op.q);
  }
  CHECK((x - eq.x_bar).norm() < 0.01 * initial);
}

TEST_CASE("published-weight designs reproduce the documented comparison") {
  const auto rep = make_design_report(LclParams{}, 1e-4,
                                      GridImpedance::polar(2.0, 70.0 * kPi / 180.0));
  // The SI design matches the published high-gain matrix on every dominant
  // entry; the low-gain matrix is not reproduced by either convention and
  // is reported as a documented deviation.
  bool si_high_matches = false;
  for (const auto& c : rep.comparisons) {
    if (c.convention == "si" && c.weight_set == "high") si_high_matches = c.dominant_entries_match;
  }
  CHECK(si_high_matches);
}
