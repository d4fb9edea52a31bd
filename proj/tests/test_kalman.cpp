#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "gflsync/frames.hpp"
#include "gflsync/kalman.hpp"

using namespace gflsync;

namespace {

constexpr double kOmega = 2.0 * kPi * 50.0;
constexpr double kTs = 1e-4;

GridImpedance weak_grid() { return GridImpedance::polar(2.0, 70.0 * kPi / 180.0); }

DiscreteKfModel model(KfVariant v, double q = 1e-6) {
  return build_kf_model(weak_grid(), kOmega, kTs, q, Eigen::Matrix2d::Identity(), v);
}

AlphaBeta emf_at(double phase) { return {std::cos(phase), std::sin(phase)}; }

}  // namespace

TEST_CASE("build_kf_model rotation and feedthrough entries") {
  const auto m = model(KfVariant::aaekf);
  CHECK(m.ad(0, 0) == Catch::Approx(0.9995066).margin(1e-7));
  CHECK(m.ad(1, 0) == Catch::Approx(0.0314108).margin(1e-7));
  CHECK((m.ad * m.ad.transpose() - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(m.cd.isIdentity(0.0));

  CHECK(m.dd(0, 0) == Catch::Approx(0.6840).margin(1e-4));
  CHECK(m.dd(0, 1) == Catch::Approx(-1.8794).margin(1e-4));
  CHECK(m.dd(1, 0) == Catch::Approx(1.8794).margin(1e-4));
  CHECK(m.dd(1, 1) == Catch::Approx(0.6840).margin(1e-4));

  const auto c = model(KfVariant::caekf);
  CHECK(c.dd.cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(build_kf_model(weak_grid(), kOmega, 0.0, 1e-6,
                                 Eigen::Matrix2d::Identity(), KfVariant::aaekf),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_kf_model(weak_grid(), kOmega, kTs, -1.0,
                                 Eigen::Matrix2d::Identity(), KfVariant::aaekf),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_kf_model(weak_grid(), kOmega, kTs, 1e-6,
                                 -Eigen::Matrix2d::Identity(), KfVariant::aaekf),
                  std::invalid_argument);
}

TEST_CASE("kf_step with zero input makes the variants identical") {
  const auto ma = model(KfVariant::aaekf);
  const auto mc = model(KfVariant::caekf);
  KalmanState sa = KalmanState::flat_start();
  KalmanState sc = KalmanState::flat_start();
  double phase = 0.4;
  for (int k = 0; k < 50; ++k) {
    phase += kOmega * kTs;
    const AlphaBeta y = emf_at(phase);
    auto [na, ta] = kf_step(ma, sa, y, {0.0, 0.0});
    auto [nc, tc] = kf_step(mc, sc, y, {0.0, 0.0});
    sa = na;
    sc = nc;
    CHECK(ta == tc);
    CHECK(sa.x_hat.alpha == sc.x_hat.alpha);
  }
}

TEST_CASE("line-drop compensation recovers the source phase exactly in steady state") {
  // Oracle: with measurements built as v_pcc = v_g + D i, inverting the drop
  // gives the source exactly, so the filter must converge onto it.
  const auto m = model(KfVariant::aaekf);
  const GridImpedance z = weak_grid();
  const AlphaBeta i_const{0.9, -0.3};
  KalmanState s = KalmanState::flat_start();
  double phase = 2.0;
  double theta = 0.0;
  for (int k = 0; k < 40000; ++k) {
    phase = wrap_angle(phase + kOmega * kTs);
    const AlphaBeta v_g = emf_at(phase);
    const AlphaBeta y = v_g + z.drop(i_const);
    auto [next, th] = kf_step(m, s, y, i_const);
    s = next;
    theta = th;
  }
  CHECK(std::abs(wrap_angle(theta - phase)) < 1e-3);
  // Covariance settled symmetric PSD.
  CHECK((s.p - s.p.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(s.p.eigenvalues().real().minCoeff() > 0.0);
}

TEST_CASE("neglecting the feedthrough leaves the drop angle as bias") {
  const GridImpedance z = weak_grid();
  const AlphaBeta i_const{0.5, 0.1};
  const auto run = [&](KfVariant variant) {
    const auto m = model(variant);
    KalmanState s = KalmanState::flat_start();
    double phase = -1.0, theta = 0.0;
    AlphaBeta v_pcc;
    for (int k = 0; k < 60000; ++k) {
      phase = wrap_angle(phase + kOmega * kTs);
      v_pcc = emf_at(phase) + z.drop(i_const);
      auto [next, th] = kf_step(m, s, v_pcc, i_const);
      s = next;
      theta = th;
    }
    struct Out {
      double theta, phase, v_pcc_phase;
    };
    return Out{theta, phase, phase_of(v_pcc)};
  };

  const auto aaekf = run(KfVariant::aaekf);
  CHECK(std::abs(wrap_angle(aaekf.theta - aaekf.phase)) < 1e-3);

  const auto caekf = run(KfVariant::caekf);
  CHECK(std::abs(wrap_angle(caekf.theta - caekf.v_pcc_phase)) < 1e-3);

  const double drop_angle =
      std::abs(wrap_angle(caekf.v_pcc_phase - caekf.phase));
  const double aaekf_err = std::abs(wrap_angle(aaekf.theta - aaekf.phase));
  const double caekf_err = std::abs(wrap_angle(caekf.theta - caekf.phase));
  CHECK(caekf_err - aaekf_err >= drop_angle - 2e-3);
}

TEST_CASE("running gain converges to the steady-state design") {
  const auto m = model(KfVariant::aaekf, 1e-6);
  const auto steady = steady_gain(m);
  KalmanState s = KalmanState::flat_start();
  double phase = 0.0;
  for (int k = 0; k < 200000; ++k) {
    phase = wrap_angle(phase + kOmega * kTs);
    auto [next, th] = kf_step(m, s, emf_at(phase), {0.0, 0.0});
    s = next;
  }
  CHECK((s.k_last - steady.gain).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("larger process noise converges faster from the same start") {
  const auto time_to = [&](double q) {
    const auto m = model(KfVariant::aaekf, q);
    KalmanState s = KalmanState::flat_start();
    double phase = 2.4;
    for (int k = 1; k < 100000; ++k) {
      phase = wrap_angle(phase + kOmega * kTs);
      auto [next, th] = kf_step(m, s, emf_at(phase), {0.0, 0.0});
      s = next;
      if (std::abs(wrap_angle(th - phase)) < 1e-2) return k;
    }
    return 100000;
  };
  const int t5 = time_to(1e-5);
  const int t6 = time_to(1e-6);
  const int t7 = time_to(1e-7);
  CHECK(t5 < t6);
  CHECK(t6 < t7);
}

TEST_CASE("error dynamics certificates") {
  const auto m = model(KfVariant::aaekf);

  const auto full = error_dynamics(m, Eigen::Matrix2d::Identity());
  CHECK(full.a_error.cwiseAbs().maxCoeff() < 1e-15);
  CHECK(full.spectrum.max_abs() < 1e-15);

  const auto none = error_dynamics(m, Eigen::Matrix2d::Zero());
  CHECK(none.spectrum.max_abs() == Catch::Approx(1.0).margin(1e-12));
  CHECK_FALSE(none.stable);

  for (double q : {1e-5, 1e-6, 1e-7}) {
    const auto mq = model(KfVariant::aaekf, q);
    const auto ed = error_dynamics(mq, steady_gain(mq).gain);
    CHECK(ed.stable);
    CHECK(ed.spectrum.max_abs() > 0.99);
    CHECK(ed.spectrum.max_abs() < 1.0);
  }
}

TEST_CASE("steady-gain stepping matches the spirit of the time-varying filter") {
  const auto m = model(KfVariant::aaekf, 1e-6);
  const auto steady = steady_gain(m);
  KalmanState s = KalmanState::flat_start();
  double phase = 1.0, theta = 0.0;
  const GridImpedance z = weak_grid();
  const AlphaBeta i_const{0.2, 0.6};
  for (int k = 0; k < 80000; ++k) {
    phase = wrap_angle(phase + kOmega * kTs);
    const AlphaBeta y = emf_at(phase) + z.drop(i_const);
    auto [next, th] = kf_step_steady(m, s, y, i_const, steady.gain);
    s = next;
    theta = th;
  }
  CHECK(std::abs(wrap_angle(theta - phase)) < 1e-3);
}
