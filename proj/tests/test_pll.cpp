#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gflsync/frames.hpp"
#include "gflsync/pll.hpp"

using namespace gflsync;

namespace {

constexpr double kOmega = 2.0 * kPi * 50.0;
constexpr double kTs = 1e-4;

AlphaBeta emf_at(double phase, double mag = 1.0) {
  return {mag * std::cos(phase), mag * std::sin(phase)};
}

}  // namespace

TEST_CASE("linearized loop poles") {
  const PllSync p = PllSync::make(PllMode::cpll, {}, kOmega, 5.0, 5.0);
  const auto poles = pll_linearized_poles(p, 1.0);
  REQUIRE(poles.values.size() == 2);
  const double lo = std::min(poles.values[0].real(), poles.values[1].real());
  const double hi = std::max(poles.values[0].real(), poles.values[1].real());
  CHECK(lo == Catch::Approx((-5.0 - std::sqrt(5.0)) / 2.0).margin(1e-9));
  CHECK(hi == Catch::Approx((-5.0 + std::sqrt(5.0)) / 2.0).margin(1e-9));

  PllSync nointeg = p;
  nointeg.ki = 0.0;
  const auto poles2 = pll_linearized_poles(nointeg, 2.0);
  const double lo2 = std::min(poles2.values[0].real(), poles2.values[1].real());
  const double hi2 = std::max(poles2.values[0].real(), poles2.values[1].real());
  CHECK(lo2 == Catch::Approx(-10.0).margin(1e-9));
  CHECK(hi2 == Catch::Approx(0.0).margin(1e-12));

  const auto poles3 = pll_linearized_poles(p, 0.0);
  CHECK(std::abs(poles3.values[0]) < 1e-12);
  CHECK(std::abs(poles3.values[1]) < 1e-12);
}

TEST_CASE("locked loop stays locked") {
  PllSync p = PllSync::make(PllMode::cpll, {}, kOmega);
  p.theta_hat = 0.3;
  double phase = 0.3;
  for (int k = 0; k < 5000; ++k) {
    const AlphaBeta v = emf_at(p.theta_hat);  // synchronization vector on the d axis
    auto [next, th] = pll_step(p, v, {0.0, 0.0}, kTs);
    p = next;
    phase = wrap_angle(phase + kOmega * kTs);
  }
  CHECK(std::abs(wrap_angle(p.theta_hat - phase)) < 1e-12);
  CHECK(p.integrator == 0.0);
}

TEST_CASE("the uncompensated loop ignores the current input") {
  PllSync a = PllSync::make(PllMode::cpll, GridImpedance::polar(2.0, 1.2), kOmega);
  PllSync b = a;
  double pa = 0.0, pb = 0.0;
  double phase = 0.7;
  for (int k = 0; k < 2000; ++k) {
    phase = wrap_angle(phase + kOmega * kTs);
    const AlphaBeta v = emf_at(phase);
    auto [na, ta] = pll_step(a, v, {0.9, -0.4}, kTs);
    auto [nb, tb] = pll_step(b, v, {0.0, 0.0}, kTs);
    a = na;
    b = nb;
    pa = ta;
    pb = tb;
  }
  CHECK(pa == pb);
}

TEST_CASE("full compensation recovers the source, no compensation tracks the terminal") {
  const GridImpedance z = GridImpedance::polar(1.5, 70.0 * kPi / 180.0);
  const AlphaBeta i_const{0.6, 0.2};
  const auto run = [&](PllMode mode) {
    PllSync p = PllSync::make(mode, z, kOmega);
    double phase = 0.0, theta = 0.0;
    AlphaBeta v_pcc;
    for (int k = 0; k < 120000; ++k) {  // several loop time constants
      phase = wrap_angle(phase + kOmega * kTs);
      v_pcc = emf_at(phase) + z.drop(i_const);
      auto [next, th] = pll_step(p, v_pcc, i_const, kTs);
      p = next;
      theta = th;
    }
    struct Out {
      double theta, phase, v_phase;
    };
    return Out{theta, phase, phase_of(v_pcc)};
  };

  const auto mvi = run(PllMode::mvi);
  CHECK(std::abs(wrap_angle(mvi.theta - mvi.phase)) < 1e-3);

  const auto cpll = run(PllMode::cpll);
  CHECK(std::abs(wrap_angle(cpll.theta - cpll.v_phase)) < 1e-3);
  CHECK(std::abs(wrap_angle(cpll.theta - cpll.phase)) > 0.05);

  // Partial compensation lands in between.
  const auto cvi = run(PllMode::cvi);
  const double cvi_err = std::abs(wrap_angle(cvi.theta - cvi.phase));
  const double cpll_err = std::abs(wrap_angle(cpll.theta - cpll.phase));
  CHECK(cvi_err < cpll_err);
  CHECK(cvi_err > std::abs(wrap_angle(mvi.theta - mvi.phase)));
}

TEST_CASE("integrator anti-windup clamp holds") {
  PllSync p = PllSync::make(PllMode::cpll, {}, kOmega);
  for (int k = 0; k < 200000; ++k) {
    // Synchronization voltage pinned fully on the q axis: permanent error.
    const AlphaBeta v = inv_park({0.0, 1.0}, p.theta_hat);
    auto [next, th] = pll_step(p, v, {0.0, 0.0}, kTs);
    p = next;
    CHECK(std::abs(p.integrator) <= 2.0 * kPi * 10.0 + 1e-12);
  }
  CHECK(std::abs(p.integrator) == Catch::Approx(2.0 * kPi * 10.0));
}
