#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "gflsync/machine.hpp"
#include "gflsync/plant.hpp"
#include "gflsync/reproduce.hpp"
#include "gflsync/scenario.hpp"

using namespace gflsync;

namespace {

constexpr double kTs = 1e-4;

NetworkParams base_params() {
  NetworkParams np;
  np.grid = GridImpedance::polar(1.0, 60.0 * kPi / 180.0);
  np.ts = kTs;
  return np;
}

}  // namespace

TEST_CASE("zero sources and zero state stay зero") {
  NetworkParams np = base_params();
  np.vg_mag = 0.0;
  NetworkSim sim(np);
  for (int k = 0; k < 1000; ++k) sim.step({0.0, 0.0});
  CHECK(sim.max_abs_state() == 0.0);
}

TEST_CASE("lossless network conserves stored energy") {
  NetworkParams np = base_params();
  np.vg_mag = 0.0;
  np.grid = GridImpedance{0.0, 0.8};  // purely inductive branch
  NetworkSim sim(np);
  sim.set_filter_state({0.4, -0.2}, {0.1, 0.3}, {0.9, -0.5});
  const double e0 = sim.stored_energy();
  REQUIRE(e0 > 0.0);
  // One fundamental cycle.
  for (int k = 0; k < 200; ++k) {
    sim.step({0.0, 0.0});
    CHECK(std::abs(sim.stored_energy() - e0) / e0 < 1e-6);
  }
}

TEST_CASE("sinusoidal steady state matches the phasor-circuit oracle") {
  NetworkParams np = base_params();
  np.grid = GridImpedance::polar(0.8, 70.0 * kPi / 180.0);
  np.theta0 = 0.3;
  np.drive = InverterDrive::oscillator;
  np.v_inv_phasor = {0.9, 0.25};
  NetworkSim sim(np);
  const int steps = 12000;  // > 1 s: transients die through the branch resistance
  for (int k = 0; k < steps; ++k) sim.step({0.0, 0.0});

  // Mesh analysis at the fundamental.
  const std::complex<double> j(0.0, 1.0);
  const double w = np.lcl.omega_g;
  const double t = sim.time();
  const std::complex<double> rot = std::exp(j * w * t);
  const std::complex<double> vg = np.vg_mag * std::exp(j * np.theta0) * rot;
  const std::complex<double> vinv = np.v_inv_phasor.c() * rot;
  const std::complex<double> zl1 = j * w * np.lcl.l1_pu();
  const std::complex<double> zbr =
      np.grid.resistance + j * (w * np.lcl.l2_pu() + np.grid.reactance);
  const std::complex<double> yc = j * w * np.lcl.c_pu();
  const std::complex<double> vc =
      (vinv / zl1 + vg / zbr) / (yc + 1.0 / zl1 + 1.0 / zbr);
  const std::complex<double> i1 = (vinv - vc) / zl1;
  const std::complex<double> i2 = (vc - vg) / zbr;

  CHECK(std::abs(sim.i_inv().c() - i1) < 1e-4);
  CHECK(std::abs(sim.i_pcc().c() - i2) < 1e-4);
  CHECK(std::abs(sim.v_c().c() - vc) < 1e-4);

  // Both PCC voltage evaluations coincide in steady state.
  const std::complex<double> v_node = vc - j * w * np.lcl.l2_pu() * i2;
  CHECK(std::abs(sim.v_pcc().c() - v_node) < 1e-4);
}

TEST_CASE("quasistatic and physical PCC voltages agree in steady state only") {
  for (auto model : {PccVoltageModel::quasistatic, PccVoltageModel::physical}) {
    NetworkParams np = base_params();
    np.pcc_model = model;
    NetworkSim sim(np);
    for (int k = 0; k < 20000; ++k) sim.step({0.0, 0.0});
    const AlphaBeta qs = sim.grid_emf() + sim.grid_impedance().drop(sim.i_pcc());
    CHECK(std::abs((sim.v_pcc() - qs).norm()) < 1e-6);
  }
}

TEST_CASE("machine equilibrium is a fixed point") {
  MachineParams mp;
  mp.x_sync = 0.06;
  mp.inertia_h = 1.0;
  mp.damping = 2.0;
  mp.p_mech = 0.4;
  const double delta0 = std::asin(mp.p_mech * mp.x_sync / (mp.emf * 1.0));
  MachineState s{delta0, mp.omega_s};
  const AlphaBeta v_pcc{1.0, 0.0};  // stiff terminal on the alpha axis, phase 0
  auto [next, i] = machine_step(mp, s, v_pcc, 0.0, kTs);
  CHECK(next.delta == Catch::Approx(delta0).margin(1e-12));
  CHECK(next.omega_m == Catch::Approx(mp.omega_s).margin(1e-9));
}

TEST_CASE("zero power transfer at matched EMF") {
  MachineParams mp;
  mp.p_mech = 0.0;
  mp.inertia_h = 2.0;
  MachineState s{0.0, mp.omega_s};
  auto [next, i] = machine_step(mp, s, {1.0, 0.0}, 0.0, kTs);
  CHECK(i.norm() < 1e-15);
  CHECK(swing_electrical_power(mp, 0.0, 1.0, 0.0) == 0.0);
}

TEST_CASE("small-signal swing frequency matches the linearization") {
  MachineParams mp;
  mp.x_sync = 0.3;
  mp.p_mech = 0.5;
  mp.damping = 0.5;
  mp.inertia_h = 0.8;
  const double v = 1.0;
  const double delta0 = std::asin(mp.p_mech * mp.x_sync / (mp.emf * v));
  const double ks = (mp.emf * v / mp.x_sync) * std::cos(delta0);
  const double f_expected = std::sqrt(mp.omega_s * ks / (2.0 * mp.inertia_h)) / (2.0 * kPi);

  MachineState s{delta0 + 0.05, mp.omega_s};
  std::vector<double> crossings;
  double prev = s.delta - delta0;
  const double phase0 = 0.0;
  double phi = phase0;
  for (int k = 0; k < 200000; ++k) {
    phi = wrap_angle(phi + mp.omega_s * kTs);
    const AlphaBeta v_pcc{v * std::cos(phi), v * std::sin(phi)};
    auto [next, i] = machine_step(mp, s, v_pcc, phi, kTs);
    s = next;
    const double dev = s.delta - delta0;
    if (prev < 0.0 && dev >= 0.0) crossings.push_back(k * kTs);
    prev = dev;
  }
  REQUIRE(crossings.size() >= 4);
  const double period =
      (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
  CHECK(1.0 / period == Catch::Approx(f_expected).epsilon(0.05));
}

TEST_CASE("inertia sizing follows the inverse-square law") {
  const auto op = make_operating_point(1.0, 1.0, 0.68, 1.94, 0.2);
  const double h8 = inertia_for_frequency(8.0, op, 2.0 * kPi * 50.0);
  const double h16 = inertia_for_frequency(16.0, op, 2.0 * kPi * 50.0);
  CHECK(h8 / h16 == Catch::Approx(4.0).epsilon(1e-9));
  const double h3 = inertia_for_frequency(3.0, op, 2.0 * kPi * 50.0);
  const double h15 = inertia_for_frequency(15.0, op, 2.0 * kPi * 50.0);
  CHECK(h3 / h15 == Catch::Approx(25.0).epsilon(1e-9));
  CHECK_THROWS_AS(inertia_for_frequency(0.0, op, 314.0), std::invalid_argument);
}

TEST_CASE("machine-only simulated frequency hits the sizing target") {
  const auto cfg = experiments::machine_scenario(std::nullopt, 8.0);
  const Trace trace = run_scenario(cfg);
  REQUIRE_FALSE(trace.diverged);
  // Zero crossings of the detrended load angle after release.
  std::vector<double> t, delta;
  for (const auto& r : trace.rows) {
    if (r.t >= cfg.machine.release_time + 0.05) {
      t.push_back(r.t);
      delta.push_back(r.machine_delta);
    }
  }
  const double mean = [&] {
    double acc = 0.0;
    for (std::size_t i = delta.size() / 2; i < delta.size(); ++i) acc += delta[i];
    return acc / static_cast<double>(delta.size() - delta.size() / 2);
  }();
  std::vector<double> crossings;
  for (std::size_t i = 1; i < delta.size(); ++i) {
    if (delta[i - 1] - mean < 0.0 && delta[i] - mean >= 0.0) crossings.push_back(t[i]);
  }
  REQUIRE(crossings.size() >= 3);
  const double period =
      (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
  CHECK(1.0 / period == Catch::Approx(8.0).epsilon(0.10));
}

TEST_CASE("halving the step changes the steady state marginally") {
  auto run = [&](double ts) {
    ScenarioConfig cfg = experiments::validation_base();
    cfg.ts = ts;
    cfg.duration = 0.5;
    const Trace trace = run_scenario(cfg);
    return trace.rows.back();
  };
  const auto coarse = run(1e-4);
  const auto fine = run(5e-5);
  CHECK(std::abs(coarse.i_inv_dq.d - fine.i_inv_dq.d) < 1e-3);
  CHECK(std::abs(coarse.i_inv_dq.q - fine.i_inv_dq.q) < 1e-3);
  CHECK(std::abs(coarse.v_c_dq.d - fine.v_c_dq.d) < 1e-3);
}
