#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gflsync/frames.hpp"
#include "gflsync/kalman.hpp"
#include "gflsync/lqr.hpp"
#include "gflsync/machine.hpp"
#include "gflsync/plant.hpp"
#include "gflsync/pll.hpp"

namespace gflsync {

enum class SyncMethod { cpll, cvi_pll, mvi_pll, caekf, aaekf_lqr };
enum class ControllerKind { automatic, lqr, pi };

inline const char* to_string(SyncMethod m) {
  switch (m) {
    case SyncMethod::cpll: return "CPLL";
    case SyncMethod::cvi_pll: return "CVI-PLL";
    case SyncMethod::mvi_pll: return "MVI-PLL";
    case SyncMethod::caekf: return "CAEKF";
    case SyncMethod::aaekf_lqr: return "AAEKF-LQR";
  }
  return "?";
}

struct ImpedanceStep {
  double time = 0.0;       // s
  double magnitude = 0.0;  // pu
  double angle = 0.0;      // rad
};

struct KfSettings {
  double q_kf = 1e-6;
  double r_diag = 1.0;            // Rkf = r_diag * I
  bool time_varying_gain = true;  // false: precomputed steady-state gain
};

struct LqrSettings {
  LqrWeights weights = LqrWeights::high();
  double v_sat = 1.25;  // circular clamp on the commanded voltage, pu
  bool feedforward = true;
  UnitConvention convention = UnitConvention::per_unit;
};

struct PiSettings {
  double kp = 1.0;   // pu voltage per pu current error
  double ki = 300.0; // 1/s
  double integrator_limit = 2.0;
};

struct PllSettings {
  double kp = 5.0;
  double ki = 5.0;
  double cvi_fraction = 0.5;  // compensation fraction for the partial variant
};

struct MachineSettings {
  bool enabled = false;
  double emf = 1.0;          // pu
  double l_sync = 300e-6;    // tie inductance, H
  double p_mech = 0.2;       // pu
  double inertia_h = 0.0;    // s; 0 means size from f_target
  double f_target = 8.0;     // Hz, used when inertia_h == 0
  double damping = 0.0;      // pu; 0 means calibrate for the 8 Hz decay target
  double decay_target_8hz = 0.563;  // s, no-inverter calibration point
  double release_time = 1.0; // machine frozen at its operating point before this
  double delta_kick = 0.1;   // rad applied at release
};

struct NoiseSettings {
  double sigma_v = 0.0;  // measurement noise std on v_pcc, pu
  double sigma_i = 0.0;  // measurement noise std on i_pcc, pu
};

struct ScenarioConfig {
  SyncMethod method = SyncMethod::aaekf_lqr;
  ControllerKind controller = ControllerKind::automatic;
  bool inverter_enabled = true;
  double duration = 1.0;
  double ts = 1e-4;
  std::uint64_t seed = 0;

  LclParams lcl;
  double vg_mag = 1.0;
  double theta0 = 0.0;
  GridImpedance z_initial = GridImpedance::polar(0.3, 70.0 * kPi / 180.0);
  std::vector<ImpedanceStep> schedule;
  double impedance_model_error = 0.0;  // fraction applied to the tracked value
  bool track_impedance = true;

  Dq i_inv_ref{std::cos(kPi / 6.0), std::sin(kPi / 6.0)};  // 1 at 30 degrees

  KfSettings kf;
  LqrSettings lqr;
  PiSettings pi;
  PllSettings pll;
  MachineSettings machine;
  NoiseSettings noise;

  PccVoltageModel pcc_model = PccVoltageModel::quasistatic;
  double c_node_farad = 1e-6;
  double divergence_limit = 1e3;

  ControllerKind effective_controller() const {
    if (controller != ControllerKind::automatic) return controller;
    switch (method) {
      case SyncMethod::caekf:
      case SyncMethod::aaekf_lqr: return ControllerKind::lqr;
      default: return ControllerKind::pi;
    }
  }

  void validate() const {
    lcl.validate();
    if (!(duration > 0.0)) throw std::invalid_argument("scenario: duration must be positive");
    if (!(ts > 0.0)) throw std::invalid_argument("scenario: Ts must be positive");
    if (!(kf.q_kf > 0.0)) throw std::invalid_argument("scenario: kf.q_kf must be positive");
    if (!(kf.r_diag > 0.0)) throw std::invalid_argument("scenario: kf.r_diag must be positive");
    if (noise.sigma_v < 0.0 || noise.sigma_i < 0.0) {
      throw std::invalid_argument("scenario: noise standard deviations must be nonnegative");
    }
    double prev = -1.0;
    for (const auto& st : schedule) {
      if (st.time < prev) throw std::invalid_argument("scenario: schedule times must be nondecreasing");
      if (!(st.magnitude >= 0.0)) throw std::invalid_argument("scenario: schedule magnitude must be nonnegative");
      prev = st.time;
    }
    if (machine.enabled) {
      if (!(machine.l_sync > 0.0)) throw std::invalid_argument("scenario: machine.l_sync must be positive");
      if (!(machine.p_mech >= 0.0)) throw std::invalid_argument("scenario: machine.p_mech must be nonnegative");
    }
  }
};

struct TraceRecord {
  double t = 0.0;
  Dq v_pcc_dq;
  AlphaBeta v_pcc_ab;
  double theta_true = 0.0;
  double theta_hat = 0.0;
  double phase_error = 0.0;
  Dq i_inv_dq;
  Dq i_pcc_dq;
  Dq v_c_dq;
  Dq u_dq;
  double u_mag_raw = 0.0;  // commanded magnitude before the saturation clamp
  double machine_delta = 0.0;
  double machine_omega = 0.0;
  double z_mag = 0.0;
  bool diverged = false;
};

struct Trace {
  std::vector<TraceRecord> rows;
  bool diverged = false;
};

namespace detail {

/// Dispatch wrapper over the two estimator families.
class Synchronizer {
 public:
  Synchronizer(const ScenarioConfig& cfg, const GridImpedance& model_z) : method_(cfg.method) {
    const double w = cfg.lcl.omega_g;
    switch (method_) {
      case SyncMethod::caekf:
      case SyncMethod::aaekf_lqr: {
        const auto variant =
            method_ == SyncMethod::aaekf_lqr ? KfVariant::aaekf : KfVariant::caekf;
        model_ = build_kf_model(model_z, w, cfg.ts,
                                cfg.kf.q_kf, cfg.kf.r_diag * Eigen::Matrix2d::Identity(),
                                variant);
        state_ = KalmanState::flat_start();
        time_varying_ = cfg.kf.time_varying_gain;
        if (!time_varying_) fixed_gain_ = steady_gain(model_).gain;
        theta_ = phase_of(state_.x_hat);
        break;
      }
      default: {
        PllMode mode = PllMode::cpll;
        if (method_ == SyncMethod::cvi_pll) mode = PllMode::cvi;
        if (method_ == SyncMethod::mvi_pll) mode = PllMode::mvi;
        pll_ = PllSync::make(mode, model_z, w, cfg.pll.kp, cfg.pll.ki, cfg.pll.cvi_fraction);
        theta_ = pll_.theta_hat;
        break;
      }
    }
  }

  bool is_kalman() const {
    return method_ == SyncMethod::caekf || method_ == SyncMethod::aaekf_lqr;
  }

  void set_model_impedance(const GridImpedance& z) {
    if (is_kalman()) {
      if (method_ == SyncMethod::aaekf_lqr) {
        model_.dd << z.resistance, -z.reactance, z.reactance, z.resistance;
      }
      // The gain recursion does not involve the feedthrough, so no rebuild.
    } else {
      pll_.virtual_z = z;
    }
  }

  double step(const AlphaBeta& v_pcc, const AlphaBeta& i_pcc, double ts) {
    if (is_kalman()) {
      if (time_varying_) {
        auto [next, theta] = kf_step(model_, state_, v_pcc, i_pcc);
        state_ = next;
        theta_ = theta;
      } else {
        auto [next, theta] = kf_step_steady(model_, state_, v_pcc, i_pcc, fixed_gain_);
        state_ = next;
        theta_ = theta;
      }
    } else {
      auto [next, theta] = pll_step(pll_, v_pcc, i_pcc, ts);
      pll_ = next;
      theta_ = theta;
    }
    return theta_;
  }

  double theta() const { return theta_; }
  const KalmanState& kalman_state() const { return state_; }

 private:
  SyncMethod method_;
  DiscreteKfModel model_;
  KalmanState state_;
  bool time_varying_ = true;
  Eigen::Matrix2d fixed_gain_ = Eigen::Matrix2d::Zero();
  PllSync pll_;
  double theta_ = 0.0;
};

/// d-q PI current regulator with cross-coupling decoupling and capacitor
/// voltage feedforward; the baseline paired with the PLL methods.
struct PiCurrentController {
  double kp = 1.0;
  double ki = 300.0;
  double limit = 2.0;
  Dq integ;

  Dq step(const Dq& i_meas, const Dq& i_ref, const Dq& v_ff, double x1, double ts,
          double v_sat, double& raw_mag) {
    const Dq e = i_ref - i_meas;
    integ.d = std::clamp(integ.d + ki * e.d * ts, -limit, limit);
    integ.q = std::clamp(integ.q + ki * e.q * ts, -limit, limit);
    Dq u{v_ff.d - x1 * i_meas.q + kp * e.d + integ.d,
         v_ff.q + x1 * i_meas.d + kp * e.q + integ.q};
    raw_mag = u.norm();
    if (v_sat > 0.0 && raw_mag > v_sat) u = u * (v_sat / raw_mag);
    return u;
  }
};

}  // namespace detail

/// Machine parameters resolved from a scenario config against the reduced
/// series operating point (EMF behind its tie plus the grid branch).
struct ResolvedMachine {
  MachineParams params;
  SwingOperatingPoint op;
  double x_sync = 0.0;
};

inline ResolvedMachine resolve_machine(const ScenarioConfig& cfg) {
  const double w = cfg.lcl.omega_g;
  const double x_sync = w * cfg.machine.l_sync / cfg.lcl.z_base();
  const auto op = make_operating_point(cfg.machine.emf, cfg.vg_mag, cfg.z_initial.resistance,
                                       x_sync + cfg.z_initial.reactance, cfg.machine.p_mech);
  MachineParams mp;
  mp.emf = cfg.machine.emf;
  mp.x_sync = x_sync;
  mp.omega_s = w;
  mp.p_mech = cfg.machine.p_mech;
  mp.inertia_h = cfg.machine.inertia_h > 0.0
                     ? cfg.machine.inertia_h
                     : inertia_for_frequency(cfg.machine.f_target, op, w);
  if (cfg.machine.damping > 0.0) {
    mp.damping = cfg.machine.damping;
  } else {
    // Fixed damping calibrated so the machine-grid mode sized for 8 Hz
    // decays with the configured time constant when no inverter acts.
    const double h8 = inertia_for_frequency(8.0, op, w);
    mp.damping = 4.0 * h8 / cfg.machine.decay_target_8hz;
  }
  return {mp, op, x_sync};
}

inline Trace run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();

  NetworkParams np;
  np.lcl = cfg.lcl;
  np.grid = cfg.z_initial;
  np.vg_mag = cfg.vg_mag;
  np.theta0 = cfg.theta0;
  np.ts = cfg.ts;
  np.pcc_model = cfg.pcc_model;
  np.with_node_capacitor = cfg.machine.enabled;
  np.c_node_farad = cfg.c_node_farad;
  np.with_inverter_branch = cfg.inverter_enabled;
  NetworkSim net(np);

  auto model_z = [&](const GridImpedance& actual) {
    const GridImpedance base = cfg.track_impedance ? actual : cfg.z_initial;
    return GridImpedance{base.resistance * (1.0 + cfg.impedance_model_error),
                         base.reactance * (1.0 + cfg.impedance_model_error)};
  };

  detail::Synchronizer sync(cfg, model_z(cfg.z_initial));

  const auto controller = cfg.effective_controller();
  std::optional<LqrDesign> design;
  if (cfg.inverter_enabled && controller == ControllerKind::lqr) {
    design = design_lqr(cfg.lcl, cfg.lqr.weights, cfg.ts, cfg.lqr.convention);
  }
  detail::PiCurrentController pi{cfg.pi.kp, cfg.pi.ki, cfg.pi.integrator_limit, {}};

  std::optional<ResolvedMachine> machine;
  MachineState mstate;
  if (cfg.machine.enabled) {
    machine = resolve_machine(cfg);
    mstate.delta = machine->op.delta0;
    mstate.omega_m = cfg.lcl.omega_g;
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const bool noisy = cfg.noise.sigma_v > 0.0 || cfg.noise.sigma_i > 0.0;

  const auto steps = static_cast<std::size_t>(std::llround(cfg.duration / cfg.ts));
  std::size_t next_schedule = 0;
  bool machine_released = false;

  Trace trace;
  trace.rows.reserve(steps);

  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * cfg.ts;

    AlphaBeta v_pcc = net.v_pcc();
    AlphaBeta i_pcc = net.i_pcc();
    if (noisy) {
      v_pcc.alpha += cfg.noise.sigma_v * gauss(rng);
      v_pcc.beta += cfg.noise.sigma_v * gauss(rng);
      i_pcc.alpha += cfg.noise.sigma_i * gauss(rng);
      i_pcc.beta += cfg.noise.sigma_i * gauss(rng);
    }

    const double theta_true = net.grid_phase();
    double theta_hat = theta_true;
    if (cfg.inverter_enabled) theta_hat = sync.step(v_pcc, i_pcc, cfg.ts);

    const Dq v_pcc_dq = park(v_pcc, theta_hat);
    const Dq i_inv_dq = park(net.i_inv(), theta_hat);
    const Dq i_pcc_dq = park(i_pcc, theta_hat);
    const Dq v_c_dq = park(net.v_c(), theta_hat);

    Dq u_dq;
    double raw_mag = 0.0;
    if (cfg.inverter_enabled) {
      if (controller == ControllerKind::lqr) {
        const EquilibriumPoint eq = equilibrium(cfg.lcl, cfg.i_inv_ref, v_pcc_dq);
        Vector6 x;
        x << i_inv_dq.d, i_inv_dq.q, i_pcc_dq.d, i_pcc_dq.q, v_c_dq.d, v_c_dq.q;
        const Vector6 dx = x - eq.x_bar;
        const Eigen::Vector2d corr = design->k * dx;
        Dq u{eq.u_bar.d - corr(0), eq.u_bar.q - corr(1)};
        if (!cfg.lqr.feedforward) u = Dq{-corr(0), -corr(1)};
        raw_mag = u.norm();
        if (cfg.lqr.v_sat > 0.0 && raw_mag > cfg.lqr.v_sat) u = u * (cfg.lqr.v_sat / raw_mag);
        u_dq = u;
      } else {
        u_dq = pi.step(i_inv_dq, cfg.i_inv_ref, v_c_dq, cfg.lcl.x1_pu(), cfg.ts, cfg.lqr.v_sat,
                       raw_mag);
      }
    }

    AlphaBeta i_machine;
    if (machine) {
      const AlphaBeta v_node = net.v_pcc();
      const double phi_sync = theta_true;
      auto [mnext, inj] = machine_step(machine->params, mstate, v_node, phi_sync, cfg.ts);
      i_machine = inj;
      if (t + cfg.ts >= cfg.machine.release_time) {
        if (!machine_released) {
          machine_released = true;
          mnext = mstate;  // apply the kick from the held state
          mnext.delta = mstate.delta + cfg.machine.delta_kick;
        }
        mstate = mnext;
      }
      // Before release the swing states stay frozen at the operating point.
    }

    TraceRecord row;
    row.t = t;
    row.v_pcc_dq = v_pcc_dq;
    row.v_pcc_ab = v_pcc;
    row.theta_true = theta_true;
    row.theta_hat = theta_hat;
    row.phase_error = wrap_angle(theta_hat - theta_true);
    row.i_inv_dq = i_inv_dq;
    row.i_pcc_dq = i_pcc_dq;
    row.v_c_dq = v_c_dq;
    row.u_dq = u_dq;
    row.u_mag_raw = raw_mag;
    row.machine_delta = mstate.delta;
    row.machine_omega = mstate.omega_m;
    row.z_mag = net.grid_impedance().magnitude();
    trace.rows.push_back(row);

    const AlphaBeta v_inv = cfg.inverter_enabled ? inv_park(u_dq, theta_hat) : AlphaBeta{};
    net.step(v_inv, i_machine);

    while (next_schedule < cfg.schedule.size() &&
           net.time() >= cfg.schedule[next_schedule].time - 1e-12) {
      const auto& st = cfg.schedule[next_schedule];
      const auto z = GridImpedance::polar(st.magnitude, st.angle);
      net.set_grid_impedance(z);
      if (cfg.inverter_enabled) sync.set_model_impedance(model_z(z));
      ++next_schedule;
    }

    const double mstate_mag = machine ? std::abs(mstate.omega_m - cfg.lcl.omega_g) : 0.0;
    if (net.max_abs_state() > cfg.divergence_limit || mstate_mag > cfg.divergence_limit) {
      trace.rows.back().diverged = true;
      trace.diverged = true;
      break;
    }
  }
  return trace;
}

}  // namespace gflsync
