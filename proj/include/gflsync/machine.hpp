#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>

#include "gflsync/frames.hpp"
#include "gflsync/kalman.hpp"

namespace gflsync {

/// Classical swing-model machine behind a purely inductive tie.
struct MachineParams {
  double emf = 1.0;        // internal EMF magnitude, pu
  double x_sync = 0.06;    // tie reactance, pu
  double inertia_h = 1.0;  // inertia constant, s
  double damping = 1.0;    // lumped damping, pu torque per pu speed deviation
  double p_mech = 0.2;     // mechanical power, pu
  double omega_s = 2.0 * kPi * 50.0;

  void validate() const {
    if (!(inertia_h > 0.0)) throw std::invalid_argument("MachineParams: H must be positive");
    if (!(x_sync > 0.0)) throw std::invalid_argument("MachineParams: X_sync must be positive");
  }
};

struct MachineState {
  double delta = 0.0;    // load angle relative to the synchronous reference
  double omega_m = 2.0 * kPi * 50.0;
};

/// Quasi-static electrical power across the tie for a frozen terminal
/// voltage expressed in the synchronous frame.
inline double swing_electrical_power(const MachineParams& p, double delta, double v_mag,
                                     double v_phase) {
  if (v_mag == 0.0) return 0.0;
  return (p.emf * v_mag / p.x_sync) * std::sin(delta - v_phase);
}

/// One machine step: emits the current injected into the PCC node over the
/// step (held value, computed from the incoming state), then integrates the
/// swing equation with fourth-order Runge-Kutta against the frozen node
/// voltage.
inline std::pair<MachineState, AlphaBeta> machine_step(const MachineParams& p,
                                                       const MachineState& s,
                                                       const AlphaBeta& v_pcc, double phi_sync,
                                                       double ts) {
  p.validate();
  if (!(ts > 0.0)) throw std::invalid_argument("machine_step: Ts must be positive");

  // Injected current (E angle(phi_sync + delta) - v_pcc) / (j X_sync).
  const std::complex<double> j(0.0, 1.0);
  const std::complex<double> e_m =
      p.emf * std::exp(j * (phi_sync + s.delta));
  const std::complex<double> i_inj = (e_m - v_pcc.c()) / (j * p.x_sync);

  // Terminal voltage frozen in the synchronous frame over the step.
  const Dq v_dq = park(v_pcc, phi_sync);
  const double v_mag = v_dq.norm();
  const double v_phase = (v_mag > 0.0) ? std::atan2(v_dq.q, v_dq.d) : 0.0;

  const auto deriv = [&](double delta, double omega_m, double& ddelta, double& domega) {
    const double pe = swing_electrical_power(p, delta, v_mag, v_phase);
    const double slip = omega_m - p.omega_s;
    ddelta = slip;
    domega = (p.omega_s / (2.0 * p.inertia_h)) * (p.p_mech - pe - p.damping * slip / p.omega_s);
  };

  double k1d, k1w, k2d, k2w, k3d, k3w, k4d, k4w;
  deriv(s.delta, s.omega_m, k1d, k1w);
  deriv(s.delta + 0.5 * ts * k1d, s.omega_m + 0.5 * ts * k1w, k2d, k2w);
  deriv(s.delta + 0.5 * ts * k2d, s.omega_m + 0.5 * ts * k2w, k3d, k3w);
  deriv(s.delta + ts * k3d, s.omega_m + ts * k3w, k4d, k4w);

  MachineState out;
  out.delta = s.delta + (ts / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
  out.omega_m = s.omega_m + (ts / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
  return {out, AlphaBeta::from(i_inj)};
}

/// Reduced series operating point for swing-mode sizing: the machine EMF
/// behind its tie plus the grid branch, against the grid source.
struct SwingOperatingPoint {
  double emf = 1.0;
  double v_source = 1.0;
  double r_total = 0.0;  // series resistance, pu
  double x_total = 0.0;  // series reactance including the machine tie, pu
  double delta0 = 0.0;   // load angle solving P_e = P_m
};

/// Electrical power of an EMF at angle delta behind (r + jx) against a
/// fixed source at angle zero.
inline double series_electrical_power(double emf, double v, double r, double x, double delta) {
  const double zsq = r * r + x * x;
  if (zsq == 0.0) throw std::invalid_argument("series_electrical_power: zero impedance");
  return (emf * emf * r + emf * v * (x * std::sin(delta) - r * std::cos(delta))) / zsq;
}

inline SwingOperatingPoint make_operating_point(double emf, double v_source, double r_total,
                                                double x_total, double p_mech) {
  SwingOperatingPoint op{emf, v_source, r_total, x_total, 0.0};
  const double gamma = std::atan2(r_total, x_total);
  double lo = gamma - 0.5 * kPi;
  double hi = gamma + 0.5 * kPi;  // power peak
  const double p_lo = series_electrical_power(emf, v_source, r_total, x_total, lo);
  const double p_hi = series_electrical_power(emf, v_source, r_total, x_total, hi);
  if (p_mech < p_lo || p_mech > p_hi) {
    throw NumericalError("make_operating_point: mechanical power outside the transfer range");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double pm = series_electrical_power(emf, v_source, r_total, x_total, mid);
    (pm < p_mech ? lo : hi) = mid;
  }
  op.delta0 = 0.5 * (lo + hi);
  return op;
}

/// Synchronizing coefficient dP_e/d(delta) at the operating point.
inline double synchronizing_coefficient(const SwingOperatingPoint& op) {
  const double zsq = op.r_total * op.r_total + op.x_total * op.x_total;
  return (op.emf * op.v_source / zsq) *
         (op.x_total * std::cos(op.delta0) + op.r_total * std::sin(op.delta0));
}

/// Inertia constant that places the undamped swing frequency at f_target:
/// H = omega_s K_s / (2 (2 pi f)^2).
inline double inertia_for_frequency(double f_target, const SwingOperatingPoint& op,
                                    double omega_s) {
  if (!(f_target > 0.0)) throw std::invalid_argument("inertia_for_frequency: f must be positive");
  const double ks = synchronizing_coefficient(op);
  if (!(ks > 0.0)) {
    throw NumericalError("inertia_for_frequency: operating point is not synchronizing");
  }
  const double w_osc = 2.0 * kPi * f_target;
  return omega_s * ks / (2.0 * w_osc * w_osc);
}

}  // namespace gflsync
