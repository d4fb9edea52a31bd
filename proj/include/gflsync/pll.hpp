#pragma once

#include <algorithm>
#include <utility>

#include "gflsync/frames.hpp"
#include "gflsync/kalman.hpp"
#include "gflsync/numerics.hpp"

namespace gflsync {

enum class PllMode {
  cpll,  // synchronizes to the raw PCC voltage
  cvi,   // partial virtual-impedance compensation
  mvi,   // full line-drop compensation
};

/// Synchronous-reference-frame PLL with an optional virtual-impedance
/// correction ahead of the phase detector. The q-axis voltage of the
/// synchronization vector drives a PI loop around nominal frequency.
struct PllSync {
  PllMode mode = PllMode::cpll;
  GridImpedance virtual_z;     // impedance used for the compensation term
  double kappa = 0.0;          // compensation fraction in [0, 1]
  double kp = 5.0;
  double ki = 5.0;
  double omega_nominal = 2.0 * kPi * 50.0;
  double integrator_limit = 2.0 * kPi * 10.0;  // anti-windup clamp, rad/s

  double theta_hat = 0.0;
  double integrator = 0.0;

  static PllSync make(PllMode mode, const GridImpedance& z, double omega_nominal,
                      double kp = 5.0, double ki = 5.0, double cvi_fraction = 0.5) {
    PllSync p;
    p.mode = mode;
    p.virtual_z = z;
    p.omega_nominal = omega_nominal;
    p.kp = kp;
    p.ki = ki;
    switch (mode) {
      case PllMode::cpll: p.kappa = 0.0; break;
      case PllMode::cvi: p.kappa = cvi_fraction; break;
      case PllMode::mvi: p.kappa = 1.0; break;
    }
    return p;
  }

  AlphaBeta synchronization_voltage(const AlphaBeta& v_pcc, const AlphaBeta& i_pcc) const {
    if (kappa == 0.0) return v_pcc;
    return v_pcc - virtual_z.drop(i_pcc) * kappa;
  }
};

/// Advance the PLL one sample; returns the updated state and the new angle.
inline std::pair<PllSync, double> pll_step(const PllSync& s, const AlphaBeta& v_pcc,
                                           const AlphaBeta& i_pcc, double ts) {
  if (!(ts > 0.0)) throw std::invalid_argument("pll_step: Ts must be positive");
  const AlphaBeta v_sync = s.synchronization_voltage(v_pcc, i_pcc);
  const double error = park(v_sync, s.theta_hat).q;

  PllSync next = s;
  const double omega = s.omega_nominal + s.kp * error + s.integrator;
  next.integrator = std::clamp(s.integrator + s.ki * error * ts, -s.integrator_limit,
                               s.integrator_limit);
  next.theta_hat = wrap_angle(s.theta_hat + omega * ts);
  return {next, next.theta_hat};
}

/// Continuous-time poles of the small-signal loop [angle error, integrator]
/// with the phase-detector gain scaled by the synchronization-voltage
/// magnitude: roots of s^2 + kp*v*s + ki*v.
inline EigenSpectrum pll_linearized_poles(const PllSync& s, double v_mag) {
  Matrix companion(2, 2);
  companion << -s.kp * v_mag, -s.ki * v_mag, 1.0, 0.0;
  return eigvals(companion);
}

}  // namespace gflsync
