#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>

#include "gflsync/frames.hpp"
#include "gflsync/numerics.hpp"

namespace gflsync {

using Vector6 = Eigen::Matrix<double, 6, 1>;

/// LCL filter and base quantities. SI values are primary; per-unit
/// coefficients derive from the base impedance V^2 / S.
struct LclParams {
  double lf1 = 500e-6;   // inverter-side inductance, H
  double lf2 = 500e-6;   // grid-side inductance, H
  double cf = 100e-6;    // shunt capacitance, F
  double omega_g = 2.0 * kPi * 50.0;
  double v_base = 415.0;   // rated voltage, V
  double s_base = 110e3;   // rated power, VA

  double z_base() const { return v_base * v_base / s_base; }
  // Dynamic coefficients for per-unit states with time in seconds.
  double l1_pu() const { return lf1 / z_base(); }
  double l2_pu() const { return lf2 / z_base(); }
  double c_pu() const { return cf * z_base(); }
  // Ratings expressed as reactance/susceptance at nominal frequency.
  double x1_pu() const { return omega_g * l1_pu(); }
  double x2_pu() const { return omega_g * l2_pu(); }
  double b_pu() const { return omega_g * c_pu(); }

  void validate() const {
    if (!(lf1 > 0 && lf2 > 0 && cf > 0 && omega_g > 0 && v_base > 0 && s_base > 0)) {
      throw std::invalid_argument("LclParams: all parameters must be positive");
    }
  }
};

enum class UnitConvention { per_unit, si };

/// Continuous-time model of the LCL branch in the rotating frame.
/// State ordering: [i_inv_d, i_inv_q, i_pcc_d, i_pcc_q, v_c_d, v_c_q];
/// inputs B1: inverter voltage, B2: PCC voltage disturbance.
struct PlantMatrices {
  Matrix a;   // 6x6
  Matrix b1;  // 6x2
  Matrix b2;  // 6x2
};

inline PlantMatrices build_plant(const LclParams& p, UnitConvention conv = UnitConvention::per_unit) {
  p.validate();
  const bool pu = (conv == UnitConvention::per_unit);
  const double inv_l1 = pu ? 1.0 / p.l1_pu() : 1.0 / p.lf1;
  const double inv_l2 = pu ? 1.0 / p.l2_pu() : 1.0 / p.lf2;
  const double inv_c = pu ? 1.0 / p.c_pu() : 1.0 / p.cf;
  const double w = p.omega_g;

  PlantMatrices m;
  m.a = Matrix::Zero(6, 6);
  m.a(0, 1) = w;
  m.a(0, 4) = -inv_l1;
  m.a(1, 0) = -w;
  m.a(1, 5) = -inv_l1;
  m.a(2, 3) = w;
  m.a(2, 4) = inv_l2;
  m.a(3, 2) = -w;
  m.a(3, 5) = inv_l2;
  m.a(4, 0) = inv_c;
  m.a(4, 2) = -inv_c;
  m.a(4, 5) = w;
  m.a(5, 1) = inv_c;
  m.a(5, 3) = -inv_c;
  m.a(5, 4) = -w;

  m.b1 = Matrix::Zero(6, 2);
  m.b1(0, 0) = inv_l1;
  m.b1(1, 1) = inv_l1;

  m.b2 = Matrix::Zero(6, 2);
  m.b2(2, 0) = -inv_l2;
  m.b2(3, 1) = -inv_l2;
  return m;
}

/// Operating point where the rotating-frame derivatives vanish.
struct EquilibriumPoint {
  Vector6 x_bar = Vector6::Zero();
  Dq u_bar;
};

/// Closed-form equilibrium (per unit) for an inverter-current reference and
/// a PCC-voltage operating point; errors out near the LC series resonance.
inline EquilibriumPoint equilibrium(const LclParams& p, const Dq& i_inv_ref, const Dq& v_pcc_op) {
  p.validate();
  const std::complex<double> j(0.0, 1.0);
  const double w = p.omega_g;
  const double denom = 1.0 - w * w * p.l2_pu() * p.c_pu();
  if (std::abs(denom) < 1e-6) {
    throw NumericalError("equilibrium: operating point at the LC series resonance");
  }
  const std::complex<double> i_ref = i_inv_ref.c();
  const std::complex<double> v_pcc = v_pcc_op.c();
  const std::complex<double> v_c = (v_pcc + j * w * p.l2_pu() * i_ref) / denom;
  const std::complex<double> i_pcc = i_ref - j * w * p.c_pu() * v_c;
  const std::complex<double> u = v_c + j * w * p.l1_pu() * i_ref;

  EquilibriumPoint eq;
  eq.x_bar << i_ref.real(), i_ref.imag(), i_pcc.real(), i_pcc.imag(), v_c.real(), v_c.imag();
  eq.u_bar = Dq::from(u);
  return eq;
}

/// Continuous per-unit derivatives of the LCL states; used to certify
/// equilibria and as a structural oracle in tests.
inline Vector6 continuous_derivatives(const LclParams& p, const Vector6& x, const Dq& u,
                                      const Dq& v_pcc) {
  const PlantMatrices m = build_plant(p, UnitConvention::per_unit);
  Eigen::Vector2d uu(u.d, u.q);
  Eigen::Vector2d vv(v_pcc.d, v_pcc.q);
  return m.a * x + m.b1 * uu + m.b2 * vv;
}

struct LqrWeights {
  double q1 = 10.0;  // inverter-current deviation
  double q2 = 10.0;  // PCC-current deviation
  double q3 = 10.0;  // capacitor-voltage deviation
  double r = 1e-2;   // control effort

  static LqrWeights low() { return {10.0, 10.0, 10.0, 1e-2}; }
  static LqrWeights high() { return {1e3, 1e3, 10.0, 1e-2}; }
};

struct LqrDesign {
  PlantMatrices plant;
  Matrix ad;        // 6x6 discretized state matrix
  Matrix b1d;       // 6x2 discretized input matrix
  Matrix q;         // 6x6
  Matrix r;         // 2x2
  Matrix s;         // Riccati solution
  Matrix k;         // 2x6 state-feedback gain
  double ts = 1e-4;
  UnitConvention convention = UnitConvention::per_unit;

  EigenSpectrum closed_loop_spectrum() const { return eigvals(ad - b1d * k); }
  double dare_residual() const {
    const Matrix gram = r + b1d.transpose() * s * b1d;
    const Matrix res = ad.transpose() * s * ad - s -
                       (b1d.transpose() * s * ad).transpose() * gram.ldlt().solve(b1d.transpose() * s * ad) +
                       q;
    return res.cwiseAbs().maxCoeff();
  }
};

/// Discrete LQR design: ZOH discretization of the LCL model (disturbance
/// input excluded) and the Riccati gain at the given weights.
inline LqrDesign design_lqr(const LclParams& p, const LqrWeights& w, double ts,
                            UnitConvention conv = UnitConvention::per_unit) {
  if (!(w.q1 >= 0 && w.q2 >= 0 && w.q3 >= 0)) {
    throw std::invalid_argument("design_lqr: state weights must be nonnegative");
  }
  if (!(w.r > 0)) throw std::invalid_argument("design_lqr: control weight must be positive");
  LqrDesign d;
  d.plant = build_plant(p, conv);
  auto [ad, b1d] = zoh_discretize(d.plant.a, d.plant.b1, ts);
  d.ad = ad;
  d.b1d = b1d;
  Vector qdiag(6);
  qdiag << w.q1, w.q1, w.q2, w.q2, w.q3, w.q3;
  d.q = qdiag.asDiagonal();
  d.r = w.r * Matrix::Identity(2, 2);
  d.s = solve_dare(d.ad, d.b1d, d.q, d.r);
  d.k = lqr_gain_from(d.ad, d.b1d, d.s, d.r);
  d.ts = ts;
  d.convention = conv;
  return d;
}

/// State-feedback law about the equilibrium with a circular magnitude clamp
/// on the commanded voltage. With feedforward enabled the equilibrium input
/// is added so a nonzero operating point can actually be held.
inline Dq control_step(const LqrDesign& d, const Vector6& x, const EquilibriumPoint& eq,
                       double v_sat, bool feedforward = true) {
  const Vector6 dx = x - eq.x_bar;
  const Eigen::Vector2d correction = d.k * dx;
  Eigen::Vector2d u(-correction(0), -correction(1));
  if (feedforward) {
    u(0) += eq.u_bar.d;
    u(1) += eq.u_bar.q;
  }
  const double mag = u.norm();
  if (v_sat > 0.0 && mag > v_sat) u *= v_sat / mag;
  return {u(0), u(1)};
}

}  // namespace gflsync
