#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>

#include "gflsync/frames.hpp"
#include "gflsync/numerics.hpp"

namespace gflsync {

/// Thevenin grid impedance in per unit at nominal frequency.
struct GridImpedance {
  double resistance = 0.0;  // R_g, pu
  double reactance = 0.0;   // X_g = w_g * L_g, pu

  static GridImpedance polar(double magnitude, double angle_rad) {
    return {magnitude * std::cos(angle_rad), magnitude * std::sin(angle_rad)};
  }
  double magnitude() const { return std::hypot(resistance, reactance); }
  double angle() const { return std::atan2(reactance, resistance); }
  std::complex<double> z() const { return {resistance, reactance}; }

  /// Complex-style drop (R + jX) applied to an instantaneous alpha-beta
  /// current: the quasi-static line-drop evaluation.
  AlphaBeta drop(const AlphaBeta& i) const {
    return {resistance * i.alpha - reactance * i.beta,
            reactance * i.alpha + resistance * i.beta};
  }
};

enum class KfVariant {
  aaekf,  // line-drop feedthrough included in the measurement model
  caekf,  // grid impedance neglected
};

/// Discrete model for the two-state grid-EMF estimator. The state is the
/// EMF vector in alpha-beta, advanced by a rotation; the measurement is the
/// PCC voltage with an optional impedance feedthrough from the PCC current.
struct DiscreteKfModel {
  Eigen::Matrix2d ad;   // rotation by w_g * Ts
  Eigen::Matrix2d cd;   // identity
  Eigen::Matrix2d dd;   // [[R, -X], [X, R]] for aaekf, zero for caekf
  Eigen::Matrix2d qkf;  // process covariance q_kf * I
  Eigen::Matrix2d rkf;  // measurement covariance
  double ts = 0.0;
};

inline DiscreteKfModel build_kf_model(const GridImpedance& z, double omega_g, double ts,
                                      double q_kf, const Eigen::Matrix2d& rkf,
                                      KfVariant variant) {
  if (!(ts > 0.0)) throw std::invalid_argument("build_kf_model: Ts must be positive");
  if (!(q_kf > 0.0)) throw std::invalid_argument("build_kf_model: q_kf must be positive");
  Eigen::LLT<Eigen::Matrix2d> llt(rkf);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("build_kf_model: Rkf must be positive definite");
  }
  DiscreteKfModel m;
  const double wt = omega_g * ts;
  m.ad << std::cos(wt), -std::sin(wt), std::sin(wt), std::cos(wt);
  m.cd = Eigen::Matrix2d::Identity();
  if (variant == KfVariant::aaekf) {
    m.dd << z.resistance, -z.reactance, z.reactance, z.resistance;
  } else {
    m.dd = Eigen::Matrix2d::Zero();
  }
  m.qkf = q_kf * Eigen::Matrix2d::Identity();
  m.rkf = rkf;
  m.ts = ts;
  return m;
}

/// Filter state: EMF estimate, covariance, last gain, step counter.
struct KalmanState {
  AlphaBeta x_hat{1.0, 0.0};
  Eigen::Matrix2d p = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d k_last = Eigen::Matrix2d::Zero();
  long step = 0;

  static KalmanState flat_start() { return {}; }
};

/// One predict/update cycle. y is the measured PCC voltage, u the measured
/// PCC current (both alpha-beta). Returns the new state and the estimated
/// instantaneous EMF phase angle.
inline std::pair<KalmanState, double> kf_step(const DiscreteKfModel& m, const KalmanState& s,
                                              const AlphaBeta& y, const AlphaBeta& u) {
  const Eigen::Vector2d x_prev(s.x_hat.alpha, s.x_hat.beta);
  const Eigen::Vector2d x_pred = m.ad * x_prev;
  Eigen::Matrix2d p_pred = m.ad * s.p * m.ad.transpose() + m.qkf;

  const Eigen::Vector2d meas(y.alpha, y.beta);
  const Eigen::Vector2d input(u.alpha, u.beta);
  const Eigen::Vector2d innovation = meas - (m.cd * x_pred + m.dd * input);

  const Eigen::Matrix2d innov_cov = m.cd * p_pred * m.cd.transpose() + m.rkf;
  const double det = innov_cov.determinant();
  if (!(std::abs(det) > 1e-300)) {
    throw NumericalError("kf_step: innovation covariance is singular");
  }
  const Eigen::Matrix2d gain = p_pred * m.cd.transpose() * innov_cov.inverse();

  const Eigen::Vector2d x_new = x_pred + gain * innovation;
  Eigen::Matrix2d p_new = (Eigen::Matrix2d::Identity() - gain * m.cd) * p_pred;
  p_new = 0.5 * (p_new + p_new.transpose());  // keep the PSD invariant against rounding

  KalmanState out;
  out.x_hat = {x_new(0), x_new(1)};
  out.p = p_new;
  out.k_last = gain;
  out.step = s.step + 1;
  return {out, phase_of(out.x_hat)};
}

/// Filter update with a precomputed constant gain; the covariance is left
/// untouched. Used when running against the steady-state gain.
inline std::pair<KalmanState, double> kf_step_steady(const DiscreteKfModel& m,
                                                     const KalmanState& s, const AlphaBeta& y,
                                                     const AlphaBeta& u,
                                                     const Eigen::Matrix2d& gain) {
  const Eigen::Vector2d x_pred = m.ad * Eigen::Vector2d(s.x_hat.alpha, s.x_hat.beta);
  const Eigen::Vector2d innovation =
      Eigen::Vector2d(y.alpha, y.beta) - (m.cd * x_pred + m.dd * Eigen::Vector2d(u.alpha, u.beta));
  const Eigen::Vector2d x_new = x_pred + gain * innovation;
  KalmanState out = s;
  out.x_hat = {x_new(0), x_new(1)};
  out.k_last = gain;
  out.step = s.step + 1;
  return {out, phase_of(out.x_hat)};
}

/// Estimation-error transition matrix Ad (I - K Cd) and its spectrum; the
/// filter is stable when every eigenvalue lies strictly inside the unit
/// circle.
struct ErrorDynamics {
  Eigen::Matrix2d a_error;
  EigenSpectrum spectrum;
  bool stable = false;
};

inline ErrorDynamics error_dynamics(const DiscreteKfModel& m, const Eigen::Matrix2d& k) {
  ErrorDynamics out;
  out.a_error = m.ad * (Eigen::Matrix2d::Identity() - k * m.cd);
  out.spectrum = eigvals(out.a_error);
  out.stable = out.spectrum.all_strictly_inside_unit_circle();
  return out;
}

/// Steady-state gain and prediction covariance for this model.
inline KalmanSteadyGain steady_gain(const DiscreteKfModel& m) {
  return kalman_steady_gain(m.ad, m.cd, m.qkf, m.rkf);
}

}  // namespace gflsync
