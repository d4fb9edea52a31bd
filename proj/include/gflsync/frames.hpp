#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace gflsync {

inline constexpr double kPi = std::numbers::pi;

/// Three-phase instantaneous values (per unit).
struct ThreePhase {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Two-axis vector in the stationary frame.
struct AlphaBeta {
  double alpha = 0.0;
  double beta = 0.0;

  std::complex<double> c() const { return {alpha, beta}; }
  static AlphaBeta from(std::complex<double> z) { return {z.real(), z.imag()}; }

  double norm() const { return std::hypot(alpha, beta); }

  AlphaBeta operator+(const AlphaBeta& o) const { return {alpha + o.alpha, beta + o.beta}; }
  AlphaBeta operator-(const AlphaBeta& o) const { return {alpha - o.alpha, beta - o.beta}; }
  AlphaBeta operator*(double s) const { return {alpha * s, beta * s}; }
};

/// Two-axis vector in a rotating frame.
struct Dq {
  double d = 0.0;
  double q = 0.0;

  std::complex<double> c() const { return {d, q}; }
  static Dq from(std::complex<double> z) { return {z.real(), z.imag()}; }

  double norm() const { return std::hypot(d, q); }

  Dq operator+(const Dq& o) const { return {d + o.d, q + o.q}; }
  Dq operator-(const Dq& o) const { return {d - o.d, q - o.q}; }
  Dq operator*(double s) const { return {d * s, q * s}; }
};

/// Reduce an angle to the canonical range [-pi, pi).
inline double wrap_angle(double x) {
  double w = std::remainder(x, 2.0 * kPi);  // (-pi, pi]
  if (w >= kPi) w -= 2.0 * kPi;
  return w;
}

/// Amplitude-invariant Clarke transform: a balanced set with 1 pu phase peak
/// maps to a 1 pu alpha-beta vector.
inline AlphaBeta clarke(const ThreePhase& v) {
  return {(2.0 / 3.0) * (v.a - 0.5 * v.b - 0.5 * v.c),
          (1.0 / std::sqrt(3.0)) * (v.b - v.c)};
}

/// Inverse Clarke; exact inverse of clarke() on zero-sequence-free inputs.
inline ThreePhase inv_clarke(const AlphaBeta& v) {
  const double s = std::sqrt(3.0) / 2.0;
  return {v.alpha, -0.5 * v.alpha + s * v.beta, -0.5 * v.alpha - s * v.beta};
}

/// Rotate a stationary-frame vector into the frame at angle theta.
inline Dq park(const AlphaBeta& v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {v.alpha * c + v.beta * s, -v.alpha * s + v.beta * c};
}

inline AlphaBeta inv_park(const Dq& v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {v.d * c - v.q * s, v.d * s + v.q * c};
}

/// Four-quadrant angle of an alpha-beta vector, canonicalized to [-pi, pi).
inline double phase_of(const AlphaBeta& v) {
  if (v.alpha == 0.0 && v.beta == 0.0) {
    throw std::domain_error("phase_of: zero vector has no angle");
  }
  return wrap_angle(std::atan2(v.beta, v.alpha));
}

}  // namespace gflsync
