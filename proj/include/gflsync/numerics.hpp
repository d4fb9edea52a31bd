#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gflsync {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when an iterative method fails to converge or a matrix is
/// numerically singular where the algorithm needs it invertible.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require_square(const Matrix& a, const char* who) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw std::invalid_argument(std::string(who) + ": matrix must be square");
  }
}

inline void require_symmetric(const Matrix& a, const char* who, double tol = 1e-10) {
  require_square(a, who);
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + a.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument(std::string(who) + ": matrix must be symmetric");
  }
}

}  // namespace detail

/// Matrix exponential e^{A t} by scaling-and-squaring over a truncated
/// series. The argument is scaled so its infinity norm is at most 1/2,
/// which keeps the series short and well conditioned.
inline Matrix expm(const Matrix& a, double t = 1.0) {
  detail::require_square(a, "expm");
  const Eigen::Index n = a.rows();
  Matrix at = a * t;
  const double norm = at.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    at /= std::pow(2.0, squarings);
  }
  Matrix result = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k <= 40; ++k) {
    term = (term * at) / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18 * result.cwiseAbs().maxCoeff()) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

/// Exact zero-order-hold discretization of (A, B) at step Ts using the
/// augmented-matrix exponential: exp([[A, B], [0, 0]] Ts) = [[Ad, Bd], [0, I]].
inline std::pair<Matrix, Matrix> zoh_discretize(const Matrix& a, const Matrix& b, double ts) {
  detail::require_square(a, "zoh_discretize");
  if (b.rows() != a.rows()) {
    throw std::invalid_argument("zoh_discretize: B row count must match A dimension");
  }
  if (!(ts > 0.0)) throw std::invalid_argument("zoh_discretize: Ts must be positive");
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = a;
  aug.topRightCorner(n, m) = b;
  const Matrix e = expm(aug, ts);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

/// Eigenvalues of a small real matrix. 2x2 inputs use the closed-form
/// quadratic; larger inputs use a Schur-based solver whose output is
/// certified by the eigenpair residual |Av - lambda v| <= 1e-8 |A|.
struct EigenSpectrum {
  std::vector<std::complex<double>> values;

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : values) m = std::max(m, std::abs(v));
    return m;
  }
  bool all_strictly_inside_unit_circle() const { return max_abs() < 1.0; }
};

inline EigenSpectrum eigvals(const Matrix& a) {
  detail::require_square(a, "eigvals");
  const Eigen::Index n = a.rows();
  EigenSpectrum spec;
  if (n == 1) {
    spec.values = {std::complex<double>(a(0, 0), 0.0)};
    return spec;
  }
  if (n == 2) {
    const double tr = a(0, 0) + a(1, 1);
    const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const double disc = tr * tr / 4.0 - det;
    if (disc >= 0.0) {
      const double r = std::sqrt(disc);
      spec.values = {tr / 2.0 + r, tr / 2.0 - r};
    } else {
      const double r = std::sqrt(-disc);
      spec.values = {{tr / 2.0, r}, {tr / 2.0, -r}};
    }
    return spec;
  }
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigvals: eigenvalue iteration did not converge");
  }
  const double anorm = a.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = solver.eigenvalues()(i);
    const Eigen::VectorXcd v = solver.eigenvectors().col(i);
    const double residual = (a.cast<std::complex<double>>() * v - lambda * v).norm();
    if (residual > 1e-8 * std::max(anorm, 1.0)) {
      throw NumericalError("eigvals: eigenpair residual check failed");
    }
    spec.values.push_back(lambda);
  }
  return spec;
}

inline double spectral_radius(const Matrix& a) { return eigvals(a).max_abs(); }

namespace detail {

inline void check_dare_inputs(const Matrix& ad, const Matrix& bd, const Matrix& q,
                              const Matrix& r) {
  require_square(ad, "solve_dare");
  if (bd.rows() != ad.rows()) {
    throw std::invalid_argument("solve_dare: B row count must match A dimension");
  }
  require_symmetric(q, "solve_dare (Q)");
  require_symmetric(r, "solve_dare (R)");
  if (q.rows() != ad.rows()) throw std::invalid_argument("solve_dare: Q dimension mismatch");
  if (r.rows() != bd.cols()) throw std::invalid_argument("solve_dare: R dimension mismatch");
  Eigen::LLT<Matrix> llt(r);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("solve_dare: R must be positive definite");
  }
}

}  // namespace detail

/// Solve the discrete algebraic Riccati equation
///   S = Ad' S Ad - Ad' S Bd (R + Bd' S Bd)^-1 Bd' S Ad + Q
/// by fixed-point iteration from S = Q. Converges for stabilizable (Ad, Bd)
/// with detectable cost; threshold 1e-12 on the infinity norm of the update.
inline Matrix solve_dare(const Matrix& ad, const Matrix& bd, const Matrix& q, const Matrix& r,
                         double tol = 1e-12, std::size_t max_iter = 1'000'000) {
  detail::check_dare_inputs(ad, bd, q, r);
  Matrix s = q;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const Matrix bts = bd.transpose() * s;          // m x n
    const Matrix gram = r + bts * bd;               // m x m
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("solve_dare: R + B'SB not positive definite");
    }
    const Matrix gain = llt.solve(bts * ad);        // m x n
    Matrix next = ad.transpose() * s * ad - (bts * ad).transpose() * gain + q;
    next = 0.5 * (next + next.transpose());
    const double delta = (next - s).cwiseAbs().maxCoeff();
    s = next;
    // Second clause: stop once the update is at the rounding floor of S,
    // which an absolute threshold cannot see for large-magnitude solutions.
    if (delta <= tol || delta <= 1e-14 * s.cwiseAbs().maxCoeff()) return s;
  }
  throw NumericalError("solve_dare: fixed-point iteration hit the iteration cap");
}

/// State-feedback gain K = (R + Bd' S Bd)^-1 Bd' S Ad for the DARE solution S.
inline Matrix lqr_gain_from(const Matrix& ad, const Matrix& bd, const Matrix& s, const Matrix& r) {
  const Matrix gram = r + bd.transpose() * s * bd;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("lqr_gain: R + B'SB not positive definite");
  }
  return llt.solve(bd.transpose() * s * ad);
}

inline Matrix lqr_gain(const Matrix& ad, const Matrix& bd, const Matrix& q, const Matrix& r) {
  return lqr_gain_from(ad, bd, solve_dare(ad, bd, q, r), r);
}

/// Steady-state Kalman gain and prediction covariance for
///   x(k+1) = Ad x(k) + v,  y(k) = Cd x(k) + w,  cov(v) = Qp, cov(w) = Rm.
/// Found by iterating the covariance recursion from P = I until the
/// prediction covariance stops moving; K = P Cd' (Cd P Cd' + Rm)^-1.
struct KalmanSteadyGain {
  Matrix gain;        // n x p
  Matrix prediction;  // steady-state prediction covariance, n x n
};

inline KalmanSteadyGain kalman_steady_gain(const Matrix& ad, const Matrix& cd, const Matrix& qp,
                                           const Matrix& rm, double tol = 1e-13,
                                           std::size_t max_iter = 1'000'000) {
  detail::require_square(ad, "kalman_steady_gain");
  if (cd.cols() != ad.rows()) {
    throw std::invalid_argument("kalman_steady_gain: C column count must match A dimension");
  }
  detail::require_symmetric(qp, "kalman_steady_gain (Qp)");
  detail::require_symmetric(rm, "kalman_steady_gain (Rm)");
  Eigen::LLT<Matrix> rm_llt(rm);
  if (rm_llt.info() != Eigen::Success) {
    throw std::invalid_argument("kalman_steady_gain: Rm must be positive definite");
  }
  const Eigen::Index n = ad.rows();
  Matrix p = Matrix::Identity(n, n);  // prediction covariance
  for (std::size_t it = 0; it < max_iter; ++it) {
    const Matrix innov = cd * p * cd.transpose() + rm;
    Eigen::LLT<Matrix> llt(innov);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("kalman_steady_gain: innovation covariance not positive definite");
    }
    const Matrix k = llt.solve(cd * p).transpose();  // P C' (C P C' + R)^-1
    const Matrix filtered = p - k * cd * p;
    Matrix next = ad * filtered * ad.transpose() + qp;
    next = 0.5 * (next + next.transpose());
    const double delta = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (delta <= tol) {
      const Matrix innov_ss = cd * p * cd.transpose() + rm;
      const Matrix k_ss = Eigen::LLT<Matrix>(innov_ss).solve(cd * p).transpose();
      return {k_ss, p};
    }
  }
  throw NumericalError("kalman_steady_gain: covariance iteration hit the iteration cap");
}

/// Continuous algebraic Riccati solution for the comparison report, obtained
/// as the small-step limit of the sampled-data DARE. Report-quality only.
inline Matrix solve_care_limit(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                               double h = 1e-6) {
  auto [ad, bd] = zoh_discretize(a, b, h);
  return solve_dare(ad, bd, q * h, r * h, 1e-14 * h);
}

}  // namespace gflsync
