#pragma once

#include <array>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gflsync/csv.hpp"
#include "gflsync/kalman.hpp"
#include "gflsync/lqr.hpp"
#include "gflsync/numerics.hpp"

namespace gflsync {

/// Published reference gains used by the comparison table: the first row of
/// each 2x6 gain (the second row is determined by the d-q symmetry).
inline const std::array<double, 6>& reference_gain_low() {
  static const std::array<double, 6> k = {0.426, 0.007, 0.002, 0.001, 0.034, 0.001};
  return k;
}
inline const std::array<double, 6>& reference_gain_high() {
  static const std::array<double, 6> k = {5.292, 0.085, 0.317, 0.003, 0.943, 0.015};
  return k;
}

struct GainComparison {
  std::string convention;
  std::string weight_set;
  std::array<double, 6> computed{};
  std::array<double, 6> reference{};
  std::array<double, 6> rel_deviation{};
  bool dominant_entries_match = true;  // |ref| > 0.1 entries within 15%
};

inline GainComparison compare_gain_row(const LqrDesign& d, const std::array<double, 6>& ref,
                                       const std::string& convention,
                                       const std::string& weight_set) {
  GainComparison cmp;
  cmp.convention = convention;
  cmp.weight_set = weight_set;
  cmp.reference = ref;
  for (int i = 0; i < 6; ++i) {
    cmp.computed[i] = d.k(0, i);
    cmp.rel_deviation[i] = std::abs(cmp.computed[i] - ref[i]) / std::max(std::abs(ref[i]), 1e-12);
    if (std::abs(ref[i]) > 0.1 && cmp.rel_deviation[i] > 0.15) {
      cmp.dominant_entries_match = false;
    }
  }
  return cmp;
}

/// Largest violation of the d-q block pairing K[1][2j] == -K[0][2j+1],
/// K[1][2j+1] == K[0][2j] across the gain.
inline double gain_symmetry_defect(const Matrix& k) {
  double defect = 0.0;
  for (int j = 0; j < 3; ++j) {
    defect = std::max(defect, std::abs(k(1, 2 * j) + k(0, 2 * j + 1)));
    defect = std::max(defect, std::abs(k(1, 2 * j + 1) - k(0, 2 * j)));
  }
  return defect;
}

struct DesignReport {
  LqrDesign lqr_pu_low, lqr_pu_high, lqr_si_low, lqr_si_high;
  std::vector<GainComparison> comparisons;
  Matrix k_continuous_pu_high;  // continuous-formula gain for reference
  std::vector<double> kf_q_values;
  std::vector<KalmanSteadyGain> kf_gains;
  std::vector<ErrorDynamics> kf_error_dynamics;
};

inline DesignReport make_design_report(const LclParams& lcl, double ts, const GridImpedance& z,
                                       const std::vector<double>& q_values = {1e-5, 1e-6, 1e-7},
                                       const Eigen::Matrix2d& rkf = Eigen::Matrix2d::Identity()) {
  DesignReport rep;
  rep.lqr_pu_low = design_lqr(lcl, LqrWeights::low(), ts, UnitConvention::per_unit);
  rep.lqr_pu_high = design_lqr(lcl, LqrWeights::high(), ts, UnitConvention::per_unit);
  rep.lqr_si_low = design_lqr(lcl, LqrWeights::low(), ts, UnitConvention::si);
  rep.lqr_si_high = design_lqr(lcl, LqrWeights::high(), ts, UnitConvention::si);
  rep.comparisons = {
      compare_gain_row(rep.lqr_pu_low, reference_gain_low(), "pu", "low"),
      compare_gain_row(rep.lqr_pu_high, reference_gain_high(), "pu", "high"),
      compare_gain_row(rep.lqr_si_low, reference_gain_low(), "si", "low"),
      compare_gain_row(rep.lqr_si_high, reference_gain_high(), "si", "high"),
  };
  // The continuous-formula gain R^-1 B' S for the same plant, emitted for
  // comparison with the discrete design actually used.
  {
    const auto& d = rep.lqr_pu_high;
    const Matrix s_cont = solve_care_limit(d.plant.a, d.plant.b1, d.q, d.r);
    rep.k_continuous_pu_high = d.r.ldlt().solve(d.plant.b1.transpose() * s_cont);
  }
  for (double q : q_values) {
    const auto model = build_kf_model(z, lcl.omega_g, ts, q, rkf, KfVariant::aaekf);
    const auto gain = steady_gain(model);
    rep.kf_q_values.push_back(q);
    rep.kf_gains.push_back(gain);
    rep.kf_error_dynamics.push_back(error_dynamics(model, gain.gain));
  }
  return rep;
}

namespace detail {

inline void print_matrix(std::ostream& os, const Matrix& m, const std::string& name) {
  os << name << " (" << m.rows() << "x" << m.cols() << "):\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << "  ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      os << std::setw(12) << std::setprecision(5) << m(i, j) << (j + 1 < m.cols() ? " " : "");
    }
    os << "\n";
  }
}

inline void print_spectrum(std::ostream& os, const EigenSpectrum& s, const std::string& name) {
  os << name << ":";
  for (const auto& v : s.values) {
    os << " (" << std::setprecision(10) << v.real() << (v.imag() < 0 ? "-" : "+")
       << std::abs(v.imag()) << "i |" << std::abs(v) << "|)";
  }
  os << "\n";
}

}  // namespace detail

inline void write_design_report_text(std::ostream& os, const DesignReport& rep) {
  os << "# Controller and estimator design report\n\n";
  const auto dump = [&](const LqrDesign& d, const std::string& label) {
    os << "## LQR design: " << label << "\n";
    detail::print_matrix(os, d.plant.a, "A");
    detail::print_matrix(os, d.ad, "Ad");
    detail::print_matrix(os, d.k, "K");
    os << "DARE residual: " << d.dare_residual() << "\n";
    os << "gain symmetry defect: " << gain_symmetry_defect(d.k) << "\n";
    detail::print_spectrum(os, d.closed_loop_spectrum(), "closed-loop eigenvalues");
    os << "\n";
  };
  dump(rep.lqr_pu_low, "per-unit, low weights");
  dump(rep.lqr_pu_high, "per-unit, high weights");
  dump(rep.lqr_si_low, "SI, low weights");
  dump(rep.lqr_si_high, "SI, high weights");

  detail::print_matrix(os, rep.k_continuous_pu_high,
                       "continuous-formula gain R^-1 B' S (per-unit, high weights)");
  os << "\n## Reference gain comparison (first row)\n";
  for (const auto& c : rep.comparisons) {
    os << c.convention << "/" << c.weight_set << ": computed [";
    for (int i = 0; i < 6; ++i) os << (i ? ", " : "") << std::setprecision(4) << c.computed[i];
    os << "] vs [";
    for (int i = 0; i < 6; ++i) os << (i ? ", " : "") << c.reference[i];
    os << "] dominant-match=" << (c.dominant_entries_match ? "yes" : "no") << "\n";
  }

  os << "\n## Kalman steady-state designs\n";
  for (std::size_t i = 0; i < rep.kf_q_values.size(); ++i) {
    os << "q_kf = " << rep.kf_q_values[i] << ": K = [["
       << rep.kf_gains[i].gain(0, 0) << ", " << rep.kf_gains[i].gain(0, 1) << "], ["
       << rep.kf_gains[i].gain(1, 0) << ", " << rep.kf_gains[i].gain(1, 1) << "]]"
       << "  max|eig(A_error)| = " << rep.kf_error_dynamics[i].spectrum.max_abs()
       << (rep.kf_error_dynamics[i].stable ? " (stable)" : " (unstable)") << "\n";
  }
}

inline void write_gain_comparison_csv(std::ostream& os, const DesignReport& rep) {
  os << "convention,weight_set,entry,computed,reference,rel_deviation,dominant,matches\n";
  for (const auto& c : rep.comparisons) {
    for (int i = 0; i < 6; ++i) {
      const bool dominant = std::abs(c.reference[i]) > 0.1;
      os << c.convention << ',' << c.weight_set << ',' << i << ','
         << format_real(c.computed[i]) << ',' << format_real(c.reference[i]) << ','
         << format_real(c.rel_deviation[i]) << ',' << (dominant ? 1 : 0) << ','
         << ((!dominant || c.rel_deviation[i] <= 0.15) ? 1 : 0) << "\n";
    }
  }
}

inline void write_error_spectrum_csv(std::ostream& os, const DesignReport& rep) {
  os << "q_kf,eig_index,real,imag,abs,stable\n";
  for (std::size_t i = 0; i < rep.kf_q_values.size(); ++i) {
    const auto& ed = rep.kf_error_dynamics[i];
    for (std::size_t j = 0; j < ed.spectrum.values.size(); ++j) {
      const auto& v = ed.spectrum.values[j];
      os << format_real(rep.kf_q_values[i]) << ',' << j << ',' << format_real(v.real()) << ','
         << format_real(v.imag()) << ',' << format_real(std::abs(v)) << ','
         << (ed.stable ? 1 : 0) << "\n";
    }
  }
}

}  // namespace gflsync
