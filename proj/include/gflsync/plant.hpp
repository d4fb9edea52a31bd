#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "gflsync/frames.hpp"
#include "gflsync/kalman.hpp"
#include "gflsync/lqr.hpp"
#include "gflsync/numerics.hpp"

namespace gflsync {

/// Which PCC voltage the measurement channel reports in the series
/// topology: the physical inductor-divider node voltage, or the
/// quasi-static line-drop evaluation that matches the estimator model at
/// every instant. Both coincide in sinusoidal steady state.
enum class PccVoltageModel { physical, quasistatic };

/// How the inverter terminal is driven: sampled (zero-order hold on the
/// commanded voltage, the normal closed-loop mode) or as an internal
/// oscillator holding a fixed 50 Hz phasor (for steady-state analysis).
enum class InverterDrive { sampled, oscillator };

struct NetworkParams {
  LclParams lcl;
  GridImpedance grid{0.05, 0.3};
  double vg_mag = 1.0;
  double theta0 = 0.0;
  double ts = 1e-4;
  PccVoltageModel pcc_model = PccVoltageModel::quasistatic;
  bool with_node_capacitor = false;  // enabled when a machine hangs on the PCC
  bool with_inverter_branch = true;  // false: machine and grid only
  double c_node_farad = 1e-6;
  InverterDrive drive = InverterDrive::sampled;
  AlphaBeta v_inv_phasor{0.0, 0.0};  // initial value in oscillator mode

  void validate() const {
    lcl.validate();
    if (!(ts > 0.0)) throw std::invalid_argument("NetworkParams: Ts must be positive");
    if (with_node_capacitor && !(grid.reactance > 0.0)) {
      throw std::invalid_argument(
          "NetworkParams: node topology needs an inductive grid branch");
    }
    if (with_node_capacitor && !(c_node_farad > 0.0)) {
      throw std::invalid_argument("NetworkParams: node capacitance must be positive");
    }
    if (!with_inverter_branch && !with_node_capacitor) {
      throw std::invalid_argument(
          "NetworkParams: removing the inverter branch requires the node topology");
    }
  }
};

/// Linear electrical network between the ideal inverter terminal and the
/// grid source, advanced by exact matrix-exponential discretization. The
/// rotating grid EMF is carried as two oscillator states so the source is
/// integrated exactly; held inputs are the commanded inverter voltage and,
/// in the node topology, the machine injection current.
class NetworkSim {
 public:
  explicit NetworkSim(const NetworkParams& prm) : prm_(prm), z_(prm.grid) {
    prm_.validate();
    node_ = prm_.with_node_capacitor;
    osc_ = (prm_.drive == InverterDrive::oscillator);
    n_ = node_ ? 12 : 8;
    if (osc_) n_ += 2;
    x_ = Vector::Zero(n_);
    x_(emf_idx()) = prm_.vg_mag * std::cos(prm_.theta0);
    x_(emf_idx() + 1) = prm_.vg_mag * std::sin(prm_.theta0);
    if (osc_) {
      x_(n_ - 2) = prm_.v_inv_phasor.alpha;
      x_(n_ - 1) = prm_.v_inv_phasor.beta;
    }
    rebuild();
  }

  /// Swap the grid branch impedance, keeping every state (the source keeps
  /// rotating smoothly through the change).
  void set_grid_impedance(const GridImpedance& z) {
    z_ = z;
    if (node_ && !(z_.reactance > 0.0)) {
      throw std::invalid_argument("NetworkSim: node topology needs an inductive grid branch");
    }
    rebuild();
  }
  const GridImpedance& grid_impedance() const { return z_; }

  void step(const AlphaBeta& v_inv, const AlphaBeta& i_machine = {}) {
    Vector u(node_ ? 4 : 2);
    u(0) = v_inv.alpha;
    u(1) = v_inv.beta;
    if (node_) {
      u(2) = i_machine.alpha;
      u(3) = i_machine.beta;
    }
    x_ = ad_ * x_ + bd_ * u;
    t_ += prm_.ts;
  }

  double time() const { return t_; }
  double ts() const { return prm_.ts; }

  AlphaBeta i_inv() const { return {x_(0), x_(1)}; }
  AlphaBeta i_pcc() const { return {x_(2), x_(3)}; }
  AlphaBeta v_c() const { return {x_(4), x_(5)}; }
  AlphaBeta grid_emf() const { return {x_(emf_idx()), x_(emf_idx() + 1)}; }
  AlphaBeta i_grid_branch() const { return node_ ? AlphaBeta{x_(8), x_(9)} : i_pcc(); }

  /// True instantaneous source phase (exact up to rotation rounding).
  double grid_phase() const {
    const AlphaBeta e = grid_emf();
    if (e.alpha == 0.0 && e.beta == 0.0) return 0.0;
    return phase_of(e);
  }

  AlphaBeta v_pcc() const {
    if (node_) return {x_(6), x_(7)};
    if (prm_.pcc_model == PccVoltageModel::quasistatic) {
      return grid_emf() + z_.drop(i_pcc());
    }
    // Physical node voltage of the series branch: eliminate di/dt through
    // the inductive divider between L_f2 and the grid inductance.
    const double l2 = prm_.lcl.l2_pu();
    const double lg = z_.reactance / prm_.lcl.omega_g;
    const AlphaBeta vg = grid_emf();
    const AlphaBeta i = i_pcc();
    const double denom = l2 + lg;
    return {(lg * x_(4) + l2 * (vg.alpha + z_.resistance * i.alpha)) / denom,
            (lg * x_(5) + l2 * (vg.beta + z_.resistance * i.beta)) / denom};
  }

  /// Stored reactive energy of the series topology (filter + grid branch),
  /// for conservation checks in lossless configurations.
  double stored_energy() const {
    const double l1 = prm_.lcl.l1_pu();
    const double l2 = prm_.lcl.l2_pu() + z_.reactance / prm_.lcl.omega_g;
    const double c = prm_.lcl.c_pu();
    const auto sq = [](double a, double b) { return a * a + b * b; };
    return 0.5 * l1 * sq(x_(0), x_(1)) + 0.5 * l2 * sq(x_(2), x_(3)) + 0.5 * c * sq(x_(4), x_(5));
  }

  double max_abs_state() const { return x_.cwiseAbs().maxCoeff(); }

  /// Preload filter states (test hook for energy and transient checks).
  void set_filter_state(const AlphaBeta& i_inv, const AlphaBeta& i_pcc, const AlphaBeta& v_c) {
    x_(0) = i_inv.alpha;
    x_(1) = i_inv.beta;
    x_(2) = i_pcc.alpha;
    x_(3) = i_pcc.beta;
    x_(4) = v_c.alpha;
    x_(5) = v_c.beta;
  }

 private:
  int emf_idx() const { return node_ ? 10 : 6; }

  void rebuild() {
    const double w = prm_.lcl.omega_g;
    const double l1 = prm_.lcl.l1_pu();
    const double l2 = prm_.lcl.l2_pu();
    const double c = prm_.lcl.c_pu();
    const double rg = z_.resistance;
    const double lg = z_.reactance / w;

    Matrix a = Matrix::Zero(n_, n_);
    Matrix b = Matrix::Zero(n_, node_ ? 4 : 2);
    const int e = emf_idx();

    auto couple_rotation = [&](int i) {
      a(i, i + 1) = -w;
      a(i + 1, i) = w;
    };

    if (prm_.with_inverter_branch) {
      // Inverter inductor: i_inv' = (v_inv - v_c) / L1.
      a(0, 4) = -1.0 / l1;
      a(1, 5) = -1.0 / l1;
      if (osc_) {
        a(0, n_ - 2) = 1.0 / l1;
        a(1, n_ - 1) = 1.0 / l1;
      } else {
        b(0, 0) = 1.0 / l1;
        b(1, 1) = 1.0 / l1;
      }
      // Filter capacitor: v_c' = (i_inv - i_pcc) / C.
      a(4, 0) = 1.0 / c;
      a(5, 1) = 1.0 / c;
      a(4, 2) = -1.0 / c;
      a(5, 3) = -1.0 / c;
    }

    if (!node_) {
      // Series branch through L2 + Lg and Rg to the source.
      const double lt = l2 + lg;
      a(2, 4) = 1.0 / lt;
      a(3, 5) = 1.0 / lt;
      a(2, 2) = -rg / lt;
      a(3, 3) = -rg / lt;
      a(2, e) = -1.0 / lt;
      a(3, e + 1) = -1.0 / lt;
    } else {
      const double cn = prm_.c_node_farad * prm_.lcl.z_base();
      if (prm_.with_inverter_branch) {
        // i_pcc' = (v_c - v_pcc) / L2.
        a(2, 4) = 1.0 / l2;
        a(3, 5) = 1.0 / l2;
        a(2, 6) = -1.0 / l2;
        a(3, 7) = -1.0 / l2;
        a(6, 2) = 1.0 / cn;
        a(7, 3) = 1.0 / cn;
      }
      // Node capacitor: v_pcc' = (i_pcc + i_machine - i_g) / C_node.
      a(6, 8) = -1.0 / cn;
      a(7, 9) = -1.0 / cn;
      b(6, 2) = 1.0 / cn;
      b(7, 3) = 1.0 / cn;
      // Grid branch: i_g' = (v_pcc - v_g - Rg i_g) / Lg.
      a(8, 6) = 1.0 / lg;
      a(9, 7) = 1.0 / lg;
      a(8, 8) = -rg / lg;
      a(9, 9) = -rg / lg;
      a(8, e) = -1.0 / lg;
      a(9, e + 1) = -1.0 / lg;
    }
    couple_rotation(e);
    if (osc_) couple_rotation(n_ - 2);

    auto [ad, bd] = zoh_discretize(a, b, prm_.ts);
    ad_ = ad;
    bd_ = bd;
  }

  NetworkParams prm_;
  GridImpedance z_;
  bool node_ = false;
  bool osc_ = false;
  int n_ = 8;
  Vector x_;
  Matrix ad_, bd_;
  double t_ = 0.0;
};

}  // namespace gflsync
