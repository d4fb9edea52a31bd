#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gflsync/scenario.hpp"

namespace gflsync {

enum class Stability { stable, oscillatory, diverged };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::oscillatory: return "oscillatory";
    case Stability::diverged: return "diverged";
  }
  return "?";
}

class InsufficientOscillation : public std::runtime_error {
 public:
  explicit InsufficientOscillation(const std::string& what) : std::runtime_error(what) {}
};

/// First time after which every remaining sample stays inside the band
/// around the target (relative band, absolute when target is zero).
/// Returns nothing when the series never settles.
inline std::optional<double> settling_time(const std::vector<double>& times,
                                           const std::vector<double>& values, double target,
                                           double band) {
  if (times.size() != values.size() || times.empty()) {
    throw std::invalid_argument("settling_time: series must be nonempty and aligned");
  }
  if (!(band > 0.0)) throw std::invalid_argument("settling_time: band must be positive");
  const double tol = target == 0.0 ? band : band * std::abs(target);
  std::size_t first_outside_tail = times.size();  // index after the last out-of-band sample
  for (std::size_t i = times.size(); i-- > 0;) {
    if (std::abs(values[i] - target) > tol) {
      first_outside_tail = i + 1;
      break;
    }
    first_outside_tail = i;
  }
  if (first_outside_tail >= times.size()) return std::nullopt;
  return times[first_outside_tail];
}

/// Exponential-envelope time constant of an oscillatory transient: least
/// squares on the log of extremum magnitudes of the detrended series,
/// discarding peaks below 1% of the largest. Returns +inf for an undamped
/// (or growing) envelope.
inline double decay_time_constant(const std::vector<double>& times,
                                  const std::vector<double>& values) {
  if (times.size() != values.size() || values.size() < 5) {
    throw std::invalid_argument("decay_time_constant: series too short");
  }
  // Detrend against the settled tail so the oscillation is centered.
  const std::size_t tail = std::max<std::size_t>(1, values.size() / 10);
  double offset = 0.0;
  for (std::size_t i = values.size() - tail; i < values.size(); ++i) offset += values[i];
  offset /= static_cast<double>(tail);

  std::vector<double> peak_t, peak_v;
  for (std::size_t i = 1; i + 1 < values.size(); ++i) {
    const double prev = values[i - 1] - offset;
    const double cur = values[i] - offset;
    const double next = values[i + 1] - offset;
    const bool maximum = cur >= prev && cur > next && cur > 0.0;
    const bool minimum = cur <= prev && cur < next && cur < 0.0;
    if (maximum || minimum) {
      peak_t.push_back(times[i]);
      peak_v.push_back(std::abs(cur));
    }
  }
  if (peak_v.size() < 3) {
    throw InsufficientOscillation("decay_time_constant: fewer than 3 extrema");
  }
  const double vmax = *std::max_element(peak_v.begin(), peak_v.end());
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < peak_v.size(); ++i) {
    if (peak_v[i] >= 0.01 * vmax) {
      xs.push_back(peak_t[i]);
      ys.push_back(std::log(peak_v[i]));
    }
  }
  if (xs.size() < 3) {
    throw InsufficientOscillation("decay_time_constant: fewer than 3 usable extrema");
  }
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (!(slope < -1e-12)) return std::numeric_limits<double>::infinity();
  return -1.0 / slope;
}

/// Divergence beats oscillation: a trace that tripped the state bound (or
/// logged values beyond it) is diverged; otherwise the final-window
/// peak-to-peak phase error decides between oscillatory and stable.
inline Stability stability_classify(const Trace& trace, double state_bound = 1e3,
                                    double phase_p2p_threshold = 0.05) {
  if (trace.rows.empty()) throw std::invalid_argument("stability_classify: empty trace");
  if (trace.diverged) return Stability::diverged;
  for (const auto& r : trace.rows) {
    const double m = std::max({std::abs(r.i_inv_dq.d), std::abs(r.i_inv_dq.q),
                               std::abs(r.i_pcc_dq.d), std::abs(r.i_pcc_dq.q),
                               std::abs(r.v_c_dq.d), std::abs(r.v_c_dq.q),
                               std::abs(r.v_pcc_dq.d), std::abs(r.v_pcc_dq.q)});
    if (r.diverged || m > state_bound) return Stability::diverged;
  }
  const std::size_t n = trace.rows.size();
  const std::size_t start = n - std::max<std::size_t>(1, n / 5);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = start; i < n; ++i) {
    lo = std::min(lo, trace.rows[i].phase_error);
    hi = std::max(hi, trace.rows[i].phase_error);
  }
  return (hi - lo) > phase_p2p_threshold ? Stability::oscillatory : Stability::stable;
}

struct MetricsReport {
  double steady_state_phase_error = 0.0;  // mean |error| over the final 10%
  std::optional<double> settling_time_s;  // v_pcc_d into a 2% band of its final value
  std::optional<double> decay_tc_s;       // machine load-angle envelope constant
  Stability stability = Stability::stable;
  double peak_overshoot = 0.0;  // max |v_pcc_d - final| / max(|final|, 1e-12)
};

/// Post-process one trace. For machine scenarios pass the release time so
/// the decay fit sees only the free oscillation.
inline MetricsReport compute_metrics(const Trace& trace, double settle_band = 0.02,
                                     std::optional<double> machine_release = std::nullopt) {
  if (trace.rows.empty()) throw std::invalid_argument("compute_metrics: empty trace");
  MetricsReport rep;
  rep.stability = stability_classify(trace);

  const std::size_t n = trace.rows.size();
  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  double acc = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) acc += std::abs(trace.rows[i].phase_error);
  rep.steady_state_phase_error = acc / static_cast<double>(tail);

  std::vector<double> t, vd;
  t.reserve(n);
  vd.reserve(n);
  for (const auto& r : trace.rows) {
    t.push_back(r.t);
    vd.push_back(r.v_pcc_dq.d);
  }
  const double final_v = vd.back();
  rep.settling_time_s = settling_time(t, vd, final_v, settle_band);
  double peak = 0.0;
  for (double v : vd) peak = std::max(peak, std::abs(v - final_v));
  rep.peak_overshoot = peak / std::max(std::abs(final_v), 1e-12);

  if (machine_release) {
    std::vector<double> mt, md;
    for (const auto& r : trace.rows) {
      if (r.t >= *machine_release) {
        mt.push_back(r.t);
        md.push_back(r.machine_delta);
      }
    }
    if (mt.size() > 16) {
      try {
        rep.decay_tc_s = decay_time_constant(mt, md);
      } catch (const InsufficientOscillation&) {
        rep.decay_tc_s = std::nullopt;
      }
    }
  }
  return rep;
}

}  // namespace gflsync
