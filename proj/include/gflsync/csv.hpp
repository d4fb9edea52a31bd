#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gflsync/analysis.hpp"
#include "gflsync/scenario.hpp"

namespace gflsync {

/// 17 significant digits: enough for bit-exact round trips of doubles.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols = {
      "t",        "v_pcc_d",  "v_pcc_q",  "v_pcc_alpha", "v_pcc_beta", "theta_true",
      "theta_hat", "phase_error", "i_inv_d", "i_inv_q",   "i_pcc_d",    "i_pcc_q",
      "v_c_d",    "v_c_q",    "u_d",      "u_q",         "u_mag_raw",  "machine_delta",
      "machine_omega", "z_mag", "diverged"};
  return cols;
}

inline void write_trace_csv(std::ostream& os, const Trace& trace) {
  const auto& cols = trace_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : trace.rows) {
    os << format_real(r.t) << ',' << format_real(r.v_pcc_dq.d) << ',' << format_real(r.v_pcc_dq.q)
       << ',' << format_real(r.v_pcc_ab.alpha) << ',' << format_real(r.v_pcc_ab.beta) << ','
       << format_real(r.theta_true) << ',' << format_real(r.theta_hat) << ','
       << format_real(r.phase_error) << ',' << format_real(r.i_inv_dq.d) << ','
       << format_real(r.i_inv_dq.q) << ',' << format_real(r.i_pcc_dq.d) << ','
       << format_real(r.i_pcc_dq.q) << ',' << format_real(r.v_c_dq.d) << ','
       << format_real(r.v_c_dq.q) << ',' << format_real(r.u_dq.d) << ',' << format_real(r.u_dq.q)
       << ',' << format_real(r.u_mag_raw) << ',' << format_real(r.machine_delta) << ','
       << format_real(r.machine_omega) << ',' << format_real(r.z_mag) << ','
       << (r.diverged ? 1 : 0) << "\n";
  }
}

inline void write_trace_csv(const std::string& path, const Trace& trace) {
  std::ofstream f(path, std::ios::binary);  // binary keeps LF endings everywhere
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  write_trace_csv(f, trace);
}

/// Minimal CSV reader for the round-trip checks: header plus rows of
/// comma-separated fields.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(std::istream& is) {
  CsvTable tbl;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    parts.push_back(cur);
    return parts;
  };
  if (std::getline(is, line)) tbl.header = split(line);
  while (std::getline(is, line)) {
    if (!line.empty()) tbl.rows.push_back(split(line));
  }
  return tbl;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return read_csv(f);
}

inline Trace trace_from_csv(const CsvTable& tbl) {
  if (tbl.header != trace_columns()) throw std::runtime_error("trace CSV: unexpected columns");
  Trace trace;
  for (const auto& row : tbl.rows) {
    if (row.size() != tbl.header.size()) throw std::runtime_error("trace CSV: ragged row");
    std::size_t i = 0;
    auto next = [&]() { return std::stod(row.at(i++)); };
    TraceRecord r;
    r.t = next();
    r.v_pcc_dq.d = next();
    r.v_pcc_dq.q = next();
    r.v_pcc_ab.alpha = next();
    r.v_pcc_ab.beta = next();
    r.theta_true = next();
    r.theta_hat = next();
    r.phase_error = next();
    r.i_inv_dq.d = next();
    r.i_inv_dq.q = next();
    r.i_pcc_dq.d = next();
    r.i_pcc_dq.q = next();
    r.v_c_dq.d = next();
    r.v_c_dq.q = next();
    r.u_dq.d = next();
    r.u_dq.q = next();
    r.u_mag_raw = next();
    r.machine_delta = next();
    r.machine_omega = next();
    r.z_mag = next();
    r.diverged = next() != 0.0;
    if (r.diverged) trace.diverged = true;
    trace.rows.push_back(r);
  }
  return trace;
}

inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "label",      "stability", "steady_state_phase_error", "settling_time_s",
      "decay_tc_s", "peak_overshoot"};
  return cols;
}

inline void write_metrics_header(std::ostream& os) {
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
}

inline void write_metrics_row(std::ostream& os, const std::string& label,
                              const MetricsReport& m) {
  os << label << ',' << to_string(m.stability) << ','
     << format_real(m.steady_state_phase_error) << ','
     << (m.settling_time_s ? format_real(*m.settling_time_s) : "not-settled") << ','
     << (m.decay_tc_s ? format_real(*m.decay_tc_s) : "n/a") << ','
     << format_real(m.peak_overshoot) << "\n";
}

}  // namespace gflsync
