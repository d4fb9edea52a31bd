#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gflsync/scenario.hpp"

namespace gflsync {

using Json = nlohmann::json;

inline constexpr const char* kScenarioSchema = "gflsync/scenario-v1";
inline constexpr const char* kSweepSchema = "gflsync/sweep-v1";

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

/// Fail-closed field reader: every key consumed is crossed off, and any
/// leftover key is an error naming the offending field.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    for (const auto& item : j_.items()) remaining_.insert(item.key());
  }
  ~StrictObject() = default;

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    remaining_.erase(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  const Json* child(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    remaining_.erase(key);
    return &j_.at(key);
  }

  void finish() const {
    if (!remaining_.empty()) {
      throw ConfigError(path_ + ": unknown field '" + *remaining_.begin() + "'");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> remaining_;
};

inline SyncMethod method_from_string(const std::string& s) {
  if (s == "CPLL") return SyncMethod::cpll;
  if (s == "CVI-PLL") return SyncMethod::cvi_pll;
  if (s == "MVI-PLL") return SyncMethod::mvi_pll;
  if (s == "CAEKF") return SyncMethod::caekf;
  if (s == "AAEKF-LQR") return SyncMethod::aaekf_lqr;
  throw ConfigError("method: unknown value '" + s +
                    "' (expected CPLL, CVI-PLL, MVI-PLL, CAEKF, AAEKF-LQR)");
}

}  // namespace detail

/// Parse a scenario object (without the schema key) into a config.
inline ScenarioConfig scenario_from_json(const Json& j, const std::string& path = "scenario") {
  detail::StrictObject o(j, path);
  ScenarioConfig c;

  std::string method = "AAEKF-LQR";
  o.get("method", method);
  if (method == "none") {
    c.inverter_enabled = false;
  } else {
    c.method = detail::method_from_string(method);
  }
  std::string controller = "auto";
  o.get("controller", controller);
  if (controller == "auto") c.controller = ControllerKind::automatic;
  else if (controller == "lqr") c.controller = ControllerKind::lqr;
  else if (controller == "pi") c.controller = ControllerKind::pi;
  else throw ConfigError(path + ".controller: expected auto, lqr, or pi");
  o.get("inverter_enabled", c.inverter_enabled);
  o.get("duration", c.duration);
  o.get("ts", c.ts);
  o.get("seed", c.seed);

  if (const Json* g = o.child("grid")) {
    detail::StrictObject go(*g, path + ".grid");
    go.get("vg_mag", c.vg_mag);
    go.get("theta0", c.theta0);
    double zmag = c.z_initial.magnitude();
    double zdeg = c.z_initial.angle() * 180.0 / kPi;
    go.get("z_mag", zmag);
    go.get("z_angle_deg", zdeg);
    c.z_initial = GridImpedance::polar(zmag, zdeg * kPi / 180.0);
    if (const Json* sj = go.child("schedule")) {
      if (!sj->is_array()) throw ConfigError(path + ".grid.schedule: expected an array");
      for (std::size_t i = 0; i < sj->size(); ++i) {
        detail::StrictObject so(sj->at(i), path + ".grid.schedule[" + std::to_string(i) + "]");
        ImpedanceStep st;
        double deg = 70.0;
        so.get("time", st.time);
        so.get("z_mag", st.magnitude);
        so.get("z_angle_deg", deg);
        st.angle = deg * kPi / 180.0;
        so.finish();
        c.schedule.push_back(st);
      }
    }
    go.get("model_error", c.impedance_model_error);
    go.get("track_impedance", c.track_impedance);
    go.finish();
  }

  if (const Json* l = o.child("lcl")) {
    detail::StrictObject lo(*l, path + ".lcl");
    lo.get("lf1", c.lcl.lf1);
    lo.get("lf2", c.lcl.lf2);
    lo.get("cf", c.lcl.cf);
    double f_hz = c.lcl.omega_g / (2.0 * kPi);
    lo.get("f_hz", f_hz);
    c.lcl.omega_g = 2.0 * kPi * f_hz;
    lo.get("v_base", c.lcl.v_base);
    lo.get("s_base", c.lcl.s_base);
    lo.finish();
  }

  if (const Json* r = o.child("reference")) {
    detail::StrictObject ro(*r, path + ".reference");
    double mag = c.i_inv_ref.norm();
    double deg = std::atan2(c.i_inv_ref.q, c.i_inv_ref.d) * 180.0 / kPi;
    ro.get("i_mag", mag);
    ro.get("i_angle_deg", deg);
    const double rad = deg * kPi / 180.0;
    c.i_inv_ref = {mag * std::cos(rad), mag * std::sin(rad)};
    ro.finish();
  }

  if (const Json* k = o.child("kf")) {
    detail::StrictObject ko(*k, path + ".kf");
    ko.get("q_kf", c.kf.q_kf);
    ko.get("r_diag", c.kf.r_diag);
    ko.get("time_varying_gain", c.kf.time_varying_gain);
    ko.finish();
  }

  if (const Json* l = o.child("lqr")) {
    detail::StrictObject lo(*l, path + ".lqr");
    lo.get("q1", c.lqr.weights.q1);
    lo.get("q2", c.lqr.weights.q2);
    lo.get("q3", c.lqr.weights.q3);
    lo.get("r", c.lqr.weights.r);
    lo.get("v_sat", c.lqr.v_sat);
    lo.get("feedforward", c.lqr.feedforward);
    std::string conv = c.lqr.convention == UnitConvention::per_unit ? "pu" : "si";
    lo.get("convention", conv);
    if (conv == "pu") c.lqr.convention = UnitConvention::per_unit;
    else if (conv == "si") c.lqr.convention = UnitConvention::si;
    else throw ConfigError(path + ".lqr.convention: expected pu or si");
    lo.finish();
  }

  if (const Json* p = o.child("pi")) {
    detail::StrictObject po(*p, path + ".pi");
    po.get("kp", c.pi.kp);
    po.get("ki", c.pi.ki);
    po.get("integrator_limit", c.pi.integrator_limit);
    po.finish();
  }

  if (const Json* p = o.child("pll")) {
    detail::StrictObject po(*p, path + ".pll");
    po.get("kp", c.pll.kp);
    po.get("ki", c.pll.ki);
    po.get("cvi_fraction", c.pll.cvi_fraction);
    po.finish();
  }

  if (const Json* m = o.child("machine")) {
    detail::StrictObject mo(*m, path + ".machine");
    mo.get("enabled", c.machine.enabled);
    mo.get("emf", c.machine.emf);
    mo.get("l_sync", c.machine.l_sync);
    mo.get("p_mech", c.machine.p_mech);
    mo.get("inertia_h", c.machine.inertia_h);
    mo.get("f_target", c.machine.f_target);
    mo.get("damping", c.machine.damping);
    mo.get("decay_target_8hz", c.machine.decay_target_8hz);
    mo.get("release_time", c.machine.release_time);
    mo.get("delta_kick", c.machine.delta_kick);
    mo.finish();
  }

  if (const Json* n = o.child("noise")) {
    detail::StrictObject no(*n, path + ".noise");
    no.get("sigma_v", c.noise.sigma_v);
    no.get("sigma_i", c.noise.sigma_i);
    no.finish();
  }

  if (const Json* p = o.child("plant")) {
    detail::StrictObject po(*p, path + ".plant");
    std::string model = c.pcc_model == PccVoltageModel::quasistatic ? "quasistatic" : "physical";
    po.get("pcc_model", model);
    if (model == "quasistatic") c.pcc_model = PccVoltageModel::quasistatic;
    else if (model == "physical") c.pcc_model = PccVoltageModel::physical;
    else throw ConfigError(path + ".plant.pcc_model: expected quasistatic or physical");
    po.get("c_node_farad", c.c_node_farad);
    po.get("divergence_limit", c.divergence_limit);
    po.finish();
  }

  o.finish();
  c.validate();
  return c;
}

inline ScenarioConfig scenario_from_document(const Json& doc) {
  if (!doc.is_object() || !doc.contains("schema")) {
    throw ConfigError("config: missing schema field");
  }
  if (doc.at("schema").get<std::string>() != kScenarioSchema) {
    throw ConfigError("config: expected schema " + std::string(kScenarioSchema));
  }
  Json body = doc;
  body.erase("schema");
  return scenario_from_json(body, "scenario");
}

/// One sweep axis set; absent axes contribute a single point from the base
/// scenario. Grid order is the nested loop over axes in this declaration
/// order, which makes output ordering deterministic.
struct SweepConfig {
  ScenarioConfig base;
  std::vector<std::string> methods;      // method names, may include "none"
  std::vector<double> model_errors;      // fractions
  std::vector<double> q_kfs;
  std::vector<double> f_targets;         // Hz (machine scenarios)
  std::vector<double> z_mags;            // pu (impedance grid)

  struct Point {
    std::string label;
    ScenarioConfig scenario;
  };

  std::vector<Point> grid() const {
    auto methods_eff = methods.empty() ? std::vector<std::string>{""} : methods;
    auto errs = model_errors.empty() ? std::vector<double>{c_nan()} : model_errors;
    auto qs = q_kfs.empty() ? std::vector<double>{c_nan()} : q_kfs;
    auto fs = f_targets.empty() ? std::vector<double>{c_nan()} : f_targets;
    auto zs = z_mags.empty() ? std::vector<double>{c_nan()} : z_mags;
    std::vector<Point> pts;
    for (const auto& m : methods_eff)
      for (double e : errs)
        for (double q : qs)
          for (double f : fs)
            for (double z : zs) {
              ScenarioConfig sc = base;
              std::string label;
              if (!m.empty()) {
                if (m == "none") {
                  sc.inverter_enabled = false;
                } else {
                  sc.inverter_enabled = true;
                  sc.method = detail::method_from_string(m);
                }
                label += (label.empty() ? "" : "/") + m;
              }
              if (e == e) {
                sc.impedance_model_error = e;
                label += (label.empty() ? "" : "/") + std::string("err=") + std::to_string(e);
              }
              if (q == q) {
                sc.kf.q_kf = q;
                label += (label.empty() ? "" : "/") + std::string("q_kf=") + format_sci(q);
              }
              if (f == f) {
                sc.machine.f_target = f;
                sc.machine.inertia_h = 0.0;
                label += (label.empty() ? "" : "/") + std::string("f=") + std::to_string(f);
              }
              if (z == z) {
                sc.z_initial = GridImpedance::polar(z, sc.z_initial.angle());
                label += (label.empty() ? "" : "/") + std::string("z=") + std::to_string(z);
              }
              if (label.empty()) label = "base";
              pts.push_back({label, sc});
            }
    return pts;
  }

 private:
  static double c_nan() { return std::numeric_limits<double>::quiet_NaN(); }
  static std::string format_sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
  }
};

inline SweepConfig sweep_from_document(const Json& doc) {
  if (!doc.is_object() || !doc.contains("schema")) {
    throw ConfigError("config: missing schema field");
  }
  if (doc.at("schema").get<std::string>() != kSweepSchema) {
    throw ConfigError("config: expected schema " + std::string(kSweepSchema));
  }
  detail::StrictObject o(doc, "sweep");
  std::string schema;
  o.get("schema", schema);
  SweepConfig sw;
  if (const Json* b = o.child("base")) {
    sw.base = scenario_from_json(*b, "sweep.base");
  } else {
    throw ConfigError("sweep: missing base scenario");
  }
  if (const Json* a = o.child("axes")) {
    detail::StrictObject ao(*a, "sweep.axes");
    ao.get("method", sw.methods);
    ao.get("model_error", sw.model_errors);
    ao.get("q_kf", sw.q_kfs);
    ao.get("f_target", sw.f_targets);
    ao.get("z_mag", sw.z_mags);
    ao.finish();
  }
  o.finish();
  if (sw.grid().empty()) throw ConfigError("sweep: empty grid");
  return sw;
}

inline Json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  try {
    return Json::parse(f);
  } catch (const Json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
}

/// Apply a dotted-path override (key.path=value) onto a JSON document.
/// Values parse as JSON scalars, falling back to a plain string.
inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must look like key.path=value: " + assignment);
  }
  const std::string pathspec = assignment.substr(0, eq);
  const std::string valuestr = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(valuestr);
  } catch (const Json::exception&) {
    value = valuestr;  // unquoted strings (e.g. method names) come through here
  }
  Json* node = &doc;
  std::size_t begin = 0;
  std::vector<std::string> keys;
  while (true) {
    const auto dot = pathspec.find('.', begin);
    keys.push_back(pathspec.substr(begin, dot == std::string::npos ? dot : dot - begin));
    if (dot == std::string::npos) break;
    begin = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (keys[i].empty()) throw ConfigError("override has an empty path segment: " + assignment);
    node = &((*node)[keys[i]]);
  }
  if (keys.back().empty()) throw ConfigError("override has an empty key: " + assignment);
  (*node)[keys.back()] = value;
}

}  // namespace gflsync
