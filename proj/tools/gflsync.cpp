#include <CLI11.hpp>

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gflsync/analysis.hpp"
#include "gflsync/config.hpp"
#include "gflsync/csv.hpp"
#include "gflsync/design.hpp"
#include "gflsync/reproduce.hpp"
#include "gflsync/scenario.hpp"

namespace fs = std::filesystem;
using namespace gflsync;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

Json load_with_overrides(const std::string& path, const std::vector<std::string>& sets,
                         std::optional<std::uint64_t> seed) {
  Json doc = load_json_file(path);
  for (const auto& s : sets) apply_override(doc, s);
  if (seed) doc["seed"] = *seed;
  return doc;
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  return f;
}

int cmd_design(const std::string& config_path, const fs::path& out,
               const std::vector<std::string>& sets) {
  const Json doc = load_with_overrides(config_path, sets, std::nullopt);
  const ScenarioConfig cfg = scenario_from_document(doc);
  fs::create_directories(out);
  const auto rep = make_design_report(cfg.lcl, cfg.ts, cfg.z_initial, {1e-5, 1e-6, 1e-7},
                                      cfg.kf.r_diag * Eigen::Matrix2d::Identity());
  auto txt = open_out(out / "design_report.txt");
  write_design_report_text(txt, rep);
  auto gains = open_out(out / "gain_comparison.csv");
  write_gain_comparison_csv(gains, rep);
  auto spec = open_out(out / "a_error_spectrum.csv");
  write_error_spectrum_csv(spec, rep);
  std::cout << "design report written to " << out.string() << "\n";
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, const fs::path& out,
                 const std::vector<std::string>& sets, std::optional<std::uint64_t> seed) {
  const Json doc = load_with_overrides(config_path, sets, seed);
  const ScenarioConfig cfg = scenario_from_document(doc);
  const Trace trace = run_scenario(cfg);
  fs::create_directories(out);
  write_trace_csv((out / "trace.csv").string(), trace);
  const std::optional<double> release =
      cfg.machine.enabled ? std::optional<double>(cfg.machine.release_time) : std::nullopt;
  const MetricsReport m = compute_metrics(trace, 0.02, release);
  auto f = open_out(out / "metrics.csv");
  write_metrics_header(f);
  write_metrics_row(f, to_string(cfg.method), m);
  std::cout << "trace: " << trace.rows.size() << " rows, " << to_string(m.stability) << "\n";
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const fs::path& out,
              const std::vector<std::string>& sets, std::optional<std::uint64_t> seed, int jobs,
              bool dump_traces) {
  const Json doc = load_with_overrides(config_path, sets, std::nullopt);
  SweepConfig sweep = sweep_from_document(doc);
  if (seed) sweep.base.seed = *seed;
  const auto grid = sweep.grid();
  fs::create_directories(out);

  struct Result {
    std::string label;
    MetricsReport metrics;
    Trace trace;
  };
  std::vector<Result> results(grid.size());
  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;

  const auto worker = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= grid.size() || failed.load()) break;
      try {
        const auto& pt = grid[i];
        Trace trace = run_scenario(pt.scenario);
        const std::optional<double> release =
            pt.scenario.machine.enabled ? std::optional<double>(pt.scenario.machine.release_time)
                                        : std::nullopt;
        results[i] = {pt.label, compute_metrics(trace, 0.02, release), std::move(trace)};
      } catch (const std::exception& e) {
        std::scoped_lock lock(error_mutex);
        failed.store(true);
        error_message = e.what();
      }
    }
  };
  const int n_threads = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads - 1; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failed.load()) throw NumericalError("sweep point failed: " + error_message);

  auto f = open_out(out / "metrics.csv");
  write_metrics_header(f);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    write_metrics_row(f, results[i].label, results[i].metrics);
    if (dump_traces) {
      std::string name = results[i].label;
      for (auto& ch : name) {
        if (ch == '/' || ch == '=' || ch == ' ') ch = '_';
      }
      write_trace_csv((out / ("trace_" + name + ".csv")).string(), results[i].trace);
    }
  }
  std::cout << grid.size() << " sweep points written to " << out.string() << "\n";
  return kExitOk;
}

int cmd_reproduce(const std::string& id, const fs::path& out) {
  experiments::run_reproduce(id, out / id);
  std::cout << "experiment '" << id << "' written to " << (out / id).string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid-following inverter synchronization laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool dump_traces = false;
  std::string experiment_id;

  auto* design = app.add_subcommand("design", "write controller/estimator design reports");
  design->add_option("--config", config_path, "scenario config file")->required();
  design->add_option("--out", out_dir, "output directory");
  design->add_option("--set", sets, "override config fields (key.path=value)");

  auto* simulate = app.add_subcommand("simulate", "run one scenario; write trace and metrics");
  simulate->add_option("--config", config_path, "scenario config file")->required();
  simulate->add_option("--out", out_dir, "output directory");
  simulate->add_option("--set", sets, "override config fields (key.path=value)");
  simulate->add_option("--seed", seed, "override the scenario seed");

  auto* sweep = app.add_subcommand("sweep", "run a scenario grid; write aggregated metrics");
  sweep->add_option("--config", config_path, "sweep config file")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--set", sets, "override config fields (key.path=value)");
  sweep->add_option("--seed", seed, "override the base seed");
  sweep->add_option("--jobs", jobs, "worker threads");
  sweep->add_flag("--traces", dump_traces, "also write one trace CSV per grid point");

  auto* reproduce = app.add_subcommand("reproduce", "run a named canned experiment bundle");
  reproduce->add_option("id", experiment_id, "experiment id")->required();
  reproduce->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (design->parsed()) return cmd_design(config_path, out_dir, sets);
    if (simulate->parsed()) return cmd_simulate(config_path, out_dir, sets, seed);
    if (sweep->parsed()) return cmd_sweep(config_path, out_dir, sets, seed, jobs, dump_traces);
    if (reproduce->parsed()) return cmd_reproduce(experiment_id, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
