// Command-line front end for the gate-racing experiments.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pnrace/harness.hpp"

namespace fs = std::filesystem;
using namespace pnrace;

namespace {

struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
};

struct RunFlags {
  std::string motion = "stationary";
  double radius = 1.0;
  bool trajectory = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "YAML key/value config file");
  app->add_option("--seed", f.seed, "master seed (run seed for run/replay)");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig cfg = f.config ? load_config(*f.config) : ExperimentConfig{};
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out_dir = *f.out;
  if (f.jobs) cfg.jobs = *f.jobs;
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  const fs::path path = fs::path(cfg.out_dir) / name;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

void write_batch(const ExperimentConfig& cfg, const std::vector<RunRecord>& records) {
  auto runs = open_out(cfg, "runs.csv");
  write_runs_csv(runs, records);
  auto report = open_out(cfg, "report.csv");
  write_report_csv(report, aggregate_by_condition(records));
}

void print_summary(const std::vector<RunRecord>& records) {
  for (const Aggregate& a : aggregate_by_condition(records)) {
    std::cout << a.condition << ": success " << a.successes << "/" << a.runs << ", mean t_gate " << a.mean_t_gate
              << " s, mean d_center " << a.mean_d_center << " m\n";
  }
}

RunSpec single_spec(const ExperimentConfig& cfg, const RunFlags& rf) {
  RunSpec s;
  s.condition = "single";
  s.motion = motion_spec(cfg, parse_motion(rf.motion));
  s.radius = rf.radius;
  s.hyper = {cfg.sim.controller.pn.k_pn, cfg.sim.controller.gamma_bar};
  s.delay = cfg.sim.perception.delay;
  s.v_rel_bar = cfg.sim.controller.pn.v_rel_bar;
  s.ranges = cfg.ranges;
  s.seed = cfg.seed;
  return s;
}

void write_trajectory(const ExperimentConfig& cfg, const RunSpec& spec) {
  SimConfig sim = spec.sim_config(cfg.sim);
  sim.log_trajectory = true;
  const RunResult r = run_scenario(spec.scenario(), sim);
  auto os = open_out(cfg, "traj_" + std::to_string(spec.seed) + ".csv");
  write_trajectory_csv(os, r.trajectory_log);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PN-guided vision-based gate racing simulator"};
  app.require_subcommand(1);
  CommonFlags flags;
  RunFlags run_flags;

  auto* run = app.add_subcommand("run", "single scenario");
  auto* replay = app.add_subcommand("replay", "re-emit the trajectory CSV of a seeded run");
  for (auto* sub : {run, replay}) {
    add_common(sub, flags);
    sub->add_option("--motion", run_flags.motion, "stationary|linear_slow|linear_fast|planar|knot");
    sub->add_option("--radius", run_flags.radius, "gate radius [m]")->check(CLI::PositiveNumber);
  }
  run->add_flag("--trajectory", run_flags.trajectory, "also write traj_<seed>.csv");

  auto* table1 = app.add_subcommand("table1", "success/time per motion and radius");
  auto* delay = app.add_subcommand("delay-sweep", "success versus measurement delay");
  auto* vrel = app.add_subcommand("vrel-study", "miss distance versus v_rel_bar");
  auto* baseline = app.add_subcommand("baseline", "narrow FOV bound, small gate");
  auto* tune = app.add_subcommand("tune", "Bayesian optimization campaign");
  for (auto* sub : {table1, delay, vrel, baseline, tune}) add_common(sub, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const ExperimentConfig cfg = resolve(flags);
    if (*run) {
      const RunSpec spec = single_spec(cfg, run_flags);
      const auto records = run_batch({spec}, cfg.sim, 1);
      write_batch(cfg, records);
      if (run_flags.trajectory) write_trajectory(cfg, spec);
      const RunResult& r = records.front().result;
      std::cout << (r.success ? "success" : "failure") << " (" << to_string(r.reason) << "), t_gate " << r.t_gate
                << " s, d_center " << r.d_center << " m\n";
    } else if (*replay) {
      write_trajectory(cfg, single_spec(cfg, run_flags));
    } else if (*tune) {
      const CampaignResult c = bo_campaign(cfg);
      auto csv = open_out(cfg, "campaign.csv");
      write_campaign_csv(csv, c);
      std::vector<RunRecord> all;
      for (const auto& ev : c.history) all.insert(all.end(), ev.runs.begin(), ev.runs.end());
      write_batch(cfg, all);
      std::cout << "best k_pn " << c.best.k_pn << ", gamma_bar " << rad2deg(c.best.gamma_bar) << " deg, reward "
                << c.best_reward << "\n";
    } else {
      std::vector<RunSpec> specs;
      if (*table1) specs = table1_specs(cfg);
      else if (*delay) specs = delay_sweep_specs(cfg);
      else if (*vrel) specs = vrel_study_specs(cfg);
      else specs = baseline_specs(cfg);
      const auto records = run_batch(specs, cfg.sim, cfg.jobs);
      write_batch(cfg, records);
      print_summary(records);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
