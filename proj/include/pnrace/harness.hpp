#pragma once

// Experiment orchestration: config loading, seeded batches run on a thread
// pool, aggregation and CSV export.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "pnrace/common.hpp"
#include "pnrace/simulation.hpp"
#include "pnrace/tuner.hpp"
#include "pnrace/world.hpp"

namespace pnrace {

struct Hyperparameters {
  double k_pn = 2.10;
  double gamma_bar = deg2rad(21.05);
};

struct ExperimentConfig {
  std::vector<GateMotion> motions{std::begin(kAllMotions), std::end(kAllMotions)};
  std::vector<double> radii{1.0, 2.0};
  InitialConditionRanges ranges;
  SimConfig sim;
  double planar_omega = kPlanarOmega;
  int runs = 12;  // per motion and condition
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int jobs = 1;

  /// Second hyperparameter set of the table1 experiment (distance-only reward optimum).
  Hyperparameters alt_hyper{1.11, deg2rad(8.91)};

  std::vector<double> delays{0.0, 0.1, 0.2, 0.3};
  std::vector<double> delay_radii{0.5, 1.0, 2.0};

  std::vector<double> vrel_values{10.0, 20.0, 30.0};
  std::vector<double> vrel_distances{30.0, 150.0};
  double vrel_knot_amplitude = 5.0;

  double baseline_gamma_bar = deg2rad(3.5);
  double baseline_radius = 0.5;
  std::vector<double> baseline_speeds{1.25, 2.5, 3.75, 5.0};

  int bo_iterations = 25;
  int bo_runs_per_motion = 2;
  double bo_beta = 4.0;
  RewardConfig reward = RewardConfig::distance_time();
  SearchSpace space;

  void validate() const {
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (motions.empty() || radii.empty()) throw ConfigError("motions and radii must be non-empty");
    if (bo_iterations < 1 || bo_runs_per_motion < 1) throw ConfigError("BO budget must be >= 1");
    if (!(planar_omega > 0.0)) throw ConfigError("planar_omega must be positive");
    const auto positive = [](const std::vector<double>& v, const char* what) {
      for (double x : v) {
        if (!(x > 0.0)) throw ConfigError(std::string(what) + " entries must be positive");
      }
    };
    positive(radii, "radii");
    positive(delay_radii, "delay_radii");
    positive(vrel_values, "vrel_values");
    positive(vrel_distances, "vrel_distances");
    positive(baseline_speeds, "baseline_speeds");
    try {
      ranges.validate();
      sim.validate();
      reward.validate();
      space.validate();
      for (double d : delays) {
        PerceptionConfig p = sim.perception;
        p.delay = d;
        p.validate();
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

template <typename T>
T yaml_get(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad value for key '" + key + "'");
  }
}

}  // namespace detail

/// Applies a flat key/value YAML document on top of `cfg`. Angles are in
/// degrees and carry a _deg suffix. Unknown keys are rejected.
inline void apply_config(ExperimentConfig& cfg, const YAML::Node& root) {
  if (!root.IsDefined() || root.IsNull()) return;
  if (!root.IsMap()) throw ConfigError("config must be a key/value map");
  using detail::yaml_get;
  auto& sim = cfg.sim;
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    const YAML::Node& v = kv.second;
    const auto num = [&] { return yaml_get<double>(v, key); };
    const auto list = [&] { return yaml_get<std::vector<double>>(v, key); };
    if (key == "motions") {
      cfg.motions.clear();
      for (const auto& s : yaml_get<std::vector<std::string>>(v, key)) cfg.motions.push_back(parse_motion(s));
    } else if (key == "radii") cfg.radii = list();
    else if (key == "runs") cfg.runs = yaml_get<int>(v, key);
    else if (key == "seed") cfg.seed = yaml_get<std::uint64_t>(v, key);
    else if (key == "out") cfg.out_dir = yaml_get<std::string>(v, key);
    else if (key == "jobs") cfg.jobs = yaml_get<int>(v, key);
    else if (key == "distance_min") cfg.ranges.distance_min = num();
    else if (key == "distance_max") cfg.ranges.distance_max = num();
    else if (key == "initial_speed") cfg.ranges.speed = num();
    else if (key == "max_offset_deg") cfg.ranges.max_offset_angle = deg2rad(num());
    else if (key == "planar_omega") cfg.planar_omega = num();
    else if (key == "k_pn") sim.controller.pn.k_pn = num();
    else if (key == "v_rel_bar") sim.controller.pn.v_rel_bar = num();
    else if (key == "gamma_bar_deg") sim.controller.gamma_bar = deg2rad(num());
    else if (key == "gamma_cam_deg") {
      sim.controller.gamma_cam = deg2rad(num());
      try {
        sim.camera = CameraModel::with_angle_of_view(sim.controller.gamma_cam);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "f_th_bar") sim.controller.f_th_bar = num();
    else if (key == "f_est") sim.perception.f_est = num();
    else if (key == "delay") sim.perception.delay = num();
    else if (key == "noise_px") sim.perception.noise_px = num();
    else if (key == "lpf_alpha") sim.perception.lpf_alpha = num();
    else if (key == "mass") sim.vehicle.m = num();
    else if (key == "tau_omega") sim.vehicle.tau_omega = num();
    else if (key == "tau_att") sim.vehicle.tau_att = num();
    else if (key == "thrust_max") sim.vehicle.f_th_max_newtons = num();
    else if (key == "drag_coeff") sim.vehicle.drag_coeff = num();
    else if (key == "wind") {
      const auto w = list();
      if (w.size() != 3) throw ConfigError("wind needs three components");
      sim.wind.v_wind = Vec3(w[0], w[1], w[2]);
    } else if (key == "dt") sim.dt = num();
    else if (key == "timeout") sim.timeout = num();
    else if (key == "rim_width") sim.rim_width = num();
    else if (key == "max_lost_ticks") sim.max_lost_ticks = yaml_get<int>(v, key);
    else if (key == "alt_k_pn") cfg.alt_hyper.k_pn = num();
    else if (key == "alt_gamma_bar_deg") cfg.alt_hyper.gamma_bar = deg2rad(num());
    else if (key == "delays") cfg.delays = list();
    else if (key == "delay_radii") cfg.delay_radii = list();
    else if (key == "vrel_values") cfg.vrel_values = list();
    else if (key == "vrel_distances") cfg.vrel_distances = list();
    else if (key == "vrel_knot_amplitude") cfg.vrel_knot_amplitude = num();
    else if (key == "baseline_gamma_bar_deg") cfg.baseline_gamma_bar = deg2rad(num());
    else if (key == "baseline_radius") cfg.baseline_radius = num();
    else if (key == "baseline_speeds") cfg.baseline_speeds = list();
    else if (key == "bo_iterations") cfg.bo_iterations = yaml_get<int>(v, key);
    else if (key == "bo_runs_per_motion") cfg.bo_runs_per_motion = yaml_get<int>(v, key);
    else if (key == "bo_beta") cfg.bo_beta = num();
    else if (key == "reward") {
      const auto s = yaml_get<std::string>(v, key);
      if (s == "distance_time") cfg.reward = RewardConfig::distance_time();
      else if (s == "distance") cfg.reward = RewardConfig::distance();
      else throw ConfigError("unknown reward '" + s + "'");
    } else if (key == "reward_c_t") cfg.reward.c_t = num();
    else if (key == "reward_c_d") cfg.reward.c_d = num();
    else if (key == "reward_c") cfg.reward.c = num();
    else if (key == "k_pn_range") {
      const auto r = list();
      if (r.size() != 2) throw ConfigError("k_pn_range needs two values");
      cfg.space.lo(0) = r[0];
      cfg.space.hi(0) = r[1];
    } else if (key == "gamma_bar_range_deg") {
      const auto r = list();
      if (r.size() != 2) throw ConfigError("gamma_bar_range_deg needs two values");
      cfg.space.lo(1) = deg2rad(r[0]);
      cfg.space.hi(1) = deg2rad(r[1]);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg;
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read config '" + path + "'");
  } catch (const YAML::Exception& e) {
    throw ConfigError("malformed config '" + path + "': " + e.what());
  }
  apply_config(cfg, root);
  return cfg;
}

/// SplitMix64 finalizer; derives per-run seeds from the master seed.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// One simulation in a batch plus the labels that go into runs.csv.
struct RunSpec {
  std::string condition;
  MotionSpec motion;
  double radius = 1.0;
  Hyperparameters hyper;
  double delay = 0.0;
  double v_rel_bar = 15.0;
  bool perfect_vrel = false;
  InitialConditionRanges ranges;
  std::uint64_t seed = 0;

  Scenario scenario() const { return sample_scenario(motion, radius, ranges, seed); }

  SimConfig sim_config(SimConfig base) const {
    base.controller.pn.k_pn = hyper.k_pn;
    base.controller.gamma_bar = hyper.gamma_bar;
    base.controller.pn.v_rel_bar = v_rel_bar;
    base.perception.delay = delay;
    base.perfect_vrel = perfect_vrel;
    return base;
  }
};

struct RunRecord {
  RunSpec spec;
  double initial_distance = 0.0;
  RunResult result;
};

/// Runs every spec on `jobs` threads. Output order matches input order, so
/// the result does not depend on scheduling.
inline std::vector<RunRecord> run_batch(const std::vector<RunSpec>& specs, const SimConfig& base, int jobs) {
  std::vector<RunRecord> out(specs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        const Scenario scn = specs[i].scenario();
        SimConfig cfg = specs[i].sim_config(base);
        cfg.validate();
        out[i].spec = specs[i];
        out[i].initial_distance = scn.initial_distance;
        out[i].result = run_scenario(scn, cfg);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(specs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return out;
}

struct Aggregate {
  std::string condition;
  int runs = 0;
  int successes = 0;
  int crossed = 0;
  double success_rate = 0.0;
  double mean_t_gate = std::nan("");  // successful runs
  double mean_d_center = std::nan("");  // runs that crossed the gate plane
  double std_d_center = std::nan("");
  double mean_top_speed = 0.0;  // all runs
};

inline Aggregate aggregate(const std::string& condition, const std::vector<const RunRecord*>& rows) {
  Aggregate a;
  a.condition = condition;
  double t_sum = 0.0, d_sum = 0.0, d_sq = 0.0, v_sum = 0.0;
  for (const RunRecord* r : rows) {
    ++a.runs;
    v_sum += r->result.top_speed;
    if (r->result.success) {
      ++a.successes;
      t_sum += r->result.t_gate;
    }
    if (r->result.crossed) {
      ++a.crossed;
      d_sum += r->result.d_center;
    }
  }
  if (a.runs == 0) return a;
  a.success_rate = static_cast<double>(a.successes) / a.runs;
  a.mean_top_speed = v_sum / a.runs;
  if (a.successes > 0) a.mean_t_gate = t_sum / a.successes;
  if (a.crossed > 0) {
    a.mean_d_center = d_sum / a.crossed;
    for (const RunRecord* r : rows) {
      if (r->result.crossed) d_sq += (r->result.d_center - a.mean_d_center) * (r->result.d_center - a.mean_d_center);
    }
    a.std_d_center = std::sqrt(d_sq / a.crossed);
  }
  return a;
}

/// Per-condition aggregates in first-appearance order.
inline std::vector<Aggregate> aggregate_by_condition(const std::vector<RunRecord>& records) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : records) {
    auto [it, inserted] = groups.try_emplace(r.spec.condition);
    if (inserted) order.push_back(r.spec.condition);
    it->second.push_back(&r);
  }
  std::vector<Aggregate> out;
  for (const auto& c : order) out.push_back(aggregate(c, groups[c]));
  return out;
}

inline constexpr const char* kRunsHeader =
    "condition,motion,radius,k_pn,gamma_bar_deg,delay,v_rel_bar,perfect_vrel,gate_speed,seed,"
    "initial_distance,success,reason,crossed,t_gate,d_center,top_speed";

inline void write_runs_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << kRunsHeader << '\n' << std::setprecision(17);
  for (const RunRecord& r : records) {
    const RunSpec& s = r.spec;
    os << s.condition << ',' << to_string(s.motion.motion) << ',' << s.radius << ',' << s.hyper.k_pn << ','
       << rad2deg(s.hyper.gamma_bar) << ',' << s.delay << ',' << s.v_rel_bar << ',' << int(s.perfect_vrel) << ','
       << s.motion.linear_speed << ',' << s.seed << ',' << r.initial_distance << ',' << int(r.result.success)
       << ',' << to_string(r.result.reason) << ',' << int(r.result.crossed) << ',' << r.result.t_gate << ','
       << r.result.d_center << ',' << r.result.top_speed << '\n';
  }
}

inline void write_report_csv(std::ostream& os, const std::vector<Aggregate>& aggs) {
  os << "condition,runs,successes,success_rate,mean_t_gate,crossed,mean_d_center,std_d_center,mean_top_speed\n"
     << std::setprecision(17);
  for (const Aggregate& a : aggs) {
    os << a.condition << ',' << a.runs << ',' << a.successes << ',' << a.success_rate << ',' << a.mean_t_gate << ','
       << a.crossed << ',' << a.mean_d_center << ',' << a.std_d_center << ',' << a.mean_top_speed << '\n';
  }
}

/// Motion condition with the configured planar rate applied.
inline MotionSpec motion_spec(const ExperimentConfig& cfg, GateMotion m) {
  MotionSpec s;
  s.motion = m;
  if (m == GateMotion::planar) s.omega = cfg.planar_omega;
  if (m == GateMotion::linear_slow) s.linear_speed = 2.5;
  if (m == GateMotion::linear_fast) s.linear_speed = 5.0;
  return s;
}

namespace detail {

inline std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

/// Seeds are shared by every condition (paired comparison).
inline void add_runs(std::vector<RunSpec>& out, RunSpec proto, const ExperimentConfig& cfg) {
  for (int i = 0; i < cfg.runs; ++i) {
    proto.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i));
    out.push_back(proto);
  }
}

inline RunSpec base_spec(const ExperimentConfig& cfg) {
  RunSpec s;
  s.hyper = {cfg.sim.controller.pn.k_pn, cfg.sim.controller.gamma_bar};
  s.delay = cfg.sim.perception.delay;
  s.v_rel_bar = cfg.sim.controller.pn.v_rel_bar;
  s.ranges = cfg.ranges;
  return s;
}

}  // namespace detail

/// Every motion at every radius for the configured and the alternative
/// hyperparameters.
inline std::vector<RunSpec> table1_specs(const ExperimentConfig& cfg) {
  std::vector<RunSpec> specs;
  const RunSpec base = detail::base_spec(cfg);
  const Hyperparameters sets[] = {base.hyper, cfg.alt_hyper};
  const char* names[] = {"main", "alt"};
  for (int h = 0; h < 2; ++h) {
    for (double r : cfg.radii) {
      for (GateMotion m : cfg.motions) {
        RunSpec s = base;
        s.hyper = sets[h];
        s.radius = r;
        s.motion = motion_spec(cfg, m);
        s.condition = std::string(names[h]) + "/r" + detail::fmt(r) + "/" + std::string(to_string(m));
        detail::add_runs(specs, s, cfg);
      }
    }
  }
  return specs;
}

inline std::vector<RunSpec> delay_sweep_specs(const ExperimentConfig& cfg) {
  std::vector<RunSpec> specs;
  const RunSpec base = detail::base_spec(cfg);
  for (double r : cfg.delay_radii) {
    for (double d : cfg.delays) {
      for (GateMotion m : {GateMotion::stationary, GateMotion::linear_fast, GateMotion::planar}) {
        RunSpec s = base;
        s.radius = r;
        s.delay = d;
        s.motion = motion_spec(cfg, m);
        s.condition = "r" + detail::fmt(r) + "/T" + detail::fmt(d) + "/" + std::string(to_string(m));
        detail::add_runs(specs, s, cfg);
      }
    }
  }
  return specs;
}

/// Knot motion at fixed initial distances, fixed v_rel_bar values and the
/// true-relative-speed variant.
inline std::vector<RunSpec> vrel_study_specs(const ExperimentConfig& cfg) {
  std::vector<RunSpec> specs;
  const RunSpec base = detail::base_spec(cfg);
  for (double dist : cfg.vrel_distances) {
    std::vector<std::pair<std::string, double>> variants;
    for (double v : cfg.vrel_values) variants.emplace_back("v" + detail::fmt(v), v);
    variants.emplace_back("perfect", 0.0);
    for (const auto& [name, v] : variants) {
      RunSpec s = base;
      s.radius = cfg.radii.front();
      s.motion = motion_spec(cfg, GateMotion::knot);
      s.motion.amplitude = cfg.vrel_knot_amplitude;
      s.ranges.distance_min = s.ranges.distance_max = dist;
      s.perfect_vrel = v == 0.0;
      if (!s.perfect_vrel) s.v_rel_bar = v;
      s.condition = "D" + detail::fmt(dist) + "/" + name;
      detail::add_runs(specs, s, cfg);
    }
  }
  return specs;
}

inline std::vector<RunSpec> baseline_specs(const ExperimentConfig& cfg) {
  std::vector<RunSpec> specs;
  RunSpec base = detail::base_spec(cfg);
  base.hyper.gamma_bar = cfg.baseline_gamma_bar;
  base.radius = cfg.baseline_radius;
  for (double v : cfg.baseline_speeds) {
    RunSpec lin = base;
    lin.motion = motion_spec(cfg, GateMotion::linear_fast);
    lin.motion.linear_speed = v;
    lin.condition = "linear/v" + detail::fmt(v);
    detail::add_runs(specs, lin, cfg);

    // Planar gate scaled so its peak speed equals v at the default amplitude.
    RunSpec pl = base;
    pl.motion = motion_spec(cfg, GateMotion::planar);
    pl.motion.amplitude = 2.0;
    pl.motion.omega = v / (pl.motion.amplitude * detail::kPlanarPeakShapeSpeed);
    pl.motion.linear_speed = v;
    pl.condition = "planar/v" + detail::fmt(v);
    detail::add_runs(specs, pl, cfg);
  }
  return specs;
}

/// Result of one BO evaluation: the runs and their mean reward.
struct CampaignEvaluation {
  int iteration = 0;
  Hyperparameters hyper;
  double mean_reward = 0.0;
  std::vector<RunRecord> runs;
};

struct CampaignResult {
  Hyperparameters best;
  double best_reward = 0.0;
  std::vector<CampaignEvaluation> history;
};

inline double run_reward(const RewardConfig& cfg, const RunResult& r) {
  return r.success ? reward(cfg, r.t_gate, r.d_center) : 0.0;
}

/// BO over (k_pn, gamma_bar). Each evaluation averages the reward of
/// bo_runs_per_motion runs on each moving-gate motion at the first radius;
/// failed runs score 0. The run seeds are the same in every evaluation.
inline CampaignResult bo_campaign(const ExperimentConfig& cfg) {
  cfg.validate();
  CampaignResult out;
  const auto objective = [&](const Vec2& x) {
    std::vector<RunSpec> specs;
    RunSpec base = detail::base_spec(cfg);
    base.hyper = {x(0), x(1)};
    base.radius = cfg.radii.front();
    for (GateMotion m : {GateMotion::linear_slow, GateMotion::linear_fast, GateMotion::planar, GateMotion::knot}) {
      for (int i = 0; i < cfg.bo_runs_per_motion; ++i) {
        RunSpec s = base;
        s.motion = motion_spec(cfg, m);
        s.condition = "it" + std::to_string(out.history.size()) + "/" + std::string(to_string(m));
        s.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i));
        specs.push_back(s);
      }
    }
    CampaignEvaluation ev;
    ev.iteration = static_cast<int>(out.history.size());
    ev.hyper = base.hyper;
    ev.runs = run_batch(specs, cfg.sim, cfg.jobs);
    double sum = 0.0;
    for (const RunRecord& r : ev.runs) sum += run_reward(cfg.reward, r.result);
    ev.mean_reward = sum / static_cast<double>(ev.runs.size());
    out.history.push_back(ev);
    return ev.mean_reward;
  };
  BoOptions opt;
  opt.iterations = cfg.bo_iterations;
  opt.beta = cfg.bo_beta;
  opt.seed = cfg.seed;
  const BoResult bo = bayes_optimize(cfg.space, objective, opt);
  out.best = {bo.best(0), bo.best(1)};
  out.best_reward = bo.best_value;
  return out;
}

inline void write_campaign_csv(std::ostream& os, const CampaignResult& c) {
  os << "iteration,k_pn,gamma_bar_deg,mean_reward,motion,seed,success,t_gate,d_center\n" << std::setprecision(17);
  for (const CampaignEvaluation& ev : c.history) {
    for (const RunRecord& r : ev.runs) {
      os << ev.iteration << ',' << ev.hyper.k_pn << ',' << rad2deg(ev.hyper.gamma_bar) << ',' << ev.mean_reward
         << ',' << to_string(r.spec.motion.motion) << ',' << r.spec.seed << ',' << int(r.result.success) << ','
         << r.result.t_gate << ',' << r.result.d_center << '\n';
    }
  }
}

}  // namespace pnrace
