#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pnrace/harness.hpp"

using namespace pnrace;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.runs = 3;
  cfg.radii = {1.0};
  return cfg;
}

}  // namespace

TEST(Config, FlatKeysOverrideDefaults) {
  ExperimentConfig cfg;
  apply_config(cfg, YAML::Load(R"(
motions: [stationary, knot]
radii: [0.5, 2]
runs: 7
seed: 99
k_pn: 3.0
gamma_bar_deg: 15
delay: 0.1
wind: [1, 2, 0]
reward: distance
k_pn_range: [1, 2]
)"));
  EXPECT_EQ(cfg.motions, (std::vector<GateMotion>{GateMotion::stationary, GateMotion::knot}));
  EXPECT_EQ(cfg.radii, (std::vector<double>{0.5, 2.0}));
  EXPECT_EQ(cfg.runs, 7);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.sim.controller.pn.k_pn, 3.0);
  EXPECT_NEAR(cfg.sim.controller.gamma_bar, deg2rad(15), 1e-15);
  EXPECT_EQ(cfg.sim.perception.delay, 0.1);
  EXPECT_EQ(cfg.sim.wind.v_wind, Vec3(1, 2, 0));
  EXPECT_EQ(cfg.reward.c_d, 5.0);
  EXPECT_EQ(cfg.space.lo(0), 1.0);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, Errors) {
  ExperimentConfig cfg;
  EXPECT_THROW(apply_config(cfg, YAML::Load("colour: blue")), ConfigError);
  EXPECT_THROW(apply_config(cfg, YAML::Load("runs: many")), ConfigError);
  EXPECT_THROW(apply_config(cfg, YAML::Load("motions: [spiral]")), ConfigError);
  EXPECT_THROW(apply_config(cfg, YAML::Load("- a\n- b")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/cfg.yaml"), ConfigError);
  ExperimentConfig bad;
  bad.runs = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.delays = {0.5};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.sim.controller.gamma_bar = deg2rad(50);
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Seeds, DistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(mix_seed(1, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
  EXPECT_NE(mix_seed(7, 3), mix_seed(8, 3));
}

TEST(Experiments, SpecCounts) {
  const ExperimentConfig cfg;
  EXPECT_EQ(table1_specs(cfg).size(), 2u * 2 * 5 * 12);
  EXPECT_EQ(delay_sweep_specs(cfg).size(), 3u * 4 * 3 * 12);
  EXPECT_EQ(vrel_study_specs(cfg).size(), 2u * 4 * 12);
  EXPECT_EQ(baseline_specs(cfg).size(), 4u * 2 * 12);
}

TEST(Experiments, SeedsArePairedAcrossConditions) {
  const auto specs = table1_specs(small_config());
  std::map<std::string, std::vector<std::uint64_t>> by_condition;
  for (const RunSpec& s : specs) by_condition[s.condition].push_back(s.seed);
  for (const auto& [c, seeds] : by_condition) EXPECT_EQ(seeds, by_condition.begin()->second) << c;
}

TEST(Experiments, VrelStudyUsesFixedDistanceAndWideKnot) {
  for (const RunSpec& s : vrel_study_specs(small_config())) {
    const Scenario scn = s.scenario();
    EXPECT_EQ(scn.gate.kind, MotionKind::knot);
    EXPECT_EQ(scn.gate.amplitude, 5.0);
    EXPECT_TRUE(scn.initial_distance == 30.0 || scn.initial_distance == 150.0);
  }
}

TEST(Experiments, BaselinePlanarPeakSpeed) {
  for (const RunSpec& s : baseline_specs(small_config())) {
    const Scenario scn = s.scenario();
    EXPECT_NEAR(s.hyper.gamma_bar, deg2rad(3.5), 1e-15);
    EXPECT_EQ(s.radius, 0.5);
    if (scn.gate.kind == MotionKind::planar) {
      EXPECT_NEAR(scn.gate.amplitude * scn.gate.omega * detail::kPlanarPeakShapeSpeed, s.motion.linear_speed, 1e-12);
    } else {
      EXPECT_NEAR(scn.gate.velocity.norm(), s.motion.linear_speed, 1e-12);
    }
  }
}

TEST(RunBatch, ThreadCountDoesNotChangeOutput) {
  const ExperimentConfig cfg = small_config();
  const auto specs = table1_specs(cfg);
  std::ostringstream a, b;
  write_runs_csv(a, run_batch(specs, cfg.sim, 1));
  write_runs_csv(b, run_batch(specs, cfg.sim, 3));
  EXPECT_EQ(a.str(), b.str());
}

TEST(RunBatch, AggregatesRecomputableFromRunsCsv) {
  const ExperimentConfig cfg = small_config();
  const auto records = run_batch(delay_sweep_specs(cfg), cfg.sim, 2);
  std::ostringstream runs;
  write_runs_csv(runs, records);

  struct Acc {
    int n = 0, ok = 0, crossed = 0;
    double t = 0, d = 0, v = 0;
  };
  std::map<std::string, Acc> acc;
  std::istringstream is(runs.str());
  std::string line;
  std::getline(is, line);
  const auto header = split(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  while (std::getline(is, line)) {
    const auto f = split(line);
    Acc& a = acc[f[col["condition"]]];
    ++a.n;
    a.v += std::stod(f[col["top_speed"]]);
    if (f[col["success"]] == "1") {
      ++a.ok;
      a.t += std::stod(f[col["t_gate"]]);
    }
    if (f[col["crossed"]] == "1") {
      ++a.crossed;
      a.d += std::stod(f[col["d_center"]]);
    }
  }
  const auto aggs = aggregate_by_condition(records);
  ASSERT_EQ(aggs.size(), acc.size());
  for (const Aggregate& g : aggs) {
    const Acc& a = acc.at(g.condition);
    EXPECT_EQ(g.runs, a.n);
    EXPECT_EQ(g.successes, a.ok);
    EXPECT_DOUBLE_EQ(g.success_rate, double(a.ok) / a.n);
    EXPECT_GE(g.success_rate, 0.0);
    EXPECT_LE(g.success_rate, 1.0);
    if (a.ok > 0) EXPECT_NEAR(g.mean_t_gate, a.t / a.ok, 1e-12);
    if (a.crossed > 0) EXPECT_NEAR(g.mean_d_center, a.d / a.crossed, 1e-12);
    EXPECT_NEAR(g.mean_top_speed, a.v / a.n, 1e-12);
  }
}

TEST(Aggregate, AllSuccessful) {
  std::vector<RunRecord> rows(4);
  for (auto& r : rows) {
    r.spec.condition = "c";
    r.result.success = r.result.crossed = true;
    r.result.t_gate = 2.0;
    r.result.d_center = 0.5;
  }
  const auto a = aggregate_by_condition(rows);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].success_rate, 1.0);
  EXPECT_EQ(a[0].mean_t_gate, 2.0);
  EXPECT_EQ(a[0].std_d_center, 0.0);
}

TEST(Campaign, FailedRunsScoreZero) {
  RunResult r;
  r.t_gate = 2.0;
  EXPECT_EQ(run_reward(RewardConfig::distance_time(), r), 0.0);
  r.success = true;
  EXPECT_NEAR(run_reward(RewardConfig::distance_time(), r), 5.0, 1e-15);
}

TEST(Campaign, ShortCampaignIsDeterministic) {
  ExperimentConfig cfg;
  cfg.bo_iterations = 6;
  cfg.bo_runs_per_motion = 1;
  const CampaignResult a = bo_campaign(cfg), b = bo_campaign(cfg);
  ASSERT_EQ(a.history.size(), 6u);
  EXPECT_EQ(a.history[0].runs.size(), 4u);
  EXPECT_NEAR(a.history[0].hyper.k_pn, 1.65, 1e-12);  // first Sobol point: center of the box
  EXPECT_NEAR(rad2deg(a.history[0].hyper.gamma_bar), 17.5, 1e-9);
  std::ostringstream ca, cb;
  write_campaign_csv(ca, a);
  write_campaign_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
  double best = 0.0;
  for (const auto& ev : a.history) best = std::max(best, ev.mean_reward);
  EXPECT_EQ(a.best_reward, best);
}
