#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mobandit/harness.hpp"
#include "support/testing.hpp"

using namespace mobandit;
using nlohmann::json;

namespace {

json base_config(std::uint64_t horizon = 10, std::uint32_t reps = 2) {
  const auto env = EnvironmentSpec::mvn(table1_actions(), table1_covariance());
  return {{"environment", to_json(env)},
          {"preference", {{"type", "linear"}, {"weights", {0.4, 0.6}}}},
          {"policies", {{{"policy", "mvn_ts"}}, {{"policy", "scalarized_gaussian_ts"}}}},
          {"horizon", horizon},
          {"repetitions", reps},
          {"seed", 99}};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("experiment configs are validated") {
  CHECK_NOTHROW(experiment_from_json(base_config()));
  auto j = base_config();
  j["horizon"] = 0;
  CHECK_THROWS_AS(experiment_from_json(j), ConfigError);
  j = base_config();
  j["repetitions"] = 0;
  CHECK_THROWS_AS(experiment_from_json(j), ConfigError);
  j = base_config();
  j["policies"] = {{{"policy", "mvn_ts"}}, {{"policy", "mvn_ts"}}};
  CHECK_THROWS_AS(experiment_from_json(j), ConfigError);
  j["policies"] = {{{"policy", "ucb"}}};
  CHECK_THROWS_AS(experiment_from_json(j), ConfigError);
  j["policies"] = {{{"policy", "fixed"}, {"action", 10}}};
  CHECK_THROWS_AS(experiment_from_json(j), ConfigError);
  j = base_config();
  j["preference"] = {{"type", "linear"}, {"weights", {0.2, 0.3, 0.5}}};
  CHECK_THROWS_AS(experiment_from_json(j), ConfigError);
  j = base_config();
  j.erase("repetitions");
  CHECK(experiment_from_json(j).repetitions == 20);
}

TEST_CASE("regret CSV has one row per policy, repetition and episode") {
  const auto config = experiment_from_json(base_config(10, 2));
  const auto result = run_experiment(config, 1);
  const auto csv = regret_csv(result);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);
  CHECK(csv.rfind("policy,repetition,episode,action,gap,cum_regret\n", 0) == 0);
  CHECK(result.runs.size() == 4);
  CHECK(result.runs[0].policy == "mvn_ts");
  CHECK(result.runs[2].policy == "scalarized_gaussian_ts");
}

TEST_CASE("re-running an experiment is byte-identical, whatever the thread count") {
  const auto config = experiment_from_json(base_config(300, 5));
  const auto a = run_experiment(config, 1);
  const auto b = run_experiment(config, 3);
  CHECK(regret_csv(a) == regret_csv(b));
  CHECK(mean_curve_csv(a) == mean_curve_csv(b));
  CHECK(summary_json(a, config).dump() == summary_json(b, config).dump());

  auto other = base_config(300, 5);
  other["seed"] = 100;
  CHECK(regret_csv(run_experiment(experiment_from_json(other), 1)) != regret_csv(a));
}

TEST_CASE("exported files round-trip byte for byte") {
  const auto config = experiment_from_json(base_config(50, 2));
  const auto dir1 = std::filesystem::temp_directory_path() / "mobandit_export_a";
  const auto dir2 = std::filesystem::temp_directory_path() / "mobandit_export_b";
  export_results(run_experiment(config), config, dir1);
  export_results(run_experiment(config), config, dir2);
  for (const char* f : {"regret.csv", "mean_regret.csv", "summary.json"}) {
    CHECK(slurp(dir1 / f) == slurp(dir2 / f));
    CHECK_FALSE(slurp(dir1 / f).empty());
  }
  const auto summary = json::parse(slurp(dir1 / "summary.json"));
  CHECK(summary["optimal_action"] == 8);
  CHECK(summary["policies"].size() == 2);
  CHECK(summary["config"]["seed"] == 99);
}

TEST_CASE("policies in one repetition share the primitive noise") {
  const auto config = experiment_from_json(base_config(200, 3));
  const auto result = run_experiment(config, 1);
  const auto& actions = config.environment.actions();
  for (std::uint32_t rep = 0; rep < 3; ++rep) {
    const auto& a = result.runs[rep];
    const auto& b = result.runs[3 + rep];
    for (std::size_t t = 0; t < 200; ++t) {
      for (std::size_t i = 0; i < 2; ++i) {
        const double xa = a.rows[t].observation[i] - actions.mean(a.rows[t].action)[i];
        const double xb = b.rows[t].observation[i] - actions.mean(b.rows[t].action)[i];
        CHECK(std::abs(xa - xb) < 1e-15);
      }
    }
  }
}

TEST_CASE("cumulative regret accumulates the true gaps") {
  const auto config = experiment_from_json(base_config(100, 2));
  const auto result = run_experiment(config, 1);
  for (const auto& run : result.runs) {
    double cum = 0.0;
    for (const auto& row : run.rows) {
      CHECK(row.gap == result.gaps.gaps[row.action]);
      cum += row.gap;
      CHECK(row.cum_regret == cum);
    }
  }
  for (const auto& curve : result.curves) {
    const auto runs = result.runs_for(curve.policy);
    double mean = 0.0;
    for (const auto* r : runs) mean += r->final_regret();
    CHECK(curve.final_mean() == doctest::Approx(mean / runs.size()));
    for (std::size_t t = 0; t < curve.mean.size(); ++t) {
      CHECK(curve.min[t] <= curve.mean[t] + 1e-12);
      CHECK(curve.mean[t] <= curve.max[t] + 1e-12);
    }
  }
}

TEST_CASE("fixed policy regret is linear in the horizon") {
  auto j = base_config(100, 1);
  j["policies"] = {{{"policy", "fixed"}, {"action", 0}}};
  const auto config = experiment_from_json(j);
  CHECK(config.policies[0].label == "fixed_0");
  const auto result = run_experiment(config);
  CHECK(result.curves[0].final_mean() == doctest::Approx(100 * result.gaps.gaps[0]));
}

TEST_CASE("a trajectory is reproduced by replaying run_episode") {
  const auto config = experiment_from_json(base_config(100, 1));
  const auto traj = run_trajectory(config.policies[0], config.environment, config.preference, 100, 99, 0);
  Agent agent(config.policies[0], config.preference, 10, 2);
  const auto gaps = gap_table(config.preference, config.environment.actions());
  for (std::uint64_t t = 1; t <= 100; ++t) {
    const auto row = run_episode(agent, config.environment, gaps, NoiseStream{99, 0}, t);
    CHECK(row.action == traj.rows[t - 1].action);
    CHECK(row.observation == traj.rows[t - 1].observation);
  }
  CHECK(agent.vector_state().count(traj.rows[0].action) >= 1);
}

TEST_CASE("pareto regret matches the bisection oracle") {
  testing::Gen g(51);
  for (int it = 0; it < 300; ++it) {
    const auto actions = g.action_set(2 + g.index(8), 1 + g.index(3), it % 2 == 0);
    for (std::size_t a = 0; a < actions.size(); ++a) {
      CHECK(std::abs(pareto_regret(actions, a) - testing::oracle_pareto_regret(actions, a)) <= 1e-9);
    }
    for (auto a : pareto_front(actions)) CHECK(pareto_regret(actions, a) == 0.0);
  }
  const auto t1 = table1_actions();
  CHECK(pareto_regret(t1, 1) == doctest::Approx(0.03));  // (0.75,0.26) vs (0.78,0.60)
}

TEST_CASE("number formatting is shortest round-trip") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(0.0) == "0");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}
