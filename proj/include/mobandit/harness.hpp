#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "mobandit/environments.hpp"
#include "mobandit/policies.hpp"
#include "mobandit/preferences.hpp"

namespace mobandit {

enum class PolicyKind {
  MvnThompson,         // "mvn_ts"
  ScalarizedThompson,  // "scalarized_gaussian_ts"
  Fixed,               // "fixed": always plays one action (reference runs)
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::MvnThompson;
  std::size_t fixed_action = 0;
  std::string label;
};

PolicyConfig policy_from_json(const nlohmann::json& j, std::size_t n_actions);

struct ExperimentConfig {
  EnvironmentSpec environment;
  PreferenceSpec preference;
  std::vector<PolicyConfig> policies;
  std::uint64_t horizon = 1;
  std::uint32_t repetitions = 20;
  std::uint64_t seed = 0;
  nlohmann::json source;  // verbatim config, echoed into the summary
};

/// Throws ConfigError on any invalid field (including T = 0 or R = 0).
ExperimentConfig experiment_from_json(const nlohmann::json& j);

/// A policy instance with its own posterior statistics.
class Agent {
 public:
  Agent(const PolicyConfig& config, const PreferenceSpec& pref, std::size_t n_actions, std::size_t dimension);

  const PolicyConfig& config() const { return config_; }
  std::size_t select(const DrawKey& key) const;
  void observe(std::size_t action, const ObjectiveVector& z);

  /// Vector statistics; only MVN-TS agents keep them.
  const PosteriorState& vector_state() const { return std::get<PosteriorState>(state_); }

 private:
  PolicyConfig config_;
  PreferenceSpec pref_;
  std::variant<PosteriorState, ScalarPosteriorState, std::monostate> state_;
};

struct RunRow {
  std::uint64_t episode = 0;
  std::size_t action = 0;
  ObjectiveVector observation;
  double gap = 0.0;
  double cum_regret = 0.0;
};

/// One game step: select with the policy's draws for (stream, t), observe the
/// paired outcome, update, and record the true gap. `cum_regret` of the
/// returned row is the increment only; callers accumulate.
RunRow run_episode(Agent& agent, const EnvironmentSpec& env, const GapTable& gaps, const NoiseStream& stream,
                   std::uint64_t t);

struct Trajectory {
  std::string policy;
  std::uint32_t repetition = 0;
  std::vector<RunRow> rows;

  double final_regret() const { return rows.empty() ? 0.0 : rows.back().cum_regret; }
};

/// Runs T episodes on stream (seed, repetition).
Trajectory run_trajectory(const PolicyConfig& policy, const EnvironmentSpec& env, const PreferenceSpec& pref,
                          std::uint64_t horizon, std::uint64_t seed, std::uint32_t repetition);

struct RegretCurve {
  std::string policy;
  std::vector<double> mean;
  std::vector<double> min;
  std::vector<double> max;

  double final_mean() const { return mean.empty() ? 0.0 : mean.back(); }
};

struct ExperimentResult {
  GapTable gaps;
  std::vector<Trajectory> runs;  // policy-major, then repetition
  std::vector<RegretCurve> curves;

  std::vector<const Trajectory*> runs_for(const std::string& policy) const;
};

/// Worker count from MOBANDIT_THREADS, else hardware concurrency.
unsigned default_thread_count();

ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads = 0);

/// inf { eps >= 0 : mu_a + eps is dominated by no other mean }.
double pareto_regret(const ActionSet& actions, std::size_t a);

/// regret.csv contents: policy,repetition,episode,action,gap,cum_regret.
std::string regret_csv(const ExperimentResult& result);
/// Per-policy mean/min/max curve: policy,episode,mean,min,max.
std::string mean_curve_csv(const ExperimentResult& result);
nlohmann::json summary_json(const ExperimentResult& result, const ExperimentConfig& config);

/// Writes regret.csv, mean_regret.csv and summary.json into `dir`.
void export_results(const ExperimentResult& result, const ExperimentConfig& config, const std::filesystem::path& dir);

/// Shortest round-trip decimal form; stable across runs.
std::string format_number(double v);

/// The ten-action, two-objective benchmark setting.
ActionSet table1_actions();
Eigen::MatrixXd table1_covariance();

}  // namespace mobandit
