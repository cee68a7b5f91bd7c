#include "mobandit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

namespace mobandit {

namespace {

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace

PolicyConfig policy_from_json(const nlohmann::json& j, std::size_t n_actions) {
  try {
    const auto name = j.at("policy").get<std::string>();
    PolicyConfig p;
    if (name == "mvn_ts") {
      p.kind = PolicyKind::MvnThompson;
    } else if (name == "scalarized_gaussian_ts") {
      p.kind = PolicyKind::ScalarizedThompson;
    } else if (name == "fixed") {
      p.kind = PolicyKind::Fixed;
      p.fixed_action = j.at("action").get<std::size_t>();
      if (p.fixed_action >= n_actions) throw ConfigError("fixed policy action index out of range");
    } else {
      throw ConfigError("unknown policy '" + name + "'");
    }
    p.label = j.value("label", p.kind == PolicyKind::Fixed ? name + "_" + std::to_string(p.fixed_action) : name);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy config: ") + e.what());
  }
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  try {
    EnvironmentSpec env = environment_from_json(j.at("environment"));
    PreferenceSpec pref = preference_from_json(j.at("preference"), env.dimension());
    std::vector<PolicyConfig> policies;
    std::set<std::string> labels;
    for (const auto& p : j.at("policies")) {
      policies.push_back(policy_from_json(p, env.actions().size()));
      if (!labels.insert(policies.back().label).second) throw ConfigError("duplicate policy label '" + policies.back().label + "'");
    }
    if (policies.empty()) throw ConfigError("at least one policy is required");
    const auto horizon = j.at("horizon").get<std::int64_t>();
    const auto reps = j.value("repetitions", std::int64_t{20});
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (horizon > std::int64_t{0xFFFFFFFF}) throw ConfigError("horizon too large");
    if (reps < 1 || reps > std::int64_t{0xFFFFFFFE}) throw ConfigError("repetitions must be >= 1");
    return ExperimentConfig{std::move(env),
                            std::move(pref),
                            std::move(policies),
                            static_cast<std::uint64_t>(horizon),
                            static_cast<std::uint32_t>(reps),
                            j.value("seed", std::uint64_t{0}),
                            j};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

Agent::Agent(const PolicyConfig& config, const PreferenceSpec& pref, std::size_t n_actions, std::size_t dimension)
    : config_(config), pref_(pref), state_(std::monostate{}) {
  switch (config.kind) {
    case PolicyKind::MvnThompson: state_ = PosteriorState(n_actions, dimension); break;
    case PolicyKind::ScalarizedThompson: state_ = ScalarPosteriorState(n_actions); break;
    case PolicyKind::Fixed: break;
  }
}

std::size_t Agent::select(const DrawKey& key) const {
  switch (config_.kind) {
    case PolicyKind::MvnThompson: return mvn_ts_select(std::get<PosteriorState>(state_), pref_, key).action;
    case PolicyKind::ScalarizedThompson: return gaussian_ts_select(std::get<ScalarPosteriorState>(state_), key);
    case PolicyKind::Fixed: return config_.fixed_action;
  }
  throw std::logic_error("unknown policy kind");
}

void Agent::observe(std::size_t action, const ObjectiveVector& z) {
  if (auto* s = std::get_if<PosteriorState>(&state_)) s->update(action, z);
  else if (auto* s = std::get_if<ScalarPosteriorState>(&state_)) s->update(action, sampled_preference(pref_, z));
}

RunRow run_episode(Agent& agent, const EnvironmentSpec& env, const GapTable& gaps, const NoiseStream& stream,
                   std::uint64_t t) {
  if (t < 1) throw std::invalid_argument("episodes are numbered from 1");
  const std::size_t action = agent.select(DrawKey{stream.seed, stream.repetition, t});
  Observation obs = sample_outcome(env, action, stream, t);
  agent.observe(action, obs.values);
  const double gap = gaps.gaps.at(action);
  return RunRow{t, action, std::move(obs.values), gap, gap};
}

Trajectory run_trajectory(const PolicyConfig& policy, const EnvironmentSpec& env, const PreferenceSpec& pref,
                          std::uint64_t horizon, std::uint64_t seed, std::uint32_t repetition) {
  const GapTable gaps = gap_table(pref, env.actions());
  Agent agent(policy, pref, env.actions().size(), env.dimension());
  const NoiseStream stream{seed, repetition};
  Trajectory traj{policy.label, repetition, {}};
  traj.rows.reserve(horizon);
  double cum = 0.0;
  for (std::uint64_t t = 1; t <= horizon; ++t) {
    RunRow row = run_episode(agent, env, gaps, stream, t);
    cum += row.gap;
    row.cum_regret = cum;
    traj.rows.push_back(std::move(row));
  }
  return traj;
}

std::vector<const Trajectory*> ExperimentResult::runs_for(const std::string& policy) const {
  std::vector<const Trajectory*> out;
  for (const auto& r : runs) {
    if (r.policy == policy) out.push_back(&r);
  }
  return out;
}

unsigned default_thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MOBANDIT_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads) {
  if (config.horizon < 1 || config.repetitions < 1 || config.policies.empty()) {
    throw ConfigError("experiment needs T >= 1, R >= 1 and at least one policy");
  }
  ExperimentResult result;
  result.gaps = gap_table(config.preference, config.environment.actions());
  const std::size_t n_tasks = config.policies.size() * config.repetitions;
  result.runs.resize(n_tasks);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t task = next++; task < n_tasks; task = next++) {
      const auto& policy = config.policies[task / config.repetitions];
      const auto rep = static_cast<std::uint32_t>(task % config.repetitions);
      result.runs[task] =
          run_trajectory(policy, config.environment, config.preference, config.horizon, config.seed, rep);
    }
  };
  const unsigned workers = std::min<std::size_t>(threads == 0 ? default_thread_count() : threads, n_tasks);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& policy : config.policies) {
    RegretCurve curve{policy.label, {}, {}, {}};
    const auto runs = result.runs_for(policy.label);
    curve.mean.assign(config.horizon, 0.0);
    curve.min.assign(config.horizon, std::numeric_limits<double>::infinity());
    curve.max.assign(config.horizon, -std::numeric_limits<double>::infinity());
    for (const auto* run : runs) {
      for (std::size_t t = 0; t < config.horizon; ++t) {
        const double v = run->rows[t].cum_regret;
        curve.mean[t] += v;
        curve.min[t] = std::min(curve.min[t], v);
        curve.max[t] = std::max(curve.max[t], v);
      }
    }
    for (double& m : curve.mean) m /= static_cast<double>(runs.size());
    result.curves.push_back(std::move(curve));
  }
  return result;
}

double pareto_regret(const ActionSet& actions, std::size_t a) {
  const auto& mu = actions.mean(a);
  double eps = 0.0;
  for (std::size_t b = 0; b < actions.size(); ++b) {
    if (b == a) continue;
    // mu_b dominates mu_a + eps for every eps below min_i (mu_b,i - mu_a,i).
    const auto& other = actions.mean(b);
    double slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mu.size(); ++i) slack = std::min(slack, other[i] - mu[i]);
    eps = std::max(eps, slack);
  }
  return eps;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string regret_csv(const ExperimentResult& result) {
  std::string out = "policy,repetition,episode,action,gap,cum_regret\n";
  for (const auto& run : result.runs) {
    for (const auto& row : run.rows) {
      out += run.policy;
      out += ',';
      out += std::to_string(run.repetition);
      out += ',';
      out += std::to_string(row.episode);
      out += ',';
      out += std::to_string(row.action);
      out += ',';
      out += format_number(row.gap);
      out += ',';
      out += format_number(row.cum_regret);
      out += '\n';
    }
  }
  return out;
}

std::string mean_curve_csv(const ExperimentResult& result) {
  std::string out = "policy,episode,mean,min,max\n";
  for (const auto& c : result.curves) {
    for (std::size_t t = 0; t < c.mean.size(); ++t) {
      out += c.policy + ',' + std::to_string(t + 1) + ',' + format_number(c.mean[t]) + ',' + format_number(c.min[t]) +
             ',' + format_number(c.max[t]) + '\n';
    }
  }
  return out;
}

nlohmann::json summary_json(const ExperimentResult& result, const ExperimentConfig& config) {
  nlohmann::json s;
  s["config"] = config.source;
  s["optimal_action"] = result.gaps.star;
  s["gaps"] = result.gaps.gaps;
  s["policies"] = nlohmann::json::array();
  for (const auto& c : result.curves) {
    std::vector<double> finals;
    for (const auto* run : result.runs_for(c.policy)) finals.push_back(run->final_regret());
    s["policies"].push_back({{"policy", c.policy},
                             {"mean_final_regret", c.final_mean()},
                             {"min_final_regret", *std::min_element(finals.begin(), finals.end())},
                             {"max_final_regret", *std::max_element(finals.begin(), finals.end())},
                             {"final_regret", finals}});
  }
  return s;
}

void export_results(const ExperimentResult& result, const ExperimentConfig& config, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
  write_file(dir / "regret.csv", regret_csv(result));
  write_file(dir / "mean_regret.csv", mean_curve_csv(result));
  write_file(dir / "summary.json", summary_json(result, config).dump(2) + "\n");
}

ActionSet table1_actions() {
  const std::vector<std::pair<double, double>> means = {
      {0.56, 0.46}, {0.75, 0.26}, {0.34, 0.79}, {0.67, 0.50}, {0.70, 0.42},
      {0.54, 0.72}, {0.49, 0.62}, {0.13, 0.84}, {0.78, 0.60}, {0.63, 0.44},
  };
  std::vector<Action> actions;
  for (std::size_t i = 0; i < means.size(); ++i) {
    actions.push_back(Action{"a" + std::to_string(i + 1), ObjectiveVector{means[i].first, means[i].second}});
  }
  return ActionSet(std::move(actions));
}

Eigen::MatrixXd table1_covariance() {
  Eigen::MatrixXd cov(2, 2);
  cov << 0.10, 0.05, 0.05, 0.10;
  return cov;
}

}  // namespace mobandit
