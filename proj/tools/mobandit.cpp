#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "mobandit/analysis.hpp"
#include "mobandit/elicit.hpp"
#include "mobandit/harness.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that collides with Eigen.
#include "httplib.h"

using nlohmann::json;
namespace mb = mobandit;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mb::ConfigError("cannot open config '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw mb::ConfigError("config '" + path + "' is not valid JSON");
  return j;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, unsigned threads) {
  const auto config = mb::experiment_from_json(read_json(config_path));
  const auto start = std::chrono::steady_clock::now();
  const auto result = mb::run_experiment(config, threads);
  mb::export_results(result, config, out_dir);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& c : result.curves) {
    std::printf("%-28s mean final regret %.4f\n", c.policy.c_str(), c.final_mean());
  }
  std::printf("wrote %s/{regret.csv,mean_regret.csv,summary.json} in %.2fs\n", out_dir.c_str(), secs);
  return 0;
}

void print_table(const mb::ActionSet& actions, const mb::PreferenceSpec& pref, const std::string& title) {
  const auto table = mb::gap_table(pref, actions);
  std::printf("%s\n%-6s %-14s %8s %8s\n", title.c_str(), "action", "mean", "f(mu)", "gap");
  for (std::size_t a = 0; a < actions.size(); ++a) {
    const auto& m = actions.mean(a);
    std::printf("%-6s (%.2f, %.2f)   %8.4f %8.4f%s\n", actions[a].name.c_str(), m[0], m[1], table.values[a],
                table.gaps[a], a == table.star ? "  *" : "");
  }
}

int cmd_table1(const std::string& which) {
  const auto actions = mb::table1_actions();
  const bool all = which == "all";
  if (all || which == "linear") {
    print_table(actions, mb::PreferenceSpec::linear({0.4, 0.6}), "linear (0.4, 0.6)");
  }
  if (all || which == "econstraint") {
    if (all) std::printf("\n");
    print_table(actions, mb::PreferenceSpec::epsilon_constraint(1, {0.5, 0.0}), "epsilon-constraint (target 2, eps1 0.5)");
  }
  if (which == "chebyshev") {
    print_table(actions, mb::PreferenceSpec::chebyshev({0.4, 0.6}), "chebyshev (0.4, 0.6)");
  }
  if (!all && which != "linear" && which != "econstraint" && which != "chebyshev") {
    throw mb::ConfigError("--pref must be linear, econstraint, chebyshev or all");
  }
  return 0;
}

int cmd_bounds(const std::string& config_path) {
  namespace an = mb::analysis;
  const auto g = an::bound_grid_from_json(read_json(config_path));
  const unsigned threads = g.threads > 0 ? g.threads : mb::default_thread_count();
  int failures = 0;
  std::printf("fact,variant,d,sigma,n,deviation,bound,empirical,std_error,holds\n");
  for (const auto& [fact, q] : g.queries) {
    const auto r = an::mc_validate_bound(fact, q, g.trials, g.seed, threads);
    if (!r.holds) ++failures;
    std::printf("%s,%s,%zu,%s,%zu,%s,%s,%s,%s,%s\n", an::to_string(fact), an::to_string(q.variant), q.d,
                mb::format_number(q.sigma).c_str(), q.n, mb::format_number(q.deviation).c_str(),
                mb::format_number(r.bound).c_str(), mb::format_number(r.empirical).c_str(),
                mb::format_number(r.std_error).c_str(), r.holds ? "true" : "false");
  }
  if (failures > 0) std::fprintf(stderr, "%d bound(s) violated beyond 3 standard errors\n", failures);
  return failures > 0 ? 1 : 0;
}

int cmd_front(const std::string& config_path) {
  const json cfg = read_json(config_path);
  const mb::ActionSet actions = cfg.contains("environment") ? mb::environment_from_json(cfg["environment"]).actions()
                                : cfg.contains("env")        ? mb::environment_from_json(cfg["env"]).actions()
                                                             : mb::action_set_from_json(cfg);
  json out = json::array();
  for (auto i : mb::pareto_front(actions)) {
    out.push_back({{"index", i}, {"name", actions[i].name}, {"mean", actions.mean(i).values()}});
  }
  std::cout << json{{"front", out}}.dump(2) << "\n";
  return 0;
}

int cmd_fixtures(const std::string& config_path, std::size_t rounds, const std::string& out) {
  json fixtures;
  try {
    fixtures = mb::elicit::dominance_fixtures(read_json(config_path), rounds);
  } catch (const mb::elicit::ServiceError& e) {
    throw mb::ConfigError(e.what());
  }
  const std::string text = fixtures.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + out + "'");
    f << text;
  }
  return 0;
}

int cmd_serve(const std::string& bind, int port, const std::string& store) {
  mb::elicit::SessionManager manager(store.empty() ? std::nullopt : std::optional<std::filesystem::path>(store));
  httplib::Server server;
  mb::elicit::register_routes(server, manager);
  std::fprintf(stderr, "listening on %s:%d (%zu session(s) restored)\n", bind.c_str(), port,
               manager.session_ids().size());
  if (!server.listen(bind, port)) {
    std::fprintf(stderr, "cannot listen on %s:%d\n", bind.c_str(), port);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-objective bandit toolkit"};
  app.require_subcommand(1);

  std::string config, out, pref = "all", bind = "127.0.0.1", store;
  unsigned threads = 0;
  int port = 8080;
  std::size_t rounds = 10;

  auto* run = app.add_subcommand("run", "Run a regret experiment and export CSV/JSON");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--threads", threads, "Worker threads (0 = auto)");

  auto* table1 = app.add_subcommand("table1", "Recompute the benchmark preference table");
  table1->add_option("--pref", pref, "linear | econstraint | chebyshev | all");

  auto* bounds = app.add_subcommand("bounds", "Monte-Carlo validation of the concentration facts");
  bounds->add_option("--config", config, "Bounds grid config (JSON)")->required();

  auto* front = app.add_subcommand("front", "Print the Pareto front of an action set");
  front->add_option("--config", config, "Action-set, experiment or session config (JSON)")->required();

  auto* fixtures = app.add_subcommand("fixtures", "Export golden dominance fixtures for clients");
  fixtures->add_option("--config", config, "Session create request (JSON)")->required();
  fixtures->add_option("--rounds", rounds, "Episodes to record");
  fixtures->add_option("--out", out, "Output file (default stdout)");

  auto* serve = app.add_subcommand("serve", "Run the elicitation HTTP service");
  serve->add_option("--bind", bind, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--store", store, "Append-only session store file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, out, threads);
    if (*table1) return cmd_table1(pref);
    if (*bounds) return cmd_bounds(config);
    if (*front) return cmd_front(config);
    if (*fixtures) return cmd_fixtures(config, rounds, out);
    if (*serve) return cmd_serve(bind, port, store);
  } catch (const mb::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
