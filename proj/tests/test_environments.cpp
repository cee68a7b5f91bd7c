#include <cmath>

#include "doctest.h"
#include "mobandit/harness.hpp"
#include "support/testing.hpp"

using namespace mobandit;

namespace {

const PreferenceSpec kEps = PreferenceSpec::epsilon_constraint(1, {0.5, 0.0});

EnvironmentSpec table1_mvn() { return EnvironmentSpec::mvn(table1_actions(), table1_covariance()); }

}  // namespace

TEST_CASE("covariance factor reproduces the covariance") {
  const auto cov = table1_covariance();
  const auto l = covariance_factor(cov);
  CHECK((l * l.transpose() - cov).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXd singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;
  const auto ls = covariance_factor(singular);
  CHECK((ls * ls.transpose() - singular).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.4, 1.0;
  CHECK_THROWS_AS(covariance_factor(asym), std::invalid_argument);
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(covariance_factor(indefinite), std::invalid_argument);
}

TEST_CASE("environment construction validates means and noise") {
  CHECK_THROWS_AS(EnvironmentSpec::multi_bernoulli(ActionSet({{"x", {1.2, 0.5}}})), std::invalid_argument);
  CHECK_THROWS_AS(EnvironmentSpec::mvn(table1_actions(), Eigen::MatrixXd::Identity(3, 3)), std::invalid_argument);
  CHECK_THROWS_AS(EnvironmentSpec::mvn(table1_actions(), std::vector<Eigen::MatrixXd>(3, table1_covariance())),
                  std::invalid_argument);
}

TEST_CASE("degenerate noise returns the mean") {
  const auto env = EnvironmentSpec::mvn(table1_actions(), Eigen::MatrixXd::Zero(2, 2));
  for (std::uint64_t t = 1; t <= 20; ++t) CHECK(sample_outcome(env, 3, {1, 0}, t).values == env.actions().mean(3));
  const auto ber = EnvironmentSpec::multi_bernoulli(ActionSet({{"x", {1.0, 0.0}}}));
  for (std::uint64_t t = 1; t <= 200; ++t) CHECK(sample_outcome(ber, 0, {1, 0}, t).values == ObjectiveVector{1.0, 0.0});
}

TEST_CASE("episode 0 and bad actions are rejected") {
  const auto env = table1_mvn();
  CHECK_THROWS_AS(sample_outcome(env, 0, {1, 0}, 0), std::invalid_argument);
  CHECK_THROWS_AS(sample_outcome(env, 10, {1, 0}, 1), std::out_of_range);
}

TEST_CASE("MVN outcomes have the configured moments") {
  const auto env = table1_mvn();
  const NoiseStream stream{77, 0};
  const int n = 100000;
  std::vector<std::vector<double>> xs;
  xs.reserve(n);
  for (int t = 1; t <= n; ++t) xs.push_back(sample_outcome(env, 8, stream, t).values.values());
  const auto m = testing::moments(xs);
  const auto& mu = env.actions().mean(8);
  for (int i = 0; i < 2; ++i) CHECK(std::abs(m.mean[i] - mu[i]) < 4.0 * std::sqrt(0.1 / n));
  const auto cov = table1_covariance();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(m.cov[i][j] - cov(i, j)) < 0.01);
}

TEST_CASE("multi-Bernoulli coordinates are binary with the right means") {
  const auto env = EnvironmentSpec::multi_bernoulli(table1_actions());
  const NoiseStream stream{78, 2};
  const int n = 100000;
  double s0 = 0, s1 = 0;
  for (int t = 1; t <= n; ++t) {
    const auto z = sample_outcome(env, 5, stream, t).values;
    for (double v : z) REQUIRE((v == 0.0 || v == 1.0));
    s0 += z[0];
    s1 += z[1];
  }
  const auto& mu = env.actions().mean(5);
  CHECK(std::abs(s0 / n - mu[0]) < 4.0 * std::sqrt(mu[0] * (1 - mu[0]) / n));
  CHECK(std::abs(s1 / n - mu[1]) < 4.0 * std::sqrt(mu[1] * (1 - mu[1]) / n));
}

TEST_CASE("outcomes are reproducible regardless of query order") {
  const auto env = table1_mvn();
  const NoiseStream stream{5, 1};
  std::vector<ObjectiveVector> forward, backward(50);
  for (std::uint64_t t = 1; t <= 50; ++t) forward.push_back(sample_outcome(env, t % 10, stream, t).values);
  for (std::uint64_t t = 50; t >= 1; --t) backward[t - 1] = sample_outcome(env, t % 10, stream, t).values;
  CHECK(forward == backward);
}

TEST_CASE("MVN noise is shared across actions at an episode") {
  const auto env = table1_mvn();
  const NoiseStream stream{6, 3};
  testing::Gen g(31);
  for (std::uint64_t t = 1; t <= 200; ++t) {
    const std::size_t a = g.index(10), b = g.index(10);
    const auto za = sample_outcome(env, a, stream, t).values;
    const auto zb = sample_outcome(env, b, stream, t).values;
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(std::abs((za[i] - env.actions().mean(a)[i]) - (zb[i] - env.actions().mean(b)[i])) < 1e-15);
    }
  }
}

TEST_CASE("multi-Bernoulli outcomes are monotone couplings across actions") {
  // Shared uniforms: a coordinate that succeeds for a lower mean succeeds for a higher one.
  const auto env = EnvironmentSpec::multi_bernoulli(table1_actions());
  const NoiseStream stream{7, 0};
  for (std::uint64_t t = 1; t <= 2000; ++t) {
    const auto lo = sample_outcome(env, 7, stream, t).values;  // (0.13, 0.84)
    const auto hi = sample_outcome(env, 8, stream, t).values;  // (0.78, 0.60)
    if (lo[0] == 1.0) CHECK(hi[0] == 1.0);
    if (hi[1] == 1.0) CHECK(lo[1] == 1.0);
  }
}

TEST_CASE("expected scalarized preference: closed forms") {
  const auto ber = EnvironmentSpec::multi_bernoulli(table1_actions());
  const auto e9 = expected_scalarized(ber, kEps, 8, 0);
  CHECK(e9.exact);
  CHECK(e9.value == doctest::Approx(0.468).epsilon(1e-12));
  CHECK(expected_scalarized(ber, kEps, 5, 0).value == doctest::Approx(0.3888).epsilon(1e-12));

  std::size_t best = 0;
  for (std::size_t a = 0; a < 10; ++a) {
    if (expected_scalarized(ber, kEps, a, 0).value > expected_scalarized(ber, kEps, best, 0).value) best = a;
  }
  CHECK(best == 8);
  CHECK(gap_table(kEps, ber.actions()).star == 5);

  const auto lin = PreferenceSpec::linear({0.4, 0.6});
  CHECK(expected_scalarized(table1_mvn(), lin, 2, 0).value == doctest::Approx(0.61).epsilon(1e-12));
}

TEST_CASE("Monte-Carlo expectation agrees with the closed form") {
  const auto ber = EnvironmentSpec::multi_bernoulli(table1_actions());
  for (std::size_t a : {0u, 5u, 8u}) {
    const auto exact = expected_scalarized(ber, kEps, a, 0);
    const auto mc = monte_carlo_scalarized(ber, kEps, a, 100000, 3);
    CHECK(std::abs(mc.value - exact.value) < 4.0 * mc.std_error + 1e-12);
  }
  const auto lin = PreferenceSpec::linear({0.4, 0.6});
  const auto mc = monte_carlo_scalarized(table1_mvn(), lin, 4, 100000, 4);
  CHECK(std::abs(mc.value - 0.532) < 4.0 * mc.std_error);
}

TEST_CASE("environments round-trip through JSON") {
  const auto env = table1_mvn();
  const auto back = environment_from_json(to_json(env));
  CHECK(!back.is_multi_bernoulli());
  CHECK(sample_outcome(back, 1, {3, 0}, 5).values == sample_outcome(env, 1, {3, 0}, 5).values);
  const auto ber = environment_from_json(to_json(EnvironmentSpec::multi_bernoulli(table1_actions())));
  CHECK(ber.is_multi_bernoulli());

  auto j = to_json(env);
  j["noise"]["covariance"] = {{1.0, 2.0}, {2.0, 1.0}};
  CHECK_THROWS_AS(environment_from_json(j), ConfigError);
  j["noise"] = {{"type", "cauchy"}};
  CHECK_THROWS_AS(environment_from_json(j), ConfigError);
  auto per_action = to_json(env);
  per_action["noise"].erase("covariance");
  per_action["noise"]["per_action_covariance"] = std::vector<nlohmann::json>(10, to_json(env)["noise"]["covariance"]);
  CHECK_NOTHROW(environment_from_json(per_action));
}
