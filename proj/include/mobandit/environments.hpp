#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mobandit/core.hpp"
#include "mobandit/preferences.hpp"
#include "mobandit/rng.hpp"

namespace mobandit {

/// Gaussian outcome noise. Either one covariance shared by all actions or one
/// per action. `factors` hold L with L L^T = covariance.
struct MvnNoise {
  std::vector<Eigen::MatrixXd> covariances;
  std::vector<Eigen::MatrixXd> factors;

  const Eigen::MatrixXd& factor_for(std::size_t action) const {
    return factors.size() == 1 ? factors.front() : factors.at(action);
  }
};

/// Independent Bernoulli coordinates with success probabilities mu_a.
struct MultiBernoulliNoise {};

class EnvironmentSpec {
 public:
  using Noise = std::variant<MvnNoise, MultiBernoulliNoise>;

  static EnvironmentSpec mvn(ActionSet actions, const Eigen::MatrixXd& shared_covariance);
  static EnvironmentSpec mvn(ActionSet actions, const std::vector<Eigen::MatrixXd>& per_action_covariance);
  static EnvironmentSpec multi_bernoulli(ActionSet actions);

  const ActionSet& actions() const { return actions_; }
  std::size_t dimension() const { return actions_.dimension(); }
  const Noise& noise() const { return noise_; }
  bool is_multi_bernoulli() const { return std::holds_alternative<MultiBernoulliNoise>(noise_); }

 private:
  EnvironmentSpec(ActionSet actions, Noise noise) : actions_(std::move(actions)), noise_(std::move(noise)) {}
  ActionSet actions_;
  Noise noise_;
};

/// Factor L with L L^T = cov. Cholesky when positive definite; otherwise a
/// symmetric eigendecomposition with eigenvalues >= -1e-10 clamped to zero.
/// Throws std::invalid_argument for asymmetric or indefinite input.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov);

/// Common-random-numbers stream: all policies sharing (seed, repetition) see
/// the same primitive draws at each episode.
struct NoiseStream {
  std::uint64_t seed = 0;
  std::uint32_t repetition = 0;

  rng::Cell cell(std::uint64_t episode) const;
};

struct Observation {
  ObjectiveVector values;
  std::uint64_t episode = 0;
  std::size_t action = 0;
};

/// z = mu_a + L eta (MVN) or z_i = [u_i < mu_a,i] (multi-Bernoulli), where
/// eta/u are the episode's primitive draws. Primitives never depend on the
/// action.
Observation sample_outcome(const EnvironmentSpec& env, std::size_t action, const NoiseStream& stream,
                           std::uint64_t episode);

struct ScalarizedExpectation {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = false;
};

/// E[f(z) | a]. Closed form for linear preferences (any noise) and for
/// epsilon-constraint under multi-Bernoulli noise; Monte-Carlo otherwise.
ScalarizedExpectation expected_scalarized(const EnvironmentSpec& env, const PreferenceSpec& pref, std::size_t action,
                                          std::size_t n_samples, std::uint64_t seed = 0);

/// Same as above but always by Monte-Carlo.
ScalarizedExpectation monte_carlo_scalarized(const EnvironmentSpec& env, const PreferenceSpec& pref,
                                             std::size_t action, std::size_t n_samples, std::uint64_t seed = 0);

// JSON: {"dimension": d, "actions": [..],
//        "noise": {"type": "mvn", "covariance": [[..]]} | {"type": "multi_bernoulli"}}
// "per_action_covariance": [[[..]], ..] may replace "covariance".
EnvironmentSpec environment_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnvironmentSpec& env);

}  // namespace mobandit
