#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mobandit/core.hpp"
#include "mobandit/preferences.hpp"
#include "mobandit/rng.hpp"

namespace mobandit {

/// Sufficient statistics of one action's observation history.
struct ActionStats {
  std::size_t count = 0;
  Eigen::VectorXd sum;    // sum of z
  Eigen::MatrixXd outer;  // sum of z z^T
};

/// Per-action statistics for vector observations.
class PosteriorState {
 public:
  PosteriorState(std::size_t n_actions, std::size_t dimension);

  std::size_t n_actions() const { return stats_.size(); }
  std::size_t dimension() const { return dimension_; }
  const ActionStats& stats(std::size_t action) const { return stats_.at(action); }
  std::size_t count(std::size_t action) const { return stats_.at(action).count; }

  void update(std::size_t action, const ObjectiveVector& z);

  /// Empirical mean; requires at least one observation.
  ObjectiveVector empirical_mean(std::size_t action) const;

 private:
  std::size_t dimension_;
  std::vector<ActionStats> stats_;
};

/// Per-action statistics for scalar rewards (the single-objective baseline).
class ScalarPosteriorState {
 public:
  explicit ScalarPosteriorState(std::size_t n_actions);

  std::size_t n_actions() const { return counts_.size(); }
  std::size_t count(std::size_t action) const { return counts_.at(action); }
  double sum(std::size_t action) const { return sums_.at(action); }

  void update(std::size_t action, double reward);

 private:
  std::vector<std::size_t> counts_;
  std::vector<double> sums_;
};

struct Posterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Conjugate prior N(mean, covariance) with known observation covariance.
struct GaussianPrior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd noise_covariance;

  /// mu_0 = 0, Sigma_0 = I, Sigma_a = I.
  static GaussianPrior non_informative(std::size_t dimension);
};

/// Posterior under the non-informative prior:
/// mean = N/(N+1) * mu_hat (zero when N = 0), covariance = I/(N+1).
Posterior posterior_params(const PosteriorState& state, std::size_t action);

/// General conjugate update:
/// cov = (S0^-1 + N Sa^-1)^-1, mean = cov (S0^-1 mu0 + N Sa^-1 mu_hat).
Posterior posterior_params(const PosteriorState& state, std::size_t action, const GaussianPrior& prior);

/// Unbiased sample covariance (denominator N-1); requires N >= 2.
Eigen::MatrixXd empirical_covariance(const PosteriorState& state, std::size_t action);

/// Address of the sampler's random draws for one decision. Lane a carries
/// action a's draws; a separate lane breaks ties.
struct DrawKey {
  std::uint64_t seed = 0;
  std::uint32_t repetition = 0;
  std::uint64_t episode = 0;

  rng::Cell action_cell(std::size_t action) const;
  rng::Cell tie_cell() const;
};

struct SampledEstimate {
  std::vector<ObjectiveVector> thetas;
  std::vector<double> values;         // f(theta_a)
  std::vector<std::size_t> optimal;   // argmax set O(t), ascending
};

struct Selection {
  std::size_t action = 0;
  SampledEstimate estimate;
};

/// theta_a ~ N(N_a mu_hat_a / (N_a+1), I/(N_a+1)) for every action.
std::vector<ObjectiveVector> sample_thetas(const PosteriorState& state, const DrawKey& key);

/// Uniformly random member of a nonempty candidate list.
std::size_t pick_uniform(const std::vector<std::size_t>& candidates, const DrawKey& key);

/// Indices attaining the maximum (exact floating-point ties).
std::vector<std::size_t> argmax_set(const std::vector<double>& values);

/// f(x) extended to samples outside the preference's domain: L_p scores
/// f(max(x, 0)), the monotone extension; other families are evaluated as is.
double sampled_preference(const PreferenceSpec& pref, const ObjectiveVector& x);

/// O(t) for given samples, and the uniformly tie-broken pick from it.
Selection choose_preferred(std::vector<ObjectiveVector> thetas, const PreferenceSpec& pref, const DrawKey& key);

/// Thompson sampling from multivariate normal priors.
Selection mvn_ts_select(const PosteriorState& state, const PreferenceSpec& pref, const DrawKey& key);

/// Thompson sampling from scalar Gaussian priors on f(z).
std::size_t gaussian_ts_select(const ScalarPosteriorState& state, const DrawKey& key);

}  // namespace mobandit
