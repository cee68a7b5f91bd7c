#include "mobandit/policies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mobandit {

namespace {

constexpr std::uint32_t kTieLane = (1u << 24) - 1;

// Posterior draw for one coordinate: sum/(N+1) + eta/sqrt(N+1). Shared by the
// vector and scalar samplers so that d = 1 runs coincide bit for bit.
inline double posterior_draw(double sum, std::size_t count, double eta) {
  const double n1 = static_cast<double>(count) + 1.0;
  return sum / n1 + eta / std::sqrt(n1);
}

}  // namespace

double sampled_preference(const PreferenceSpec& pref, const ObjectiveVector& x) {
  if (pref.kind() != PreferenceKind::WeightedLp) return evaluate(pref, x);
  std::vector<double> clipped(x.values());
  for (auto& v : clipped) v = std::max(v, 0.0);
  return evaluate(pref, ObjectiveVector(std::move(clipped)));
}

PosteriorState::PosteriorState(std::size_t n_actions, std::size_t dimension) : dimension_(dimension) {
  if (n_actions == 0 || dimension == 0) throw std::invalid_argument("posterior state needs N >= 1 and d >= 1");
  stats_.assign(n_actions, ActionStats{0, Eigen::VectorXd::Zero(dimension), Eigen::MatrixXd::Zero(dimension, dimension)});
}

void PosteriorState::update(std::size_t action, const ObjectiveVector& z) {
  if (z.size() != dimension_) throw std::invalid_argument("observation dimension mismatch");
  auto& s = stats_.at(action);
  const Eigen::Map<const Eigen::VectorXd> v(z.values().data(), static_cast<Eigen::Index>(dimension_));
  ++s.count;
  s.sum += v;
  s.outer += v * v.transpose();
}

ObjectiveVector PosteriorState::empirical_mean(std::size_t action) const {
  const auto& s = stats_.at(action);
  if (s.count == 0) throw std::logic_error("empirical mean undefined for an unplayed action");
  std::vector<double> m(dimension_);
  for (std::size_t i = 0; i < dimension_; ++i) m[i] = s.sum(i) / static_cast<double>(s.count);
  return ObjectiveVector(std::move(m));
}

ScalarPosteriorState::ScalarPosteriorState(std::size_t n_actions) : counts_(n_actions, 0), sums_(n_actions, 0.0) {
  if (n_actions == 0) throw std::invalid_argument("posterior state needs N >= 1");
}

void ScalarPosteriorState::update(std::size_t action, double reward) {
  ++counts_.at(action);
  sums_.at(action) += reward;
}

GaussianPrior GaussianPrior::non_informative(std::size_t dimension) {
  const auto d = static_cast<Eigen::Index>(dimension);
  return GaussianPrior{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Identity(d, d)};
}

Posterior posterior_params(const PosteriorState& state, std::size_t action) {
  const auto& s = state.stats(action);
  const double n1 = static_cast<double>(s.count) + 1.0;
  const auto d = static_cast<Eigen::Index>(state.dimension());
  // N/(N+1) * (sum/N) == sum/(N+1), and is zero at N = 0.
  return Posterior{s.sum / n1, Eigen::MatrixXd::Identity(d, d) / n1};
}

Posterior posterior_params(const PosteriorState& state, std::size_t action, const GaussianPrior& prior) {
  const auto& s = state.stats(action);
  const auto d = static_cast<Eigen::Index>(state.dimension());
  if (prior.mean.size() != d || prior.covariance.rows() != d || prior.noise_covariance.rows() != d) {
    throw std::invalid_argument("prior dimension mismatch");
  }
  const Eigen::MatrixXd prior_precision = prior.covariance.inverse();
  const Eigen::MatrixXd noise_precision = prior.noise_covariance.inverse();
  const double n = static_cast<double>(s.count);
  const Eigen::MatrixXd cov = (prior_precision + n * noise_precision).inverse();
  // N * mu_hat == sum of observations.
  const Eigen::VectorXd mean = cov * (prior_precision * prior.mean + noise_precision * s.sum);
  return Posterior{mean, cov};
}

Eigen::MatrixXd empirical_covariance(const PosteriorState& state, std::size_t action) {
  const auto& s = state.stats(action);
  if (s.count < 2) throw std::invalid_argument("empirical covariance needs at least two observations");
  const double n = static_cast<double>(s.count);
  const Eigen::VectorXd mu = s.sum / n;
  return (s.outer - n * mu * mu.transpose()) / (n - 1.0);
}

rng::Cell DrawKey::action_cell(std::size_t action) const {
  if (action >= kTieLane) throw std::out_of_range("too many actions for the draw layout");
  return rng::Cell{seed, rng::Domain::Policy, repetition, static_cast<std::uint32_t>(episode),
                   static_cast<std::uint32_t>(action)};
}

rng::Cell DrawKey::tie_cell() const {
  return rng::Cell{seed, rng::Domain::Policy, repetition, static_cast<std::uint32_t>(episode), kTieLane};
}

std::vector<ObjectiveVector> sample_thetas(const PosteriorState& state, const DrawKey& key) {
  std::vector<ObjectiveVector> thetas;
  thetas.reserve(state.n_actions());
  for (std::size_t a = 0; a < state.n_actions(); ++a) {
    const auto& s = state.stats(a);
    rng::CellStream draws(key.action_cell(a));
    std::vector<double> theta(state.dimension());
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = posterior_draw(s.sum(i), s.count, draws.normal());
    thetas.emplace_back(std::move(theta));
  }
  return thetas;
}

std::vector<std::size_t> argmax_set(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty set");
  const double best = *std::max_element(values.begin(), values.end());
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < values.size(); ++a) {
    if (values[a] == best) out.push_back(a);
  }
  return out;
}

std::size_t pick_uniform(const std::vector<std::size_t>& candidates, const DrawKey& key) {
  if (candidates.empty()) throw std::invalid_argument("no candidate to pick from");
  if (candidates.size() == 1) return candidates.front();
  rng::CellStream draws(key.tie_cell());
  const auto k = static_cast<std::size_t>(draws.uniform() * static_cast<double>(candidates.size()));
  return candidates[std::min(k, candidates.size() - 1)];
}

Selection choose_preferred(std::vector<ObjectiveVector> thetas, const PreferenceSpec& pref, const DrawKey& key) {
  Selection sel;
  sel.estimate.values.reserve(thetas.size());
  for (const auto& t : thetas) sel.estimate.values.push_back(sampled_preference(pref, t));
  sel.estimate.thetas = std::move(thetas);
  sel.estimate.optimal = argmax_set(sel.estimate.values);
  sel.action = pick_uniform(sel.estimate.optimal, key);
  return sel;
}

Selection mvn_ts_select(const PosteriorState& state, const PreferenceSpec& pref, const DrawKey& key) {
  if (pref.dimension() != state.dimension()) throw std::invalid_argument("preference dimension mismatch");
  return choose_preferred(sample_thetas(state, key), pref, key);
}

std::size_t gaussian_ts_select(const ScalarPosteriorState& state, const DrawKey& key) {
  std::vector<double> thetas(state.n_actions());
  for (std::size_t a = 0; a < thetas.size(); ++a) {
    rng::CellStream draws(key.action_cell(a));
    thetas[a] = posterior_draw(state.sum(a), state.count(a), draws.normal());
  }
  return pick_uniform(argmax_set(thetas), key);
}

}  // namespace mobandit
