#include "mobandit/environments.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mobandit {

namespace {

constexpr double kSymmetryTolerance = 1e-10;
constexpr double kEigenTolerance = 1e-10;

void validate_means_in_unit_cube(const ActionSet& actions) {
  for (const auto& a : actions) {
    for (double v : a.mean) {
      if (v < 0.0 || v > 1.0) throw std::invalid_argument("action '" + a.name + "' mean leaves [0,1]");
    }
  }
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != static_cast<std::size_t>(m.cols())) throw ConfigError("ragged covariance matrix");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (Eigen::Index k = 0; k < m.cols(); ++k) row[k] = m(i, k);
    out.push_back(row);
  }
  return out;
}

}  // namespace

Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument("covariance must be square");
  if (!cov.allFinite()) throw std::invalid_argument("covariance has non-finite entries");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
    throw std::invalid_argument("covariance must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd values = eig.eigenvalues();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < -kEigenTolerance) throw std::invalid_argument("covariance is not positive semi-definite");
    values(i) = std::sqrt(std::max(values(i), 0.0));
  }
  return eig.eigenvectors() * values.asDiagonal();
}

EnvironmentSpec EnvironmentSpec::mvn(ActionSet actions, const Eigen::MatrixXd& shared_covariance) {
  return mvn(std::move(actions), std::vector<Eigen::MatrixXd>{shared_covariance});
}

EnvironmentSpec EnvironmentSpec::mvn(ActionSet actions, const std::vector<Eigen::MatrixXd>& covariances) {
  validate_means_in_unit_cube(actions);
  if (covariances.size() != 1 && covariances.size() != actions.size()) {
    throw std::invalid_argument("need one shared covariance or one per action");
  }
  MvnNoise noise;
  for (const auto& cov : covariances) {
    if (static_cast<std::size_t>(cov.rows()) != actions.dimension()) {
      throw std::invalid_argument("covariance dimension does not match the action means");
    }
    noise.covariances.push_back(cov);
    noise.factors.push_back(covariance_factor(cov));
  }
  return EnvironmentSpec(std::move(actions), std::move(noise));
}

EnvironmentSpec EnvironmentSpec::multi_bernoulli(ActionSet actions) {
  validate_means_in_unit_cube(actions);
  return EnvironmentSpec(std::move(actions), MultiBernoulliNoise{});
}

rng::Cell NoiseStream::cell(std::uint64_t episode) const {
  return rng::Cell{seed, rng::Domain::Environment, repetition, static_cast<std::uint32_t>(episode), 0};
}

Observation sample_outcome(const EnvironmentSpec& env, std::size_t action, const NoiseStream& stream,
                           std::uint64_t episode) {
  if (action >= env.actions().size()) throw std::out_of_range("action index out of range");
  if (episode < 1) throw std::invalid_argument("episodes are numbered from 1");
  const std::size_t d = env.dimension();
  const auto& mean = env.actions().mean(action);
  rng::CellStream draws(stream.cell(episode));
  std::vector<double> z(d);
  if (const auto* mvn = std::get_if<MvnNoise>(&env.noise())) {
    Eigen::VectorXd eta(d);
    for (std::size_t i = 0; i < d; ++i) eta(i) = draws.normal();
    const Eigen::VectorXd xi = mvn->factor_for(action) * eta;
    for (std::size_t i = 0; i < d; ++i) z[i] = mean[i] + xi(i);
  } else {
    for (std::size_t i = 0; i < d; ++i) z[i] = draws.uniform() < mean[i] ? 1.0 : 0.0;
  }
  return Observation{ObjectiveVector(std::move(z)), episode, action};
}

ScalarizedExpectation monte_carlo_scalarized(const EnvironmentSpec& env, const PreferenceSpec& pref,
                                             std::size_t action, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  // Reuse the environment's sampler on a dedicated stream so that draws are
  // reproducible and independent of any experiment stream.
  const NoiseStream stream{seed ^ 0x5eed'e1ec'7a7e'd000ULL, 0xFFFFFFFFu};
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double v = evaluate(pref, sample_outcome(env, action, stream, k + 1).values);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)) : 0.0;
  return ScalarizedExpectation{mean, std::sqrt(var / n), false};
}

ScalarizedExpectation expected_scalarized(const EnvironmentSpec& env, const PreferenceSpec& pref, std::size_t action,
                                          std::size_t n_samples, std::uint64_t seed) {
  if (action >= env.actions().size()) throw std::out_of_range("action index out of range");
  const auto& mean = env.actions().mean(action);
  if (pref.kind() == PreferenceKind::Linear) return ScalarizedExpectation{evaluate(pref, mean), 0.0, true};
  if (const auto* e = std::get_if<EpsilonConstraint>(&pref.params()); e && env.is_multi_bernoulli()) {
    // z_i in {0,1} independently: constraint i holds w.p. 1 (eps_i <= 0),
    // mu_i (0 < eps_i <= 1); the target contributes E[z_l] = mu_l.
    double value = mean[e->target];
    for (std::size_t i = 0; i < mean.size(); ++i) {
      if (i == e->target) continue;
      if (e->epsilons[i] > 1.0) value = 0.0;
      else if (e->epsilons[i] > 0.0) value *= mean[i];
    }
    return ScalarizedExpectation{value, 0.0, true};
  }
  return monte_carlo_scalarized(env, pref, action, n_samples, seed);
}

EnvironmentSpec environment_from_json(const nlohmann::json& j) {
  ActionSet actions = action_set_from_json(j);
  try {
    const auto& noise = j.at("noise");
    const auto type = noise.at("type").get<std::string>();
    if (type == "multi_bernoulli") return EnvironmentSpec::multi_bernoulli(std::move(actions));
    if (type != "mvn") throw ConfigError("unknown noise type '" + type + "'");
    if (noise.contains("per_action_covariance")) {
      std::vector<Eigen::MatrixXd> covs;
      for (const auto& c : noise.at("per_action_covariance")) covs.push_back(matrix_from_json(c));
      return EnvironmentSpec::mvn(std::move(actions), covs);
    }
    return EnvironmentSpec::mvn(std::move(actions), matrix_from_json(noise.at("covariance")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("environment config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("environment config: ") + e.what());
  }
}

nlohmann::json to_json(const EnvironmentSpec& env) {
  nlohmann::json out = to_json(env.actions());
  if (const auto* mvn = std::get_if<MvnNoise>(&env.noise())) {
    out["noise"] = {{"type", "mvn"}};
    if (mvn->covariances.size() == 1) {
      out["noise"]["covariance"] = matrix_to_json(mvn->covariances.front());
    } else {
      out["noise"]["per_action_covariance"] = nlohmann::json::array();
      for (const auto& c : mvn->covariances) out["noise"]["per_action_covariance"].push_back(matrix_to_json(c));
    }
  } else {
    out["noise"] = {{"type", "multi_bernoulli"}};
  }
  return out;
}

}  // namespace mobandit
