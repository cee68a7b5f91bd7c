#include "mobandit/preferences.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mobandit {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Margin by which the optimal infimum must beat the suboptimal supremum.
// Keeps exact-equality cases (gap == rho_star + rho_a) uncertified despite
// rounding in the corner arithmetic.
constexpr double kCertifyMargin = 1e-12;

void validate_weights(const std::vector<double>& w) {
  if (w.empty()) throw std::invalid_argument("preference weights must be nonempty");
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("preference weights must lie in [0,1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("preference weights must sum to 1");
}

void require_dimension(const PreferenceSpec& pref, const ObjectiveVector& x) {
  if (x.size() != pref.dimension()) {
    throw std::invalid_argument("preference expects dimension " + std::to_string(pref.dimension()) + ", got " +
                                std::to_string(x.size()));
  }
}

bool constraints_hold(const EpsilonConstraint& e, const ObjectiveVector& x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i != e.target && x[i] < e.epsilons[i]) return false;
  }
  return true;
}

ObjectiveVector shifted(const ObjectiveVector& x, double delta, double floor) {
  std::vector<double> v(x.values());
  for (double& c : v) c = std::max(c + delta, floor);
  return ObjectiveVector(std::move(v));
}

}  // namespace

PreferenceSpec PreferenceSpec::linear(std::vector<double> weights) {
  validate_weights(weights);
  return PreferenceSpec(LinearScalarization{std::move(weights)});
}

PreferenceSpec PreferenceSpec::chebyshev(std::vector<double> weights) {
  validate_weights(weights);
  return PreferenceSpec(ChebyshevScalarization{std::move(weights)});
}

PreferenceSpec PreferenceSpec::weighted_lp(std::vector<double> weights, double p) {
  validate_weights(weights);
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("weighted L_p exponent must satisfy p >= 1");
  return PreferenceSpec(WeightedLpScalarization{std::move(weights), p});
}

PreferenceSpec PreferenceSpec::epsilon_constraint(std::size_t target, std::vector<double> epsilons) {
  if (epsilons.empty()) throw std::invalid_argument("epsilon-constraint needs d >= 1");
  if (target >= epsilons.size()) throw std::invalid_argument("epsilon-constraint target out of range");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (i == target) {
      epsilons[i] = 0.0;
      continue;
    }
    if (!(epsilons[i] >= 0.0 && epsilons[i] <= 1.0)) throw std::invalid_argument("epsilons must lie in [0,1]");
  }
  return PreferenceSpec(EpsilonConstraint{target, std::move(epsilons)});
}

PreferenceKind PreferenceSpec::kind() const {
  return std::visit(overloaded{
                        [](const LinearScalarization&) { return PreferenceKind::Linear; },
                        [](const ChebyshevScalarization&) { return PreferenceKind::Chebyshev; },
                        [](const WeightedLpScalarization&) { return PreferenceKind::WeightedLp; },
                        [](const EpsilonConstraint&) { return PreferenceKind::EpsilonConstraint; },
                    },
                    params_);
}

std::size_t PreferenceSpec::dimension() const {
  return std::visit(overloaded{
                        [](const EpsilonConstraint& e) { return e.epsilons.size(); },
                        [](const auto& w) { return w.weights.size(); },
                    },
                    params_);
}

const std::vector<double>& PreferenceSpec::weights() const {
  return std::visit(overloaded{
                        [](const EpsilonConstraint&) -> const std::vector<double>& {
                          throw std::logic_error("epsilon-constraint preference has no weights");
                        },
                        [](const auto& w) -> const std::vector<double>& { return w.weights; },
                    },
                    params_);
}

double evaluate(const PreferenceSpec& pref, const ObjectiveVector& x) {
  require_dimension(pref, x);
  return std::visit(
      overloaded{
          [&](const LinearScalarization& s) {
            double v = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) v += s.weights[i] * x[i];
            return v;
          },
          [&](const ChebyshevScalarization& s) {
            double v = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < x.size(); ++i) v = std::max(v, s.weights[i] * x[i]);
            return v;
          },
          [&](const WeightedLpScalarization& s) {
            double acc = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
              if (x[i] < 0.0) throw std::domain_error("weighted L_p is undefined for negative coordinates");
              acc += s.weights[i] * (s.p == 1.0 ? x[i] : std::pow(x[i], s.p));
            }
            return s.p == 1.0 ? acc : std::pow(acc, 1.0 / s.p);
          },
          [&](const EpsilonConstraint& e) { return constraints_hold(e, x) ? x[e.target] : 0.0; },
      },
      pref.params());
}

GapTable gap_table(const PreferenceSpec& pref, const ActionSet& actions) {
  GapTable table;
  table.values.reserve(actions.size());
  for (const auto& a : actions) table.values.push_back(evaluate(pref, a.mean));
  const double best = *std::max_element(table.values.begin(), table.values.end());
  for (std::size_t a = 0; a < actions.size(); ++a) {
    table.gaps.push_back(best - table.values[a]);
    if (table.values[a] == best) table.optimal.push_back(a);
  }
  table.star = table.optimal.front();
  return table;
}

RadiusAssignment theorem_radii(const GapTable& gaps) {
  RadiusAssignment out;
  bool any = false;
  for (double g : gaps.gaps) {
    ActionRadii r;
    if (g > 0.0) {
      r = ActionRadii{g / 2.0, g / 2.0, g / 6.0, true};
      any = true;
    }
    out.radii.push_back(r);
  }
  if (!any) throw std::invalid_argument("theorem_radii: every action is optimal, no suboptimal gap to split");
  return out;
}

std::pair<double, double> preference_range(const PreferenceSpec& pref, const ObjectiveVector& center, double rho) {
  require_dimension(pref, center);
  if (!(rho >= 0.0)) throw std::invalid_argument("radius must be >= 0");
  if (rho == 0.0) {
    const double v = evaluate(pref, center);
    return {v, v};
  }
  if (const auto* e = std::get_if<EpsilonConstraint>(&pref.params())) {
    // Split the ball into its feasible part (all constraints met) and the rest.
    bool feasible_part = true;
    bool infeasible_part = false;
    for (std::size_t i = 0; i < center.size(); ++i) {
      if (i == e->target) continue;
      if (!(center[i] + rho > e->epsilons[i])) feasible_part = false;
      if (center[i] - rho < e->epsilons[i]) infeasible_part = true;
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    if (feasible_part) {
      lo = center[e->target] - rho;
      hi = center[e->target] + rho;
    }
    if (infeasible_part) {
      lo = std::min(lo, 0.0);
      hi = std::max(hi, 0.0);
    }
    return {lo, hi};
  }
  // Remaining families are nondecreasing in every coordinate: extrema sit at
  // the corners. L_p is only defined on the nonnegative orthant.
  const double floor = pref.kind() == PreferenceKind::WeightedLp ? 0.0 : -std::numeric_limits<double>::infinity();
  return {evaluate(pref, shifted(center, -rho, floor)), evaluate(pref, shifted(center, rho, floor))};
}

bool certify_radii(const PreferenceSpec& pref, const ActionSet& actions, const RadiusAssignment& radii) {
  if (radii.radii.size() != actions.size()) throw std::invalid_argument("radius assignment does not cover all actions");
  const GapTable table = gap_table(pref, actions);
  for (std::size_t a = 0; a < actions.size(); ++a) {
    if (table.is_optimal(a)) continue;
    const auto& r = radii.radii[a];
    const double star_inf = preference_range(pref, actions.mean(table.star), r.rho_star).first;
    const double action_sup = preference_range(pref, actions.mean(a), r.rho).second;
    if (!(star_inf - action_sup > kCertifyMargin)) return false;
  }
  return true;
}

ChebyshevThresholds chebyshev_thresholds(const ActionSet& actions, const PreferenceSpec& pref, std::size_t star,
                                         std::size_t a) {
  if (pref.kind() != PreferenceKind::Chebyshev) throw std::invalid_argument("chebyshev_thresholds needs a Chebyshev preference");
  if (actions.dimension() != 2 || pref.dimension() != 2) {
    throw std::invalid_argument("chebyshev_thresholds is defined for two objectives only");
  }
  const auto& w = pref.weights();
  const double denom = w[1] - w[0];
  if (denom == 0.0) throw std::invalid_argument("chebyshev_thresholds undefined for equal weights");
  const auto& ms = actions.mean(star);
  const auto& ma = actions.mean(a);
  return ChebyshevThresholds{(w[1] * ms[1] - w[0] * ms[0]) / denom, (w[0] * ma[0] - w[1] * ma[1]) / denom};
}

EpsilonRadiusDecomposition epsilon_decomposition(const PreferenceSpec& pref, const ObjectiveVector& mean, double rho) {
  const auto* e = std::get_if<EpsilonConstraint>(&pref.params());
  if (e == nullptr) throw std::invalid_argument("epsilon_decomposition needs an epsilon-constraint preference");
  require_dimension(pref, mean);
  if (!(rho >= 0.0)) throw std::invalid_argument("radius must be >= 0");
  double shortfall = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (i != e->target) shortfall = std::max(shortfall, e->epsilons[i] - mean[i]);
  }
  const double under = std::min(shortfall, rho);
  return EpsilonRadiusDecomposition{under, rho - under};
}

PreferenceSpec preference_from_json(const nlohmann::json& j, std::size_t dimension) {
  try {
    const auto type = j.at("type").get<std::string>();
    PreferenceSpec spec = [&] {
      if (type == "linear") return PreferenceSpec::linear(j.at("weights").get<std::vector<double>>());
      if (type == "chebyshev") return PreferenceSpec::chebyshev(j.at("weights").get<std::vector<double>>());
      if (type == "weighted_lp") {
        return PreferenceSpec::weighted_lp(j.at("weights").get<std::vector<double>>(), j.at("p").get<double>());
      }
      if (type == "epsilon_constraint") {
        const auto target = j.at("target").get<std::size_t>();
        if (target < 1 || target > dimension) throw ConfigError("epsilon-constraint target must be in 1..d");
        std::vector<double> eps(dimension, 0.0);
        for (const auto& [key, value] : j.at("epsilons").items()) {
          const std::size_t idx = std::stoul(key);
          if (idx < 1 || idx > dimension || idx == target) throw ConfigError("bad epsilon index " + key);
          eps[idx - 1] = value.get<double>();
        }
        return PreferenceSpec::epsilon_constraint(target - 1, std::move(eps));
      }
      throw ConfigError("unknown preference type '" + type + "'");
    }();
    if (spec.dimension() != dimension) throw ConfigError("preference dimension does not match the environment");
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("preference config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("preference config: ") + e.what());
  }
}

nlohmann::json to_json(const PreferenceSpec& pref) {
  return std::visit(overloaded{
                        [](const LinearScalarization& s) -> nlohmann::json {
                          return {{"type", "linear"}, {"weights", s.weights}};
                        },
                        [](const ChebyshevScalarization& s) -> nlohmann::json {
                          return {{"type", "chebyshev"}, {"weights", s.weights}};
                        },
                        [](const WeightedLpScalarization& s) -> nlohmann::json {
                          return {{"type", "weighted_lp"}, {"weights", s.weights}, {"p", s.p}};
                        },
                        [](const EpsilonConstraint& e) -> nlohmann::json {
                          nlohmann::json eps = nlohmann::json::object();
                          for (std::size_t i = 0; i < e.epsilons.size(); ++i) {
                            if (i != e.target) eps[std::to_string(i + 1)] = e.epsilons[i];
                          }
                          return {{"type", "epsilon_constraint"}, {"target", e.target + 1}, {"epsilons", eps}};
                        },
                    },
                    pref.params());
}

}  // namespace mobandit
