#pragma once

#include <cstddef>
#include <utility>
#include <variant>
#include <vector>

#include "mobandit/core.hpp"

namespace mobandit {

struct LinearScalarization {
  std::vector<double> weights;
};

struct ChebyshevScalarization {
  std::vector<double> weights;
};

struct WeightedLpScalarization {
  std::vector<double> weights;
  double p = 1.0;
};

/// Value x_target when x_i >= epsilons[i] for every i != target, else 0.
/// `target` is zero-based; epsilons[target] is unused.
struct EpsilonConstraint {
  std::size_t target = 0;
  std::vector<double> epsilons;
};

enum class PreferenceKind { Linear, Chebyshev, WeightedLp, EpsilonConstraint };

/// A validated scalarization function over the objective space.
class PreferenceSpec {
 public:
  using Variant =
      std::variant<LinearScalarization, ChebyshevScalarization, WeightedLpScalarization, EpsilonConstraint>;

  static PreferenceSpec linear(std::vector<double> weights);
  static PreferenceSpec chebyshev(std::vector<double> weights);
  static PreferenceSpec weighted_lp(std::vector<double> weights, double p);
  /// `target` is zero-based.
  static PreferenceSpec epsilon_constraint(std::size_t target, std::vector<double> epsilons);

  PreferenceKind kind() const;
  std::size_t dimension() const;
  const Variant& params() const { return params_; }

  /// Weights for the weighted families; throws for epsilon-constraint.
  const std::vector<double>& weights() const;

 private:
  explicit PreferenceSpec(Variant v) : params_(std::move(v)) {}
  Variant params_;
};

double evaluate(const PreferenceSpec& pref, const ObjectiveVector& x);

struct GapTable {
  std::vector<double> values;         // f(mu_a)
  std::vector<double> gaps;           // max_b f(mu_b) - f(mu_a)
  std::vector<std::size_t> optimal;   // full argmax set, ascending
  std::size_t star = 0;               // lowest-index member of `optimal`

  bool is_optimal(std::size_t a) const { return gaps[a] == 0.0; }
};

GapTable gap_table(const PreferenceSpec& pref, const ActionSet& actions);

/// Radii for one action. For suboptimal actions `rho_star` is the radius
/// granted to the optimal action when it is compared against this one.
struct ActionRadii {
  double rho_star = 0.0;
  double rho = 0.0;
  double r = 0.0;
  bool suboptimal = false;
};

struct RadiusAssignment {
  std::vector<ActionRadii> radii;
};

/// rho_star = rho_a = gap/2 and r_a = gap/6 for every suboptimal action.
RadiusAssignment theorem_radii(const GapTable& gaps);

/// True when, for every suboptimal action a, the infimum of the preference
/// over B(mu_star, rho_star) exceeds its supremum over B(mu_a, rho_a).
bool certify_radii(const PreferenceSpec& pref, const ActionSet& actions, const RadiusAssignment& radii);

/// Infimum and supremum of the preference over the open ball B(center, rho).
/// A zero radius is read as the single point {center}.
std::pair<double, double> preference_range(const PreferenceSpec& pref, const ObjectiveVector& center, double rho);

struct ChebyshevThresholds {
  double tau_star = 0.0;
  double tau_a = 0.0;

  /// Active coordinate (zero-based) at the optimal action's lower corner.
  std::size_t star_index(double rho_star) const { return rho_star > tau_star ? 0 : 1; }
  /// Active coordinate (zero-based) at the suboptimal action's corner.
  std::size_t action_index(double rho_a) const { return rho_a < tau_a ? 0 : 1; }
};

/// Two-objective Chebyshev switching thresholds for the pair (star, a).
ChebyshevThresholds chebyshev_thresholds(const ActionSet& actions, const PreferenceSpec& pref,
                                         std::size_t star, std::size_t a);

struct EpsilonRadiusDecomposition {
  double rho_under = 0.0;  // radius needed to reach the constraint region
  double rho_over = 0.0;   // leftover radius that reduces the gap

  double total() const { return rho_under + rho_over; }
};

EpsilonRadiusDecomposition epsilon_decomposition(const PreferenceSpec& pref, const ObjectiveVector& mean,
                                                 double rho);

// JSON: {"type": "linear"|"chebyshev"|"weighted_lp"|"epsilon_constraint",
//        "weights": [..], "p": .., "target": l (1-based), "epsilons": {"i": eps_i}}
PreferenceSpec preference_from_json(const nlohmann::json& j, std::size_t dimension);
nlohmann::json to_json(const PreferenceSpec& pref);

}  // namespace mobandit
