#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace mobandit {

/// Raised for malformed or invalid configuration input. The CLI maps it to
/// exit code 2 and the elicitation service to a 400 response.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point of the objective space. Coordinates are finite but not restricted
/// to [0,1]: estimates and samples routinely leave the unit cube.
class ObjectiveVector {
 public:
  ObjectiveVector() = default;
  ObjectiveVector(std::initializer_list<double> values);
  explicit ObjectiveVector(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;

 private:
  std::vector<double> values_;
};

struct Action {
  std::string name;
  ObjectiveVector mean;
};

/// Finite, nonempty set of named actions sharing one objective dimension.
class ActionSet {
 public:
  explicit ActionSet(std::vector<Action> actions);

  std::size_t size() const { return actions_.size(); }
  std::size_t dimension() const { return actions_.front().mean.size(); }
  const Action& operator[](std::size_t i) const { return actions_.at(i); }
  const ObjectiveVector& mean(std::size_t i) const { return actions_.at(i).mean; }
  auto begin() const { return actions_.begin(); }
  auto end() const { return actions_.end(); }

 private:
  std::vector<Action> actions_;
};

/// Open hypercube {x : |x_i - c_i| < r for all i}.
struct Ball {
  ObjectiveVector center;
  double radius = 0.0;

  Ball(ObjectiveVector c, double r);
};

enum class DominanceRelation {
  StrictlyDominates,
  Dominates,
  DominatedBy,
  StrictlyDominatedBy,
  Incomparable,
  Equal,
};

const char* to_string(DominanceRelation r);

/// Pareto relation of x with respect to y. "Dominates" means x_i >= y_i
/// everywhere with at least one strict coordinate (but not all strict).
DominanceRelation compare(const ObjectiveVector& x, const ObjectiveVector& y);

/// x dominates y, strictly or not.
bool dominates(const ObjectiveVector& x, const ObjectiveVector& y);

/// Indices of actions whose mean is dominated by no other mean, ascending.
std::vector<std::size_t> pareto_front(const ActionSet& actions);
std::vector<std::size_t> pareto_front(const std::vector<ObjectiveVector>& points);

bool ball_contains(const Ball& b, const ObjectiveVector& x);

// JSON: {"dimension": d, "actions": [{"name": str, "mean": [..]}]}
ActionSet action_set_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ActionSet& actions);
nlohmann::json to_json(const ObjectiveVector& x);

}  // namespace mobandit
