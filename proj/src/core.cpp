#include "mobandit/core.hpp"

#include <cmath>
#include <set>

namespace mobandit {

namespace {

void require_same_dimension(const ObjectiveVector& x, const ObjectiveVector& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("dimension mismatch: " + std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()));
  }
}

}  // namespace

ObjectiveVector::ObjectiveVector(std::initializer_list<double> values)
    : ObjectiveVector(std::vector<double>(values)) {}

ObjectiveVector::ObjectiveVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("objective vector must have d >= 1");
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("objective vector has a non-finite coordinate");
  }
}

ActionSet::ActionSet(std::vector<Action> actions) : actions_(std::move(actions)) {
  if (actions_.empty()) throw std::invalid_argument("action set must be nonempty");
  const std::size_t d = actions_.front().mean.size();
  if (d == 0) throw std::invalid_argument("action mean must have d >= 1");
  std::set<std::string> names;
  for (const auto& a : actions_) {
    if (a.mean.size() != d) throw std::invalid_argument("action '" + a.name + "' has mismatched dimension");
    if (!names.insert(a.name).second) throw std::invalid_argument("duplicate action name '" + a.name + "'");
  }
}

Ball::Ball(ObjectiveVector c, double r) : center(std::move(c)), radius(r) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("ball radius must be finite and >= 0");
}

const char* to_string(DominanceRelation r) {
  switch (r) {
    case DominanceRelation::StrictlyDominates: return "strictly_dominates";
    case DominanceRelation::Dominates: return "dominates";
    case DominanceRelation::DominatedBy: return "dominated_by";
    case DominanceRelation::StrictlyDominatedBy: return "strictly_dominated_by";
    case DominanceRelation::Incomparable: return "incomparable";
    case DominanceRelation::Equal: return "equal";
  }
  return "unknown";
}

DominanceRelation compare(const ObjectiveVector& x, const ObjectiveVector& y) {
  require_same_dimension(x, y);
  std::size_t greater = 0;
  std::size_t less = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > y[i]) ++greater;
    else if (x[i] < y[i]) ++less;
  }
  const std::size_t d = x.size();
  if (greater == 0 && less == 0) return DominanceRelation::Equal;
  if (less == 0) return greater == d ? DominanceRelation::StrictlyDominates : DominanceRelation::Dominates;
  if (greater == 0) return less == d ? DominanceRelation::StrictlyDominatedBy : DominanceRelation::DominatedBy;
  return DominanceRelation::Incomparable;
}

bool dominates(const ObjectiveVector& x, const ObjectiveVector& y) {
  const auto r = compare(x, y);
  return r == DominanceRelation::Dominates || r == DominanceRelation::StrictlyDominates;
}

std::vector<std::size_t> pareto_front(const std::vector<ObjectiveVector>& points) {
  if (points.empty()) throw std::invalid_argument("pareto_front of an empty set");
  std::vector<std::size_t> front;
  for (std::size_t a = 0; a < points.size(); ++a) {
    bool dominated = false;
    for (std::size_t b = 0; b < points.size() && !dominated; ++b) {
      dominated = b != a && dominates(points[b], points[a]);
    }
    if (!dominated) front.push_back(a);
  }
  return front;
}

std::vector<std::size_t> pareto_front(const ActionSet& actions) {
  std::vector<ObjectiveVector> means;
  means.reserve(actions.size());
  for (const auto& a : actions) means.push_back(a.mean);
  return pareto_front(means);
}

bool ball_contains(const Ball& b, const ObjectiveVector& x) {
  require_same_dimension(b.center, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(std::abs(x[i] - b.center[i]) < b.radius)) return false;
  }
  return true;
}

ActionSet action_set_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("actions")) throw ConfigError("action set config needs an \"actions\" array");
    std::vector<Action> actions;
    for (const auto& entry : j.at("actions")) {
      actions.push_back(Action{entry.at("name").get<std::string>(),
                               ObjectiveVector(entry.at("mean").get<std::vector<double>>())});
    }
    ActionSet set(std::move(actions));
    if (j.contains("dimension") && j.at("dimension").get<std::size_t>() != set.dimension()) {
      throw ConfigError("declared dimension does not match action means");
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("action set config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("action set config: ") + e.what());
  }
}

nlohmann::json to_json(const ObjectiveVector& x) { return x.values(); }

nlohmann::json to_json(const ActionSet& actions) {
  nlohmann::json out;
  out["dimension"] = actions.dimension();
  out["actions"] = nlohmann::json::array();
  for (const auto& a : actions) out["actions"].push_back({{"name", a.name}, {"mean", a.mean.values()}});
  return out;
}

}  // namespace mobandit
