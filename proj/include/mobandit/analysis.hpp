#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mobandit/preferences.hpp"

namespace mobandit::analysis {

/// Which multivariate event a concentration fact bounds.
enum class BoundVariant {
  Dominate,        // all coordinates exceed the threshold
  NotDominatedBy,  // at least one coordinate exceeds the threshold
  BallExit,        // at least one coordinate deviates in absolute value
};

enum class Fact { Chernoff, GaussianConcentration, AntiConcentration };

const char* to_string(BoundVariant v);
const char* to_string(Fact f);
BoundVariant variant_from_string(const std::string& s);
Fact fact_from_string(const std::string& s);

struct BoundQuery {
  std::size_t d = 1;
  double sigma = 1.0;
  std::size_t n = 1;         // sample count (Chernoff only)
  double deviation = 0.0;    // a for Chernoff, z for the Gaussian facts
  BoundVariant variant = BoundVariant::BallExit;
};

/// Raised when a theoretical bound's precondition fails.
class PreconditionViolated : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Tail bounds for the mean of n i.i.d. sigma-sub-Gaussian d-vectors, capped at 1:
/// exp(-d n a^2 / 2s^2), d exp(-n a^2 / 2s^2), 2d exp(-n a^2 / 2s^2).
double chernoff_bound(const BoundQuery& q);

/// ((1/4) e^{-z^2/2})^d, (d/4) e^{-z^2/2}, (d/2) e^{-z^2/2}; z >= 1; capped at 1.
double gaussian_concentration_bound(const BoundQuery& q);

/// Lower bound (z e^{-z^2/2} / (sqrt(2 pi)(z^2+1)))^d on Pr[X > mu + z sd]
/// in every coordinate; z >= 1. Only the Dominate variant exists.
double anti_concentration_bound(const BoundQuery& q);

/// Natural log of C(d).
double log_c_of_d(std::size_t d);

/// Threshold C(d) beyond which exp(-sqrt(i) / (18 pi d ln i)^{d/2}) <= d / i^2.
double c_of_d(std::size_t d);

/// Log-space margin of the defining inequality at i = e^x: positive when the
/// inequality holds strictly.
double c_of_d_margin(std::size_t d, double log_i);

/// C(d) + 4d; throws PreconditionViolated when sigma^2 > 1/(4d).
double lemma1_bound(std::size_t d, double sigma);

bool noise_precondition_holds(std::size_t d, double sigma);

struct ArmTerms {
  double gap = 0.0;
  double rho_star = 0.0;
  double rho = 0.0;
  double r = 0.0;
};

struct RegretBoundInput {
  std::vector<ArmTerms> arms;  // suboptimal actions only
  double sigma = 0.0;
  std::size_t d = 1;
  std::uint64_t horizon = 1;

  static RegretBoundInput from(const GapTable& gaps, const RadiusAssignment& radii, double sigma, std::size_t d,
                               std::uint64_t horizon);
};

struct BoundResult {
  double value = 0.0;
  bool precondition_holds = true;
};

/// How the first (optimal-arm) term scales with sigma.
enum class FirstTermForm {
  AsStated,  // (1 + sigma), as printed in the proposition
  Derived,   // (1 + sigma)^2, as produced by the proof of the first term
};

/// max(0, ln(d T gap^2)).
double clamped_log(std::size_t d, std::uint64_t horizon, double gap);

BoundResult prop1_bound(const RegretBoundInput& input, FirstTermForm form = FirstTermForm::AsStated);

BoundResult thm1_bound(const GapTable& gaps, double sigma, std::size_t d, std::uint64_t horizon);

struct Validation {
  double empirical = 0.0;
  double bound = 0.0;
  double std_error = 0.0;
  bool holds = false;
};

/// Simulates the fact's event n_trials times and compares against the bound
/// with a 3-standard-error allowance (upper bounds) or deficit (lower bound).
Validation mc_validate_bound(Fact fact, const BoundQuery& q, std::size_t n_trials, std::uint64_t seed,
                             unsigned threads = 1);

struct BoundGrid {
  std::size_t trials = 100000;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: caller's choice
  std::vector<std::pair<Fact, BoundQuery>> queries;
};

/// {"trials": n, "seed": s, "threads": k, "queries": [{"fact", "variants",
/// "d", "sigma", "n", "deviation"}]}; each list field (or scalar) spans one
/// axis of a cartesian product. Throws ConfigError.
BoundGrid bound_grid_from_json(const nlohmann::json& j);

}  // namespace mobandit::analysis
