#include "mobandit/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "mobandit/rng.hpp"

namespace mobandit::analysis {

namespace {

void validate_query(const BoundQuery& q) {
  if (q.d < 1) throw std::invalid_argument("bound query needs d >= 1");
  if (!(q.sigma > 0.0)) throw std::invalid_argument("bound query needs sigma > 0");
  if (q.n < 1) throw std::invalid_argument("bound query needs n >= 1");
  if (!(q.deviation >= 0.0)) throw std::invalid_argument("bound query needs a nonnegative deviation");
}

void require_z_at_least_one(const BoundQuery& q) {
  if (!(q.deviation >= 1.0)) throw std::invalid_argument("Gaussian (anti-)concentration needs z >= 1");
}

double capped(double p) { return std::min(p, 1.0); }

// Constants the literature provides for small d, as natural logs.
constexpr std::array<double, 3> kKnownLogC = {14.0, 24.0, 35.0};
constexpr int kTailProbes = 10;

double margin_slope(std::size_t d, double x) {
  const double dd = static_cast<double>(d);
  return 0.5 - dd / (2.0 * x) - 2.0 / (2.0 * x - std::log(dd));
}

double domain_start(std::size_t d) { return std::max(0.0, std::log(static_cast<double>(d)) / 2.0); }

// Probes at x * 2^{k/2}, k = 1..10, i.e. log-spaced in log i.
bool tail_verified(std::size_t d, double x) {
  if (!(c_of_d_margin(d, x) >= 0.0) || !(margin_slope(d, x) > 0.0)) return false;
  for (int k = 1; k <= kTailProbes; ++k) {
    if (!(c_of_d_margin(d, x * std::pow(2.0, k / 2.0)) >= 0.0)) return false;
  }
  return true;
}

double solve_log_c(std::size_t d) {
  // The margin is convex on its domain and diverges to +inf at both ends, so
  // the threshold is its larger root: find the minimiser, then bisect right.
  double lo = domain_start(d) + 1e-9;
  double hi = lo + 1.0;
  while (margin_slope(d, hi) <= 0.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (margin_slope(d, mid) > 0.0 ? hi : lo) = mid;
  }
  const double minimiser = hi;
  if (c_of_d_margin(d, minimiser) >= 0.0) return domain_start(d);
  lo = minimiser;
  hi = minimiser * 2.0;
  while (c_of_d_margin(d, hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (c_of_d_margin(d, mid) >= 0.0 ? hi : lo) = mid;
  }
  return hi;
}

bool event_occurs(Fact fact, const BoundQuery& q, rng::CellStream& draws) {
  // Deviations are measured in units of the relevant standard deviation:
  // sigma/sqrt(n) for the sample mean, sigma for a single Gaussian draw.
  const double scale = fact == Fact::Chernoff ? q.sigma / std::sqrt(static_cast<double>(q.n)) : q.sigma;
  const double threshold = fact == Fact::Chernoff ? q.deviation : q.deviation * q.sigma;
  const bool strict = fact != Fact::Chernoff;
  bool all = true;
  bool any = false;
  for (std::size_t i = 0; i < q.d; ++i) {
    const double x = scale * draws.normal();
    bool hit = false;
    switch (q.variant) {
      case BoundVariant::Dominate: hit = strict ? x > threshold : x >= threshold; break;
      case BoundVariant::NotDominatedBy: hit = x >= threshold; break;
      case BoundVariant::BallExit: hit = std::abs(x) >= threshold; break;
    }
    all = all && hit;
    any = any || hit;
  }
  return q.variant == BoundVariant::Dominate ? all : any;
}

}  // namespace

const char* to_string(BoundVariant v) {
  switch (v) {
    case BoundVariant::Dominate: return "dominate";
    case BoundVariant::NotDominatedBy: return "not_dominated_by";
    case BoundVariant::BallExit: return "ball_exit";
  }
  return "unknown";
}

const char* to_string(Fact f) {
  switch (f) {
    case Fact::Chernoff: return "chernoff";
    case Fact::GaussianConcentration: return "concentration";
    case Fact::AntiConcentration: return "anti_concentration";
  }
  return "unknown";
}

BoundVariant variant_from_string(const std::string& s) {
  if (s == "dominate") return BoundVariant::Dominate;
  if (s == "not_dominated_by") return BoundVariant::NotDominatedBy;
  if (s == "ball_exit") return BoundVariant::BallExit;
  throw std::invalid_argument("unknown bound variant '" + s + "'");
}

Fact fact_from_string(const std::string& s) {
  if (s == "chernoff") return Fact::Chernoff;
  if (s == "concentration") return Fact::GaussianConcentration;
  if (s == "anti_concentration") return Fact::AntiConcentration;
  throw std::invalid_argument("unknown fact '" + s + "'");
}

double chernoff_bound(const BoundQuery& q) {
  validate_query(q);
  const double d = static_cast<double>(q.d);
  const double exponent = -static_cast<double>(q.n) * q.deviation * q.deviation / (2.0 * q.sigma * q.sigma);
  switch (q.variant) {
    case BoundVariant::Dominate: return capped(std::exp(d * exponent));
    case BoundVariant::NotDominatedBy: return capped(d * std::exp(exponent));
    case BoundVariant::BallExit: return capped(2.0 * d * std::exp(exponent));
  }
  throw std::invalid_argument("invalid bound variant");
}

double gaussian_concentration_bound(const BoundQuery& q) {
  validate_query(q);
  require_z_at_least_one(q);
  const double d = static_cast<double>(q.d);
  const double tail = std::exp(-q.deviation * q.deviation / 2.0);
  switch (q.variant) {
    case BoundVariant::Dominate: return capped(std::pow(0.25 * tail, d));
    case BoundVariant::NotDominatedBy: return capped(d / 4.0 * tail);
    case BoundVariant::BallExit: return capped(d / 2.0 * tail);
  }
  throw std::invalid_argument("invalid bound variant");
}

double anti_concentration_bound(const BoundQuery& q) {
  validate_query(q);
  require_z_at_least_one(q);
  if (q.variant != BoundVariant::Dominate) throw std::invalid_argument("anti-concentration only bounds the dominate event");
  const double z = q.deviation;
  const double one_dim = z / (std::sqrt(2.0 * std::numbers::pi) * (z * z + 1.0)) * std::exp(-z * z / 2.0);
  return std::pow(one_dim, static_cast<double>(q.d));
}

double c_of_d_margin(std::size_t d, double log_i) {
  if (d < 1) throw std::invalid_argument("C(d) needs d >= 1");
  const double dd = static_cast<double>(d);
  const double rhs_arg = 2.0 * log_i - std::log(dd);  // -ln(d / i^2)
  if (rhs_arg <= 0.0) return std::numeric_limits<double>::infinity();
  if (log_i <= 0.0) throw std::domain_error("C(d) inequality needs i > 1");
  // ln of the exponent sqrt(i) / (18 pi d ln i)^{d/2}, against ln(rhs_arg).
  const double log_exponent = log_i / 2.0 - dd / 2.0 * std::log(18.0 * std::numbers::pi * dd * log_i);
  return log_exponent - std::log(rhs_arg);
}

double log_c_of_d(std::size_t d) {
  if (d < 1) throw std::invalid_argument("C(d) needs d >= 1");
  if (d <= kKnownLogC.size()) {
    const double x = kKnownLogC[d - 1];
    if (!tail_verified(d, x)) throw std::logic_error("tabulated C(d) fails its defining inequality");
    return x;
  }
  const double x = solve_log_c(d);
  if (!tail_verified(d, x)) throw std::logic_error("computed C(d) fails its defining inequality");
  return x;
}

double c_of_d(std::size_t d) { return std::exp(log_c_of_d(d)); }

bool noise_precondition_holds(std::size_t d, double sigma) {
  // Relative slack so that sigma = sqrt(1/(4d)) itself qualifies after rounding.
  return 4.0 * static_cast<double>(d) * sigma * sigma <= 1.0 + 1e-12;
}

double lemma1_bound(std::size_t d, double sigma) {
  if (!noise_precondition_holds(d, sigma)) throw PreconditionViolated("lemma bound needs sigma^2 <= 1/(4d)");
  return c_of_d(d) + 4.0 * static_cast<double>(d);
}

RegretBoundInput RegretBoundInput::from(const GapTable& gaps, const RadiusAssignment& radii, double sigma,
                                        std::size_t d, std::uint64_t horizon) {
  if (radii.radii.size() != gaps.gaps.size()) throw std::invalid_argument("radii do not cover the gap table");
  RegretBoundInput in{{}, sigma, d, horizon};
  for (std::size_t a = 0; a < gaps.gaps.size(); ++a) {
    if (gaps.gaps[a] <= 0.0) continue;
    const auto& r = radii.radii[a];
    in.arms.push_back(ArmTerms{gaps.gaps[a], r.rho_star, r.rho, r.r});
  }
  return in;
}

double clamped_log(std::size_t d, std::uint64_t horizon, double gap) {
  return std::max(0.0, std::log(static_cast<double>(d) * static_cast<double>(horizon) * gap * gap));
}

BoundResult prop1_bound(const RegretBoundInput& in, FirstTermForm form) {
  if (in.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (in.d < 1) throw std::invalid_argument("d must be >= 1");
  if (!(in.sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  const double d = static_cast<double>(in.d);
  const double lemma = c_of_d(in.d) + 4.0 * d;
  const double growth = form == FirstTermForm::AsStated ? 1.0 + in.sigma : (1.0 + in.sigma) * (1.0 + in.sigma);
  double total = 0.0;
  for (const auto& arm : in.arms) {
    if (!(arm.gap > 0.0)) throw std::invalid_argument("suboptimal gaps must be positive");
    if (!(arm.rho_star > 0.0) || !(arm.r > 0.0) || !(arm.r < arm.rho)) {
      throw std::invalid_argument("radii must satisfy rho_star > 0 and 0 < r < rho");
    }
    const double log_term = clamped_log(in.d, in.horizon, arm.gap);
    const double spread = arm.rho - arm.r;
    total += lemma * growth * arm.gap * log_term / (arm.rho_star * arm.rho_star) + 4.0 / arm.gap +
             2.0 * arm.gap * log_term / (spread * spread) +
             2.0 * in.sigma * in.sigma * arm.gap * log_term / (arm.r * arm.r);
  }
  return BoundResult{total, noise_precondition_holds(in.d, in.sigma)};
}

BoundResult thm1_bound(const GapTable& gaps, double sigma, std::size_t d, std::uint64_t horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const double c = c_of_d(d);
  const double dd = static_cast<double>(d);
  const double constant = (8.0 * c + 24.0 * dd + 18.0 + 72.0 * sigma * sigma) * (1.0 + sigma) * (1.0 + sigma);
  double total = 0.0;
  bool any = false;
  for (double gap : gaps.gaps) {
    if (gap <= 0.0) continue;
    any = true;
    total += constant * clamped_log(d, horizon, gap) / gap + 4.0 / gap;
  }
  if (!any) throw std::invalid_argument("thm1_bound needs at least one positive gap");
  return BoundResult{total, noise_precondition_holds(d, sigma)};
}

Validation mc_validate_bound(Fact fact, const BoundQuery& q, std::size_t n_trials, std::uint64_t seed,
                             unsigned threads) {
  if (n_trials < 10000) throw std::invalid_argument("Monte-Carlo validation needs at least 1e4 trials");
  double bound = 0.0;
  switch (fact) {
    case Fact::Chernoff: bound = chernoff_bound(q); break;
    case Fact::GaussianConcentration: bound = gaussian_concentration_bound(q); break;
    case Fact::AntiConcentration: bound = anti_concentration_bound(q); break;
  }
  const auto stream_id = static_cast<std::uint32_t>(static_cast<int>(fact) * 16 + static_cast<int>(q.variant));
  const unsigned workers = std::max(1u, threads);
  std::vector<std::size_t> hits(workers, 0);
  auto work = [&](unsigned w) {
    const std::size_t begin = n_trials * w / workers;
    const std::size_t end = n_trials * (w + 1) / workers;
    std::size_t count = 0;
    for (std::size_t t = begin; t < end; ++t) {
      rng::CellStream draws(rng::Cell{seed, rng::Domain::Validation, stream_id, static_cast<std::uint32_t>(t), 0});
      if (event_occurs(fact, q, draws)) ++count;
    }
    hits[w] = count;
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  std::size_t total = 0;
  for (auto h : hits) total += h;
  const double n = static_cast<double>(n_trials);
  const double p = static_cast<double>(total) / n;
  // Binomial standard error, taking the larger of the empirical and the
  // null-hypothesis (p = bound) estimates so that rare events are not judged
  // on a zero-width interval.
  const double b = std::clamp(bound, 0.0, 1.0);
  const double se = std::max(std::sqrt(p * (1.0 - p) / n), std::sqrt(b * (1.0 - b) / n));
  const bool holds = fact == Fact::AntiConcentration ? p >= bound - 3.0 * se : p <= bound + 3.0 * se;
  return Validation{p, bound, se, holds};
}

namespace {

template <typename T>
std::vector<T> axis(const nlohmann::json& q, const char* key, T fallback) {
  if (!q.contains(key)) return {fallback};
  if (q[key].is_array()) return q[key].get<std::vector<T>>();
  return {q[key].get<T>()};
}

}  // namespace

BoundGrid bound_grid_from_json(const nlohmann::json& j) {
  BoundGrid g;
  try {
    g.trials = j.value("trials", g.trials);
    g.seed = j.value("seed", g.seed);
    g.threads = j.value("threads", g.threads);
    for (const auto& q : j.at("queries")) {
      const auto fact = fact_from_string(q.at("fact").get<std::string>());
      for (const auto& v : axis<std::string>(q, "variants", "dominate"))
        for (auto d : axis<std::size_t>(q, "d", 1))
          for (auto sigma : axis<double>(q, "sigma", 1.0))
            for (auto n : axis<std::size_t>(q, "n", 1))
              for (auto dev : axis<double>(q, "deviation", 1.0))
                g.queries.emplace_back(fact, BoundQuery{d, sigma, n, dev, variant_from_string(v)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bounds config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bounds config: ") + e.what());
  }
  if (g.trials < 10000) throw ConfigError("bounds config: trials must be >= 10000");
  return g;
}

}  // namespace mobandit::analysis
