#include "crnpriv/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <fmt/format.h>

#include "crnpriv/error.hpp"
#include "crnpriv/structure.hpp"

namespace crnpriv {
namespace {

constexpr double kTieTolerance = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum Analysis : int { kUnnormalizedLaw = 1, kRenormalizedLaw = 2, kCmeSteady = 3, kCmeTransient = 4 };

void require_complex_balanced(const Crn& crn) {
  const bool wr = is_weakly_reversible(crn);
  const auto d = deficiency(crn);
  if (!wr || d.deficiency != 0)
    throw NotComplexBalanced(fmt::format(
        "closed-form leakage needs a weakly reversible, deficiency-zero network (weakly reversible: {}, deficiency: {})",
        wr, d.deficiency));
}

MeanState as_mean(const PopulationVector& x) {
  MeanState m(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) m[static_cast<Eigen::Index>(i)] = x[i];
  return m;
}

double log_sum_exp(const std::vector<double>& v) {
  double top = kNegInf;
  for (double a : v) top = std::max(top, a);
  if (top == kNegInf) return kNegInf;
  double s = 0.0;
  for (double a : v) s += std::exp(a - top);
  return top + std::log(s);
}

// Running maximum plus every candidate within tolerance of it, in
// enumeration order.
class ArgmaxTracker {
 public:
  void offer(double value, const Composition& variant, const Observation& obs, bool outside) {
    if (value < best_ - kTieTolerance) return;
    best_ = std::max(best_, value);
    candidates_.push_back({value, {variant, obs}, outside});
    if (candidates_.size() > 2 * kept_ + 64) prune();
  }

  void fill(LeakageReport& report) {
    prune();
    if (candidates_.empty()) return;
    report.epsilon = std::max(best_, 0.0);
    report.argmax_variant = candidates_.front().arg.variant;
    report.argmax_observation = candidates_.front().arg.observation;
    report.argmax_outside_class = candidates_.front().outside;
    for (const auto& c : candidates_) report.argmaxima.push_back(c.arg);
  }

 private:
  struct Candidate {
    double value;
    LeakageArgmax arg;
    bool outside;
  };

  void prune() {
    std::erase_if(candidates_, [this](const Candidate& c) { return c.value < best_ - kTieTolerance; });
    kept_ = candidates_.size();
  }

  double best_ = kNegInf;
  std::size_t kept_ = 0;
  std::vector<Candidate> candidates_;
};

Observation state_observation(const PopulationVector& x) { return Observation(x.counts().begin(), x.counts().end()); }

void compare_laws(const ObservableDistribution& base, const ObservableDistribution& variant_law,
                  const Composition& variant, double nu, ArgmaxTracker& tracker) {
  auto log_of = [](double p) { return p > 0.0 ? std::log(p) : kNegInf; };
  auto a = base.begin();
  auto b = variant_law.begin();
  while (a != base.end() || b != variant_law.end()) {
    double p = 0.0;
    double q = 0.0;
    const Observation* y = nullptr;
    if (b == variant_law.end() || (a != base.end() && a->first < b->first)) {
      y = &a->first;
      p = (a++)->second;
    } else if (a == base.end() || b->first < a->first) {
      y = &b->first;
      q = (b++)->second;
    } else {
      y = &a->first;
      p = (a++)->second;
      q = (b++)->second;
    }
    tracker.offer(smoothed_log_ratio(log_of(p), log_of(q), nu), variant, *y, false);
  }
}

using LawFn = std::function<ObservableDistribution(const Composition&)>;

std::shared_ptr<const ObservableDistribution> cached_law(LawCache* cache, const LawCache::Key& key, const LawFn& fn) {
  if (cache) {
    if (auto hit = cache->find(key)) return hit;
  }
  auto law = std::make_shared<const ObservableDistribution>(fn(key.composition));
  if (cache) cache->insert(key, law);
  return law;
}

LeakageReport fiber_leakage(const Crn& crn, const Composition& db, int analysis, double tau, const LawFn& fn,
                            const LeakageOptions& opts) {
  if (!(opts.nu >= 0.0)) throw RangeError("smoothing value nu must be non-negative");
  const auto rates = crn.rates();
  auto law_of = [&](const Composition& c) { return cached_law(opts.cache, {c, rates, analysis, tau}, fn); };
  const auto base = law_of(db);
  ArgmaxTracker tracker;
  const auto pairs = adjacent_compositions(db);
  for (const auto& pair : pairs) compare_laws(*base, *law_of(pair.variant), pair.variant, opts.nu, tracker);
  LeakageReport report;
  tracker.fill(report);
  report.nu = opts.nu;
  report.variants = pairs.size();
  return report;
}

}  // namespace

std::vector<AdjacencyPair> adjacent_compositions(const Composition& db) {
  std::vector<AdjacencyPair> out;
  for (std::size_t s = 0; s < db.per_type.size(); ++s) {
    if (db.per_type[s] < 1) continue;
    for (std::size_t t = 0; t < db.per_type.size(); ++t) {
      if (t == s) continue;
      AdjacencyPair pair{db, db, s, t};
      --pair.variant.per_type[s];
      ++pair.variant.per_type[t];
      out.push_back(std::move(pair));
    }
  }
  return out;
}

PopulationVector initial_state(const Composition& db, const Crn& crn) {
  if (db.per_type.size() != crn.num_types())
    throw DimensionMismatch(fmt::format("composition has {} types, network declares {}", db.per_type.size(), crn.num_types()));
  std::vector<std::int64_t> counts(crn.num_states(), 0);
  for (std::size_t s = 0; s < crn.num_types(); ++s) {
    const auto& type = crn.types()[s];
    if (!type.initial_state) throw MissingInitialState(fmt::format("type '{}' has no initial state", type.name));
    if (db.per_type[s] < 0) throw ValidationError(fmt::format("negative count for type '{}'", type.name));
    counts[*type.initial_state] += db.per_type[s];
  }
  for (const auto& [state, count] : db.resources) {
    if (state >= counts.size()) throw DimensionMismatch("resource state index out of range");
    if (count < 0) throw ValidationError("negative resource count");
    counts[state] += count;
  }
  std::vector<Count> narrow(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > std::numeric_limits<Count>::max()) throw RangeError("population count too large");
    narrow[i] = static_cast<Count>(counts[i]);
  }
  return PopulationVector(std::move(narrow));
}

double log_product_poisson(const MeanState& xbar, const PopulationVector& x) {
  if (static_cast<std::size_t>(xbar.size()) != x.size()) throw DimensionMismatch("mean state and population differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = xbar[static_cast<Eigen::Index>(i)];
    const double k = x[i];
    if (k > 0.0) {
      if (m <= 0.0) return kNegInf;
      s += k * std::log(m) - std::lgamma(k + 1.0);
    }
    s -= m;
  }
  return s;
}

double stationary_product_poisson(const MeanState& xbar, const PopulationVector& x) {
  return std::exp(log_product_poisson(xbar, x));
}

double stationary_product_poisson(const MeanState& xbar, const PopulationVector& x, const StateSpace& space) {
  if (!space.contains(x)) return 0.0;
  std::vector<double> logs(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) logs[i] = log_product_poisson(xbar, space[i]);
  return std::exp(log_product_poisson(xbar, x) - log_sum_exp(logs));
}

std::string to_string(StationaryLaw law) {
  return law == StationaryLaw::Unnormalized ? "unnormalized" : "class_renormalized";
}

std::string to_string(LeakageMethod method) {
  switch (method) {
    case LeakageMethod::ClosedFormIdentity: return "closed_form_identity";
    case LeakageMethod::ClosedFormQuery: return "closed_form_query";
    case LeakageMethod::CmeSnapshot: return "cme_snapshot";
  }
  return "unknown";
}

ObservableDistribution observable_distribution(const DistributionTable& pi, const QuerySpec& q) {
  ObservableDistribution out;
  for (std::size_t i = 0; i < pi.space.size(); ++i) out[evaluate_query(q, pi.space[i])] += pi.probs[i];
  return out;
}

std::shared_ptr<const ObservableDistribution> LawCache::find(const Key& key) const {
  std::lock_guard lock(mutex_);
  auto it = laws_.find(key);
  return it == laws_.end() ? nullptr : it->second;
}

void LawCache::insert(const Key& key, std::shared_ptr<const ObservableDistribution> law) {
  std::lock_guard lock(mutex_);
  laws_.emplace(key, std::move(law));
}

std::size_t LawCache::size() const {
  std::lock_guard lock(mutex_);
  return laws_.size();
}

double smoothed_log_ratio(double log_p, double log_q, double nu) {
  if (nu == 0.0) {
    if (log_p == kNegInf && log_q == kNegInf) return 0.0;
    return std::abs(log_p - log_q);
  }
  const double log_nu = std::log(nu);
  auto add_nu = [log_nu](double a) {
    if (a == kNegInf) return log_nu;
    const double hi = std::max(a, log_nu);
    return hi + std::log1p(std::exp(std::min(a, log_nu) - hi));
  };
  return std::abs(add_nu(log_p) - add_nu(log_q));
}

ObservableDistribution closed_form_observable(const Crn& crn, const Composition& db, const QuerySpec& q,
                                              StationaryLaw law, const SteadyStateOptions& steady, std::size_t cap) {
  const PopulationVector x0 = initial_state(db, crn);
  const StateSpace space = reachable_states(crn, x0, cap);
  const MeanState xbar = steady_state(crn, as_mean(x0), steady);
  std::vector<double> logs(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) logs[i] = log_product_poisson(xbar, space[i]);
  const double shift = law == StationaryLaw::ClassRenormalized ? log_sum_exp(logs) : 0.0;
  ObservableDistribution out;
  for (std::size_t i = 0; i < space.size(); ++i) out[evaluate_query(q, space[i])] += std::exp(logs[i] - shift);
  return out;
}

ObservableDistribution cme_observable(const Crn& crn, const Composition& db, const QuerySpec& q,
                                      std::optional<double> tau, const CmeOptions& opts) {
  const PopulationVector x0 = initial_state(db, crn);
  const DistributionTable pi = tau ? cme_solve(crn, x0, *tau, opts) : cme_steady_state(crn, x0, opts.state_cap);
  return observable_distribution(pi, q);
}

LeakageReport leakage_steady_identity(const Crn& crn, const Composition& db, const LeakageOptions& opts) {
  if (!(opts.nu >= 0.0)) throw RangeError("smoothing value nu must be non-negative");
  require_complex_balanced(crn);
  const StationaryLaw law = opts.law.value_or(StationaryLaw::Unnormalized);
  const std::size_t cap = opts.cme.state_cap;

  struct Side {
    StateSpace space;
    MeanState xbar;
    double log_norm = 0.0;
  };
  auto side_of = [&](const Composition& c) {
    const PopulationVector x0 = initial_state(c, crn);
    Side s{reachable_states(crn, x0, cap), steady_state(crn, as_mean(x0), opts.steady), 0.0};
    if (law == StationaryLaw::ClassRenormalized) {
      std::vector<double> logs(s.space.size());
      for (std::size_t i = 0; i < s.space.size(); ++i) logs[i] = log_product_poisson(s.xbar, s.space[i]);
      s.log_norm = log_sum_exp(logs);
    }
    return s;
  };
  // log-probability of x under a side's law; flags reads outside the class.
  auto log_law = [&](const Side& s, const PopulationVector& x, bool& outside) {
    if (s.space.contains(x)) return log_product_poisson(s.xbar, x) - s.log_norm;
    if (law == StationaryLaw::ClassRenormalized) return kNegInf;
    outside = true;
    return log_product_poisson(s.xbar, x);
  };

  const Side base = side_of(db);
  ArgmaxTracker tracker;
  LeakageReport report;
  const auto pairs = adjacent_compositions(db);
  for (const auto& pair : pairs) {
    const Side other = side_of(pair.variant);
    auto visit = [&](const PopulationVector& x) {
      bool outside = false;
      const double lp = log_law(base, x, outside);
      const double lq = log_law(other, x, outside);
      if (outside) ++report.outside_class_evaluations;
      tracker.offer(smoothed_log_ratio(lp, lq, opts.nu), pair.variant, state_observation(x), outside);
    };
    for (const auto& x : base.space.states()) visit(x);
    for (const auto& x : other.space.states())
      if (!base.space.contains(x)) visit(x);
  }
  tracker.fill(report);
  report.method = LeakageMethod::ClosedFormIdentity;
  report.law = law;
  report.nu = opts.nu;
  report.variants = pairs.size();
  return report;
}

LeakageReport leakage_steady_query(const Crn& crn, const Composition& db, const QuerySpec& q,
                                   const LeakageOptions& opts) {
  require_complex_balanced(crn);
  const StationaryLaw law = opts.law.value_or(StationaryLaw::ClassRenormalized);
  auto fn = [&](const Composition& c) { return closed_form_observable(crn, c, q, law, opts.steady, opts.cme.state_cap); };
  LeakageReport report =
      fiber_leakage(crn, db, law == StationaryLaw::Unnormalized ? kUnnormalizedLaw : kRenormalizedLaw, 0.0, fn, opts);
  report.method = LeakageMethod::ClosedFormQuery;
  report.law = law;
  return report;
}

LeakageReport leakage_snapshot(const Crn& crn, const Composition& db, const QuerySpec& q, std::optional<double> tau,
                               const LeakageOptions& opts) {
  if (tau && !(*tau >= 0.0)) throw RangeError("snapshot time must be non-negative");
  auto fn = [&](const Composition& c) { return cme_observable(crn, c, q, tau, opts.cme); };
  LeakageReport report = fiber_leakage(crn, db, tau ? kCmeTransient : kCmeSteady, tau.value_or(0.0), fn, opts);
  report.method = LeakageMethod::CmeSnapshot;
  report.tau = tau;
  return report;
}

}  // namespace crnpriv
