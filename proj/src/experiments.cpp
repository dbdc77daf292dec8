#include "crnpriv/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "crnpriv/error.hpp"

namespace crnpriv {
namespace {

// Runs fn(0..n-1) on up to `threads` workers; each index is written by
// exactly one worker so results land in deterministic positions.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string join_ints(const std::vector<std::int64_t>& v) {
  return fmt::format("{}", fmt::join(v, " "));
}

std::int64_t as_count(double v, const std::string& axis) {
  if (!(v >= 0.0) || std::floor(v) != v) throw RangeError(fmt::format("axis {}: population {} is not a non-negative integer", axis, v));
  return static_cast<std::int64_t>(v);
}

std::string method_name(const ModelFile& model, const AnalysisOptions& opts) {
  if (!opts.force_cme && !opts.tau) {
    const auto report = analyze_structure(model.crn);
    if (report.complex_balanced_certified) return to_string(LeakageMethod::ClosedFormQuery);
  }
  return to_string(LeakageMethod::CmeSnapshot);
}

}  // namespace

double average_aggregate_size(const ObservableDistribution& pi_y) {
  double weighted = 0.0;
  double mass = 0.0;
  for (const auto& [y, p] : pi_y) {
    double count = 0.0;
    double size = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      count += static_cast<double>(y[i]);
      size += static_cast<double>(i + 1) * static_cast<double>(y[i]);
    }
    if (count <= 0.0) continue;
    weighted += p * size / count;
    mass += p;
  }
  if (!(mass > 0.0)) throw DegenerateInput("no observation contains an aggregate");
  return weighted / mass;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DimensionMismatch("pearson: series differ in length");
  if (xs.size() < 2) throw DegenerateInput("pearson: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("pearson: constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CRNPRIV_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

LeakageReport auto_leakage(const Crn& crn, const Composition& db, const QuerySpec& q, const AnalysisOptions& opts) {
  if (!opts.force_cme && !opts.tau) {
    const bool wr = is_weakly_reversible(crn);
    if (wr && deficiency(crn).deficiency == 0) return leakage_steady_query(crn, db, q, opts.leakage);
  }
  return leakage_snapshot(crn, db, q, opts.tau, opts.leakage);
}

SweepAxis population_axis(const Crn& crn, const std::string& type_name, std::vector<double> values) {
  const auto t = crn.type_index(type_name);
  if (!t) throw ValidationError(fmt::format("unknown type '{}'", type_name));
  SweepAxis axis;
  axis.kind = SweepAxis::Kind::Population;
  axis.name = "N_" + type_name;
  axis.type = *t;
  axis.values = std::move(values);
  return axis;
}

SweepAxis rate_axis(const Crn& crn, std::vector<std::size_t> reactions, std::vector<double> values) {
  if (reactions.empty()) throw ValidationError("rate axis needs at least one reaction");
  std::vector<std::string> names;
  for (auto r : reactions) {
    if (r >= crn.num_reactions()) throw ValidationError(fmt::format("reaction {} out of range", r + 1));
    names.push_back(std::to_string(r + 1));
  }
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(fmt::format("rate {} must be positive and finite", v));
  SweepAxis axis;
  axis.kind = SweepAxis::Kind::Rate;
  axis.name = fmt::format("k_{}", fmt::join(names, "_"));
  axis.reactions = std::move(reactions);
  axis.values = std::move(values);
  return axis;
}

std::vector<double> grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw RangeError("grid needs lo <= hi and a positive step");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

std::optional<std::size_t> SweepResult::argmin() const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].report || !std::isfinite(cells[i].report->epsilon)) continue;
    if (!best || cells[i].report->epsilon < cells[*best].report->epsilon) best = i;
  }
  return best;
}

std::string SweepResult::to_csv() const {
  std::string out;
  for (const auto& a : axes) out += a.name + ",";
  out += "epsilon,argmax_variant,argmax_observation,error\n";
  for (const auto& c : cells) {
    for (double v : c.coords) out += num(v) + ",";
    if (c.report) {
      out += fmt::format("{},{},{},\n", num(c.report->epsilon), join_ints(c.report->argmax_variant.per_type),
                         join_ints(c.report->argmax_observation));
    } else {
      std::string msg = c.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out += ",,," + msg + "\n";
    }
  }
  return out;
}

std::string SweepResult::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["nu"] = nu;
  j["tau"] = tau ? nlohmann::ordered_json(*tau) : nlohmann::ordered_json("steady");
  auto& jaxes = j["axes"] = nlohmann::ordered_json::array();
  for (const auto& a : axes) {
    nlohmann::ordered_json ja;
    ja["name"] = a.name;
    ja["kind"] = a.kind == SweepAxis::Kind::Population ? "population" : "rate";
    if (a.kind == SweepAxis::Kind::Rate) {
      std::vector<std::size_t> one_based;
      for (auto r : a.reactions) one_based.push_back(r + 1);
      ja["reactions"] = one_based;
    }
    ja["values"] = a.values;
    jaxes.push_back(ja);
  }
  auto& jcells = j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    nlohmann::ordered_json jc;
    jc["coords"] = c.coords;
    if (c.report) {
      jc["epsilon"] = c.report->epsilon;
      jc["argmax_variant"] = c.report->argmax_variant.per_type;
      jc["argmax_observation"] = c.report->argmax_observation;
    } else {
      jc["error"] = c.error;
    }
    jcells.push_back(jc);
  }
  if (auto best = argmin()) j["argmin"] = cells[*best].coords;
  return j.dump(2) + "\n";
}

SweepResult sweep(const ModelFile& model, const std::vector<SweepAxis>& axes, const SweepOptions& opts) {
  SweepResult result;
  result.axes = axes;
  result.method = method_name(model, opts.analysis);
  result.nu = opts.analysis.leakage.nu;
  result.tau = opts.analysis.tau;

  std::size_t total = 1;
  for (const auto& a : axes) total *= a.values.size();
  result.cells.resize(axes.empty() ? 1 : total);
  for (std::size_t idx = 0; idx < result.cells.size(); ++idx) {
    std::size_t rem = idx;
    std::vector<double> coords(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      coords[k] = axes[k].values[rem % axes[k].values.size()];
      rem /= axes[k].values.size();
    }
    result.cells[idx].coords = std::move(coords);
  }

  LawCache cache;
  AnalysisOptions analysis = opts.analysis;
  if (!analysis.leakage.cache) analysis.leakage.cache = &cache;

  parallel_for(result.cells.size(), resolve_threads(opts.threads), [&](std::size_t idx) {
    SweepCell& cell = result.cells[idx];
    try {
      Composition db = model.composition;
      std::vector<double> rates = model.crn.rates();
      for (std::size_t k = 0; k < axes.size(); ++k) {
        if (axes[k].kind == SweepAxis::Kind::Population) {
          db.per_type.at(axes[k].type) = as_count(cell.coords[k], axes[k].name);
        } else {
          for (auto r : axes[k].reactions) rates.at(r) = cell.coords[k];
        }
      }
      const Crn crn = model.crn.with_rates(rates);
      cell.report = auto_leakage(crn, db, model.query, analysis);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });
  return result;
}

SweepResult population_sweep(const ModelFile& model, const std::string& type_a, const std::string& type_b,
                             std::vector<double> values_a, std::vector<double> values_b, const SweepOptions& opts) {
  return sweep(model,
               {population_axis(model.crn, type_a, std::move(values_a)), population_axis(model.crn, type_b, std::move(values_b))},
               opts);
}

SweepResult rate_sweep(const ModelFile& model, std::vector<std::size_t> group_a, std::vector<std::size_t> group_b,
                       std::vector<double> values_a, std::vector<double> values_b, const SweepOptions& opts) {
  return sweep(model,
               {rate_axis(model.crn, std::move(group_a), std::move(values_a)),
                rate_axis(model.crn, std::move(group_b), std::move(values_b))},
               opts);
}

std::string TreeSweepResult::to_csv() const {
  std::string out = "index,shape,depth,avg_group_size,epsilon,forward_rates,error\n";
  for (const auto& r : rows) {
    std::vector<std::string> rates;
    for (double k : r.forward_rates) rates.push_back(num(k));
    out += fmt::format("{},{},{},{},{},{},{}\n", r.index, r.shape, r.depth,
                       r.avg_group_size ? num(*r.avg_group_size) : "", r.epsilon ? num(*r.epsilon) : "",
                       fmt::join(rates, " "), r.error);
  }
  return out;
}

CollabTree near_balanced_tree(int n_leaves) {
  if (n_leaves < 1) throw RangeError("a tree needs at least one leaf");
  if (n_leaves == 1) return CollabTree::leaf();
  return CollabTree::join(near_balanced_tree(n_leaves / 2), near_balanced_tree(n_leaves - n_leaves / 2));
}

TreeSweepResult tree_sweep(int n_leaves, const TreeSweepOptions& opts) {
  TreeSweepResult result;
  result.leaves = n_leaves;
  result.rates = opts.rates;
  result.seed = opts.seed;
  result.per_type = opts.per_type;
  if (opts.per_type < 0) throw RangeError("per-type population must be non-negative");

  std::vector<CollabTree> trees;
  if (opts.rates == TreeRates::FixedUnit) {
    trees = enumerate_binary_trees(n_leaves);
  } else {
    if (!(opts.rate_lo > 0.0) || !(opts.rate_hi >= opts.rate_lo)) throw RangeError("random rate range must be positive");
    const CollabTree shape = near_balanced_tree(n_leaves);
    Rng rng(opts.seed);
    for (std::size_t d = 0; d < opts.draws; ++d) {
      CollabTree t = shape;
      for (auto node : t.internal_nodes())
        t.set_rates(node, opts.rate_lo + (opts.rate_hi - opts.rate_lo) * uniform01(rng), 1.0);
      trees.push_back(std::move(t));
    }
  }

  result.rows.resize(trees.size());
  for (std::size_t i = 0; i < trees.size(); ++i) {
    TreeRow& row = result.rows[i];
    row.index = i;
    row.shape = trees[i].canonical();
    row.depth = trees[i].depth();
    for (auto node : trees[i].internal_nodes()) row.forward_rates.push_back(trees[i].nodes()[node].forward);
  }
  if (opts.enumerate_only) return result;

  parallel_for(trees.size(), resolve_threads(opts.threads), [&](std::size_t i) {
    TreeRow& row = result.rows[i];
    try {
      const TreeModel model = tree_to_crn(trees[i]);
      Composition db;
      db.per_type.assign(model.crn.num_types(), opts.per_type);
      LeakageOptions leak = opts.leakage;
      leak.cache = nullptr;  // cache keys do not distinguish topologies
      row.epsilon = leakage_steady_query(model.crn, db, model.size_query, leak).epsilon;
      row.avg_group_size = average_aggregate_size(closed_form_observable(
          model.crn, db, model.size_query, StationaryLaw::ClassRenormalized, leak.steady, leak.cme.state_cap));
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  std::vector<double> eps, depth, size;
  for (const auto& r : result.rows) {
    if (!r.epsilon || !r.avg_group_size) continue;
    eps.push_back(*r.epsilon);
    depth.push_back(r.depth);
    size.push_back(*r.avg_group_size);
  }
  try {
    result.pearson_depth = pearson(depth, eps);
  } catch (const DegenerateInput&) {
  }
  try {
    result.pearson_group_size = pearson(size, eps);
  } catch (const DegenerateInput&) {
  }
  return result;
}

}  // namespace crnpriv
