// crnpriv: structural analysis, dynamics and privacy leakage of reaction
// network models from the command line.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "crnpriv/deterministic.hpp"
#include "crnpriv/error.hpp"
#include "crnpriv/experiments.hpp"
#include "crnpriv/privacy.hpp"
#include "crnpriv/spec_parser.hpp"
#include "crnpriv/stochastic.hpp"
#include "crnpriv/structure.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace crnpriv;

constexpr const char* kVersion = "0.1.0";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

json number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

struct Globals {
  unsigned threads = 0;
  bool no_timestamp = false;
  std::size_t state_cap = kDefaultStateCap;
};

struct Run {
  std::string command;
  std::string model_path;
  std::string model_text;
  ModelFile model;
  json parameters = json::object();
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

Run load(const std::string& command, const std::string& path) {
  Run run;
  run.command = command;
  run.model_path = path;
  run.model_text = read_file(path);
  run.model = parse_spec(run.model_text);
  return run;
}

json manifest(const Run& run, const Globals& g) {
  json m;
  m["tool"] = "crnpriv";
  m["version"] = kVersion;
  m["command"] = run.command;
  if (!run.model_path.empty()) {
    m["model"] = run.model_path;
    m["model_sha256"] = sha256_hex(run.model_text);
  }
  m["parameters"] = run.parameters;
  m["rng"] = kRngName;
  m["threads"] = resolve_threads(g.threads);
  m["state_cap"] = g.state_cap;
  if (!g.no_timestamp) {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    m["timestamp"] = buf;
    m["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - run.started).count();
  }
  return m;
}

std::string csv_header_comment(const json& m) { return "# manifest: " + m.dump() + "\n"; }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json observation_json(const Observation& y) { return json(y); }

json composition_json(const Crn& crn, const Composition& c) {
  json j = json::object();
  for (std::size_t s = 0; s < c.per_type.size() && s < crn.num_types(); ++s) j[crn.types()[s].name] = c.per_type[s];
  return j;
}

json report_json(const Crn& crn, const LeakageReport& r) {
  json j;
  j["epsilon"] = number(r.epsilon);
  j["method"] = to_string(r.method);
  if (r.law) j["stationary_law"] = to_string(*r.law);
  j["nu"] = r.nu;
  j["tau"] = r.tau ? json(*r.tau) : json("steady");
  j["argmax_variant"] = composition_json(crn, r.argmax_variant);
  j["argmax_observation"] = observation_json(r.argmax_observation);
  json all = json::array();
  for (const auto& a : r.argmaxima)
    all.push_back(json{{"variant", composition_json(crn, a.variant)}, {"observation", observation_json(a.observation)}});
  j["argmaxima"] = all;
  j["variants"] = r.variants;
  if (r.method == LeakageMethod::ClosedFormIdentity) {
    j["outside_class_evaluations"] = r.outside_class_evaluations;
    j["argmax_outside_class"] = r.argmax_outside_class;
  }
  return j;
}

std::vector<std::string> query_names(const QuerySpec& q) {
  std::vector<std::string> out;
  for (const auto& g : q.groups()) out.push_back(g.name);
  return out;
}

MeanState mean_of(const PopulationVector& x) {
  MeanState m(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) m[static_cast<Eigen::Index>(i)] = x[i];
  return m;
}

// --- subcommands ---------------------------------------------------------

std::string cmd_analyze(const std::string& path, const Globals& g) {
  Run run = load("analyze", path);
  const Crn& crn = run.model.crn;
  const StructureReport s = analyze_structure(crn);
  json j;
  j["manifest"] = manifest(run, g);
  j["N_S"] = crn.num_types();
  j["N_A"] = crn.num_states();
  j["N_C"] = s.num_complexes;
  j["N_R"] = crn.num_reactions();
  j["L"] = s.linkage_classes.size();
  j["rank"] = s.rank_gamma;
  j["deficiency"] = s.deficiency;
  j["weakly_reversible"] = s.weakly_reversible;
  j["complex_balanced_certified"] = s.complex_balanced_certified;
  j["collaboration_dag"] = s.collaboration_dag;
  j["linkage_classes"] = s.linkage_classes;
  j["conservation_basis"] = s.conservation_basis;
  return dump(j);
}

std::string cmd_steady_state(const std::string& path, double tol, const Globals& g) {
  Run run = load("steady-state", path);
  run.parameters["tol"] = tol;
  const Crn& crn = run.model.crn;
  SteadyStateOptions opts;
  opts.tol = tol;
  const MeanState xbar = steady_state(crn, mean_of(initial_state(run.model.composition, crn)), opts);
  json states = json::object();
  std::vector<double> values;
  for (std::size_t i = 0; i < crn.num_states(); ++i) {
    states[crn.labels()[i]] = xbar[static_cast<Eigen::Index>(i)];
    values.push_back(xbar[static_cast<Eigen::Index>(i)]);
  }
  json j;
  j["manifest"] = manifest(run, g);
  j["xbar"] = values;
  j["states"] = states;
  j["residual_inf_norm"] = ode_rhs(crn, xbar).cwiseAbs().maxCoeff();
  return dump(j);
}

std::optional<double> snapshot_time(const ModelFile& m, const std::optional<double>& tau, bool steady) {
  if (steady) return std::nullopt;
  if (tau) return tau;
  if (m.has_param("tau")) return m.param("tau", 0.0);
  return std::nullopt;
}

std::string cmd_distribution(const std::string& path, std::optional<double> tau_flag, bool steady, double fsp,
                             const Globals& g) {
  Run run = load("distribution", path);
  const auto tau = snapshot_time(run.model, tau_flag, steady);
  run.parameters["tau"] = tau ? json(*tau) : json("steady");
  run.parameters["fsp_threshold"] = fsp;
  const Crn& crn = run.model.crn;
  const PopulationVector x0 = initial_state(run.model.composition, crn);
  CmeOptions opts;
  opts.fsp_threshold = fsp;
  opts.state_cap = g.state_cap;
  const DistributionTable pi = tau ? cme_solve(crn, x0, *tau, opts) : cme_steady_state(crn, x0, opts.state_cap);
  run.parameters["states"] = pi.space.size();
  run.parameters["pruned_mass"] = pi.pruned_mass;
  const auto dist = observable_distribution(pi, run.model.query);
  std::string out = csv_header_comment(manifest(run, g));
  auto names = query_names(run.model.query);
  names.push_back("probability");
  out += fmt::format("{}\n", fmt::join(names, ","));
  for (const auto& [y, p] : dist) out += fmt::format("{},{}\n", fmt::join(y, ","), num(p));
  return out;
}

struct LeakageFlags {
  std::optional<double> tau;
  bool steady = false;
  std::optional<double> nu;
  bool force_cme = false;
  bool identity = false;
  std::string law;
};

std::optional<StationaryLaw> parse_law(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "unnormalized") return StationaryLaw::Unnormalized;
  if (s == "renormalized") return StationaryLaw::ClassRenormalized;
  throw InputError(fmt::format("unknown stationary law '{}'", s));
}

std::string cmd_leakage(const std::string& path, const LeakageFlags& f, const Globals& g) {
  Run run = load("leakage", path);
  const Crn& crn = run.model.crn;
  const auto tau = snapshot_time(run.model, f.tau, f.steady);
  LeakageOptions opts;
  opts.cme.state_cap = g.state_cap;
  opts.nu = f.nu.value_or(run.model.param("nu", 1e-12));
  opts.law = parse_law(f.law);
  run.parameters["tau"] = tau ? json(*tau) : json("steady");
  run.parameters["nu"] = opts.nu;
  run.parameters["force_cme"] = f.force_cme;
  run.parameters["identity"] = f.identity;

  const StructureReport s = analyze_structure(crn);
  LeakageReport report;
  std::string selection;
  if (f.identity) {
    if (f.force_cme || tau) throw InputError("--identity uses the closed-form stationary law only");
    report = leakage_steady_identity(crn, run.model.composition, opts);
    selection = "closed form (identity observation)";
  } else if (!f.force_cme && !tau && s.complex_balanced_certified) {
    report = leakage_steady_query(crn, run.model.composition, run.model.query, opts);
    selection = "closed form: network is weakly reversible with deficiency zero";
  } else {
    report = leakage_snapshot(crn, run.model.composition, run.model.query, tau, opts);
    selection = f.force_cme ? "master equation: forced" : (tau ? "master equation: finite snapshot time"
                                                                : "master equation: network not certified complex-balanced");
  }
  json m = manifest(run, g);
  m["method"] = to_string(report.method);
  m["method_selection"] = selection;
  json j;
  j["manifest"] = m;
  j["report"] = report_json(crn, report);
  return dump(j);
}

std::string cmd_simulate(const std::string& path, double tau, std::size_t runs, std::optional<std::uint64_t> seed_flag,
                         const Globals& g) {
  Run run = load("simulate", path);
  const Crn& crn = run.model.crn;
  const auto seed = seed_flag.value_or(static_cast<std::uint64_t>(run.model.param("seed", 42)));
  run.parameters["tau"] = tau;
  run.parameters["runs"] = runs;
  run.parameters["seed"] = seed;
  if (tau < 0) throw InputError("--tau must be non-negative");
  const PopulationVector x0 = initial_state(run.model.composition, crn);
  std::map<Observation, std::size_t> hist;
  for (std::size_t r = 0; r < runs; ++r)
    ++hist[evaluate_query(run.model.query, ssa_sample(crn, x0, tau, replicate_seed(seed, r)))];
  std::string out = csv_header_comment(manifest(run, g));
  auto names = query_names(run.model.query);
  names.push_back("count");
  names.push_back("frequency");
  out += fmt::format("{}\n", fmt::join(names, ","));
  for (const auto& [y, c] : hist)
    out += fmt::format("{},{},{}\n", fmt::join(y, ","), c, num(static_cast<double>(c) / static_cast<double>(runs)));
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  auto to_double = [](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw InputError(fmt::format("bad number '{}' in axis", s));
    return v;
  };
  if (text.find(':') != std::string::npos) {
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw InputError(fmt::format("axis range '{}' must be lo:hi:step", text));
    return grid(to_double(parts[0]), to_double(parts[1]), to_double(parts[2]));
  }
  std::vector<double> out;
  while (std::getline(ss, part, ',')) out.push_back(to_double(part));
  if (out.empty()) throw InputError("axis has no values");
  return out;
}

SweepAxis parse_axis(const Crn& crn, const std::string& text) {
  const auto colon = text.find(':');
  const auto eq = text.find('=');
  if (colon == std::string::npos || eq == std::string::npos || eq < colon)
    throw InputError(fmt::format("axis '{}' must look like population:<type>=lo:hi:step or rate:<i,j>=lo:hi:step", text));
  const std::string kind = text.substr(0, colon);
  const std::string target = text.substr(colon + 1, eq - colon - 1);
  const std::vector<double> values = parse_values(text.substr(eq + 1));
  if (kind == "population") return population_axis(crn, target, values);
  if (kind == "rate") {
    std::vector<std::size_t> reactions;
    std::stringstream ss(target);
    std::string part;
    while (std::getline(ss, part, ',')) {
      long idx = 0;
      try {
        idx = std::stol(part);
      } catch (const std::exception&) {
        throw InputError(fmt::format("bad reaction index '{}'", part));
      }
      if (idx < 1) throw InputError(fmt::format("reaction indices are 1-based, got '{}'", part));
      reactions.push_back(static_cast<std::size_t>(idx - 1));
    }
    return rate_axis(crn, reactions, values);
  }
  throw InputError(fmt::format("unknown axis kind '{}'", kind));
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw InputError(fmt::format("cannot write '{}'", path));
}

std::string cmd_sweep(const std::string& path, const std::vector<std::string>& axis_text, const LeakageFlags& f,
                      const std::string& out_prefix, const Globals& g) {
  Run run = load("sweep", path);
  std::vector<SweepAxis> axes;
  for (const auto& a : axis_text) axes.push_back(parse_axis(run.model.crn, a));
  SweepOptions opts;
  opts.threads = g.threads;
  opts.analysis.tau = snapshot_time(run.model, f.tau, f.steady);
  opts.analysis.force_cme = f.force_cme;
  opts.analysis.leakage.cme.state_cap = g.state_cap;
  opts.analysis.leakage.nu = f.nu.value_or(run.model.param("nu", 1e-12));
  opts.analysis.leakage.law = parse_law(f.law);
  run.parameters["axes"] = axis_text;
  run.parameters["tau"] = opts.analysis.tau ? json(*opts.analysis.tau) : json("steady");
  run.parameters["nu"] = opts.analysis.leakage.nu;
  run.parameters["force_cme"] = f.force_cme;
  const SweepResult result = sweep(run.model, axes, opts);

  json m = manifest(run, g);
  m["method"] = result.method;
  json j;
  j["manifest"] = m;
  j["sweep"] = json::parse(result.to_json());
  const std::string json_text = dump(j);
  if (out_prefix.empty()) return json_text;
  write_file(out_prefix + ".csv", csv_header_comment(m) + result.to_csv());
  write_file(out_prefix + ".json", json_text);
  return "";
}

struct TreeFlags {
  int leaves = 8;
  bool random_rates = false;
  std::size_t draws = 200;
  std::uint64_t seed = 42;
  std::int64_t per_type = 2;
  bool enumerate_only = false;
  double nu = 1e-12;
  std::string out;
};

std::string cmd_trees(const TreeFlags& f, const Globals& g) {
  Run run;
  run.command = "trees";
  run.parameters["leaves"] = f.leaves;
  run.parameters["rates"] = f.random_rates ? "random_uniform" : "fixed_unit";
  if (f.random_rates) {
    run.parameters["draws"] = f.draws;
    run.parameters["seed"] = f.seed;
  }
  run.parameters["per_type"] = f.per_type;
  run.parameters["nu"] = f.nu;
  run.parameters["enumerate_only"] = f.enumerate_only;
  TreeSweepOptions opts;
  opts.rates = f.random_rates ? TreeRates::RandomUniform : TreeRates::FixedUnit;
  opts.draws = f.draws;
  opts.seed = f.seed;
  opts.per_type = f.per_type;
  opts.enumerate_only = f.enumerate_only;
  opts.leakage.nu = f.nu;
  opts.leakage.cme.state_cap = g.state_cap;
  opts.threads = g.threads;
  const TreeSweepResult result = tree_sweep(f.leaves, opts);
  json m = manifest(run, g);
  if (result.pearson_depth) m["pearson_depth_epsilon"] = *result.pearson_depth;
  if (result.pearson_group_size) m["pearson_group_size_epsilon"] = *result.pearson_group_size;
  const std::string text = csv_header_comment(m) + result.to_csv();
  if (f.out.empty()) return text;
  write_file(f.out, text);
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy leakage of agent populations modelled as reaction networks"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (default: CRNPRIV_THREADS or all cores)");
  app.add_flag("--no-timestamp", g.no_timestamp, "Omit wall-clock fields from the manifest");
  app.add_option("--state-cap", g.state_cap, "Largest reachable state space before giving up (exit 3)");

  std::string model;
  std::string output;
  std::function<std::string()> action;

  auto* analyze = app.add_subcommand("analyze", "Structural report (JSON)");
  analyze->add_option("model", model, "Model file")->required();
  analyze->callback([&] { action = [&] { return cmd_analyze(model, g); }; });

  double tol = 1e-10;
  auto* steady = app.add_subcommand("steady-state", "Mean-field equilibrium (JSON)");
  steady->add_option("model", model, "Model file")->required();
  steady->add_option("--tol", tol, "Residual tolerance");
  steady->callback([&] { action = [&] { return cmd_steady_state(model, tol, g); }; });

  LeakageFlags lf;
  double fsp = 0.0;
  auto* dist = app.add_subcommand("distribution", "Observable distribution from the master equation (CSV)");
  dist->add_option("model", model, "Model file")->required();
  auto* dist_tau = dist->add_option("--tau", lf.tau, "Snapshot time");
  dist->add_flag("--steady", lf.steady, "Stationary distribution")->excludes(dist_tau);
  dist->add_option("--fsp", fsp, "Finite state projection threshold (0 disables)");
  dist->callback([&] { action = [&] { return cmd_distribution(model, lf.tau, lf.steady, fsp, g); }; });

  auto* leak = app.add_subcommand("leakage", "Differential-privacy leakage (JSON)");
  leak->add_option("model", model, "Model file")->required();
  auto* leak_tau = leak->add_option("--tau", lf.tau, "Snapshot time");
  leak->add_flag("--steady", lf.steady, "Stationary snapshot")->excludes(leak_tau);
  leak->add_option("--nu", lf.nu, "Smoothing added to every observable probability");
  leak->add_flag("--force-cme", lf.force_cme, "Use the master equation even when a closed form applies");
  leak->add_flag("--identity", lf.identity, "Observe the full population vector (closed form)");
  leak->add_option("--law", lf.law, "Closed-form law: unnormalized or renormalized")
      ->check(CLI::IsMember({"unnormalized", "renormalized"}));
  leak->callback([&] { action = [&] { return cmd_leakage(model, lf, g); }; });

  double sim_tau = 0.0;
  std::size_t runs = 1000;
  std::optional<std::uint64_t> seed;
  auto* sim = app.add_subcommand("simulate", "Gillespie ensemble histogram (CSV)");
  sim->add_option("model", model, "Model file")->required();
  sim->add_option("--tau", sim_tau, "Snapshot time")->required();
  sim->add_option("--runs", runs, "Replicates");
  sim->add_option("--seed", seed, "Base seed; replicate i uses seed xor i");
  sim->callback([&] { action = [&] { return cmd_simulate(model, sim_tau, runs, seed, g); }; });

  std::vector<std::string> axes;
  auto* sw = app.add_subcommand("sweep", "Leakage over a parameter grid (JSON, or CSV+JSON with --out)");
  sw->add_option("model", model, "Model file")->required();
  sw->add_option("--axis", axes, "population:<type>=lo:hi:step or rate:<i,j,..>=lo:hi:step (1-based reactions)")
      ->required();
  auto* sw_tau = sw->add_option("--tau", lf.tau, "Snapshot time");
  sw->add_flag("--steady", lf.steady, "Stationary snapshot")->excludes(sw_tau);
  sw->add_option("--nu", lf.nu, "Smoothing value");
  sw->add_flag("--force-cme", lf.force_cme, "Always use the master equation");
  sw->add_option("--law", lf.law, "Closed-form law: unnormalized or renormalized")
      ->check(CLI::IsMember({"unnormalized", "renormalized"}));
  sw->add_option("--out", output, "Write <prefix>.csv and <prefix>.json");
  sw->callback([&] { action = [&] { return cmd_sweep(model, axes, lf, output, g); }; });

  TreeFlags tf;
  auto* trees = app.add_subcommand("trees", "Leakage over binary collaboration trees (CSV)");
  trees->add_option("--leaves", tf.leaves, "Leaves (types) per tree")->check(CLI::Range(1, 20));
  trees->add_flag("--random-rates", tf.random_rates, "Near-balanced shape with random forward rates in [0.1, 2]");
  trees->add_option("--draws", tf.draws, "Random rate draws");
  trees->add_option("--seed", tf.seed, "Seed of the rate draws");
  trees->add_option("--per-type", tf.per_type, "Agents per type");
  trees->add_option("--nu", tf.nu, "Smoothing value");
  trees->add_flag("--enumerate-only", tf.enumerate_only, "List shapes without computing leakage");
  trees->add_option("--out", tf.out, "Write the CSV to this file");
  trees->callback([&] { action = [&] { return cmd_trees(tf, g); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const std::string out = action();
    std::fwrite(out.data(), 1, out.size(), stdout);
    return 0;
  } catch (const ExplosionGuard& e) {
    std::cerr << "crnpriv: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "crnpriv: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "crnpriv: " << e.what() << "\n";
    return 2;
  }
}
