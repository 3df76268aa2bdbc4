// Command-line front end: validation, classification, bivariate probes,
// spectral measures, dynamics, exact oracle checks and the critical search.

#include "endotree/endogeny.hpp"
#include "endotree/errors.hpp"
#include "endotree/kernels.hpp"
#include "endotree/model.hpp"
#include "endotree/montecarlo.hpp"
#include "endotree/oracle.hpp"
#include "endotree/parallel.hpp"
#include "endotree/spectral.hpp"
#include "endotree/superop.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace endotree;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kFailure = 1, kInvalid = 2, kIndeterminate = 3, kResource = 4 };

struct Common {
  std::string path;
  std::string builtin_name;
  std::string out;
  unsigned threads = default_threads();
};

struct Input {
  LoadedModel loaded;
  ValidationReport report;
};

Input read_input(const Common& c) {
  Input in;
  if (!c.builtin_name.empty()) {
    in.loaded.model = builtin(c.builtin_name);
  } else if (!c.path.empty()) {
    in.loaded = load(c.path);
  } else {
    throw InvalidModel("no model given: pass a model file or --builtin NAME");
  }
  in.report = validate(in.loaded.model);
  return in;
}

std::string source_name(const Common& c) { return c.builtin_name.empty() ? c.path : "builtin:" + c.builtin_name; }

json validation_json(const Input& in) {
  const auto& r = in.report;
  json j;
  j["ok"] = r.ok;
  j["symmetric"] = r.symmetric;
  j["invariance_residual"] = r.invariance_residual;
  j["mu_mass_residual"] = r.mu_mass_residual;
  j["nu_mass_residual"] = r.nu_mass_residual;
  j["trimmed_states"] = r.trimmed_states;
  j["trimmed_innovations"] = r.trimmed_innovations;
  std::vector<std::string> messages = r.messages;
  messages.insert(messages.end(), in.loaded.notes.begin(), in.loaded.notes.end());
  j["messages"] = messages;
  return j;
}

json model_summary(const RtpModel& m) {
  json j;
  j["states"] = m.states;
  j["innovations"] = m.innovations;
  j["mu"] = m.mu;
  j["nu"] = m.nu;
  return j;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.cols(); ++k) row[static_cast<std::size_t>(k)] = m(i, k);
    rows.push_back(row);
  }
  return rows;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw InvalidModel("cannot parse number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

Vector observable(const RtpModel& model, const std::string& text) {
  const std::vector<double> values = text.empty() ? label_values(model) : parse_list(text);
  if (values.size() != model.s())
    throw InvalidModel("observable has " + std::to_string(values.size()) + " entries for " +
                       std::to_string(model.s()) + " states (after trimming)");
  return to_vector(values);
}

double millis_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

/// Validation failures stop every command except validate and oracle-check.
std::optional<int> reject_invalid(const Input& in) {
  if (in.report.ok) return std::nullopt;
  json j;
  j["error"] = "invalid model";
  j["validation"] = validation_json(in);
  print(j);
  return kInvalid;
}

int cmd_validate(const Common& c) {
  const Input in = read_input(c);
  json j;
  j["source"] = source_name(c);
  j["validation"] = validation_json(in);
  if (in.report.ok) j["model"] = model_summary(in.report.model);
  print(j);
  return in.report.ok ? kOk : kInvalid;
}

int cmd_analyze(const Common& c, std::size_t m_max, double tol_crit) {
  const auto t0 = std::chrono::steady_clock::now();
  const Input in = read_input(c);
  if (auto rc = reject_invalid(in)) return *rc;
  const RtpModel& model = in.report.model;
  const double t_validate = millis_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  const PairKernel kernel = two_point_kernel(model);
  const SpectralData spectral = analyze_spectrum(model, kernel);
  const double t_spectral = millis_since(t1);

  const auto t2 = std::chrono::steady_clock::now();
  ClassifyOptions opts;
  opts.m_max = m_max;
  opts.tol_crit = tol_crit;
  opts.threads = c.threads;
  const EndogenyVerdict verdict = classify(model, spectral, opts);
  const double t_classify = millis_since(t2);

  json j;
  j["source"] = source_name(c);
  j["version"] = kVersion;
  j["model"] = model_summary(model);
  j["validation"] = validation_json(in);
  json kstats;
  kstats["one_point"] = matrix_json(one_point_kernel(model));
  kstats["pminus_labels"] = pair_labels(model, kernel.index, true);
  kstats["pminus"] = matrix_json(kernel.minus);
  kstats["pminus_max_row_sum"] = kernel.minus.size() ? kernel.minus.rowwise().sum().maxCoeff() : 0.0;
  j["kernel"] = kstats;
  j["spectral"] = json::parse(spectral_json(model, kernel.index, spectral));
  j["verdict"] = json::parse(verdict_json(verdict));
  j["tolerances"] = {{"tol_crit", tol_crit}, {"m_max", m_max}, {"perron", 1e-13}};
  j["timings_ms"] = {{"validate", t_validate}, {"spectral", t_spectral}, {"classify", t_classify}};
  print(j);
  return verdict.decision == Decision::Indeterminate ? kIndeterminate : kOk;
}

int cmd_bivariate(const Common& c, std::size_t starts, std::size_t n, double tol, std::uint64_t seed) {
  const Input in = read_input(c);
  if (auto rc = reject_invalid(in)) return *rc;
  const RtpModel& model = in.report.model;
  if (starts == 0) throw InvalidModel("--starts must be at least 1");

  std::vector<PairMeasure> initial{PairMeasure::product(model.mu)};
  for (std::size_t k = 1; k < starts; ++k) {
    RngStream rng(seed, k);
    initial.push_back(random_coupling(model.mu, rng));
  }
  const UniquenessProbe probe = bivariate_uniqueness_probe(model, initial, n, tol);

  std::ostringstream csv;
  csv.precision(17);
  csv << "# seed=" << seed << " tol=" << tol << "\nstart,step,off_diagonal_mass\n";
  for (std::size_t k = 0; k < probe.traces.size(); ++k)
    for (std::size_t step = 0; step < probe.traces[k].size(); ++step)
      csv << k << ',' << step << ',' << probe.traces[k][step] << '\n';
  if (!c.out.empty()) write_file(c.out, csv.str());

  json j;
  j["source"] = source_name(c);
  j["seed"] = seed;
  j["tol"] = tol;
  j["steps"] = probe.steps;
  j["terminal_mass"] = probe.terminal_mass;
  j["uniqueness_evidence"] = probe.uniqueness_evidence;
  if (!c.out.empty()) j["csv"] = c.out;
  print(j);
  return kOk;
}

int cmd_spectrum(const Common& c, const std::string& f_text, std::size_t n, const std::string& t_text,
                 const std::string& z_text) {
  const Input in = read_input(c);
  if (auto rc = reject_invalid(in)) return *rc;
  const RtpModel& model = in.report.model;
  const Vector f = observable(model, f_text);
  const std::vector<double> t_grid = parse_list(t_text);
  const std::vector<double> z_grid = parse_list(z_text);

  const PairKernel kernel = two_point_kernel(model);
  const SpectralData spectral = analyze_spectrum(model, kernel);
  const Superoperators ops(model);
  std::vector<SpectralMeasureReport> reports;
  json levels = json::array();
  for (std::size_t level = 1; level <= n; ++level) {
    reports.push_back(spectral_measure_report(ops, f, level, z_grid, spectral.rho, t_grid));
    const auto& r = reports.back();
    json row{{"n", level}, {"mean", r.mean}, {"pgf", r.values}};
    if (r.masses) row["masses"] = *r.masses;
    if (!r.laplace.empty()) row["laplace"] = r.laplace;
    levels.push_back(row);
  }
  if (!c.out.empty()) write_file(c.out, spectral_report_csv(reports));

  json j;
  j["source"] = source_name(c);
  j["f"] = to_std(f);
  j["rho"] = spectral.rho;
  j["z"] = z_grid;
  j["t"] = t_grid;
  j["levels"] = levels;
  if (2.0 * spectral.rho > 1.0 && spectral.flags.primitive) {
    json limits = json::array();
    for (double t : t_grid)
      if (t > 0.0) {
        const LaplaceLimit lim = laplace_limit(ops, spectral, f, t, 20);
        limits.push_back({{"t", t}, {"estimate", lim.estimate}, {"last_increment", lim.increments.back()}});
      }
    j["laplace_limit"] = limits;
  }
  if (!c.out.empty()) j["csv"] = c.out;
  print(j);
  return kOk;
}

int cmd_dynamics(const Common& c, const std::string& kind, const std::string& f_text, std::size_t n, double t_end,
                 std::uint64_t seed, const std::string& lag_text, std::uint64_t min_events,
                 const std::string& autocov_out) {
  const Input in = read_input(c);
  if (auto rc = reject_invalid(in)) return *rc;
  const RtpModel& model = in.report.model;
  const Vector f = observable(model, f_text);
  if (!(t_end > 0.0)) throw InvalidModel("--t-end must be positive");

  const PairKernel kernel = two_point_kernel(model);
  const SpectralData spectral = analyze_spectrum(model, kernel);
  AutocovarianceOptions opts;
  opts.n = n;
  opts.seed = seed;
  opts.threads = c.threads;
  opts.min_events = min_events;
  opts.lags = parse_list(lag_text);
  opts.horizon = std::max(t_end, 2.0 * *std::max_element(opts.lags.begin(), opts.lags.end()) + 1.0);
  if (kind == "generator") {
    opts.dynamics = Dynamics::Generator;
    opts.Q = build_Q(model, spectral).matrix;
    opts.rho = spectral.rho;
  } else if (kind != "refresh") {
    throw InvalidModel("--kind must be 'refresh' or 'generator'");
  }

  RngStream rng(seed, 0);
  const Trajectory path = opts.dynamics == Dynamics::Refresh
                              ? refresh_dynamics(model, n, t_end, rng)
                              : gillespie_qn(model, opts.Q, opts.rho, n, t_end, rng);
  if (!c.out.empty()) write_file(c.out, trajectory_csv(path, model, seed));

  // Stream 0 is the trajectory above; replicates use a separate seed.
  opts.seed = seed + 1;
  const AutocovarianceEstimate est = root_autocovariance(model, f, opts);

  // Exact comparison values: finite-n semigroup for refresh dynamics, the
  // large-n limit for the generator dynamics when it exists.
  std::vector<double> exact;
  const Superoperators ops(model);
  json table = json::array();
  for (std::size_t l = 0; l < est.lags.size(); ++l) {
    const double t = est.lags[l];
    std::optional<double> reference;
    if (opts.dynamics == Dynamics::Refresh) {
      reference = pgf_spectral_measure_near_one(ops, f, n, -std::expm1(-t));
    } else if (2.0 * spectral.rho > 1.0 && spectral.flags.primitive && t > 0.0) {
      reference = laplace_limit(ops, spectral, f, t, 20).estimate;
    }
    json row{{"lag", t}, {"estimate", est.values[l]}, {"standard_error", est.standard_errors[l]}};
    if (reference) {
      row["exact"] = *reference;
      row["z_score"] = est.standard_errors[l] > 0.0 ? (est.values[l] - *reference) / est.standard_errors[l] : 0.0;
      row["within_3se"] = std::abs(est.values[l] - *reference) <= 3.0 * est.standard_errors[l] + 1e-12;
      exact.push_back(*reference);
    }
    table.push_back(row);
  }
  if (exact.size() != est.lags.size()) exact.clear();
  if (!autocov_out.empty()) write_file(autocov_out, autocovariance_csv(est, exact));

  json j;
  j["source"] = source_name(c);
  j["kind"] = kind;
  j["n"] = n;
  j["seed"] = seed;
  j["trajectory"] = {{"t_end", t_end}, {"events", path.events}, {"root_changes", path.times.size() - 1}};
  j["autocovariance"] = {{"seed", est.seed},
                         {"replicates", est.replicates},
                         {"batches", est.batches},
                         {"events", est.events},
                         {"table", table}};
  print(j);
  return kOk;
}

int cmd_oracle_check(const Common& c, std::size_t n) {
  if (n < 1 || n > 2) throw InvalidModel("--n must be 1 or 2");
  const Input in = read_input(c);
  // Structurally sound models are checked even when validation fails, so a
  // broken fixed point shows up as a failing row.
  const RtpModel& model = in.report.ok ? in.report.model : in.loaded.model;
  std::vector<Vector> observables{to_vector(label_values(model))};
  for (std::size_t x = 0; x < model.s(); ++x) {
    Vector ind = Vector::Zero(static_cast<Eigen::Index>(model.s()));
    ind[static_cast<Eigen::Index>(x)] = 1.0;
    observables.push_back(ind);
  }
  const auto checks = oracle_checks(model, n, observables);
  json rows = json::array();
  bool all = true;
  for (const auto& check : checks) {
    rows.push_back({{"check", check.name}, {"value", check.value}, {"tolerance", check.tolerance}, {"pass", check.pass}});
    all = all && check.pass;
  }
  json j;
  j["source"] = source_name(c);
  j["n"] = n;
  j["validation"] = validation_json(in);
  j["checks"] = rows;
  j["all_pass"] = all;
  print(j);
  if (!in.report.ok) return kInvalid;
  return all ? kOk : kFailure;
}

int cmd_search(const Common& c, std::size_t budget, std::uint64_t seed, double band, std::size_t m_max) {
  const SearchResult result = search_critical_symmetric(seed, budget, band, m_max, c.threads);
  json candidates = json::array();
  for (const auto& cand : result.candidates) {
    json entry{{"draw", cand.draw}, {"rho", cand.screen.rho}, {"reason", cand.screen.reason}};
    if (cand.screen.nondegen1) entry["epsilon_by_m"] = cand.screen.nondegen1->epsilon_by_m;
    entry["model"] = json::parse(dump_model(cand.model));
    candidates.push_back(entry);
  }
  json j;
  j["seed"] = seed;
  j["budget"] = budget;
  j["band"] = band;
  j["m_max"] = m_max;
  j["examined"] = result.examined;
  j["in_band"] = result.in_band;
  j["candidates"] = candidates;
  print(j);
  return kOk;
}

void add_common(CLI::App* cmd, Common& c, bool with_out) {
  cmd->add_option("model", c.path, "Model JSON file");
  cmd->add_option("--builtin", c.builtin_name, "Use a built-in model instead of a file")
      ->check(CLI::IsMember(builtin_names()));
  cmd->add_option("--threads", c.threads, "Worker threads (default: ENDOTREE_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  if (with_out) cmd->add_option("--out", c.out, "CSV output path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Endogeny analysis of finite recursive tree processes"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common c;

  auto* validate_cmd = app.add_subcommand("validate", "Check a model and report trimming and residuals");
  add_common(validate_cmd, c, false);

  std::size_t m_max = 3;
  double tol_crit = 1e-9;
  auto* analyze_cmd = app.add_subcommand("analyze", "Classify a model as endogenous or not");
  add_common(analyze_cmd, c, false);
  analyze_cmd->add_option("--mmax", m_max, "Largest depth for the Gram check");
  analyze_cmd->add_option("--tol-crit", tol_crit, "Half-width of the critical band around 2 rho = 1");

  std::size_t starts = 4, steps = 200;
  double tol = 1e-12;
  std::uint64_t seed = 1;
  auto* bivariate_cmd = app.add_subcommand("bivariate", "Iterate the bivariate map from several couplings");
  add_common(bivariate_cmd, c, true);
  bivariate_cmd->add_option("--starts", starts, "Number of initial couplings (the first is mu x mu)");
  bivariate_cmd->add_option("--n", steps, "Maximum number of steps");
  bivariate_cmd->add_option("--tol", tol, "Stop once the off-diagonal mass is below this");
  bivariate_cmd->add_option("--seed", seed, "Seed for the random couplings");

  std::string f_text, t_text = "0.1,1", z_text = "0,0.25,0.5,0.75,1";
  std::size_t levels = 4;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "Spectral measure of a root observable");
  add_common(spectrum_cmd, c, true);
  spectrum_cmd->add_option("--f", f_text, "Observable values, comma separated (default: numeric labels)");
  spectrum_cmd->add_option("--n", levels, "Largest level");
  spectrum_cmd->add_option("--t", t_text, "Rescaled times, comma separated");
  spectrum_cmd->add_option("--z", z_text, "Generating-function arguments, comma separated");

  std::string kind = "refresh", lag_text = "0.2,1", autocov_out;
  std::size_t depth = 4;
  double t_end = 10.0;
  std::uint64_t min_events = 100000;
  auto* dynamics_cmd = app.add_subcommand("dynamics", "Simulate leaf dynamics and compare with exact values");
  add_common(dynamics_cmd, c, true);
  dynamics_cmd->add_option("--kind", kind, "refresh or generator")->check(CLI::IsMember({"refresh", "generator"}));
  dynamics_cmd->add_option("--f", f_text, "Observable values, comma separated (default: numeric labels)");
  dynamics_cmd->add_option("--n", depth, "Tree depth");
  dynamics_cmd->add_option("--t-end", t_end, "Length of the printed trajectory");
  dynamics_cmd->add_option("--seed", seed, "Random seed");
  dynamics_cmd->add_option("--lags", lag_text, "Autocovariance lags, comma separated");
  dynamics_cmd->add_option("--events", min_events, "Minimum number of simulated jumps for the estimate");
  dynamics_cmd->add_option("--autocov-out", autocov_out, "CSV path for the autocovariance table");

  std::size_t oracle_n = 1;
  auto* oracle_cmd = app.add_subcommand("oracle-check", "Exact enumeration checks at depth 1 or 2");
  add_common(oracle_cmd, c, false);
  oracle_cmd->add_option("--n", oracle_n, "Depth (1 or 2)");

  std::size_t budget = 100;
  double band = 1e-6;
  auto* search_cmd = app.add_subcommand("search", "Scan random symmetric models for critical candidates");
  search_cmd->add_option("--budget", budget, "Number of random models");
  search_cmd->add_option("--seed", seed, "Random seed");
  search_cmd->add_option("--band", band, "Half-width of the critical band");
  search_cmd->add_option("--mmax", m_max, "Largest depth for the Gram check");
  search_cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    if (*validate_cmd) return cmd_validate(c);
    if (*analyze_cmd) return cmd_analyze(c, m_max, tol_crit);
    if (*bivariate_cmd) return cmd_bivariate(c, starts, steps, tol, seed);
    if (*spectrum_cmd) return cmd_spectrum(c, f_text, levels, t_text, z_text);
    if (*dynamics_cmd)
      return cmd_dynamics(c, kind, f_text, depth, t_end, seed, lag_text, min_events, autocov_out);
    if (*oracle_cmd) return cmd_oracle_check(c, oracle_n);
    if (*search_cmd) return cmd_search(c, budget, seed, band, m_max);
  } catch (const InvalidModel& e) {
    std::cerr << "invalid input: " << e.what() << std::endl;
    return kInvalid;
  } catch (const DomainError& e) {
    std::cerr << "not applicable: " << e.what() << std::endl;
    return kInvalid;
  } catch (const ResourceError& e) {
    std::cerr << "resource cap: " << e.what() << std::endl;
    return kResource;
  } catch (const ConvergenceError& e) {
    std::cerr << "no convergence: " << e.what() << " (residual " << e.residual() << ")" << std::endl;
    return kResource;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << std::endl;
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kFailure;
  }
  return kFailure;
}
