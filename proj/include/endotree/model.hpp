#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace endotree {

/// A recursive tree process on finite alphabets.
///
/// States S and innovations E are ordered label lists. `phi` is the total
/// recursion table, stored flat with index (x0 * s + x1) * e + z, where the
/// entry is the index of the output state.
struct RtpModel {
  std::vector<std::string> states;
  std::vector<std::string> innovations;
  std::vector<double> mu;
  std::vector<double> nu;
  std::vector<int> phi;

  std::size_t s() const { return states.size(); }
  std::size_t e() const { return innovations.size(); }

  std::size_t phi_index(std::size_t x0, std::size_t x1, std::size_t z) const {
    return (x0 * s() + x1) * e() + z;
  }
  int operator()(std::size_t x0, std::size_t x1, std::size_t z) const {
    return phi[phi_index(x0, x1, z)];
  }

  bool operator==(const RtpModel&) const = default;
};

struct Tolerances {
  double mass = 1e-12;
  double invariance = 1e-10;
};

struct ValidationReport {
  bool ok = false;
  bool symmetric = false;
  double invariance_residual = 0.0;
  double mu_mass_residual = 0.0;
  double nu_mass_residual = 0.0;
  std::vector<std::string> trimmed_states;
  std::vector<std::string> trimmed_innovations;
  std::vector<std::string> messages;
  /// The model after zero-mass states and innovations are removed.
  RtpModel model;
};

/// Structural checks, trimming and the invariance residual.
///
/// Throws InvalidModel when the table has the wrong size or an out-of-range
/// target; every other finding is reported through `ok` and `messages`.
ValidationReport validate(const RtpModel& model, const Tolerances& tol = {});

/// Validate and return the trimmed model, throwing InvalidModel if not ok.
RtpModel validated(const RtpModel& model, const Tolerances& tol = {});

/// phi(x0, x1, z) == phi(x1, x0, z) everywhere.
bool is_symmetric(const RtpModel& model);

/// Pushforward of mu0 (x) mu1 (x) nu under phi.
std::vector<double> pushforward(const RtpModel& model, const std::vector<double>& mu0,
                                const std::vector<double>& mu1);

/// Largest |T(mu, mu) - mu| entry.
double invariance_residual(const RtpModel& model);

/// Solve the distributional fixed point by iterating mu <- T(mu, mu) from the
/// uniform vector. Only `phi`, `nu` and the alphabets of `model` are used.
/// Throws ConvergenceError carrying the last residual.
std::vector<double> find_invariant(const RtpModel& model, std::size_t max_iter = 100000,
                                   double tol = 1e-14);

/// The observable f(x) = x: numeric state labels as numbers, otherwise the state indices.
std::vector<double> label_values(const RtpModel& model);

/// Names accepted by builtin().
const std::vector<std::string>& builtin_names();

/// SELECT, CONST, PURE-INNOVATION, XOR, ANDOR, ANDOR-NOISE.
RtpModel builtin(const std::string& name);

struct LoadedModel {
  RtpModel model;
  /// Parser findings, e.g. rational entries rounded to the nearest double.
  std::vector<std::string> notes;
};

LoadedModel parse_model(const std::string& json_text);
LoadedModel load(const std::string& path);
std::string dump_model(const RtpModel& model);
void save(const RtpModel& model, const std::string& path);

/// Apply state and innovation relabelings: new index of old state x is
/// state_perm[x], likewise for innovations.
RtpModel permuted(const RtpModel& model, const std::vector<std::size_t>& state_perm,
                  const std::vector<std::size_t>& innovation_perm);

}  // namespace endotree
