#pragma once

#include "endotree/kernels.hpp"
#include "endotree/linalg.hpp"
#include "endotree/model.hpp"
#include "endotree/rng.hpp"
#include "endotree/spectral.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace endotree {

enum class Regime { Subcritical, Supercritical, Critical };
enum class Decision { Endogenous, NonEndogenous, EndogenousCritical, Indeterminate };

const char* to_string(Regime r);
const char* to_string(Decision d);

struct Nondegen1Result {
  bool resolved = false;
  /// First depth with epsilon_min above the threshold (0 when unresolved).
  std::size_t m = 0;
  double epsilon_min = 0.0;
  /// epsilon_min(m) for m = 1..m_checked.
  std::vector<double> epsilon_by_m;
};

struct CriticalEvidence {
  bool nondegen2 = false;
  std::optional<Nondegen1Result> nondegen1;
};

struct EndogenyVerdict {
  Regime regime = Regime::Critical;
  Decision decision = Decision::Indeterminate;
  double rho = 0.0;
  double two_rho = 0.0;
  bool symmetric = true;
  std::optional<CriticalEvidence> critical_evidence;
  std::vector<std::string> notes;
};

struct ClassifyOptions {
  double tol_crit = 1e-9;
  std::size_t m_max = 3;
  unsigned threads = 1;
};

/// In the critical band the Gram check runs up to opts.m_max; a depth beyond
/// the enumeration cap throws ResourceError.
EndogenyVerdict classify(const RtpModel& model, const SpectralData& spectral, const ClassifyOptions& opts = {});

bool nondegen2(const SpectralData& spectral);

/// Law of the root state on a depth-m tree with leaves i.i.d. mu and the
/// given innovations on the internal vertices (breadth-first order, root
/// first; vertex i has daughters 2i+1 and 2i+2).
Vector conditional_root_distribution(const RtpModel& model, const std::vector<int>& innovations, std::size_t m);

/// Number of innovation assignments on a depth-m tree, or nullopt on overflow.
std::optional<std::uint64_t> innovation_assignment_count(std::size_t e, std::size_t m);

/// G_m(x, y) = sum over innovation assignments eps of w(eps) h_eps(x) h_eps(y).
/// Deterministic for any thread count. Throws ResourceError above `cap` assignments.
Matrix gram_matrix(const RtpModel& model, std::size_t m, unsigned threads = 1, std::uint64_t cap = 50'000'000);

/// Smallest eigenvalue of the pencil (G, diag(mu)).
double smallest_generalized_eigenvalue(const Matrix& gram, const std::vector<double>& mu);

/// Check (f, P_{K_m} f) >= eps (f, f) on functions of the root for m = 1..m_max.
Nondegen1Result nondegen1(const RtpModel& model, std::size_t m_max, unsigned threads = 1,
                          double threshold = 1e-10);

struct Nondegen1Estimate {
  std::size_t m = 0;
  std::size_t samples = 0;
  Matrix gram;
  /// Largest standard error over the Gram entries.
  double gram_standard_error = 0.0;
  double epsilon_min = 0.0;
  /// Batch-means standard error of epsilon_min (32 batches).
  double epsilon_standard_error = 0.0;
};

/// Monte Carlo version of the Gram check for depths too large to enumerate.
/// Approximate; intended for m in {4, 5}.
Nondegen1Estimate nondegen1_monte_carlo(const RtpModel& model, std::size_t m, std::size_t samples,
                                        std::uint64_t seed);

/// A coupling of mu with itself with full support: Sinkhorn scaling of a
/// random positive matrix.
PairMeasure random_coupling(const std::vector<double>& mu, RngStream& rng);

struct UniquenessProbe {
  std::vector<double> terminal_mass;
  std::vector<std::size_t> steps;
  std::vector<std::vector<double>> traces;
  /// Every start ended with off-diagonal mass below tol. Evidence, not proof.
  bool uniqueness_evidence = false;
};

UniquenessProbe bivariate_uniqueness_probe(const RtpModel& model, const std::vector<PairMeasure>& starts,
                                           std::size_t n, double tol, double stationary_tol = 1e-15);

std::string verdict_json(const EndogenyVerdict& verdict);

}  // namespace endotree
