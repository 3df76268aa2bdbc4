#pragma once

#include "endotree/kernels.hpp"
#include "endotree/linalg.hpp"
#include "endotree/model.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace endotree {

/// Strongly connected components of the support digraph (edge i -> j iff
/// M(i, j) > 0), in Tarjan completion order (sinks of the condensation first).
struct SupportComponents {
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::size_t> component_of;
  /// reaches[a][b]: component b is reachable from component a (a reaches itself).
  std::vector<std::vector<bool>> reaches;
};

SupportComponents support_components(const Matrix& m);

struct StructureFlags {
  bool irreducible = false;
  bool primitive = false;
  /// Period of the single class; only meaningful when irreducible.
  std::size_t period = 1;
  /// Set for the empty matrix.
  bool degenerate = false;
  std::size_t components = 0;
};

StructureFlags structure_flags(const Matrix& pminus);

/// Spectral radius of a nonnegative square matrix (0 for the empty matrix).
///
/// Each strongly connected block is handled separately by power iteration on
/// the shifted block B + I, bracketed by Collatz-Wielandt bounds; the result
/// is the largest block root. Throws ConvergenceError with the last bracket
/// width when the budget runs out.
double perron_root(const Matrix& pminus, double tol = 1e-13, std::size_t max_iter = 2'000'000);

struct PerronVectors {
  double rho = 0.0;
  /// Left eigenvector (kappa P = rho kappa), swap-symmetrized, over off-diagonal positions.
  Vector kappa;
  /// Right eigenvector (P theta = rho theta).
  Vector theta;
  /// kappa extended to S^2: off-diagonal kappa, diagonal minus the row sum.
  Matrix kappa_star;
  /// More than one dominant class: the choice of kappa is not canonical.
  bool reducible_choice = false;
  std::size_t dominant_classes = 0;
  /// Both normalizations hold (sum theta mu mu = 1, sum theta kappa = 1).
  bool normalized = false;
};

/// Perron vectors of P^(-) with theta scaled so sum theta(x,x') mu(x) mu(x') = 1
/// and then kappa so sum theta kappa = 1.
///
/// In the reducible case kappa gives equal weight to every dominant class that
/// reaches no other dominant class, theta to every dominant class reached by
/// no other one. Throws DomainError when rho = 0.
PerronVectors eigenvectors(const PairIndex& index, const Matrix& pminus, const std::vector<double>& mu,
                           double tol = 1e-13);

struct SpectralData {
  double rho = 0.0;
  StructureFlags flags;
  bool has_vectors = false;
  PerronVectors vectors;
};

SpectralData analyze_spectrum(const RtpModel& model, const PairKernel& kernel);

/// max |rho^-n P^n - theta kappa^T| entrywise. Requires a primitive P^(-) with rho > 0.
double check_con_limit(const Matrix& pminus, const SpectralData& spectral, std::size_t n);

struct BoundednessProbe {
  /// ||2^n P^n||_inf for n = 0..n_max.
  std::vector<double> norms;
  double maximum = 0.0;
  std::size_t argmax = 0;
};

BoundednessProbe two_rho_boundedness_probe(const Matrix& pminus, std::size_t n_max);

std::string spectral_json(const RtpModel& model, const PairIndex& index, const SpectralData& spectral);

}  // namespace endotree
