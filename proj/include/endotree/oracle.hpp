#pragma once

#include "endotree/linalg.hpp"
#include "endotree/model.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace endotree {

/// Exhaustive computations on the depth-n tree: 2^n leaves, 2^n - 1 internal
/// vertices. Vertices use heap numbering (root 0, daughters of i are 2i+1 and
/// 2i+2), so leaf j is vertex 2^n - 1 + j and leaves are in path order.
constexpr std::uint64_t kEnumerationCap = 100'000'000;

struct TreeAssignment {
  std::size_t level = 0;
  std::vector<int> leaves;
  /// Innovations on internal vertices, breadth-first (index = vertex).
  std::vector<int> innovations;
  /// Internal states, same indexing, computed bottom-up through phi.
  std::vector<int> internal;
  double weight = 0.0;

  int root() const { return internal.empty() ? leaves.front() : internal.front(); }
};

/// s^(2^n) e^(2^n - 1), or UINT64_MAX on overflow.
std::uint64_t assignment_count(const RtpModel& model, std::size_t n);

/// Visit every assignment with its exact weight. Throws ResourceError above `cap`.
void enumerate(const RtpModel& model, std::size_t n, const std::function<void(const TreeAssignment&)>& visit,
               std::uint64_t cap = kEnumerationCap);

/// f(root) as a flat tensor over (leaves, innovations): leaf 0 is the most
/// significant digit, innovations follow in breadth-first order, each digit
/// in its own radix (s for leaves, e for innovations).
struct RootTensor {
  std::size_t level = 0;
  std::size_t s = 0;
  std::size_t e = 0;
  /// Root state per (leaf configuration, innovation configuration).
  std::vector<int> root_state;
  /// Product weights of the leaf and the innovation configurations.
  std::vector<double> leaf_weight;
  std::vector<double> innovation_weight;

  std::size_t leaf_count() const { return std::size_t{1} << level; }
  std::size_t innovation_block() const { return innovation_weight.size(); }
};

/// Tensors are held in memory, so they get a tighter cap than enumerate().
constexpr std::uint64_t kTensorCap = 1u << 24;

RootTensor root_tensor(const RtpModel& model, std::size_t n, std::uint64_t cap = kTensorCap);

/// Squared norms ||P_{H_S} f||^2 keyed by the leaf subset S as a bitmask (bit j = leaf j).
std::map<std::uint64_t, double> exact_subset_norms(const RtpModel& model, const Vector& f, std::size_t n);

/// mu_f^(n)(k) for k = 0..2^n.
std::vector<double> exact_spectral_measure(const RtpModel& model, const Vector& f, std::size_t n);

/// Evaluate sum_k z^k masses[k].
double measure_pgf(const std::vector<double>& masses, double z);

struct KnResidual {
  /// ||f - E[f | innovations]||^2.
  double residual = 0.0;
  /// (f, A_n f).
  double number_form = 0.0;
};

KnResidual exact_kn_residual(const RtpModel& model, const Vector& f, std::size_t n);

/// Probability that two roots differ when innovations are shared and the two
/// leaf configurations are independent.
double exact_coupling_disagreement(const RtpModel& model, std::size_t n);

/// ||Q_n f||^2 with Q_n = scale * sum over leaves of Q acting on that leaf.
double exact_qn_norm_sq(const RtpModel& model, const Matrix& Q, double scale, const Vector& f, std::size_t n);

/// Spectral radius from a dense general eigen-decomposition.
double dense_spectral_radius(const Matrix& m);

struct OracleCheck {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Every exact identity at level n for the given root observables.
std::vector<OracleCheck> oracle_checks(const RtpModel& model, std::size_t n, const std::vector<Vector>& observables);

}  // namespace endotree
