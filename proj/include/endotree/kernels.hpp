#pragma once

#include "endotree/linalg.hpp"
#include "endotree/model.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace endotree {

/// Enumeration of S^2 as x * s + x', with the off-diagonal pairs listed in
/// the same lexicographic order. Off-diagonal positions index P^(-).
class PairIndex {
 public:
  explicit PairIndex(std::size_t s);

  std::size_t states() const { return s_; }
  std::size_t size() const { return s_ * s_; }
  std::size_t off_size() const { return off_.size(); }

  std::size_t pair(std::size_t x, std::size_t xp) const { return x * s_ + xp; }
  std::size_t first(std::size_t a) const { return a / s_; }
  std::size_t second(std::size_t a) const { return a % s_; }
  bool is_diagonal(std::size_t a) const { return first(a) == second(a); }
  std::size_t swap(std::size_t a) const { return pair(second(a), first(a)); }

  /// Pair index of the k-th off-diagonal position.
  std::size_t off_pair(std::size_t k) const { return off_[k]; }
  /// Off-diagonal position of a pair, or -1 on the diagonal.
  long off_position(std::size_t a) const { return pos_[a]; }
  std::size_t off_swap(std::size_t k) const { return static_cast<std::size_t>(pos_[swap(off_[k])]); }

  std::string label(const RtpModel& model, std::size_t a) const;

 private:
  std::size_t s_;
  std::vector<std::size_t> off_;
  std::vector<long> pos_;
};

/// Two-point kernel P^(2) (dense, row-stochastic on S^2) and its
/// off-diagonal block P^(-).
struct PairKernel {
  PairIndex index;
  Matrix full;
  Matrix minus;
};

/// Signed weights on S^2, stored as a row vector over PairIndex order.
class PairMeasure {
 public:
  PairMeasure() : s_(0) {}
  PairMeasure(std::size_t s, RowVector weights);

  static PairMeasure zero(std::size_t s);
  /// mu^↗: the diagonal coupling of mu with itself.
  static PairMeasure diagonal(const std::vector<double>& mu);
  /// mu (x) mu.
  static PairMeasure product(const std::vector<double>& mu);
  /// mu (x) L, i.e. weight mu(x) L(x, x').
  static PairMeasure from_operator(const std::vector<double>& mu, const Matrix& L);

  std::size_t states() const { return s_; }
  const RowVector& weights() const { return w_; }
  RowVector& weights() { return w_; }
  double operator()(std::size_t x, std::size_t xp) const { return w_[static_cast<Eigen::Index>(x * s_ + xp)]; }

  double total() const { return w_.sum(); }
  double off_diagonal_mass() const;
  std::vector<double> first_marginal() const;
  std::vector<double> second_marginal() const;
  bool is_signed() const { return w_.size() > 0 && w_.minCoeff() < 0.0; }

 private:
  std::size_t s_;
  RowVector w_;
};

/// P(x0, y) = sum over (x1, z) of mu(x1) nu(z) [phi(x0, x1, z) = y].
Matrix one_point_kernel(const RtpModel& model);

PairKernel two_point_kernel(const RtpModel& model);

/// Image of lambda0 (x) lambda1 (x) nu under the two-point map
/// ((x0, x0'), (x1, x1'), z) -> (phi(x0, x1, z), phi(x0', x1', z)).
/// Bilinear; extended to signed weights.
PairMeasure apply_T2(const RtpModel& model, const PairMeasure& lambda0, const PairMeasure& lambda1);

struct BivariateTrace {
  /// Off-diagonal masses d_0, d_1, ... of the iterates.
  std::vector<double> off_mass;
  PairMeasure terminal;
  /// Geometric mean of the last (up to) five ratios d_{k+1} / d_k; NaN when undefined.
  double decay_ratio = 0.0;
  bool stopped_below_tol = false;
  bool stopped_stationary = false;
};

/// Iterate lambda <- T2(lambda, lambda) for up to n_max steps, stopping once
/// the off-diagonal mass drops below `tol` or successive iterates differ by
/// at most `stationary_tol` (disabled when zero). Throws ConsistencyError if a
/// marginal drifts from mu by more than 1e-8.
BivariateTrace bivariate_iterate(const RtpModel& model, const PairMeasure& start, std::size_t n_max,
                                 double tol, double stationary_tol = 0.0);

/// 2^n (mu (x) mu) P_n^(2) g with g(x, x') = (f(x) - f(x'))(g(x) - g(x')) / 2.
/// With f == g this is the quadratic form of the level-n number operator.
double number_form(const RtpModel& model, const PairKernel& kernel, const Vector& f,
                   const Vector& g, std::size_t n);
double number_form(const RtpModel& model, const Vector& f, std::size_t n);

/// Row-major CSV with a header row of labels.
std::string matrix_csv(const Matrix& m, const std::vector<std::string>& row_labels,
                       const std::vector<std::string>& col_labels);
std::vector<std::string> pair_labels(const RtpModel& model, const PairIndex& index, bool off_only);

}  // namespace endotree
