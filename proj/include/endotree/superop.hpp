#pragma once

#include "endotree/kernels.hpp"
#include "endotree/linalg.hpp"
#include "endotree/model.hpp"
#include "endotree/spectral.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace endotree {

/// Operators on functions over S are plain s x s matrices acting on column
/// vectors, with the mu-weighted inner product (f, g) = sum mu(x) f(x) g(x).
using OperatorOnS = Matrix;

/// The linear superoperator calP and the quadratic superoperator calQ induced
/// by the two-point kernel and the two-point map of a validated model.
class Superoperators {
 public:
  explicit Superoperators(RtpModel model);

  const RtpModel& model() const { return model_; }
  const PairKernel& kernel() const { return kernel_; }
  std::size_t states() const { return model_.s(); }

  /// (mu (x) L) P^(2) = mu (x) calP(L).
  OperatorOnS calP(const OperatorOnS& L) const;
  /// T2(mu (x) L, mu (x) L) = mu (x) calQ(L).
  OperatorOnS calQ(const OperatorOnS& L) const;
  /// Polarized form: T2(mu (x) A, mu (x) B) = mu (x) calQ(A, B).
  OperatorOnS calQ(const OperatorOnS& A, const OperatorOnS& B) const;

  double inner(const Vector& f, const Vector& g) const;
  /// (f, L g) in the mu inner product.
  double form(const Vector& f, const OperatorOnS& L, const Vector& g) const;

  /// Projection onto constants: (P1 f)(x) = sum mu f.
  OperatorOnS project_constants() const;
  /// I - P1.
  OperatorOnS project_mean_zero() const;

 private:
  OperatorOnS divide_by_mu(const PairMeasure& m) const;

  RtpModel model_;
  PairKernel kernel_;
};

/// Generator of the jump process with rates kappa(x, x') / mu(x).
struct GeneratorQ {
  OperatorOnS matrix;
};

/// Throws DomainError when rho = 0 or no Perron vector is available.
GeneratorQ build_Q(const RtpModel& model, const SpectralData& spectral);

/// E(f, g) = 1/2 sum over x != x' of (f(x') - f(x)) (g(x') - g(x)) kappa(x, x'),
/// which equals -(f, Q g).
double dirichlet_form(const PairIndex& index, const Vector& kappa, const Vector& f, const Vector& g);

/// ||calP(Q) - rho Q||_max.
double check_PQ(const Superoperators& ops, const SpectralData& spectral, const GeneratorQ& Q);

/// 2 (2 rho)^-2 (calQ Q + calP(Q^2)) - Q^2.
OperatorOnS q_hat(const Superoperators& ops, const SpectralData& spectral, const GeneratorQ& Q);

/// G_n(z) = (f, calQ^n(P1 + z P1perp) f), the generating function of the
/// spectral measure of the level-n number operator.
double pgf_spectral_measure(const Superoperators& ops, const Vector& f, std::size_t n, double z);

/// Same, with the mean-zero part scaled by (1 - c) so that z close to 1 keeps
/// full precision: G_n(1 - c).
double pgf_spectral_measure_near_one(const Superoperators& ops, const Vector& f, std::size_t n, double c);

/// Masses mu_f^(n)(k), k = 0..2^n, by propagating the operator-valued
/// polynomial coefficients through the polarized calQ. Limited to n <= 6.
std::vector<double> spectral_masses(const Superoperators& ops, const Vector& f, std::size_t n);

struct SpectralMeasureReport {
  std::size_t level = 0;
  std::vector<double> z;
  std::vector<double> values;
  /// Present for level <= 6.
  std::optional<std::vector<double>> masses;
  double mean = 0.0;
  std::vector<double> t;
  /// G_n(exp(-(2 rho)^-n t)); empty when rho = 0.
  std::vector<double> laplace;
};

SpectralMeasureReport spectral_measure_report(const Superoperators& ops, const Vector& f, std::size_t n,
                                              const std::vector<double>& z_grid, double rho,
                                              const std::vector<double>& t_grid);

/// CSV with columns n, kind, point, value.
std::string spectral_report_csv(const std::vector<SpectralMeasureReport>& reports);

struct LaplaceLimit {
  double t = 0.0;
  /// v_n = G_n(exp(-(2 rho)^-n t)), n = 0..n_max.
  std::vector<double> values;
  /// |v_{n+1} - v_n|.
  std::vector<double> increments;
  double estimate = 0.0;
};

/// Requires 2 rho > 1 and a primitive P^(-); throws DomainError otherwise.
LaplaceLimit laplace_limit(const Superoperators& ops, const SpectralData& spectral, const Vector& f, double t,
                           std::size_t n_max);

struct QInfinityNorm {
  /// Partial sum for ||Q_inf f||^2.
  double value = 0.0;
  /// Geometric tail estimate from the largest observed |term_r| / (2 rho)^-r.
  double tail_bound = 0.0;
  std::vector<double> terms;
};

/// 2 sum_{r=0}^{r_max} (2 rho)^(-2r-2) 2^r (f, calP^r(calQ Q) f) for f on S.
QInfinityNorm q_infinity_norm(const Superoperators& ops, const SpectralData& spectral, const GeneratorQ& Q,
                              const Vector& f, std::size_t r_max);

struct Con2Trace {
  /// (2 rho)^-n (f, A_n g), n = 0..n_max.
  std::vector<double> sequence;
  /// -(f, Q g).
  double target = 0.0;
  std::vector<double> deviation;
};

Con2Trace con2_check(const Superoperators& ops, const SpectralData& spectral, const GeneratorQ& Q,
                     const Vector& f, const Vector& g, std::size_t n_max);

}  // namespace endotree
