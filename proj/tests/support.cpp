#include "support.hpp"

#include "endotree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace endotree::testing {

RtpModel model(const std::string& name) { return validated(builtin(name)); }

Vector label_observable(const RtpModel& m) { return to_vector(label_values(m)); }

Vector random_vector(std::size_t n, RngStream& rng, double lo, double hi) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = lo + (hi - lo) * rng.uniform();
  return v;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double lo, double hi) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = lo + (hi - lo) * rng.uniform();
  return m;
}

PairMeasure random_signed_measure(std::size_t s, RngStream& rng) {
  return PairMeasure(s, random_vector(s * s, rng).transpose());
}

std::vector<std::size_t> random_permutation(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.next() % i]);
  return p;
}

namespace {

bool probe_agrees(const RtpModel& m, const EndogenyVerdict& verdict, RngStream& rng, std::string& detail) {
  constexpr double tol = 1e-10;
  constexpr std::size_t budget = 50'000;
  if (verdict.regime == Regime::Subcritical) {
    std::vector<PairMeasure> starts{PairMeasure::product(m.mu), random_coupling(m.mu, rng), random_coupling(m.mu, rng)};
    // No stationary stop: slow geometric decay must be followed all the way down.
    const UniquenessProbe probe = bivariate_uniqueness_probe(m, starts, budget, tol, 0.0);
    if (!probe.uniqueness_evidence) {
      detail += "subcritical but off-diagonal mass stayed at " + std::to_string(*std::max_element(
                    probe.terminal_mass.begin(), probe.terminal_mass.end())) + "; ";
      return false;
    }
    return true;
  }
  const UniquenessProbe probe = bivariate_uniqueness_probe(m, {PairMeasure::product(m.mu)}, budget, tol, 1e-15);
  if (probe.uniqueness_evidence) {
    detail += "supercritical but the product start collapsed onto the diagonal; ";
    return false;
  }
  return true;
}

}  // namespace

PropertyOutcome check_model_properties(const RtpModel& m, std::uint64_t seed) {
  PropertyOutcome out;
  RngStream rng(seed, 0);
  std::ostringstream detail;

  const ValidationReport report = validate(m);
  out.validation = report.ok && report.model == m;
  if (!out.validation) detail << "validation failed; ";

  const Matrix P = one_point_kernel(m);
  const PairKernel kernel = two_point_kernel(m);
  const PairIndex& index = kernel.index;
  const double p_rows = max_abs(Vector(P.rowwise().sum().array() - 1.0));
  const double p2_rows = max_abs(Vector(kernel.full.rowwise().sum().array() - 1.0));
  out.stochastic = p_rows <= 1e-12 && p2_rows <= 1e-12 && P.minCoeff() >= 0.0 && kernel.full.minCoeff() >= 0.0;
  if (!out.stochastic) detail << "row sums off by " << std::max(p_rows, p2_rows) << "; ";

  out.absorption = true;
  for (std::size_t a = 0; a < index.size(); ++a)
    if (index.is_diagonal(a))
      for (std::size_t b = 0; b < index.size(); ++b)
        if (!index.is_diagonal(b) && kernel.full(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) != 0.0)
          out.absorption = false;
  if (!out.absorption) detail << "diagonal leaks; ";

  out.swap = true;
  if (is_symmetric(m))
    for (std::size_t a = 0; a < index.size(); ++a)
      for (std::size_t b = 0; b < index.size(); ++b)
        if (kernel.full(static_cast<Eigen::Index>(index.swap(a)), static_cast<Eigen::Index>(index.swap(b))) !=
            kernel.full(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)))
          out.swap = false;
  if (!out.swap) detail << "swap equivariance fails; ";

  const PairMeasure image = apply_T2(m, random_coupling(m.mu, rng), random_coupling(m.mu, rng));
  double drift = 0.0;
  const auto m0 = image.first_marginal(), m1 = image.second_marginal();
  for (std::size_t x = 0; x < m.s(); ++x)
    drift = std::max({drift, std::abs(m0[x] - m.mu[x]), std::abs(m1[x] - m.mu[x])});
  out.marginal = drift <= 1e-12;
  if (!out.marginal) detail << "marginal drift " << drift << "; ";

  const SpectralData spectral = analyze_spectrum(m, kernel);
  const EndogenyVerdict verdict = classify(m, spectral);
  out.rho = spectral.rho;
  out.regime = verdict.regime;
  out.strict = verdict.decision == Decision::Endogenous || verdict.decision == Decision::NonEndogenous;

  const RtpModel relabeled = permuted(m, random_permutation(m.s(), rng), random_permutation(m.e(), rng));
  const PairKernel relabeled_kernel = two_point_kernel(relabeled);
  const SpectralData relabeled_spectral = analyze_spectrum(relabeled, relabeled_kernel);
  const EndogenyVerdict relabeled_verdict = classify(relabeled, relabeled_spectral);
  out.permutation = std::abs(relabeled_spectral.rho - spectral.rho) <= 1e-10 &&
                    relabeled_verdict.regime == verdict.regime && relabeled_verdict.decision == verdict.decision;
  if (!out.permutation) detail << "relabeling changed the verdict; ";

  std::string probe_detail;
  out.agreement = !out.strict || probe_agrees(m, verdict, rng, probe_detail);
  detail << probe_detail;
  out.detail = detail.str();
  return out;
}

}  // namespace endotree::testing
