#include "endotree/superop.hpp"

#include "endotree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace endotree {

namespace {
using Index = Eigen::Index;
}

Superoperators::Superoperators(RtpModel model)
    : model_(std::move(model)), kernel_(two_point_kernel(model_)) {
  for (double m : model_.mu)
    if (!(m > 0.0)) throw DomainError("superoperators need mu > 0 on every state; validate() first");
}

OperatorOnS Superoperators::divide_by_mu(const PairMeasure& m) const {
  const std::size_t s = states();
  OperatorOnS out(static_cast<Index>(s), static_cast<Index>(s));
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t yp = 0; yp < s; ++yp)
      out(static_cast<Index>(y), static_cast<Index>(yp)) = m(y, yp) / model_.mu[y];
  return out;
}

OperatorOnS Superoperators::calP(const OperatorOnS& L) const {
  const auto w = PairMeasure::from_operator(model_.mu, L);
  return divide_by_mu(PairMeasure(states(), w.weights() * kernel_.full));
}

OperatorOnS Superoperators::calQ(const OperatorOnS& L) const { return calQ(L, L); }

OperatorOnS Superoperators::calQ(const OperatorOnS& A, const OperatorOnS& B) const {
  const auto a = PairMeasure::from_operator(model_.mu, A);
  const auto b = PairMeasure::from_operator(model_.mu, B);
  return divide_by_mu(apply_T2(model_, a, b));
}

double Superoperators::inner(const Vector& f, const Vector& g) const {
  double acc = 0.0;
  for (std::size_t x = 0; x < states(); ++x) acc += model_.mu[x] * f[static_cast<Index>(x)] * g[static_cast<Index>(x)];
  return acc;
}

double Superoperators::form(const Vector& f, const OperatorOnS& L, const Vector& g) const {
  return inner(f, L * g);
}

OperatorOnS Superoperators::project_constants() const {
  const auto s = static_cast<Index>(states());
  OperatorOnS p(s, s);
  for (Index x = 0; x < s; ++x)
    for (Index xp = 0; xp < s; ++xp) p(x, xp) = model_.mu[static_cast<std::size_t>(xp)];
  return p;
}

OperatorOnS Superoperators::project_mean_zero() const {
  const auto s = static_cast<Index>(states());
  return OperatorOnS::Identity(s, s) - project_constants();
}

GeneratorQ build_Q(const RtpModel& model, const SpectralData& spectral) {
  if (!(spectral.rho > 0.0) || !spectral.has_vectors) throw DomainError("generator Q needs rho > 0");
  const auto& ks = spectral.vectors.kappa_star;
  const auto s = static_cast<Index>(model.s());
  GeneratorQ q{OperatorOnS(s, s)};
  for (Index x = 0; x < s; ++x)
    for (Index xp = 0; xp < s; ++xp) q.matrix(x, xp) = ks(x, xp) / model.mu[static_cast<std::size_t>(x)];
  return q;
}

double dirichlet_form(const PairIndex& index, const Vector& kappa, const Vector& f, const Vector& g) {
  double acc = 0.0;
  for (std::size_t k = 0; k < index.off_size(); ++k) {
    const auto a = index.off_pair(k);
    const auto x = static_cast<Index>(index.first(a)), xp = static_cast<Index>(index.second(a));
    acc += (f[xp] - f[x]) * (g[xp] - g[x]) * kappa[static_cast<Index>(k)];
  }
  return 0.5 * acc;
}

double check_PQ(const Superoperators& ops, const SpectralData& spectral, const GeneratorQ& Q) {
  return max_abs(OperatorOnS(ops.calP(Q.matrix) - spectral.rho * Q.matrix));
}

OperatorOnS q_hat(const Superoperators& ops, const SpectralData& spectral, const GeneratorQ& Q) {
  if (!(spectral.rho > 0.0)) throw DomainError("q_hat needs rho > 0");
  const double two_rho = 2.0 * spectral.rho;
  const OperatorOnS q2 = Q.matrix * Q.matrix;
  return 2.0 / (two_rho * two_rho) * (ops.calQ(Q.matrix) + ops.calP(q2)) - q2;
}

namespace {

double pgf_from_operator(const Superoperators& ops, const Vector& f, std::size_t n, OperatorOnS L) {
  for (std::size_t k = 0; k < n; ++k) L = ops.calQ(L);
  return ops.form(f, L, f);
}

}  // namespace

double pgf_spectral_measure(const Superoperators& ops, const Vector& f, std::size_t n, double z) {
  return pgf_from_operator(ops, f, n, ops.project_constants() + z * ops.project_mean_zero());
}

double pgf_spectral_measure_near_one(const Superoperators& ops, const Vector& f, std::size_t n, double c) {
  const auto s = static_cast<Index>(ops.states());
  return pgf_from_operator(ops, f, n, OperatorOnS::Identity(s, s) - c * ops.project_mean_zero());
}

std::vector<double> spectral_masses(const Superoperators& ops, const Vector& f, std::size_t n) {
  if (n > 6) throw ResourceError("spectral mass recovery is limited to n <= 6");
  std::vector<OperatorOnS> coeffs = {ops.project_constants(), ops.project_mean_zero()};
  for (std::size_t level = 0; level < n; ++level) {
    const std::size_t deg = coeffs.size() - 1;
    const auto s = static_cast<Index>(ops.states());
    std::vector<OperatorOnS> next(2 * deg + 1, OperatorOnS::Zero(s, s));
    for (std::size_t i = 0; i <= deg; ++i)
      for (std::size_t j = 0; j <= deg; ++j) next[i + j] += ops.calQ(coeffs[i], coeffs[j]);
    coeffs = std::move(next);
  }
  std::vector<double> masses;
  masses.reserve(coeffs.size());
  for (const auto& c : coeffs) masses.push_back(ops.form(f, c, f));
  return masses;
}

SpectralMeasureReport spectral_measure_report(const Superoperators& ops, const Vector& f, std::size_t n,
                                              const std::vector<double>& z_grid, double rho,
                                              const std::vector<double>& t_grid) {
  SpectralMeasureReport r;
  r.level = n;
  r.z = z_grid;
  for (double z : z_grid) r.values.push_back(pgf_spectral_measure(ops, f, n, z));
  if (n <= 6) r.masses = spectral_masses(ops, f, n);
  r.mean = number_form(ops.model(), ops.kernel(), f, f, n);
  if (rho > 0.0) {
    r.t = t_grid;
    for (double t : t_grid) {
      const double c = -std::expm1(-std::pow(2.0 * rho, -static_cast<double>(n)) * t);
      r.laplace.push_back(pgf_spectral_measure_near_one(ops, f, n, c));
    }
  }
  return r;
}

std::string spectral_report_csv(const std::vector<SpectralMeasureReport>& reports) {
  std::ostringstream os;
  os.precision(17);
  os << "n,kind,point,value\n";
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.z.size(); ++i) os << r.level << ",pgf," << r.z[i] << ',' << r.values[i] << '\n';
    if (r.masses)
      for (std::size_t k = 0; k < r.masses->size(); ++k) os << r.level << ",mass," << k << ',' << (*r.masses)[k] << '\n';
    os << r.level << ",mean,," << r.mean << '\n';
    for (std::size_t i = 0; i < r.laplace.size(); ++i) os << r.level << ",laplace," << r.t[i] << ',' << r.laplace[i] << '\n';
  }
  return os.str();
}

LaplaceLimit laplace_limit(const Superoperators& ops, const SpectralData& spectral, const Vector& f, double t,
                           std::size_t n_max) {
  const double two_rho = 2.0 * spectral.rho;
  if (!(two_rho > 1.0) || !spectral.flags.primitive)
    throw DomainError("semigroup limit needs 2 rho > 1 and a primitive P^(-)");
  if (!(t > 0.0)) throw DomainError("semigroup limit needs t > 0");
  LaplaceLimit out;
  out.t = t;
  for (std::size_t n = 0; n <= n_max; ++n) {
    const double c = -std::expm1(-std::pow(two_rho, -static_cast<double>(n)) * t);
    out.values.push_back(pgf_spectral_measure_near_one(ops, f, n, c));
    if (n > 0) out.increments.push_back(std::abs(out.values[n] - out.values[n - 1]));
  }
  out.estimate = out.values.back();
  return out;
}

QInfinityNorm q_infinity_norm(const Superoperators& ops, const SpectralData& spectral, const GeneratorQ& Q,
                              const Vector& f, std::size_t r_max) {
  const double two_rho = 2.0 * spectral.rho;
  if (!(two_rho > 1.0)) throw DomainError("the series for ||Q_inf f||^2 needs 2 rho > 1");
  QInfinityNorm out;
  OperatorOnS term_op = ops.calQ(Q.matrix);
  double c_est = 0.0;
  for (std::size_t r = 0; r <= r_max; ++r) {
    if (r > 0) term_op = ops.calP(term_op);
    const double inner = ops.form(f, term_op, f);
    const double term = 2.0 * std::pow(two_rho, -2.0 * static_cast<double>(r) - 2.0) *
                        std::ldexp(1.0, static_cast<int>(r)) * inner;
    out.terms.push_back(term);
    out.value += term;
    c_est = std::max(c_est, std::abs(term) * std::pow(two_rho, static_cast<double>(r)));
  }
  const double ratio = 1.0 / two_rho;
  out.tail_bound = c_est * std::pow(ratio, static_cast<double>(r_max + 1)) / (1.0 - ratio);
  return out;
}

Con2Trace con2_check(const Superoperators& ops, const SpectralData& spectral, const GeneratorQ& Q,
                     const Vector& f, const Vector& g, std::size_t n_max) {
  if (!(spectral.rho > 0.0)) throw DomainError("rescaled number form needs rho > 0");
  Con2Trace out;
  out.target = -ops.form(f, Q.matrix, g);
  const auto& kernel = ops.kernel();
  const auto& idx = kernel.index;
  const auto& mu = ops.model().mu;
  RowVector off(static_cast<Index>(idx.off_size()));
  for (std::size_t k = 0; k < idx.off_size(); ++k) {
    const auto a = idx.off_pair(k);
    off[static_cast<Index>(k)] = mu[idx.first(a)] * mu[idx.second(a)];
  }
  for (std::size_t n = 0; n <= n_max; ++n) {
    if (n > 0) off = off * kernel.minus / spectral.rho;
    double acc = 0.0;
    for (std::size_t k = 0; k < idx.off_size(); ++k) {
      const auto a = idx.off_pair(k);
      const auto x = static_cast<Index>(idx.first(a)), xp = static_cast<Index>(idx.second(a));
      acc += off[static_cast<Index>(k)] * 0.5 * (f[x] - f[xp]) * (g[x] - g[xp]);
    }
    out.sequence.push_back(acc);
    out.deviation.push_back(std::abs(acc - out.target));
  }
  return out;
}

}  // namespace endotree
