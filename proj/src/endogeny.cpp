#include "endotree/endogeny.hpp"

#include "endotree/errors.hpp"
#include "endotree/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace endotree {

namespace {
using Index = Eigen::Index;
}

const char* to_string(Regime r) {
  switch (r) {
    case Regime::Subcritical: return "Subcritical";
    case Regime::Supercritical: return "Supercritical";
    case Regime::Critical: return "Critical";
  }
  return "?";
}

const char* to_string(Decision d) {
  switch (d) {
    case Decision::Endogenous: return "Endogenous";
    case Decision::NonEndogenous: return "NonEndogenous";
    case Decision::EndogenousCritical: return "EndogenousCritical";
    case Decision::Indeterminate: return "Indeterminate";
  }
  return "?";
}

bool nondegen2(const SpectralData& spectral) { return spectral.flags.irreducible; }

EndogenyVerdict classify(const RtpModel& model, const SpectralData& spectral, const ClassifyOptions& opts) {
  EndogenyVerdict v;
  v.rho = spectral.rho;
  v.two_rho = 2.0 * spectral.rho;
  v.symmetric = is_symmetric(model);

  if (v.two_rho < 1.0 - opts.tol_crit) {
    v.regime = Regime::Subcritical;
    v.decision = Decision::Endogenous;
  } else if (v.two_rho > 1.0 + opts.tol_crit) {
    v.regime = Regime::Supercritical;
    v.decision = Decision::NonEndogenous;
  } else {
    v.regime = Regime::Critical;
    CriticalEvidence ev;
    ev.nondegen2 = nondegen2(spectral);
    // A depth beyond the enumeration cap is a resource error for the caller.
    ev.nondegen1 = nondegen1(model, opts.m_max, opts.threads);
    const bool n1 = ev.nondegen1->resolved;
    v.decision = ev.nondegen2 && n1 ? Decision::EndogenousCritical : Decision::Indeterminate;
    if (!ev.nondegen2) v.notes.push_back("critical band: P^(-) is reducible");
    if (ev.nondegen1 && !ev.nondegen1->resolved) {
      v.notes.push_back("critical band: the Gram check found no positive lower bound up to depth " +
                        std::to_string(ev.nondegen1->epsilon_by_m.size()));
      if (!ev.nondegen1->epsilon_by_m.empty() && ev.nondegen1->epsilon_by_m.back() <= 1e-12)
        v.notes.push_back(
            "some function of the root state is orthogonal to the innovations at every checked depth");
    }
    const double gap = std::abs(v.two_rho - 1.0);
    if (gap > 0.0)
      v.notes.push_back("2 rho differs from 1 by " + std::to_string(gap) + " (inside the critical band)");
    v.critical_evidence = std::move(ev);
  }

  if (!v.symmetric) {
    v.decision = Decision::Indeterminate;
    v.notes.push_back("phi is not symmetric in its state arguments; the Perron criterion does not apply");
  }
  return v;
}

Vector conditional_root_distribution(const RtpModel& model, const std::vector<int>& innovations, std::size_t m) {
  const std::size_t internal = (std::size_t{1} << m) - 1;
  if (innovations.size() != internal)
    throw DomainError("expected " + std::to_string(internal) + " innovations for depth " + std::to_string(m));
  const std::size_t s = model.s();
  const Vector mu = to_vector(model.mu);
  std::vector<Vector> h(internal);
  auto child = [&](std::size_t c) -> const Vector& { return c >= internal ? mu : h[c]; };
  for (std::size_t i = internal; i-- > 0;) {
    const Vector& a = child(2 * i + 1);
    const Vector& b = child(2 * i + 2);
    const auto z = static_cast<std::size_t>(innovations[i]);
    Vector out = Vector::Zero(static_cast<Index>(s));
    for (std::size_t x0 = 0; x0 < s; ++x0) {
      if (a[static_cast<Index>(x0)] == 0.0) continue;
      for (std::size_t x1 = 0; x1 < s; ++x1) out[model(x0, x1, z)] += a[static_cast<Index>(x0)] * b[static_cast<Index>(x1)];
    }
    h[i] = std::move(out);
  }
  return internal == 0 ? mu : h[0];
}

std::optional<std::uint64_t> innovation_assignment_count(std::size_t e, std::size_t m) {
  if (m >= 63) return std::nullopt;
  const std::uint64_t internal = (std::uint64_t{1} << m) - 1;
  std::uint64_t count = 1;
  for (std::uint64_t k = 0; k < internal; ++k) {
    if (count > std::numeric_limits<std::uint64_t>::max() / std::max<std::size_t>(e, 1)) return std::nullopt;
    count *= e;
  }
  return count;
}

Matrix gram_matrix(const RtpModel& model, std::size_t m, unsigned threads, std::uint64_t cap) {
  if (m == 0) throw DomainError("Gram depth must be at least 1");
  const auto count = innovation_assignment_count(model.e(), m);
  if (!count || *count > cap)
    throw ResourceError("Gram check at depth " + std::to_string(m) + " needs " +
                        (count ? std::to_string(*count) : std::string("more than 2^64")) +
                        " innovation assignments (cap " + std::to_string(cap) + ")");
  const std::size_t internal = (std::size_t{1} << m) - 1;
  const std::size_t s = model.s(), e = model.e();
  const std::uint64_t total = *count;
  constexpr std::size_t blocks = 64;
  std::vector<Matrix> partial(blocks, Matrix::Zero(static_cast<Index>(s), static_cast<Index>(s)));

  for_each_block(blocks, threads, [&](std::size_t b) {
    const std::uint64_t begin = total * b / blocks, end = total * (b + 1) / blocks;
    std::vector<int> eps(internal);
    for (std::uint64_t code = begin; code < end; ++code) {
      std::uint64_t c = code;
      double w = 1.0;
      for (std::size_t i = internal; i-- > 0;) {
        eps[i] = static_cast<int>(c % e);
        c /= e;
        w *= model.nu[static_cast<std::size_t>(eps[i])];
      }
      if (w == 0.0) continue;
      const Vector h = conditional_root_distribution(model, eps, m);
      partial[b].noalias() += w * h * h.transpose();
    }
  });

  Matrix g = Matrix::Zero(static_cast<Index>(s), static_cast<Index>(s));
  for (const auto& p : partial) g += p;
  return g;
}

double smallest_generalized_eigenvalue(const Matrix& gram, const std::vector<double>& mu) {
  const auto s = gram.rows();
  Vector inv_sqrt(s);
  for (Index x = 0; x < s; ++x) inv_sqrt[x] = 1.0 / std::sqrt(mu[static_cast<std::size_t>(x)]);
  const Matrix scaled = inv_sqrt.asDiagonal() * gram * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (scaled + scaled.transpose()), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

Nondegen1Result nondegen1(const RtpModel& model, std::size_t m_max, unsigned threads, double threshold) {
  Nondegen1Result r;
  for (std::size_t m = 1; m <= m_max; ++m) {
    const double eps = smallest_generalized_eigenvalue(gram_matrix(model, m, threads), model.mu);
    r.epsilon_by_m.push_back(eps);
    if (eps > threshold) {
      r.resolved = true;
      r.m = m;
      r.epsilon_min = eps;
      return r;
    }
  }
  r.epsilon_min = r.epsilon_by_m.empty() ? 0.0 : r.epsilon_by_m.back();
  return r;
}

Nondegen1Estimate nondegen1_monte_carlo(const RtpModel& model, std::size_t m, std::size_t samples,
                                        std::uint64_t seed) {
  constexpr std::size_t batches = 32;
  if (m == 0) throw DomainError("Gram depth must be at least 1");
  if (samples < batches) throw DomainError("need at least 32 samples");
  const std::size_t internal = (std::size_t{1} << m) - 1;
  const auto s = static_cast<Index>(model.s());
  Nondegen1Estimate est;
  est.m = m;
  est.samples = samples - samples % batches;
  const std::size_t per_batch = est.samples / batches;

  Matrix sum = Matrix::Zero(s, s), sum_sq = Matrix::Zero(s, s);
  std::vector<double> batch_eps;
  for (std::size_t b = 0; b < batches; ++b) {
    RngStream rng(seed, b);
    Matrix batch = Matrix::Zero(s, s);
    std::vector<int> eps(internal);
    for (std::size_t k = 0; k < per_batch; ++k) {
      for (auto& z : eps) z = static_cast<int>(rng.discrete(model.nu));
      const Vector h = conditional_root_distribution(model, eps, m);
      const Matrix hh = h * h.transpose();
      batch += hh;
      sum_sq += hh.cwiseProduct(hh);
    }
    sum += batch;
    batch_eps.push_back(smallest_generalized_eigenvalue(batch / static_cast<double>(per_batch), model.mu));
  }
  const double n = static_cast<double>(est.samples);
  est.gram = sum / n;
  const Matrix var = (sum_sq / n - est.gram.cwiseProduct(est.gram)).cwiseMax(0.0);
  est.gram_standard_error = std::sqrt(var.maxCoeff() / n);
  est.epsilon_min = smallest_generalized_eigenvalue(est.gram, model.mu);
  const double mean = std::accumulate(batch_eps.begin(), batch_eps.end(), 0.0) / batches;
  double ss = 0.0;
  for (double x : batch_eps) ss += (x - mean) * (x - mean);
  est.epsilon_standard_error = std::sqrt(ss / (batches - 1) / batches);
  return est;
}

PairMeasure random_coupling(const std::vector<double>& mu, RngStream& rng) {
  const std::size_t s = mu.size();
  Matrix k(static_cast<Index>(s), static_cast<Index>(s));
  for (Index i = 0; i < k.rows(); ++i)
    for (Index j = 0; j < k.cols(); ++j) k(i, j) = 0.05 + rng.uniform();
  const Vector target = to_vector(mu);
  for (int it = 0; it < 10000; ++it) {
    k = (target.cwiseQuotient(k.rowwise().sum())).asDiagonal() * k;
    k = k * (target.cwiseQuotient(Vector(k.colwise().sum().transpose()))).asDiagonal();
    const double err = max_abs(Vector(k.rowwise().sum() - target));
    if (err < 1e-15) break;
  }
  RowVector w(static_cast<Index>(s * s));
  for (std::size_t x = 0; x < s; ++x)
    for (std::size_t xp = 0; xp < s; ++xp) w[static_cast<Index>(x * s + xp)] = k(static_cast<Index>(x), static_cast<Index>(xp));
  return PairMeasure(s, std::move(w));
}

UniquenessProbe bivariate_uniqueness_probe(const RtpModel& model, const std::vector<PairMeasure>& starts,
                                           std::size_t n, double tol, double stationary_tol) {
  UniquenessProbe p;
  p.uniqueness_evidence = true;
  for (const auto& start : starts) {
    auto tr = bivariate_iterate(model, start, n, tol, stationary_tol);
    const double terminal = tr.off_mass.back();
    p.terminal_mass.push_back(terminal);
    p.steps.push_back(tr.off_mass.size() - 1);
    p.uniqueness_evidence = p.uniqueness_evidence && terminal < tol;
    p.traces.push_back(std::move(tr.off_mass));
  }
  return p;
}

std::string verdict_json(const EndogenyVerdict& v) {
  nlohmann::ordered_json j;
  j["regime"] = to_string(v.regime);
  j["decision"] = to_string(v.decision);
  j["rho"] = v.rho;
  j["two_rho"] = v.two_rho;
  j["symmetric"] = v.symmetric;
  if (v.critical_evidence) {
    nlohmann::ordered_json ev;
    ev["nondegen2"] = v.critical_evidence->nondegen2;
    if (v.critical_evidence->nondegen1) {
      const auto& n1 = *v.critical_evidence->nondegen1;
      ev["nondegen1"] = {{"resolved", n1.resolved},
                         {"m", n1.m},
                         {"epsilon_min", n1.epsilon_min},
                         {"epsilon_by_m", n1.epsilon_by_m}};
    } else {
      ev["nondegen1"] = nullptr;
    }
    j["critical_evidence"] = ev;
  } else {
    j["critical_evidence"] = nullptr;
  }
  j["notes"] = v.notes;
  return j.dump(2);
}

}  // namespace endotree
