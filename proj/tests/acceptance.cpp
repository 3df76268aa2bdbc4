// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "support.hpp"

#include "endotree/endogeny.hpp"
#include "endotree/errors.hpp"
#include "endotree/kernels.hpp"
#include "endotree/montecarlo.hpp"
#include "endotree/oracle.hpp"
#include "endotree/spectral.hpp"
#include "endotree/superop.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace endotree;
using endotree::testing::label_observable;
using endotree::testing::model;

namespace {

/// Collects failed sub-checks of one criterion with a short description each.
class Criterion {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok) failures_.push_back(what);
  }
  /// |value - target| <= tol, recording the observed gap on failure.
  void near(double value, double target, double tol, const std::string& what) {
    const double gap = std::abs(value - target);
    std::ostringstream os;
    os << what << " (value " << value << ", target " << target << ", gap " << gap << ", tol " << tol << ")";
    expect(gap <= tol, os.str());
  }
  void note(const std::string& text) { notes_.push_back(text); }

  bool passed() const { return failures_.empty(); }
  std::size_t checks() const { return checks_; }
  const std::vector<std::string>& failures() const { return failures_; }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  std::size_t checks_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

struct Context {
  RtpModel m;
  PairKernel kernel;
  SpectralData spectral;

  explicit Context(const std::string& name)
      : m(model(name)), kernel(two_point_kernel(m)), spectral(analyze_spectrum(m, kernel)) {}
};

void select_reproduction(Criterion& c) {
  const Context sel("SELECT");
  const Matrix& pm = sel.kernel.minus;
  bool exact = pm.rows() == 2 && pm.cols() == 2;
  for (Eigen::Index i = 0; exact && i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) exact = exact && pm(i, j) == (i == j ? 0.5 : 0.0);
  c.expect(exact, "P^(-) is exactly one half times the identity");
  c.near(sel.spectral.rho, 0.5, 1e-12, "rho");
  c.expect(!nondegen2(sel.spectral), "irreducibility check is false");
  c.expect(classify(sel.m, sel.spectral).decision == Decision::Indeterminate, "verdict is Indeterminate");
  const BivariateTrace tr = bivariate_iterate(sel.m, PairMeasure::product(sel.m.mu), 50, 0.0);
  double worst = 0.0;
  for (double d : tr.off_mass) worst = std::max(worst, std::abs(d - 0.5));
  c.expect(tr.off_mass.size() == 51, "50 bivariate steps were taken");
  c.near(worst, 0.0, 1e-12, "largest deviation of the off-diagonal mass from 1/2");
}

void classification(Criterion& c) {
  const auto check = [&](const std::string& name, Decision expected, double rho, double tol) {
    const Context ctx(name);
    const EndogenyVerdict v = classify(ctx.m, ctx.spectral);
    c.expect(v.decision == expected, name + " verdict is " + to_string(expected) + " (got " + to_string(v.decision) + ")");
    c.near(ctx.spectral.rho, rho, tol, name + " rho");
  };
  check("XOR", Decision::NonEndogenous, 1.0, 1e-10);
  check("ANDOR-NOISE", Decision::Endogenous, 0.25, 1e-10);
  check("CONST", Decision::Endogenous, 0.0, 0.0);
  check("PURE-INNOVATION", Decision::Endogenous, 0.0, 0.0);
}

void linearization(Criterion& c) {
  RngStream rng(3, 0);
  double worst = 0.0;
  for (const auto& name : builtin_names()) {
    const RtpModel m = model(name);
    const PairKernel k = two_point_kernel(m);
    const PairMeasure diag = PairMeasure::diagonal(m.mu);
    for (int trial = 0; trial < 100; ++trial) {
      const PairMeasure lambda = testing::random_signed_measure(m.s(), rng);
      worst = std::max(worst, max_abs(RowVector(lambda.weights() * k.full - apply_T2(m, lambda, diag).weights())));
    }
  }
  c.near(worst, 0.0, 1e-12, "largest linearization residual over 600 random signed measures");
}

void pq_identity(Criterion& c) {
  for (const auto& name : {"XOR", "ANDOR-NOISE", "SELECT"}) {
    const Context ctx(name);
    c.expect(ctx.spectral.has_vectors, std::string(name) + " has Perron vectors");
    if (!ctx.spectral.has_vectors) continue;
    const Superoperators ops(ctx.m);
    c.near(check_PQ(ops, ctx.spectral, build_Q(ctx.m, ctx.spectral)), 0.0, 1e-10, std::string(name) + " residual");
  }
}

void subcritical_decay(Criterion& c) {
  const RtpModel noise = model("ANDOR-NOISE");
  const BivariateTrace tr = bivariate_iterate(noise, PairMeasure::product(noise.mu), 40, 0.0);
  c.near(tr.off_mass[40] / tr.off_mass[39], 0.5, 1e-6, "decay ratio d_40 / d_39");
  const Vector f = 2.0 * (label_observable(noise).array() - 0.5).matrix();
  double worst = 0.0;
  for (std::size_t n = 0; n <= 20; ++n)
    worst = std::max(worst, std::abs(number_form(noise, f, n) - std::ldexp(1.0, -static_cast<int>(n))));
  c.near(worst, 0.0, 1e-12, "largest number-form deviation from 2^-n, n <= 20");
}

void oracle_equivalence(Criterion& c) {
  double pgf_gap = 0.0, mean_gap = 0.0;
  std::size_t cases = 0, inequality_failures = 0;
  RngStream rng(6, 0);
  for (const auto& name : builtin_names()) {
    const RtpModel m = model(name);
    const Superoperators ops(m);
    std::vector<Vector> observables{label_observable(m), testing::random_vector(m.s(), rng)};
    for (std::size_t x = 0; x < m.s(); ++x) {
      Vector indicator = Vector::Zero(static_cast<Eigen::Index>(m.s()));
      indicator[static_cast<Eigen::Index>(x)] = 1.0;
      observables.push_back(indicator);
    }
    for (std::size_t n : {1, 2}) {
      for (const Vector& f : observables) {
        const auto masses = exact_spectral_measure(m, f, n);
        for (double z : {0.0, 0.25, 0.5, 0.75, 1.0})
          pgf_gap = std::max(pgf_gap, std::abs(pgf_spectral_measure(ops, f, n, z) - measure_pgf(masses, z)));
        double mean = 0.0;
        for (std::size_t k = 0; k < masses.size(); ++k) mean += static_cast<double>(k) * masses[k];
        mean_gap = std::max(mean_gap, std::abs(mean - number_form(m, f, n)));
        const KnResidual kn = exact_kn_residual(m, f, n);
        if (!(kn.residual <= kn.number_form + 1e-12)) ++inequality_failures;
        ++cases;
      }
    }
  }
  c.near(pgf_gap, 0.0, 1e-10, "largest generating-function gap");
  c.near(mean_gap, 0.0, 1e-10, "largest gap between the spectral mean and the number form");
  c.expect(inequality_failures == 0, std::to_string(inequality_failures) + " innovation-residual bound violations");
  c.note(std::to_string(cases) + " (model, level, observable) cases enumerated");
}

void xor_limits(Criterion& c) {
  const Context x("XOR");
  const Superoperators ops(x.m);
  const Vector f = label_observable(x.m);
  double con = 0.0;
  for (std::size_t n = 1; n <= 30; ++n) con = std::max(con, check_con_limit(x.kernel.minus, x.spectral, n));
  c.near(con, 0.0, 1e-12, "largest Perron-limit residual, n <= 30");

  const GeneratorQ Q = build_Q(x.m, x.spectral);
  const Con2Trace tr = con2_check(ops, x.spectral, Q, f, f, 30);
  c.near(tr.target, 1.0, 1e-12, "Dirichlet form of f(x) = x");
  c.near(dirichlet_form(x.kernel.index, x.spectral.vectors.kappa, f, f), 1.0, 1e-12, "Dirichlet form from kappa");
  double con2 = 0.0;
  for (double v : tr.sequence) con2 = std::max(con2, std::abs(v - 1.0));
  c.near(con2, 0.0, 1e-12, "largest deviation of the rescaled number form from 1");

  for (double t : {0.1, 1.0}) {
    const LaplaceLimit lim = laplace_limit(ops, x.spectral, f, t, 20);
    c.near(lim.increments.back(), 0.0, 1e-6, "last increment at t = " + std::to_string(t));
  }
  const double h = 1e-4;
  // At t = 0 the limit is (f, f).
  const double slope = (laplace_limit(ops, x.spectral, f, h, 20).estimate - ops.inner(f, f)) / h;
  c.near(slope, -1.0, 1e-3, "t-derivative at 0");
}

void dynamics(Criterion& c) {
  constexpr std::uint64_t seed = 2;
  {
    const RtpModel sel = model("SELECT");
    const Superoperators ops(sel);
    const Vector f = label_observable(sel);
    AutocovarianceOptions opts;
    opts.dynamics = Dynamics::Refresh;
    opts.n = 4;
    opts.lags = {0.2, 1.0};
    opts.horizon = 10.0;
    opts.min_events = 100'000;
    opts.seed = seed;
    const AutocovarianceEstimate est = root_autocovariance(sel, f, opts);
    for (std::size_t l = 0; l < opts.lags.size(); ++l) {
      const double exact = pgf_spectral_measure_near_one(ops, f, 4, -std::expm1(-opts.lags[l]));
      c.near(exact, std::exp(-opts.lags[l]), 1e-14, "refresh reference equals exp(-t)");
      c.near(est.values[l], exact, 3.0 * est.standard_errors[l],
             "SELECT refresh autocovariance at t = " + std::to_string(opts.lags[l]));
    }
    c.expect(est.events >= 100'000, "SELECT run saw at least 1e5 events");
    c.note("SELECT refresh: seed " + std::to_string(seed) + ", " + std::to_string(est.events) + " events, " +
           std::to_string(est.replicates) + " replicates");
  }
  {
    const Context x("XOR");
    const Superoperators ops(x.m);
    const Vector f = label_observable(x.m);
    AutocovarianceOptions opts;
    opts.dynamics = Dynamics::Generator;
    opts.Q = build_Q(x.m, x.spectral).matrix;
    opts.rho = x.spectral.rho;
    opts.n = 4;
    opts.lags = {0.2, 1.0};
    opts.horizon = 10.0;
    opts.min_events = 100'000;
    opts.seed = seed;
    const AutocovarianceEstimate est = root_autocovariance(x.m, f, opts);
    for (std::size_t l = 0; l < opts.lags.size(); ++l) {
      const double limit = laplace_limit(ops, x.spectral, f, opts.lags[l], 20).estimate;
      c.near(est.values[l], limit, 3.0 * est.standard_errors[l],
             "XOR generator autocovariance at t = " + std::to_string(opts.lags[l]));
    }
    c.expect(est.events >= 100'000, "XOR run saw at least 1e5 events");
    c.note("XOR generator: seed " + std::to_string(seed) + ", " + std::to_string(est.events) + " events, " +
           std::to_string(est.replicates) + " replicates");
  }
}

void property_suite(Criterion& c) {
  constexpr std::uint64_t seed = 9;
  std::size_t strict = 0, subcritical = 0, supercritical = 0;
  for (std::uint64_t k = 0; k < 500; ++k) {
    RngStream rng(seed, k);
    const std::size_t s = 2 + rng.next() % 3, e = 1 + rng.next() % 4;
    RtpModel m;
    try {
      m = random_model(s, e, rng, true);
    } catch (const ConvergenceError& err) {
      c.expect(false, "model " + std::to_string(k) + ": " + err.what());
      continue;
    }
    const testing::PropertyOutcome out = testing::check_model_properties(m, seed * 1'000'000 + k);
    c.expect(out.all(), "model " + std::to_string(k) + " (s=" + std::to_string(m.s()) + ", e=" +
                            std::to_string(m.e()) + ", rho=" + std::to_string(out.rho) + "): " + out.detail);
    if (out.strict) {
      ++strict;
      (out.regime == Regime::Subcritical ? subcritical : supercritical) += 1;
    }
  }
  c.note("500 symmetric models from seed " + std::to_string(seed) + "; " + std::to_string(strict) +
         " strict verdicts (" + std::to_string(subcritical) + " subcritical, " + std::to_string(supercritical) +
         " supercritical) checked against the bivariate probe");
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* title;
    std::function<void(Criterion&)> run;
  };
  const std::vector<Entry> entries{
      {1, "SELECT reproduction", select_reproduction},
      {2, "classification of the builtins", classification},
      {3, "linearization identity", linearization},
      {4, "calP(Q) = rho Q", pq_identity},
      {5, "subcritical decay", subcritical_decay},
      {6, "oracle equivalence", oracle_equivalence},
      {7, "Perron, Dirichlet and semigroup limits on XOR", xor_limits},
      {8, "dynamics agreement", dynamics},
      {9, "property suite on 500 random symmetric models", property_suite},
  };

  int failed = 0;
  for (const Entry& e : entries) {
    Criterion c;
    const auto start = std::chrono::steady_clock::now();
    try {
      e.run(c);
    } catch (const std::exception& ex) {
      c.expect(false, std::string("exception: ") + ex.what());
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %d. %s (%zu checks, %.0f ms)\n", c.passed() ? "PASS" : "FAIL", e.id, e.title, c.checks(), ms);
    for (const auto& n : c.notes()) std::printf("       %s\n", n.c_str());
    std::size_t shown = 0;
    for (const auto& f : c.failures())
      if (shown++ < 10) std::printf("       failed: %s\n", f.c_str());
    if (c.failures().size() > 10) std::printf("       ... and %zu more\n", c.failures().size() - 10);
    if (!c.passed()) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(entries.size()) - failed, entries.size());
  return failed == 0 ? 0 : 1;
}
