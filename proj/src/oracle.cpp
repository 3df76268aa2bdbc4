#include "endotree/oracle.hpp"

#include "endotree/errors.hpp"
#include "endotree/kernels.hpp"
#include "endotree/superop.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <limits>
#include <optional>

namespace endotree {

namespace {

constexpr std::uint64_t kOverflow = std::numeric_limits<std::uint64_t>::max();

std::uint64_t checked_power(std::uint64_t base, std::uint64_t exponent) {
  std::uint64_t out = 1;
  for (std::uint64_t k = 0; k < exponent; ++k) {
    if (base != 0 && out > kOverflow / base) return kOverflow;
    out *= base;
  }
  return out;
}

std::uint64_t checked_product(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > kOverflow / a) return kOverflow;
  return a * b;
}

void require_level(std::size_t n) {
  if (n > 5) throw ResourceError("exact computations are limited to depth 5 (requested " + std::to_string(n) + ")");
}

void require_observable(const RtpModel& model, const Vector& f) {
  if (static_cast<std::size_t>(f.size()) != model.s())
    throw DomainError("observable has " + std::to_string(f.size()) + " entries for " + std::to_string(model.s()) +
                      " states");
}

/// Fill internal states bottom-up from leaves and innovations (heap numbering).
void fill_internal(const RtpModel& model, std::size_t n, const std::vector<int>& leaves,
                   const std::vector<int>& innovations, std::vector<int>& internal) {
  const std::size_t first_leaf = (std::size_t{1} << n) - 1;
  auto state = [&](std::size_t v) { return v >= first_leaf ? leaves[v - first_leaf] : internal[v]; };
  for (std::size_t v = first_leaf; v-- > 0;)
    internal[v] = model(static_cast<std::size_t>(state(2 * v + 1)), static_cast<std::size_t>(state(2 * v + 2)),
                        static_cast<std::size_t>(innovations[v]));
}

/// Decode `code` into `digits` with digit 0 the most significant.
void decode(std::uint64_t code, std::size_t radix, std::vector<int>& digits) {
  for (std::size_t i = digits.size(); i-- > 0;) {
    digits[i] = static_cast<int>(code % radix);
    code /= radix;
  }
}

/// A tensor over (leaves, innovations) with the RootTensor layout.
using Tensor = std::vector<double>;

Tensor observable_tensor(const RootTensor& rt, const Vector& f) {
  Tensor t(rt.root_state.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = f[rt.root_state[i]];
  return t;
}

double tensor_norm_sq(const RootTensor& rt, const Tensor& t) {
  const std::size_t ib = rt.innovation_block();
  double total = 0.0;
  for (std::size_t l = 0; l < rt.leaf_weight.size(); ++l) {
    double row = 0.0;
    for (std::size_t c = 0; c < ib; ++c) row += rt.innovation_weight[c] * t[l * ib + c] * t[l * ib + c];
    total += rt.leaf_weight[l] * row;
  }
  return total;
}

std::size_t leaf_stride(const RootTensor& rt, std::size_t leaf) {
  std::size_t stride = rt.innovation_block();
  for (std::size_t k = leaf + 1; k < rt.leaf_count(); ++k) stride *= rt.s;
  return stride;
}

/// Apply the s x s matrix M to the given leaf coordinate: v'_k = sum_l M(k, l) v_l.
Tensor apply_at_leaf(const RootTensor& rt, const Tensor& t, std::size_t leaf, const Matrix& M) {
  const std::size_t stride = leaf_stride(rt, leaf), s = rt.s;
  const std::size_t outer = t.size() / (stride * s);
  Tensor out(t.size(), 0.0);
  std::vector<double> v(s);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < stride; ++i) {
      const std::size_t base = o * stride * s + i;
      for (std::size_t k = 0; k < s; ++k) v[k] = t[base + k * stride];
      for (std::size_t k = 0; k < s; ++k) {
        double acc = 0.0;
        for (std::size_t l = 0; l < s; ++l) acc += M(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) * v[l];
        out[base + k * stride] = acc;
      }
    }
  return out;
}

Matrix constants_projection(const RtpModel& model) {
  const auto s = static_cast<Eigen::Index>(model.s());
  Matrix p(s, s);
  for (Eigen::Index k = 0; k < s; ++k)
    for (Eigen::Index l = 0; l < s; ++l) p(k, l) = model.mu[static_cast<std::size_t>(l)];
  return p;
}

void subset_recurse(const RootTensor& rt, const Matrix& p1, const Tensor& t, std::size_t leaf, std::uint64_t mask,
                    std::map<std::uint64_t, double>& out) {
  if (leaf == rt.leaf_count()) {
    out[mask] = tensor_norm_sq(rt, t);
    return;
  }
  Tensor kept = apply_at_leaf(rt, t, leaf, p1);
  Tensor removed(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) removed[i] = t[i] - kept[i];
  subset_recurse(rt, p1, kept, leaf + 1, mask, out);
  subset_recurse(rt, p1, removed, leaf + 1, mask | (std::uint64_t{1} << leaf), out);
}

}  // namespace

std::uint64_t assignment_count(const RtpModel& model, std::size_t n) {
  if (n >= 63) return kOverflow;
  const std::uint64_t leaves = std::uint64_t{1} << n;
  return checked_product(checked_power(model.s(), leaves), checked_power(model.e(), leaves - 1));
}

void enumerate(const RtpModel& model, std::size_t n, const std::function<void(const TreeAssignment&)>& visit,
               std::uint64_t cap) {
  const std::uint64_t count = assignment_count(model, n);
  if (count > cap)
    throw ResourceError("enumeration at depth " + std::to_string(n) + " needs " +
                        (count == kOverflow ? std::string("more than 2^64") : std::to_string(count)) +
                        " assignments (cap " + std::to_string(cap) + ")");
  const std::size_t leaves = std::size_t{1} << n;
  const std::uint64_t leaf_configs = checked_power(model.s(), leaves);
  const std::uint64_t innovation_configs = checked_power(model.e(), leaves - 1);

  TreeAssignment a;
  a.level = n;
  a.leaves.resize(leaves);
  a.innovations.resize(leaves - 1);
  a.internal.resize(leaves - 1);
  for (std::uint64_t lc = 0; lc < leaf_configs; ++lc) {
    decode(lc, model.s(), a.leaves);
    double wl = 1.0;
    for (int x : a.leaves) wl *= model.mu[static_cast<std::size_t>(x)];
    for (std::uint64_t ic = 0; ic < innovation_configs; ++ic) {
      decode(ic, model.e(), a.innovations);
      double w = wl;
      for (int z : a.innovations) w *= model.nu[static_cast<std::size_t>(z)];
      fill_internal(model, n, a.leaves, a.innovations, a.internal);
      a.weight = w;
      visit(a);
    }
  }
}

RootTensor root_tensor(const RtpModel& model, std::size_t n, std::uint64_t cap) {
  require_level(n);
  const std::uint64_t count = assignment_count(model, n);
  if (count > cap)
    throw ResourceError("root tensor at depth " + std::to_string(n) + " needs " +
                        (count == kOverflow ? std::string("more than 2^64") : std::to_string(count)) +
                        " entries (cap " + std::to_string(cap) + ")");
  RootTensor rt;
  rt.level = n;
  rt.s = model.s();
  rt.e = model.e();
  const std::size_t leaves = std::size_t{1} << n;
  const std::uint64_t leaf_configs = checked_power(model.s(), leaves);
  const std::uint64_t innovation_configs = checked_power(model.e(), leaves - 1);
  rt.root_state.resize(count);
  rt.leaf_weight.resize(leaf_configs);
  rt.innovation_weight.resize(innovation_configs);

  std::vector<int> leaf_digits(leaves), innovation_digits(leaves - 1), internal(leaves - 1);
  for (std::uint64_t ic = 0; ic < innovation_configs; ++ic) {
    decode(ic, model.e(), innovation_digits);
    double w = 1.0;
    for (int z : innovation_digits) w *= model.nu[static_cast<std::size_t>(z)];
    rt.innovation_weight[ic] = w;
  }
  for (std::uint64_t lc = 0; lc < leaf_configs; ++lc) {
    decode(lc, model.s(), leaf_digits);
    double w = 1.0;
    for (int x : leaf_digits) w *= model.mu[static_cast<std::size_t>(x)];
    rt.leaf_weight[lc] = w;
    for (std::uint64_t ic = 0; ic < innovation_configs; ++ic) {
      decode(ic, model.e(), innovation_digits);
      fill_internal(model, n, leaf_digits, innovation_digits, internal);
      rt.root_state[lc * innovation_configs + ic] = internal.empty() ? leaf_digits.front() : internal.front();
    }
  }
  return rt;
}

std::map<std::uint64_t, double> exact_subset_norms(const RtpModel& model, const Vector& f, std::size_t n) {
  require_observable(model, f);
  const RootTensor rt = root_tensor(model, n);
  std::map<std::uint64_t, double> out;
  subset_recurse(rt, constants_projection(model), observable_tensor(rt, f), 0, 0, out);
  return out;
}

std::vector<double> exact_spectral_measure(const RtpModel& model, const Vector& f, std::size_t n) {
  const auto norms = exact_subset_norms(model, f, n);
  std::vector<double> masses((std::size_t{1} << n) + 1, 0.0);
  for (const auto& [mask, value] : norms) masses[static_cast<std::size_t>(std::popcount(mask))] += value;
  return masses;
}

double measure_pgf(const std::vector<double>& masses, double z) {
  double acc = 0.0;
  for (std::size_t k = masses.size(); k-- > 0;) acc = acc * z + masses[k];
  return acc;
}

KnResidual exact_kn_residual(const RtpModel& model, const Vector& f, std::size_t n) {
  require_observable(model, f);
  const RootTensor rt = root_tensor(model, n);
  const std::size_t ib = rt.innovation_block();
  std::vector<double> conditional(ib, 0.0);
  for (std::size_t l = 0; l < rt.leaf_weight.size(); ++l)
    for (std::size_t c = 0; c < ib; ++c) conditional[c] += rt.leaf_weight[l] * f[rt.root_state[l * ib + c]];

  KnResidual r;
  for (std::size_t l = 0; l < rt.leaf_weight.size(); ++l)
    for (std::size_t c = 0; c < ib; ++c) {
      const double d = f[rt.root_state[l * ib + c]] - conditional[c];
      r.residual += rt.leaf_weight[l] * rt.innovation_weight[c] * d * d;
    }
  const auto masses = exact_spectral_measure(model, f, n);
  for (std::size_t k = 0; k < masses.size(); ++k) r.number_form += static_cast<double>(k) * masses[k];
  return r;
}

double exact_coupling_disagreement(const RtpModel& model, std::size_t n) {
  const RootTensor rt = root_tensor(model, n);
  const std::size_t ib = rt.innovation_block();
  double disagreement = 0.0;
  std::vector<double> h(rt.s);
  for (std::size_t c = 0; c < ib; ++c) {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t l = 0; l < rt.leaf_weight.size(); ++l)
      h[static_cast<std::size_t>(rt.root_state[l * ib + c])] += rt.leaf_weight[l];
    double agree = 0.0;
    for (double p : h) agree += p * p;
    disagreement += rt.innovation_weight[c] * (1.0 - agree);
  }
  return disagreement;
}

double exact_qn_norm_sq(const RtpModel& model, const Matrix& Q, double scale, const Vector& f, std::size_t n) {
  require_observable(model, f);
  const RootTensor rt = root_tensor(model, n);
  const Tensor t = observable_tensor(rt, f);
  Tensor sum(t.size(), 0.0);
  for (std::size_t leaf = 0; leaf < rt.leaf_count(); ++leaf) {
    const Tensor part = apply_at_leaf(rt, t, leaf, Q);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += scale * part[i];
  }
  return tensor_norm_sq(rt, sum);
}

double dense_spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<OracleCheck> oracle_checks(const RtpModel& model, std::size_t n, const std::vector<Vector>& observables) {
  std::vector<OracleCheck> out;
  auto add = [&](std::string name, double value, double tol) {
    out.push_back({std::move(name), value, tol, std::isfinite(value) && value <= tol});
  };
  const std::string level = "n=" + std::to_string(n);

  double total = 0.0;
  std::vector<double> root_law(model.s(), 0.0);
  enumerate(model, n, [&](const TreeAssignment& a) {
    total += a.weight;
    root_law[static_cast<std::size_t>(a.root())] += a.weight;
  });
  add("weights sum to one " + level, std::abs(total - 1.0), 1e-12);
  double drift = 0.0;
  for (std::size_t x = 0; x < model.s(); ++x) drift = std::max(drift, std::abs(root_law[x] - model.mu[x]));
  add("root law equals mu " + level, drift, 1e-10);

  const PairMeasure start = PairMeasure::product(model.mu);
  double bivariate = std::numeric_limits<double>::quiet_NaN();
  try {
    bivariate = bivariate_iterate(model, start, n, 0.0).off_mass.at(n);
  } catch (const ConsistencyError&) {
  }
  add("coupling disagreement equals bivariate mass " + level,
      std::abs(exact_coupling_disagreement(model, n) - bivariate), 1e-12);

  const bool positive_mu = std::all_of(model.mu.begin(), model.mu.end(), [](double m) { return m > 0.0; });
  std::optional<Superoperators> ops;
  if (positive_mu) ops.emplace(model);

  for (std::size_t i = 0; i < observables.size(); ++i) {
    const Vector& f = observables[i];
    const std::string tag = " f" + std::to_string(i) + " " + level;
    const auto norms = exact_subset_norms(model, f, n);
    double sum = 0.0;
    for (const auto& [mask, value] : norms) sum += value;
    double f_norm = 0.0;
    for (std::size_t x = 0; x < model.s(); ++x) f_norm += model.mu[x] * f[static_cast<Eigen::Index>(x)] * f[static_cast<Eigen::Index>(x)];
    add("subset norms sum to ||f||^2" + tag, std::abs(sum - f_norm), 1e-12);

    const auto masses = exact_spectral_measure(model, f, n);
    double mean = 0.0;
    for (std::size_t k = 0; k < masses.size(); ++k) mean += static_cast<double>(k) * masses[k];
    add("spectral mean equals number form" + tag, std::abs(mean - number_form(model, f, n)), 1e-10);

    const KnResidual kn = exact_kn_residual(model, f, n);
    add("innovation residual bounded by number form" + tag, kn.residual - kn.number_form, 1e-12);

    if (ops) {
      double gap = 0.0;
      for (double z : {0.0, 0.25, 0.5, 0.75, 1.0})
        gap = std::max(gap, std::abs(pgf_spectral_measure(*ops, f, n, z) - measure_pgf(masses, z)));
      add("generating function matches enumeration" + tag, gap, 1e-10);
    }
  }
  return out;
}

}  // namespace endotree
