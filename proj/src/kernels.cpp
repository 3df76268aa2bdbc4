#include "endotree/kernels.hpp"

#include "endotree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace endotree {

PairIndex::PairIndex(std::size_t s) : s_(s), pos_(s * s, -1) {
  for (std::size_t x = 0; x < s; ++x)
    for (std::size_t xp = 0; xp < s; ++xp)
      if (x != xp) {
        pos_[pair(x, xp)] = static_cast<long>(off_.size());
        off_.push_back(pair(x, xp));
      }
}

std::string PairIndex::label(const RtpModel& model, std::size_t a) const {
  return "(" + model.states[first(a)] + "," + model.states[second(a)] + ")";
}

PairMeasure::PairMeasure(std::size_t s, RowVector weights) : s_(s), w_(std::move(weights)) {
  if (static_cast<std::size_t>(w_.size()) != s * s)
    throw ConsistencyError("pair measure size does not match the state count");
}

PairMeasure PairMeasure::zero(std::size_t s) {
  return PairMeasure(s, RowVector::Zero(static_cast<Eigen::Index>(s * s)));
}

PairMeasure PairMeasure::diagonal(const std::vector<double>& mu) {
  auto m = zero(mu.size());
  for (std::size_t x = 0; x < mu.size(); ++x) m.w_[static_cast<Eigen::Index>(x * mu.size() + x)] = mu[x];
  return m;
}

PairMeasure PairMeasure::product(const std::vector<double>& mu) {
  auto m = zero(mu.size());
  for (std::size_t x = 0; x < mu.size(); ++x)
    for (std::size_t xp = 0; xp < mu.size(); ++xp)
      m.w_[static_cast<Eigen::Index>(x * mu.size() + xp)] = mu[x] * mu[xp];
  return m;
}

PairMeasure PairMeasure::from_operator(const std::vector<double>& mu, const Matrix& L) {
  const std::size_t s = mu.size();
  auto m = zero(s);
  for (std::size_t x = 0; x < s; ++x)
    for (std::size_t xp = 0; xp < s; ++xp)
      m.w_[static_cast<Eigen::Index>(x * s + xp)] =
          mu[x] * L(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(xp));
  return m;
}

double PairMeasure::off_diagonal_mass() const {
  double d = 0.0;
  for (std::size_t x = 0; x < s_; ++x)
    for (std::size_t xp = 0; xp < s_; ++xp)
      if (x != xp) d += (*this)(x, xp);
  return d;
}

std::vector<double> PairMeasure::first_marginal() const {
  std::vector<double> m(s_, 0.0);
  for (std::size_t x = 0; x < s_; ++x)
    for (std::size_t xp = 0; xp < s_; ++xp) m[x] += (*this)(x, xp);
  return m;
}

std::vector<double> PairMeasure::second_marginal() const {
  std::vector<double> m(s_, 0.0);
  for (std::size_t x = 0; x < s_; ++x)
    for (std::size_t xp = 0; xp < s_; ++xp) m[xp] += (*this)(x, xp);
  return m;
}

Matrix one_point_kernel(const RtpModel& model) {
  const std::size_t s = model.s(), e = model.e();
  Matrix P = Matrix::Zero(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
  for (std::size_t x0 = 0; x0 < s; ++x0)
    for (std::size_t x1 = 0; x1 < s; ++x1)
      for (std::size_t z = 0; z < e; ++z)
        P(static_cast<Eigen::Index>(x0), model(x0, x1, z)) += model.mu[x1] * model.nu[z];
  return P;
}

PairKernel two_point_kernel(const RtpModel& model) {
  const std::size_t s = model.s(), e = model.e();
  PairIndex idx(s);
  const auto n = static_cast<Eigen::Index>(idx.size());
  Matrix full = Matrix::Zero(n, n);
  for (std::size_t x0 = 0; x0 < s; ++x0)
    for (std::size_t x0p = 0; x0p < s; ++x0p) {
      const auto from = static_cast<Eigen::Index>(idx.pair(x0, x0p));
      for (std::size_t x1 = 0; x1 < s; ++x1)
        for (std::size_t z = 0; z < e; ++z) {
          const auto to = static_cast<Eigen::Index>(
              idx.pair(static_cast<std::size_t>(model(x0, x1, z)), static_cast<std::size_t>(model(x0p, x1, z))));
          full(from, to) += model.mu[x1] * model.nu[z];
        }
    }
  const auto m = static_cast<Eigen::Index>(idx.off_size());
  Matrix minus(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      minus(i, j) = full(static_cast<Eigen::Index>(idx.off_pair(static_cast<std::size_t>(i))),
                         static_cast<Eigen::Index>(idx.off_pair(static_cast<std::size_t>(j))));
  return PairKernel{std::move(idx), std::move(full), std::move(minus)};
}

PairMeasure apply_T2(const RtpModel& model, const PairMeasure& l0, const PairMeasure& l1) {
  const std::size_t s = model.s(), e = model.e();
  auto out = PairMeasure::zero(s);
  auto& w = out.weights();
  for (std::size_t x0 = 0; x0 < s; ++x0)
    for (std::size_t x0p = 0; x0p < s; ++x0p) {
      const double a = l0(x0, x0p);
      if (a == 0.0) continue;
      for (std::size_t x1 = 0; x1 < s; ++x1)
        for (std::size_t x1p = 0; x1p < s; ++x1p) {
          const double b = a * l1(x1, x1p);
          if (b == 0.0) continue;
          for (std::size_t z = 0; z < e; ++z)
            w[static_cast<Eigen::Index>(static_cast<std::size_t>(model(x0, x1, z)) * s +
                                        static_cast<std::size_t>(model(x0p, x1p, z)))] += b * model.nu[z];
        }
    }
  return out;
}

BivariateTrace bivariate_iterate(const RtpModel& model, const PairMeasure& start, std::size_t n_max,
                                 double tol, double stationary_tol) {
  BivariateTrace tr;
  PairMeasure lambda = start;
  auto check_marginals = [&](const PairMeasure& m) {
    const auto a = m.first_marginal(), b = m.second_marginal();
    for (std::size_t x = 0; x < model.s(); ++x) {
      const double drift = std::max(std::abs(a[x] - model.mu[x]), std::abs(b[x] - model.mu[x]));
      if (drift > 1e-8)
        throw ConsistencyError("bivariate iterate marginal drifted by " + std::to_string(drift));
    }
  };
  check_marginals(lambda);
  tr.off_mass.push_back(lambda.off_diagonal_mass());
  for (std::size_t k = 0; k < n_max; ++k) {
    if (tr.off_mass.back() < tol) {
      tr.stopped_below_tol = true;
      break;
    }
    PairMeasure next = apply_T2(model, lambda, lambda);
    // The map squares the total mass, so rounding drift would double at every
    // step; the iterates are probability measures, so renormalize.
    next.weights() /= next.total();
    check_marginals(next);
    const double change = max_abs(RowVector(next.weights() - lambda.weights()));
    lambda = std::move(next);
    tr.off_mass.push_back(lambda.off_diagonal_mass());
    if (stationary_tol > 0.0 && change <= stationary_tol) {
      tr.stopped_stationary = true;
      break;
    }
  }
  if (!tr.stopped_below_tol && tr.off_mass.back() < tol) tr.stopped_below_tol = true;
  tr.terminal = std::move(lambda);

  // Geometric mean of the trailing ratios.
  const auto& d = tr.off_mass;
  double log_sum = 0.0;
  int count = 0;
  for (std::size_t k = d.size() - 1; k >= 1 && count < 5; --k) {
    if (d[k - 1] <= 0.0 || d[k] <= 0.0) break;
    log_sum += std::log(d[k] / d[k - 1]);
    ++count;
  }
  tr.decay_ratio = count > 0 ? std::exp(log_sum / count) : std::numeric_limits<double>::quiet_NaN();
  return tr;
}

double number_form(const RtpModel& model, const PairKernel& kernel, const Vector& f, const Vector& g,
                   std::size_t n) {
  const auto& idx = kernel.index;
  RowVector lambda = PairMeasure::product(model.mu).weights();
  for (std::size_t k = 0; k < n; ++k) lambda = lambda * kernel.full;
  double acc = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const auto x = static_cast<Eigen::Index>(idx.first(a)), xp = static_cast<Eigen::Index>(idx.second(a));
    acc += lambda[static_cast<Eigen::Index>(a)] * 0.5 * (f[x] - f[xp]) * (g[x] - g[xp]);
  }
  return std::ldexp(acc, static_cast<int>(n));
}

double number_form(const RtpModel& model, const Vector& f, std::size_t n) {
  return number_form(model, two_point_kernel(model), f, f, n);
}

std::string matrix_csv(const Matrix& m, const std::vector<std::string>& rows,
                       const std::vector<std::string>& cols) {
  std::ostringstream os;
  os.precision(17);
  os << "label";
  for (const auto& c : cols) os << ',' << '"' << c << '"';
  os << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << '"' << rows[static_cast<std::size_t>(i)] << '"';
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << m(i, j);
    os << '\n';
  }
  return os.str();
}

std::vector<std::string> pair_labels(const RtpModel& model, const PairIndex& index, bool off_only) {
  std::vector<std::string> out;
  if (off_only) {
    for (std::size_t k = 0; k < index.off_size(); ++k) out.push_back(index.label(model, index.off_pair(k)));
  } else {
    for (std::size_t a = 0; a < index.size(); ++a) out.push_back(index.label(model, a));
  }
  return out;
}

}  // namespace endotree
