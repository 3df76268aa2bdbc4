#include "endotree/spectral.hpp"

#include "endotree/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace endotree {

namespace {

using Index = Eigen::Index;

std::vector<std::vector<std::size_t>> adjacency(const Matrix& m) {
  const auto n = static_cast<std::size_t>(m.rows());
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (m(static_cast<Index>(i), static_cast<Index>(j)) > 0.0) adj[i].push_back(j);
  return adj;
}

}  // namespace

SupportComponents support_components(const Matrix& m) {
  const auto n = static_cast<std::size_t>(m.rows());
  const auto adj = adjacency(m);
  SupportComponents out;
  out.component_of.assign(n, 0);

  // Iterative Tarjan.
  constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> number(n, unvisited), low(n, 0), next_edge(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack, call;
  std::size_t counter = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (number[root] != unvisited) continue;
    call.push_back(root);
    number[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      const std::size_t v = call.back();
      if (next_edge[v] < adj[v].size()) {
        const std::size_t w = adj[v][next_edge[v]++];
        if (number[w] == unvisited) {
          number[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back(w);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], number[w]);
        }
        continue;
      }
      call.pop_back();
      if (!call.empty()) low[call.back()] = std::min(low[call.back()], low[v]);
      if (low[v] == number[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          out.component_of[w] = out.members.size();
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        out.members.push_back(std::move(comp));
      }
    }
  }

  const std::size_t c = out.members.size();
  out.reaches.assign(c, std::vector<bool>(c, false));
  // Tarjan emits components in reverse topological order: successors first.
  for (std::size_t a = 0; a < c; ++a) {
    out.reaches[a][a] = true;
    for (auto v : out.members[a])
      for (auto w : adj[v]) {
        const std::size_t b = out.component_of[w];
        if (b == a) continue;
        for (std::size_t k = 0; k < c; ++k)
          if (out.reaches[b][k]) out.reaches[a][k] = true;
      }
  }
  return out;
}

StructureFlags structure_flags(const Matrix& pminus) {
  StructureFlags f;
  const auto n = static_cast<std::size_t>(pminus.rows());
  if (n == 0) {
    f.degenerate = true;
    return f;
  }
  const auto comps = support_components(pminus);
  f.components = comps.members.size();
  const auto adj = adjacency(pminus);
  bool has_edge = false;
  for (const auto& a : adj) has_edge = has_edge || !a.empty();
  f.irreducible = f.components == 1 && has_edge;
  if (!f.irreducible) return f;

  // Period: gcd of level differences along edges of a BFS layering.
  std::vector<long> level(n, -1);
  std::queue<std::size_t> q;
  level[0] = 0;
  q.push(0);
  while (!q.empty()) {
    const auto v = q.front();
    q.pop();
    for (auto w : adj[v])
      if (level[w] < 0) {
        level[w] = level[v] + 1;
        q.push(w);
      }
  }
  long g = 0;
  for (std::size_t v = 0; v < n; ++v)
    for (auto w : adj[v]) g = std::gcd(g, std::labs(level[v] + 1 - level[w]));
  f.period = static_cast<std::size_t>(g);
  f.primitive = f.period == 1;
  return f;
}

namespace {

struct BlockPerron {
  double root = 0.0;
  Vector right;
  Vector left;
};

// Power iteration on B + I; returns the Perron vector normalized to max 1.
Vector shifted_power(const Matrix& b, double tol, std::size_t max_iter, double& root) {
  const Index k = b.rows();
  Vector v = Vector::Ones(k);
  double lo = 0.0, hi = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector w = b * v + v;
    lo = std::numeric_limits<double>::infinity();
    hi = 0.0;
    for (Index i = 0; i < k; ++i) {
      const double r = w[i] / v[i];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    v = w / w.maxCoeff();
    if (hi - lo <= tol * hi) {
      root = 0.5 * (lo + hi) - 1.0;
      return v;
    }
  }
  throw ConvergenceError("Perron iteration did not converge; last bracket [" + std::to_string(lo - 1.0) +
                             ", " + std::to_string(hi - 1.0) + "]",
                         hi - lo);
}

BlockPerron block_perron(const Matrix& b, double tol, std::size_t max_iter) {
  BlockPerron out;
  if (b.rows() == 1) {
    out.root = b(0, 0);
    out.right = Vector::Ones(1);
    out.left = Vector::Ones(1);
    return out;
  }
  double r_root = 0.0, l_root = 0.0;
  out.right = shifted_power(b, tol, max_iter, r_root);
  out.left = shifted_power(b.transpose(), tol, max_iter, l_root);
  out.root = 0.5 * (r_root + l_root);
  return out;
}

Matrix submatrix(const Matrix& m, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Index>(i), static_cast<Index>(j)) = m(static_cast<Index>(rows[i]), static_cast<Index>(cols[j]));
  return out;
}

struct Decomposition {
  SupportComponents comps;
  std::vector<BlockPerron> blocks;
  double rho = 0.0;
};

Decomposition decompose(const Matrix& pminus, double tol, std::size_t max_iter) {
  Decomposition d;
  d.comps = support_components(pminus);
  for (const auto& members : d.comps.members) {
    d.blocks.push_back(block_perron(submatrix(pminus, members, members), tol, max_iter));
    d.rho = std::max(d.rho, d.blocks.back().root);
  }
  if (d.rho > 1.0 + 1e-12)
    throw ConsistencyError("spectral radius of a substochastic matrix exceeds 1: " + std::to_string(d.rho));
  return d;
}

}  // namespace

double perron_root(const Matrix& pminus, double tol, std::size_t max_iter) {
  if (pminus.rows() != pminus.cols()) throw DomainError("perron_root needs a square matrix");
  if (pminus.rows() == 0) return 0.0;
  return decompose(pminus, tol, max_iter).rho;
}

PerronVectors eigenvectors(const PairIndex& index, const Matrix& pminus, const std::vector<double>& mu,
                           double tol) {
  const auto d = decompose(pminus, tol, 2'000'000);
  if (!(d.rho > 0.0)) throw DomainError("no Perron eigenvector: rho = 0");
  const auto n = static_cast<std::size_t>(pminus.rows());
  const std::size_t c = d.comps.members.size();

  std::vector<std::size_t> dominant;
  for (std::size_t a = 0; a < c; ++a)
    if (std::abs(d.blocks[a].root - d.rho) <= 1e-10 * std::max(1.0, d.rho)) dominant.push_back(a);

  PerronVectors pv;
  pv.rho = d.rho;
  pv.dominant_classes = dominant.size();
  pv.reducible_choice = dominant.size() > 1;
  pv.kappa = Vector::Zero(static_cast<Index>(n));
  pv.theta = Vector::Zero(static_cast<Index>(n));

  for (auto a : dominant) {
    const auto& members = d.comps.members[a];
    bool reaches_other = false, reached_by_other = false;
    for (auto b : dominant) {
      if (b == a) continue;
      reaches_other = reaches_other || d.comps.reaches[a][b];
      reached_by_other = reached_by_other || d.comps.reaches[b][a];
    }

    if (!reaches_other) {
      // Left vector: Perron vector on the class, extended to everything downstream.
      std::vector<std::size_t> down;
      for (std::size_t v = 0; v < n; ++v) {
        const auto b = d.comps.component_of[v];
        if (b != a && d.comps.reaches[a][b]) down.push_back(v);
      }
      Vector k_a = d.blocks[a].left / d.blocks[a].left.sum();
      Vector full = Vector::Zero(static_cast<Index>(n));
      for (std::size_t i = 0; i < members.size(); ++i) full[static_cast<Index>(members[i])] = k_a[static_cast<Index>(i)];
      if (!down.empty()) {
        // x (rho I - P_RR) = k_a P_AR
        const Matrix prr = submatrix(pminus, down, down);
        const Matrix par = submatrix(pminus, members, down);
        const Matrix lhs = (d.rho * Matrix::Identity(prr.rows(), prr.cols()) - prr).transpose();
        const Vector rhs = par.transpose() * k_a;
        const Vector x = lhs.partialPivLu().solve(rhs);
        for (std::size_t i = 0; i < down.size(); ++i) full[static_cast<Index>(down[i])] = std::max(0.0, x[static_cast<Index>(i)]);
      }
      pv.kappa += full / full.sum();
    }

    if (!reached_by_other) {
      std::vector<std::size_t> up;
      for (std::size_t v = 0; v < n; ++v) {
        const auto b = d.comps.component_of[v];
        if (b != a && d.comps.reaches[b][a]) up.push_back(v);
      }
      Vector t_a = d.blocks[a].right / d.blocks[a].right.sum();
      Vector full = Vector::Zero(static_cast<Index>(n));
      for (std::size_t i = 0; i < members.size(); ++i) full[static_cast<Index>(members[i])] = t_a[static_cast<Index>(i)];
      if (!up.empty()) {
        // (rho I - P_UU) y = P_UA t_a
        const Matrix puu = submatrix(pminus, up, up);
        const Matrix pua = submatrix(pminus, up, members);
        const Matrix lhs = d.rho * Matrix::Identity(puu.rows(), puu.cols()) - puu;
        const Vector y = lhs.partialPivLu().solve(pua * t_a);
        for (std::size_t i = 0; i < up.size(); ++i) full[static_cast<Index>(up[i])] = std::max(0.0, y[static_cast<Index>(i)]);
      }
      pv.theta += full / full.sum();
    }
  }

  // kappa <- (kappa + kappa o swap) / 2
  Vector sym(pv.kappa.size());
  for (std::size_t k = 0; k < n; ++k)
    sym[static_cast<Index>(k)] = 0.5 * (pv.kappa[static_cast<Index>(k)] + pv.kappa[static_cast<Index>(index.off_swap(k))]);
  pv.kappa = sym;

  double theta_mumu = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto a = index.off_pair(k);
    theta_mumu += pv.theta[static_cast<Index>(k)] * mu[index.first(a)] * mu[index.second(a)];
  }
  pv.theta /= theta_mumu;
  const double overlap = pv.theta.dot(pv.kappa);
  if (overlap > 1e-300) {
    pv.kappa /= overlap;
    pv.normalized = true;
  } else {
    pv.kappa /= pv.kappa.sum();
  }

  const std::size_t s = index.states();
  pv.kappa_star = Matrix::Zero(static_cast<Index>(s), static_cast<Index>(s));
  for (std::size_t k = 0; k < n; ++k) {
    const auto a = index.off_pair(k);
    pv.kappa_star(static_cast<Index>(index.first(a)), static_cast<Index>(index.second(a))) = pv.kappa[static_cast<Index>(k)];
  }
  for (Index x = 0; x < static_cast<Index>(s); ++x) pv.kappa_star(x, x) = -pv.kappa_star.row(x).sum();
  return pv;
}

SpectralData analyze_spectrum(const RtpModel& model, const PairKernel& kernel) {
  SpectralData sd;
  sd.flags = structure_flags(kernel.minus);
  sd.rho = perron_root(kernel.minus);
  if (sd.rho > 0.0) {
    sd.vectors = eigenvectors(kernel.index, kernel.minus, model.mu);
    sd.has_vectors = true;
  }
  return sd;
}

double check_con_limit(const Matrix& pminus, const SpectralData& spectral, std::size_t n) {
  if (!spectral.flags.primitive || !(spectral.rho > 0.0) || !spectral.has_vectors)
    throw DomainError("rank-one Perron limit needs a primitive P^(-) with rho > 0");
  const Matrix step = pminus / spectral.rho;
  Matrix power = Matrix::Identity(pminus.rows(), pminus.cols());
  for (std::size_t k = 0; k < n; ++k) power = power * step;
  const Matrix limit = spectral.vectors.theta * spectral.vectors.kappa.transpose();
  return max_abs(Matrix(power - limit));
}

BoundednessProbe two_rho_boundedness_probe(const Matrix& pminus, std::size_t n_max) {
  BoundednessProbe p;
  if (pminus.rows() == 0) {
    p.norms.assign(n_max + 1, 0.0);
    return p;
  }
  Matrix power = Matrix::Identity(pminus.rows(), pminus.cols());
  const Matrix step = 2.0 * pminus;
  for (std::size_t k = 0; k <= n_max; ++k) {
    if (k > 0) power = power * step;
    p.norms.push_back(row_sum_norm(power));
    if (p.norms.back() > p.maximum) {
      p.maximum = p.norms.back();
      p.argmax = k;
    }
  }
  return p;
}

std::string spectral_json(const RtpModel& model, const PairIndex& index, const SpectralData& sd) {
  nlohmann::ordered_json j;
  j["rho"] = sd.rho;
  j["two_rho"] = 2.0 * sd.rho;
  j["irreducible"] = sd.flags.irreducible;
  j["primitive"] = sd.flags.primitive;
  j["period"] = sd.flags.period;
  j["degenerate"] = sd.flags.degenerate;
  j["components"] = sd.flags.components;
  if (sd.has_vectors) {
    const auto& v = sd.vectors;
    nlohmann::ordered_json kappa, theta;
    for (std::size_t k = 0; k < index.off_size(); ++k) {
      const auto label = index.label(model, index.off_pair(k));
      kappa[label] = v.kappa[static_cast<Index>(k)];
      theta[label] = v.theta[static_cast<Index>(k)];
    }
    nlohmann::ordered_json kstar;
    for (std::size_t a = 0; a < index.size(); ++a)
      kstar[index.label(model, a)] =
          v.kappa_star(static_cast<Index>(index.first(a)), static_cast<Index>(index.second(a)));
    j["kappa"] = kappa;
    j["theta"] = theta;
    j["kappa_star"] = kstar;
    j["reducible_choice"] = v.reducible_choice;
    j["dominant_classes"] = v.dominant_classes;
    j["normalized"] = v.normalized;
  }
  return j.dump(2);
}

}  // namespace endotree
