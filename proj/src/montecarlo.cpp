#include "endotree/montecarlo.hpp"

#include "endotree/errors.hpp"
#include "endotree/kernels.hpp"
#include "endotree/parallel.hpp"
#include "endotree/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace endotree {

namespace {

constexpr std::size_t kBatches = 32;

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<int> draw(std::size_t count, const std::vector<double>& weights, RngStream& rng) {
  std::vector<int> out(count);
  for (auto& x : out) x = static_cast<int>(rng.discrete(weights));
  return out;
}

/// Batch-means standard error of the overall mean.
double batch_standard_error(const std::vector<double>& batch_means) {
  const double b = static_cast<double>(batch_means.size());
  const double mean = std::accumulate(batch_means.begin(), batch_means.end(), 0.0) / b;
  double ss = 0.0;
  for (double m : batch_means) ss += (m - mean) * (m - mean);
  return std::sqrt(ss / (b - 1.0) / b);
}

}  // namespace

TreeConfig::TreeConfig(const RtpModel& model, std::size_t n, std::vector<int> leaves, std::vector<int> innovations)
    : model_(&model), n_(n), leaves_(std::move(leaves)), innovations_(std::move(innovations)) {
  const std::size_t count = std::size_t{1} << n;
  if (leaves_.size() != count || innovations_.size() != count - 1)
    throw DomainError("tree configuration of depth " + std::to_string(n) + " needs " + std::to_string(count) +
                      " leaves and " + std::to_string(count - 1) + " innovations");
  internal_.assign(count - 1, 0);
  rebuild();
}

int TreeConfig::state_of(std::size_t vertex) const {
  return vertex >= internal_.size() ? leaves_[vertex - internal_.size()] : internal_[vertex];
}

void TreeConfig::evaluate(std::size_t vertex) {
  internal_[vertex] = (*model_)(static_cast<std::size_t>(state_of(2 * vertex + 1)),
                                static_cast<std::size_t>(state_of(2 * vertex + 2)),
                                static_cast<std::size_t>(innovations_[vertex]));
}

void TreeConfig::rebuild() {
  for (std::size_t v = internal_.size(); v-- > 0;) evaluate(v);
}

void TreeConfig::set_leaf(std::size_t j, int state) {
  if (leaves_[j] == state) return;
  leaves_[j] = state;
  std::size_t v = internal_.size() + j;
  while (v > 0) {
    v = (v - 1) / 2;
    evaluate(v);
    ++recomputed_;
  }
}

bool TreeConfig::consistent() const {
  for (std::size_t v = 0; v < internal_.size(); ++v)
    if (internal_[v] != (*model_)(static_cast<std::size_t>(state_of(2 * v + 1)),
                                  static_cast<std::size_t>(state_of(2 * v + 2)),
                                  static_cast<std::size_t>(innovations_[v])))
      return false;
  return true;
}

TreeConfig sample_config(const RtpModel& model, std::size_t n, RngStream& rng) {
  const std::size_t leaves = std::size_t{1} << n;
  auto innovations = draw(leaves - 1, model.nu, rng);
  auto leaf_states = draw(leaves, model.mu, rng);
  return TreeConfig(model, n, std::move(leaf_states), std::move(innovations));
}

Estimate coupling_estimate(const RtpModel& model, std::size_t n, std::size_t trials, std::uint64_t seed,
                           unsigned threads) {
  if (trials < 100) throw DomainError("coupling estimate needs at least 100 trials");
  const std::size_t leaves = std::size_t{1} << n;
  constexpr std::size_t blocks = 64;
  std::vector<std::size_t> disagreements(blocks, 0);
  for_each_block(blocks, threads, [&](std::size_t b) {
    for (std::size_t k = trials * b / blocks; k < trials * (b + 1) / blocks; ++k) {
      RngStream rng(seed, k);
      auto innovations = draw(leaves - 1, model.nu, rng);
      TreeConfig a(model, n, draw(leaves, model.mu, rng), innovations);
      TreeConfig c(model, n, draw(leaves, model.mu, rng), std::move(innovations));
      if (a.root() != c.root()) ++disagreements[b];
    }
  });
  Estimate est;
  est.samples = trials;
  const double total = static_cast<double>(std::accumulate(disagreements.begin(), disagreements.end(), std::size_t{0}));
  est.value = total / static_cast<double>(trials);
  est.standard_error = std::sqrt(est.value * (1.0 - est.value) / static_cast<double>(trials));
  return est;
}

int Trajectory::state_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  return root_states[static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - times.begin() - 1, 0))];
}

Trajectory gillespie_qn(const RtpModel& model, const Matrix& Q, double rho, std::size_t n, double t_end,
                        RngStream& rng) {
  if (!(rho > 0.0)) throw DomainError("the generator dynamics need rho > 0");
  const auto s = static_cast<Eigen::Index>(model.s());
  if (Q.rows() != s || Q.cols() != s) throw DomainError("generator has the wrong size");
  for (Eigen::Index x = 0; x < s; ++x)
    for (Eigen::Index y = 0; y < s; ++y)
      if (x != y && Q(x, y) < 0.0)
        throw DomainError("generator has a negative off-diagonal entry; refusing to simulate");

  const double scale = std::pow(2.0 * rho, -static_cast<double>(n));
  std::vector<double> exit_rate(model.s());
  std::vector<std::vector<double>> jump(model.s());
  for (Eigen::Index x = 0; x < s; ++x) {
    double out = 0.0;
    for (Eigen::Index y = 0; y < s; ++y) {
      const double r = x == y ? 0.0 : Q(x, y);
      jump[static_cast<std::size_t>(x)].push_back(r);
      out += r;
    }
    exit_rate[static_cast<std::size_t>(x)] = scale * out;
  }

  TreeConfig config = sample_config(model, n, rng);
  Trajectory tr;
  tr.t_end = t_end;
  tr.times.push_back(0.0);
  tr.root_states.push_back(config.root());
  std::vector<double> leaf_rate(config.leaf_count());
  for (std::size_t j = 0; j < leaf_rate.size(); ++j) leaf_rate[j] = exit_rate[static_cast<std::size_t>(config.leaf(j))];

  double t = 0.0;
  for (;;) {
    const double total = std::accumulate(leaf_rate.begin(), leaf_rate.end(), 0.0);
    if (!(total > 0.0)) break;
    t += rng.exponential(total);
    if (t > t_end) break;
    const std::size_t j = rng.discrete(leaf_rate, total);
    const auto x = static_cast<std::size_t>(config.leaf(j));
    const double row = exit_rate[x] / scale;
    const auto y = static_cast<int>(rng.discrete(jump[x], row));
    config.set_leaf(j, y);
    leaf_rate[j] = exit_rate[static_cast<std::size_t>(y)];
    ++tr.events;
    if (config.root() != tr.root_states.back()) {
      tr.times.push_back(t);
      tr.root_states.push_back(config.root());
    }
  }
  return tr;
}

Trajectory refresh_dynamics(const RtpModel& model, std::size_t n, double t_end, RngStream& rng) {
  TreeConfig config = sample_config(model, n, rng);
  Trajectory tr;
  tr.t_end = t_end;
  tr.times.push_back(0.0);
  tr.root_states.push_back(config.root());
  const double total = static_cast<double>(config.leaf_count());
  double t = 0.0;
  for (;;) {
    t += rng.exponential(total);
    if (t > t_end) break;
    const auto j = static_cast<std::size_t>(rng.next() % config.leaf_count());
    config.set_leaf(j, static_cast<int>(rng.discrete(model.mu)));
    ++tr.events;
    if (config.root() != tr.root_states.back()) {
      tr.times.push_back(t);
      tr.root_states.push_back(config.root());
    }
  }
  return tr;
}

AutocovarianceEstimate root_autocovariance(const RtpModel& model, const Vector& f, const AutocovarianceOptions& opts) {
  if (static_cast<std::size_t>(f.size()) != model.s()) throw DomainError("observable has the wrong size");
  if (opts.lags.empty()) throw DomainError("no lags requested");
  const double max_lag = *std::max_element(opts.lags.begin(), opts.lags.end());
  if (max_lag < 0.0 || max_lag >= opts.horizon) throw DomainError("lags must lie in [0, horizon)");
  if (!(opts.origin_spacing > 0.0)) throw DomainError("origin spacing must be positive");

  const std::size_t lags = opts.lags.size();
  const auto origins = static_cast<std::size_t>(std::floor((opts.horizon - max_lag) / opts.origin_spacing)) + 1;

  AutocovarianceEstimate est;
  est.lags = opts.lags;
  est.seed = opts.seed;
  est.batches = kBatches;
  std::vector<std::vector<double>> batch_sum(kBatches, std::vector<double>(lags, 0.0));

  while (est.events < opts.min_events) {
    std::vector<std::vector<double>> round(kBatches, std::vector<double>(lags, 0.0));
    std::vector<std::uint64_t> round_events(kBatches, 0);
    const std::size_t first = est.replicates;
    for_each_block(kBatches, opts.threads, [&](std::size_t b) {
      RngStream rng(opts.seed, first + b);
      const Trajectory tr = opts.dynamics == Dynamics::Refresh
                                ? refresh_dynamics(model, opts.n, opts.horizon, rng)
                                : gillespie_qn(model, opts.Q, opts.rho, opts.n, opts.horizon, rng);
      round_events[b] = tr.events;
      for (std::size_t l = 0; l < lags; ++l) {
        double acc = 0.0;
        for (std::size_t k = 0; k < origins; ++k) {
          const double s0 = static_cast<double>(k) * opts.origin_spacing;
          acc += f[tr.state_at(s0)] * f[tr.state_at(s0 + opts.lags[l])];
        }
        round[b][l] = acc / static_cast<double>(origins);
      }
    });
    for (std::size_t b = 0; b < kBatches; ++b) {
      est.events += round_events[b];
      for (std::size_t l = 0; l < lags; ++l) batch_sum[b][l] += round[b][l];
    }
    est.replicates += kBatches;
    if (std::accumulate(round_events.begin(), round_events.end(), std::uint64_t{0}) == 0 && est.replicates >= 1024)
      break;  // frozen dynamics: more replicates add no events
  }

  const double per_batch = static_cast<double>(est.replicates / kBatches);
  for (std::size_t l = 0; l < lags; ++l) {
    std::vector<double> means(kBatches);
    for (std::size_t b = 0; b < kBatches; ++b) means[b] = batch_sum[b][l] / per_batch;
    est.values.push_back(std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(kBatches));
    est.standard_errors.push_back(batch_standard_error(means));
  }
  return est;
}

RtpModel random_model(std::size_t s, std::size_t e, RngStream& rng, bool symmetric, std::size_t max_attempts) {
  if (s == 0 || e == 0) throw DomainError("random models need nonempty alphabets");
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    RtpModel m;
    for (std::size_t x = 0; x < s; ++x) m.states.push_back("s" + std::to_string(x));
    for (std::size_t z = 0; z < e; ++z) m.innovations.push_back("e" + std::to_string(z));
    m.phi.assign(s * s * e, 0);
    for (std::size_t x0 = 0; x0 < s; ++x0)
      for (std::size_t x1 = 0; x1 < s; ++x1)
        for (std::size_t z = 0; z < e; ++z) {
          if (symmetric && x1 < x0)
            m.phi[m.phi_index(x0, x1, z)] = m.phi[m.phi_index(x1, x0, z)];
          else
            m.phi[m.phi_index(x0, x1, z)] = static_cast<int>(rng.next() % s);
        }
    m.nu.resize(e);
    for (auto& w : m.nu) w = 0.05 + rng.uniform();
    const double nu_total = std::accumulate(m.nu.begin(), m.nu.end(), 0.0);
    for (auto& w : m.nu) w /= nu_total;

    try {
      m.mu = find_invariant(m, 20000, 1e-14);
    } catch (const ConvergenceError&) {
      continue;
    }
    // Masses that are neither clearly zero nor clearly positive would make
    // trimming depend on rounding, so such draws are rejected.
    bool ambiguous = false;
    for (auto& w : m.mu) {
      if (w < 1e-14) w = 0.0;
      else if (w < 1e-6) ambiguous = true;
    }
    if (ambiguous) continue;
    const double mu_total = std::accumulate(m.mu.begin(), m.mu.end(), 0.0);
    for (auto& w : m.mu) w /= mu_total;

    const ValidationReport report = validate(m);
    if (report.ok) return report.model;
  }
  throw ConvergenceError("no valid random model after " + std::to_string(max_attempts) + " attempts", 0.0);
}

CandidateScreen screen_candidate(const RtpModel& model, double band, std::size_t m_max, unsigned threads) {
  CandidateScreen screen;
  if (!is_symmetric(model)) {
    screen.reason = "phi is not symmetric";
    return screen;
  }
  const PairKernel kernel = two_point_kernel(model);
  const SpectralData spectral = analyze_spectrum(model, kernel);
  screen.rho = spectral.rho;
  if (!(std::abs(2.0 * spectral.rho - 1.0) < band)) {
    screen.reason = "2 rho outside the critical band";
    return screen;
  }
  if (!spectral.flags.irreducible) {
    screen.reason = "P^(-) is reducible";
    return screen;
  }
  try {
    screen.nondegen1 = nondegen1(model, m_max, threads);
  } catch (const ResourceError& e) {
    screen.reason = std::string("Gram check too large: ") + e.what();
    return screen;
  }
  if (screen.nondegen1->resolved) {
    screen.reason = "Gram check resolved at depth " + std::to_string(screen.nondegen1->m);
    return screen;
  }
  if (!(screen.nondegen1->epsilon_by_m.back() < 1e-6)) {
    screen.reason = "Gram lower bound not small enough";
    return screen;
  }
  screen.kept = true;
  screen.reason = "critical, irreducible, Gram check unresolved";
  return screen;
}

SearchResult search_critical_symmetric(std::uint64_t seed, std::size_t budget, double band, std::size_t m_max,
                                       unsigned threads) {
  SearchResult result;
  result.seed = seed;
  for (std::size_t k = 0; k < budget; ++k) {
    RngStream rng(seed, k);
    const std::size_t s = 2 + rng.next() % 3;
    const std::size_t e = 2 + rng.next() % 3;
    RtpModel model;
    try {
      model = random_model(s, e, rng, true);
    } catch (const ConvergenceError&) {
      continue;
    }
    ++result.examined;
    CandidateScreen screen = screen_candidate(model, band, m_max, threads);
    if (std::abs(2.0 * screen.rho - 1.0) < band) ++result.in_band;
    if (screen.kept) result.candidates.push_back({k, std::move(model), std::move(screen)});
  }
  return result;
}

std::string trajectory_csv(const Trajectory& trajectory, const RtpModel& model, std::uint64_t seed) {
  std::ostringstream os;
  os << "# seed=" << seed << " events=" << trajectory.events << " t_end=" << format_double(trajectory.t_end) << "\n";
  os << "time,state\n";
  for (std::size_t k = 0; k < trajectory.times.size(); ++k)
    os << format_double(trajectory.times[k]) << ',' << model.states[static_cast<std::size_t>(trajectory.root_states[k])]
       << "\n";
  return os.str();
}

std::string autocovariance_csv(const AutocovarianceEstimate& estimate, const std::vector<double>& exact) {
  std::ostringstream os;
  os << "# seed=" << estimate.seed << " replicates=" << estimate.replicates << " batches=" << estimate.batches
     << " events=" << estimate.events << "\n";
  os << "lag,estimate,standard_error" << (exact.empty() ? "" : ",exact") << "\n";
  for (std::size_t l = 0; l < estimate.lags.size(); ++l) {
    os << format_double(estimate.lags[l]) << ',' << format_double(estimate.values[l]) << ','
       << format_double(estimate.standard_errors[l]);
    if (!exact.empty()) os << ',' << format_double(exact[l]);
    os << "\n";
  }
  return os.str();
}

}  // namespace endotree
