#pragma once

#include "endotree/endogeny.hpp"
#include "endotree/linalg.hpp"
#include "endotree/model.hpp"
#include "endotree/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace endotree {

/// A depth-n tree with mutable leaves and frozen innovations. Vertices use
/// heap numbering; internal states are kept consistent with the recursion
/// after every leaf update by recomputing the path to the root.
class TreeConfig {
 public:
  TreeConfig(const RtpModel& model, std::size_t n, std::vector<int> leaves, std::vector<int> innovations);

  std::size_t level() const { return n_; }
  std::size_t leaf_count() const { return leaves_.size(); }
  int leaf(std::size_t j) const { return leaves_[j]; }
  int root() const { return internal_.empty() ? leaves_.front() : internal_.front(); }
  const std::vector<int>& leaves() const { return leaves_; }
  const std::vector<int>& innovations() const { return innovations_; }
  const std::vector<int>& internal() const { return internal_; }

  /// Set leaf j and recompute its n ancestors (nothing when the state is unchanged).
  void set_leaf(std::size_t j, int state);
  /// Recompute every internal state.
  void rebuild();
  /// Internal vertices evaluated by set_leaf since construction.
  std::uint64_t recompute_count() const { return recomputed_; }
  /// phi relation holds at every internal vertex.
  bool consistent() const;

 private:
  int state_of(std::size_t vertex) const;
  void evaluate(std::size_t vertex);

  const RtpModel* model_;
  std::size_t n_;
  std::vector<int> leaves_;
  std::vector<int> innovations_;
  std::vector<int> internal_;
  std::uint64_t recomputed_ = 0;
};

/// Leaves i.i.d. mu, innovations i.i.d. nu.
TreeConfig sample_config(const RtpModel& model, std::size_t n, RngStream& rng);

struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

/// Share innovations, draw two independent leaf sets, record whether the
/// roots differ. Trial k uses stream (seed, k). Throws DomainError for fewer
/// than 100 trials.
Estimate coupling_estimate(const RtpModel& model, std::size_t n, std::size_t trials, std::uint64_t seed,
                           unsigned threads = 1);

struct Trajectory {
  std::vector<double> times;
  std::vector<int> root_states;
  /// Leaf jumps simulated (including jumps that leave the state unchanged).
  std::uint64_t events = 0;
  double t_end = 0.0;

  /// Root state at time t (piecewise constant, right-continuous).
  int state_at(double t) const;
};

/// Each leaf jumps with generator (2 rho)^-n Q; innovations are frozen.
/// Starts from a stationary configuration. Throws DomainError when rho <= 0
/// or Q has a negative off-diagonal entry.
Trajectory gillespie_qn(const RtpModel& model, const Matrix& Q, double rho, std::size_t n, double t_end,
                        RngStream& rng);

/// Each leaf is resampled from mu at rate 1.
Trajectory refresh_dynamics(const RtpModel& model, std::size_t n, double t_end, RngStream& rng);

enum class Dynamics { Refresh, Generator };

struct AutocovarianceOptions {
  Dynamics dynamics = Dynamics::Refresh;
  /// Required for Dynamics::Generator.
  Matrix Q;
  double rho = 0.0;
  std::size_t n = 1;
  std::vector<double> lags;
  /// Length of each replicate trajectory.
  double horizon = 64.0;
  /// Spacing of the time origins averaged within a replicate.
  double origin_spacing = 0.25;
  std::uint64_t min_events = 100'000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct AutocovarianceEstimate {
  std::vector<double> lags;
  std::vector<double> values;
  std::vector<double> standard_errors;
  std::uint64_t events = 0;
  std::size_t replicates = 0;
  std::size_t batches = 32;
  std::uint64_t seed = 0;
};

/// Uncentered E[f(root_0) f(root_t)] under the stationary dynamics, with
/// batch-means standard errors over 32 batches of independent replicates.
/// Replicates are added 32 at a time until at least min_events jumps are seen.
AutocovarianceEstimate root_autocovariance(const RtpModel& model, const Vector& f, const AutocovarianceOptions& opts);

/// Random total phi (symmetric in the state arguments when requested) and
/// random nu; mu is the fixed point found by find_invariant. States whose
/// mass falls below 1e-14 are dropped. Resamples on failure; throws
/// ConvergenceError after `max_attempts`.
RtpModel random_model(std::size_t s, std::size_t e, RngStream& rng, bool symmetric, std::size_t max_attempts = 200);

struct CandidateScreen {
  bool kept = false;
  std::string reason;
  double rho = 0.0;
  std::optional<Nondegen1Result> nondegen1;
};

/// Keep symmetric models with |2 rho - 1| < band, irreducible P^(-) and a
/// Gram check that stays below 1e-6 up to depth m_max.
CandidateScreen screen_candidate(const RtpModel& model, double band, std::size_t m_max, unsigned threads = 1);

struct SearchCandidate {
  std::size_t draw = 0;
  RtpModel model;
  CandidateScreen screen;
};

struct SearchResult {
  std::uint64_t seed = 0;
  std::size_t examined = 0;
  std::size_t in_band = 0;
  std::vector<SearchCandidate> candidates;
};

/// Draw `budget` random symmetric models with s, e in {2, 3, 4} and screen each.
SearchResult search_critical_symmetric(std::uint64_t seed, std::size_t budget, double band, std::size_t m_max,
                                       unsigned threads = 1);

/// CSV with a "# seed=..." header line followed by time,state rows.
std::string trajectory_csv(const Trajectory& trajectory, const RtpModel& model, std::uint64_t seed);
/// CSV with a seed header and columns lag,estimate,standard_error[,exact].
std::string autocovariance_csv(const AutocovarianceEstimate& estimate, const std::vector<double>& exact = {});

}  // namespace endotree
