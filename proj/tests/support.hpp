#pragma once

#include "endotree/endogeny.hpp"
#include "endotree/kernels.hpp"
#include "endotree/linalg.hpp"
#include "endotree/model.hpp"
#include "endotree/rng.hpp"
#include "endotree/spectral.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace endotree::testing {

/// builtin(name) after validation and trimming.
RtpModel model(const std::string& name);

/// f(x) = x on the numeric state labels.
Vector label_observable(const RtpModel& m);

Vector random_vector(std::size_t n, RngStream& rng, double lo = -1.0, double hi = 1.0);
Matrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double lo = -1.0, double hi = 1.0);
PairMeasure random_signed_measure(std::size_t s, RngStream& rng);

/// A uniformly random permutation of 0..n-1.
std::vector<std::size_t> random_permutation(std::size_t n, RngStream& rng);

struct PropertyOutcome {
  bool validation = false;
  bool stochastic = false;
  bool absorption = false;
  bool swap = false;
  bool marginal = false;
  bool permutation = false;
  /// True when the verdict is not strict (nothing to compare).
  bool agreement = false;
  bool strict = false;
  Regime regime = Regime::Critical;
  double rho = 0.0;
  std::string detail;

  bool all() const { return validation && stochastic && absorption && swap && marginal && permutation && agreement; }
};

/// Run every structural property on one model. Randomness (couplings,
/// relabelings) comes from stream (seed, 0).
PropertyOutcome check_model_properties(const RtpModel& m, std::uint64_t seed);

}  // namespace endotree::testing
