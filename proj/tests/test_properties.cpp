#include "support.hpp"

#include "endotree/montecarlo.hpp"

#include <doctest.h>

using namespace endotree;

TEST_SUITE("properties") {
  TEST_CASE("structural properties on random symmetric models") {
    for (std::uint64_t k = 0; k < 100; ++k) {
      RngStream rng(601, k);
      const std::size_t s = 2 + rng.next() % 3, e = 1 + rng.next() % 4;
      const RtpModel m = random_model(s, e, rng, true);
      const testing::PropertyOutcome out = testing::check_model_properties(m, 601'000 + k);
      CAPTURE(k);
      CAPTURE(out.detail);
      CHECK(out.all());
    }
  }

  TEST_CASE("structural properties on random asymmetric models") {
    for (std::uint64_t k = 0; k < 50; ++k) {
      RngStream rng(602, k);
      const std::size_t s = 2 + rng.next() % 3, e = 1 + rng.next() % 4;
      const RtpModel m = random_model(s, e, rng, false);
      const testing::PropertyOutcome out = testing::check_model_properties(m, 602'000 + k);
      CAPTURE(k);
      CAPTURE(out.detail);
      CHECK(out.validation);
      CHECK(out.stochastic);
      CHECK(out.absorption);
      CHECK(out.marginal);
      CHECK(out.permutation);
    }
  }

  TEST_CASE("builtins satisfy every property") {
    for (const auto& name : builtin_names()) {
      const RtpModel m = testing::model(name);
      const testing::PropertyOutcome out = testing::check_model_properties(m, 603);
      CAPTURE(name);
      CAPTURE(out.detail);
      CHECK(out.all());
    }
  }
}
