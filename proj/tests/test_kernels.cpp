#include "support.hpp"

#include "endotree/errors.hpp"
#include "endotree/kernels.hpp"

#include <doctest.h>

#include <cmath>

using namespace endotree;
using endotree::testing::label_observable;
using endotree::testing::model;

TEST_SUITE("kernels") {
  TEST_CASE("one-point kernels") {
    const Matrix select = one_point_kernel(model("SELECT"));
    CHECK(select(0, 0) == 0.75);
    CHECK(select(0, 1) == 0.25);
    CHECK(select(1, 1) == 0.75);
    CHECK(select(1, 0) == 0.25);

    const RtpModel pure = model("PURE-INNOVATION");
    const Matrix P = one_point_kernel(pure);
    for (Eigen::Index x = 0; x < P.rows(); ++x)
      for (Eigen::Index y = 0; y < P.cols(); ++y) CHECK(P(x, y) == pure.nu[static_cast<std::size_t>(y)]);

    const Matrix c = one_point_kernel(model("CONST"));
    REQUIRE(c.rows() == 1);
    CHECK(c(0, 0) == 1.0);
  }

  TEST_CASE("off-diagonal blocks of the builtins") {
    const PairKernel select = two_point_kernel(model("SELECT"));
    REQUIRE(select.minus.rows() == 2);
    CHECK(select.minus(0, 0) == 0.5);
    CHECK(select.minus(1, 1) == 0.5);
    CHECK(select.minus(0, 1) == 0.0);
    CHECK(select.minus(1, 0) == 0.0);

    const PairKernel x = two_point_kernel(model("XOR"));
    CHECK(x.minus == Matrix::Constant(2, 2, 0.5));

    const PairKernel noise = two_point_kernel(model("ANDOR-NOISE"));
    CHECK(noise.minus == Matrix(0.25 * Matrix::Identity(2, 2)));

    const PairKernel andor = two_point_kernel(model("ANDOR"));
    CHECK(andor.minus == Matrix(0.5 * Matrix::Identity(2, 2)));

    CHECK(two_point_kernel(model("CONST")).minus.size() == 0);
  }

  TEST_CASE("pair indexing") {
    const PairIndex idx(3);
    CHECK(idx.size() == 9);
    CHECK(idx.off_size() == 6);
    for (std::size_t k = 0; k < idx.off_size(); ++k) {
      CHECK_FALSE(idx.is_diagonal(idx.off_pair(k)));
      CHECK(idx.off_position(idx.off_pair(k)) == static_cast<long>(k));
      CHECK(idx.off_swap(idx.off_swap(k)) == k);
    }
    CHECK(idx.off_position(idx.pair(1, 1)) == -1);
    CHECK(idx.off_pair(0) == idx.pair(0, 1));
  }

  TEST_CASE("diagonal coupling is a fixed point of T2") {
    for (const auto& name : builtin_names()) {
      CAPTURE(name);
      const RtpModel m = model(name);
      const PairMeasure diag = PairMeasure::diagonal(m.mu);
      const PairMeasure image = apply_T2(m, diag, diag);
      CHECK(max_abs(RowVector(image.weights() - diag.weights())) <= 1e-15);
    }
  }

  TEST_CASE("SELECT keeps the product coupling") {
    const RtpModel m = model("SELECT");
    const PairMeasure prod = PairMeasure::product(m.mu);
    CHECK(apply_T2(m, prod, prod).off_diagonal_mass() == 0.5);
  }

  TEST_CASE("linearization identity and bilinearity") {
    RngStream rng(101, 0);
    for (const auto& name : builtin_names()) {
      CAPTURE(name);
      const RtpModel m = model(name);
      const PairKernel k = two_point_kernel(m);
      const PairMeasure diag = PairMeasure::diagonal(m.mu);
      for (int trial = 0; trial < 20; ++trial) {
        const PairMeasure a = testing::random_signed_measure(m.s(), rng);
        const PairMeasure b = testing::random_signed_measure(m.s(), rng);
        const PairMeasure c = testing::random_signed_measure(m.s(), rng);
        const RowVector lin = a.weights() * k.full;
        CHECK(max_abs(RowVector(lin - apply_T2(m, a, diag).weights())) <= 1e-12);

        const double alpha = rng.uniform() - 0.5, beta = 2.0 * rng.uniform();
        const PairMeasure mix(m.s(), alpha * a.weights() + beta * b.weights());
        const RowVector lhs = apply_T2(m, mix, c).weights();
        const RowVector rhs = alpha * apply_T2(m, a, c).weights() + beta * apply_T2(m, b, c).weights();
        CHECK(max_abs(RowVector(lhs - rhs)) <= 1e-12);
      }
    }
  }

  TEST_CASE("kernels are stochastic with an absorbing diagonal") {
    for (const auto& name : builtin_names()) {
      CAPTURE(name);
      const RtpModel m = model(name);
      const PairKernel k = two_point_kernel(m);
      CHECK(max_abs(Vector(one_point_kernel(m).rowwise().sum().array() - 1.0)) <= 1e-12);
      CHECK(max_abs(Vector(k.full.rowwise().sum().array() - 1.0)) <= 1e-12);
      for (std::size_t a = 0; a < k.index.size(); ++a)
        if (k.index.is_diagonal(a))
          for (std::size_t b = 0; b < k.index.size(); ++b)
            if (!k.index.is_diagonal(b)) CHECK(k.full(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) == 0.0);
    }
  }

  TEST_CASE("bivariate iteration") {
    SUBCASE("ANDOR-NOISE decays at rate one half") {
      const RtpModel m = model("ANDOR-NOISE");
      const BivariateTrace tr = bivariate_iterate(m, PairMeasure::product(m.mu), 40, 0.0);
      REQUIRE(tr.off_mass.size() == 41);
      CHECK(tr.decay_ratio == doctest::Approx(0.5).epsilon(1e-6));
      CHECK(tr.off_mass[40] / tr.off_mass[39] == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("SELECT holds one half") {
      const RtpModel m = model("SELECT");
      const BivariateTrace tr = bivariate_iterate(m, PairMeasure::product(m.mu), 50, 0.0);
      for (double d : tr.off_mass) CHECK(d == 0.5);
    }
    SUBCASE("the diagonal start stays put") {
      const RtpModel m = model("XOR");
      const BivariateTrace tr = bivariate_iterate(m, PairMeasure::diagonal(m.mu), 10, 0.0);
      for (double d : tr.off_mass) CHECK(d == 0.0);
    }
    SUBCASE("tolerance and stationary stops") {
      const RtpModel noise = model("ANDOR-NOISE");
      const BivariateTrace low = bivariate_iterate(noise, PairMeasure::product(noise.mu), 1000, 1e-8);
      CHECK(low.stopped_below_tol);
      CHECK(low.off_mass.back() < 1e-8);
      const RtpModel sel = model("SELECT");
      const BivariateTrace flat = bivariate_iterate(sel, PairMeasure::product(sel.mu), 1000, 1e-8, 1e-15);
      CHECK(flat.stopped_stationary);
      CHECK(flat.off_mass.size() < 5);
    }
    SUBCASE("a start with the wrong marginals is rejected") {
      const RtpModel m = model("XOR");
      const PairMeasure bad = PairMeasure::product({0.9, 0.1});
      CHECK_THROWS_AS(bivariate_iterate(m, bad, 5, 0.0), ConsistencyError);
    }
  }

  TEST_CASE("number form") {
    const RtpModel sel = model("SELECT");
    const RtpModel x = model("XOR");
    for (std::size_t n = 0; n <= 10; ++n) {
      CHECK(number_form(sel, label_observable(sel), n) == doctest::Approx(1.0).epsilon(1e-13));
      CHECK(number_form(x, label_observable(x), n) == doctest::Approx(std::ldexp(1.0, static_cast<int>(n))).epsilon(1e-13));
      CHECK(number_form(x, Vector::Constant(2, 3.0), n) == 0.0);
    }
    const RtpModel noise = model("ANDOR-NOISE");
    const Vector f = 2.0 * (label_observable(noise).array() - 0.5).matrix();
    for (std::size_t n = 0; n <= 20; ++n)
      CHECK(std::abs(number_form(noise, f, n) - std::ldexp(1.0, -static_cast<int>(n))) <= 1e-12);
  }

  TEST_CASE("CSV export carries labels") {
    const RtpModel m = model("XOR");
    const PairKernel k = two_point_kernel(m);
    const auto labels = pair_labels(m, k.index, true);
    REQUIRE(labels.size() == 2);
    const std::string csv = matrix_csv(k.minus, labels, labels);
    CHECK(csv.find(labels[0]) != std::string::npos);
    CHECK(csv.find("0.5") != std::string::npos);
  }
}
