#include "support.hpp"

#include "endotree/errors.hpp"
#include "endotree/oracle.hpp"
#include "endotree/spectral.hpp"

#include <doctest.h>

#include <cmath>

using namespace endotree;
using endotree::testing::model;

namespace {

SpectralData spectrum_of(const RtpModel& m) { return analyze_spectrum(m, two_point_kernel(m)); }

/// Random nonnegative matrix with a given fraction of structural zeros and row sums at most 1.
Matrix random_substochastic(std::size_t n, double density, RngStream& rng) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (rng.uniform() < density) m(i, j) = rng.uniform();
    const double row = m.row(i).sum();
    if (row > 0.0) m.row(i) *= rng.uniform() / row;
  }
  return m;
}

}  // namespace

TEST_SUITE("spectral") {
  TEST_CASE("Perron roots of the builtins") {
    CHECK(std::abs(perron_root(two_point_kernel(model("SELECT")).minus) - 0.5) <= 1e-12);
    CHECK(std::abs(perron_root(two_point_kernel(model("XOR")).minus) - 1.0) <= 1e-12);
    CHECK(std::abs(perron_root(two_point_kernel(model("ANDOR-NOISE")).minus) - 0.25) <= 1e-12);
    CHECK(perron_root(two_point_kernel(model("CONST")).minus) == 0.0);
    CHECK(perron_root(two_point_kernel(model("PURE-INNOVATION")).minus) == 0.0);
  }

  TEST_CASE("Perron root agrees with a dense eigen-decomposition") {
    RngStream rng(202, 0);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 1 + rng.next() % 12;
      const double density = trial % 3 == 0 ? 0.25 : (trial % 3 == 1 ? 0.6 : 1.0);
      const Matrix m = random_substochastic(n, density, rng);
      CAPTURE(m);
      CHECK(std::abs(perron_root(m) - dense_spectral_radius(m)) <= 1e-8);
    }
  }

  TEST_CASE("periodic and reducible matrices") {
    Matrix cycle = Matrix::Zero(3, 3);
    cycle(0, 1) = cycle(1, 2) = cycle(2, 0) = 0.8;
    CHECK(std::abs(perron_root(cycle) - 0.8) <= 1e-12);
    const StructureFlags f = structure_flags(cycle);
    CHECK(f.irreducible);
    CHECK_FALSE(f.primitive);
    CHECK(f.period == 3);

    Matrix blocks = Matrix::Zero(3, 3);
    blocks(0, 0) = 0.3;
    blocks(0, 1) = 0.2;
    blocks(1, 1) = 0.6;
    blocks(2, 2) = 0.1;
    CHECK(std::abs(perron_root(blocks) - 0.6) <= 1e-12);
    CHECK_FALSE(structure_flags(blocks).irreducible);
    CHECK(structure_flags(blocks).components == 3);
  }

  TEST_CASE("structure flags of the builtins") {
    const StructureFlags sel = structure_flags(two_point_kernel(model("SELECT")).minus);
    CHECK_FALSE(sel.irreducible);
    const StructureFlags x = structure_flags(two_point_kernel(model("XOR")).minus);
    CHECK(x.irreducible);
    CHECK(x.primitive);
    CHECK(x.period == 1);
    const StructureFlags c = structure_flags(two_point_kernel(model("CONST")).minus);
    CHECK_FALSE(c.irreducible);
    CHECK(c.degenerate);
  }

  TEST_CASE("XOR eigenvectors and normalizations") {
    const SpectralData sd = spectrum_of(model("XOR"));
    REQUIRE(sd.has_vectors);
    const PerronVectors& v = sd.vectors;
    CHECK(v.theta[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(v.theta[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(v.kappa[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(v.kappa[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(v.kappa_star(0, 0) == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(v.kappa_star(1, 1) == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(v.normalized);
    CHECK_FALSE(v.reducible_choice);
  }

  TEST_CASE("SELECT gets a flagged symmetric choice") {
    const SpectralData sd = spectrum_of(model("SELECT"));
    REQUIRE(sd.has_vectors);
    CHECK(sd.vectors.reducible_choice);
    CHECK(sd.vectors.dominant_classes == 2);
    CHECK(sd.vectors.kappa[0] == sd.vectors.kappa[1]);
    CHECK(sd.vectors.kappa[0] > 0.0);
  }

  TEST_CASE("no eigenvector at rho = 0") {
    const RtpModel m = model("PURE-INNOVATION");
    const PairKernel k = two_point_kernel(m);
    CHECK_THROWS_AS(eigenvectors(k.index, k.minus, m.mu), DomainError);
    CHECK_FALSE(spectrum_of(m).has_vectors);
  }

  TEST_CASE("eigen-residuals, normalizations and symmetry on every builtin with rho > 0") {
    for (const auto& name : builtin_names()) {
      const RtpModel m = model(name);
      const PairKernel k = two_point_kernel(m);
      const SpectralData sd = analyze_spectrum(m, k);
      if (!sd.has_vectors) continue;
      CAPTURE(name);
      const PerronVectors& v = sd.vectors;
      CHECK(max_abs(RowVector(v.kappa.transpose() * k.minus - sd.rho * v.kappa.transpose())) <= 1e-10);
      CHECK(max_abs(Vector(k.minus * v.theta - sd.rho * v.theta)) <= 1e-10);
      double theta_mu = 0.0;
      for (std::size_t j = 0; j < k.index.off_size(); ++j) {
        const std::size_t a = k.index.off_pair(j);
        theta_mu += v.theta[static_cast<Eigen::Index>(j)] * m.mu[k.index.first(a)] * m.mu[k.index.second(a)];
        CHECK(v.kappa[static_cast<Eigen::Index>(j)] == v.kappa[static_cast<Eigen::Index>(k.index.off_swap(j))]);
      }
      CHECK(theta_mu == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(v.theta.dot(v.kappa) == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(max_abs(Vector(v.kappa_star.rowwise().sum())) <= 1e-14);
    }
  }

  TEST_CASE("Perron limit on XOR is exact at every n") {
    const RtpModel m = model("XOR");
    const PairKernel k = two_point_kernel(m);
    const SpectralData sd = analyze_spectrum(m, k);
    for (std::size_t n : {1, 2, 5, 20}) CHECK(check_con_limit(k.minus, sd, n) <= 1e-12);
    CHECK_THROWS_AS(check_con_limit(two_point_kernel(model("SELECT")).minus, spectrum_of(model("SELECT")), 3),
                    DomainError);
  }

  TEST_CASE("Perron limit residual decreases on a primitive random matrix") {
    // A symmetric random model gives a generic primitive off-diagonal block.
    RtpModel m;
    m.states = {"a", "b", "c"};
    m.innovations = {"p", "q"};
    m.nu = {0.3, 0.7};
    m.phi.resize(18);
    const int table[3][3][2] = {{{0, 1}, {1, 2}, {2, 0}}, {{1, 2}, {0, 0}, {1, 2}}, {{2, 0}, {1, 2}, {1, 0}}};
    for (std::size_t x0 = 0; x0 < 3; ++x0)
      for (std::size_t x1 = 0; x1 < 3; ++x1)
        for (std::size_t z = 0; z < 2; ++z) m.phi[m.phi_index(x0, x1, z)] = table[x0][x1][z];
    m.mu = find_invariant(m);
    m = validated(m);
    const PairKernel k = two_point_kernel(m);
    const SpectralData sd = analyze_spectrum(m, k);
    REQUIRE(sd.flags.primitive);
    double previous = check_con_limit(k.minus, sd, 1);
    for (std::size_t n = 6; n <= 40; n += 5) {
      const double r = check_con_limit(k.minus, sd, n);
      CHECK(r <= previous + 1e-12);
      previous = r;
    }
  }

  TEST_CASE("2^n P^n boundedness probe") {
    const BoundednessProbe sel = two_rho_boundedness_probe(two_point_kernel(model("SELECT")).minus, 30);
    CHECK(sel.maximum == doctest::Approx(1.0));
    const BoundednessProbe andor = two_rho_boundedness_probe(two_point_kernel(model("ANDOR")).minus, 30);
    CHECK(andor.maximum == doctest::Approx(1.0));
    const BoundednessProbe noise = two_rho_boundedness_probe(two_point_kernel(model("ANDOR-NOISE")).minus, 30);
    CHECK(noise.argmax == 0);
    CHECK(noise.maximum == doctest::Approx(1.0));
    for (std::size_t n = 1; n < noise.norms.size(); ++n) CHECK(noise.norms[n] < noise.norms[n - 1]);
  }

  TEST_CASE("spectral JSON") {
    const RtpModel m = model("XOR");
    const PairKernel k = two_point_kernel(m);
    const std::string j = spectral_json(m, k.index, analyze_spectrum(m, k));
    CHECK(j.find("\"rho\": 1.0") != std::string::npos);
    CHECK(j.find("\"kappa\"") != std::string::npos);
  }
}
