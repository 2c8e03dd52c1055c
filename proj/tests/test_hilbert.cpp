#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "metrosim/hilbert.hpp"

using namespace metrosim;

namespace {

// Independent dense construction by explicit Kronecker products.
Eigen::MatrixXcd dense_site(const Eigen::Matrix2cd& single, int site, int n) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
  for (int s = 1; s <= n; ++s) {
    const Eigen::MatrixXcd factor = s == site ? Eigen::MatrixXcd(single) : Eigen::MatrixXcd::Identity(2, 2);
    out = Eigen::kroneckerProduct(out, factor).eval();
  }
  return out;
}

Eigen::Matrix2cd sigma_minus() {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  m(0, 1) = 1.0;
  return m;
}

Eigen::Matrix2cd sigma_z() {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}

Eigen::MatrixXcd dense_lowering(double x, int n) {
  const int np = n / 2;
  Eigen::MatrixXcd j = Eigen::MatrixXcd::Zero(1 << n, 1 << n);
  for (int i = 1; i <= np; ++i) {
    j += (1.0 + x) * dense_site(sigma_minus(), i, n) + (1.0 - x) * dense_site(sigma_minus(), i + np, n);
  }
  return j;
}

Eigen::VectorXcd as_eigen(const PureState& psi) {
  return Eigen::Map<const Eigen::VectorXcd>(psi.amplitudes().data(), static_cast<Eigen::Index>(psi.dim()));
}

PureState random_state(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  ComplexVector amps(std::size_t{1} << n);
  for (auto& a : amps) a = Complex(nd(rng), nd(rng));
  return PureState(n, amps);
}

}  // namespace

TEST_CASE("pure states are normalized on construction") {
  PureState psi(2, {1.0, 2.0, 0.0, Complex(0.0, 2.0)});
  CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(psi[1] - 2.0 / 3.0) < 1e-15);
  CHECK_THROWS_AS(PureState(2, {1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(PureState(1, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("sparse construction sums duplicates and prunes tiny entries") {
  auto op = SparseOperator::from_triplets(3, {{1, 2, 1.0}, {0, 0, 2.0}, {1, 2, 0.5}, {2, 0, 1e-17}});
  CHECK(op.nnz() == 2);
  CHECK(op.entries()[0].row == 0);
  CHECK(op.entries()[1].value == Complex(1.5));
  CHECK_FALSE(op.hermitian());
  CHECK_THROWS_AS(SparseOperator::from_triplets(2, {{2, 0, 1.0}}), std::out_of_range);
  CHECK(SparseOperator::identity(4).hermitian());
}

TEST_CASE("site operators") {
  SUBCASE("single-qubit lowering") {
    auto op = build_site_operator(SiteOp::lower, 1, 1);
    REQUIRE(op.nnz() == 1);
    CHECK(op.entries()[0].row == 0);
    CHECK(op.entries()[0].col == 1);
    CHECK(op.entries()[0].value == Complex(1.0));
  }
  SUBCASE("pauli z ordering is site-1 major") {
    auto d = build_site_operator(SiteOp::pauli_z, 1, 2).to_dense();
    CHECK(d.diagonal().real().isApprox(Eigen::Vector4d(1, 1, -1, -1)));
  }
  SUBCASE("lowering squares to zero") {
    auto op = build_site_operator(SiteOp::lower, 2, 2);
    std::mt19937_64 rng(7);
    auto psi = random_state(2, rng);
    auto once = op.apply(psi.amplitudes());
    auto twice = op.apply(once);
    CHECK(squared_norm(twice) == 0.0);
  }
  SUBCASE("nonzero counts") {
    for (int n = 1; n <= 6; ++n) {
      for (int s = 1; s <= n; ++s) {
        CHECK(build_site_operator(SiteOp::lower, s, n).nnz() == (std::size_t{1} << (n - 1)));
        CHECK(build_site_operator(SiteOp::raise, s, n).nnz() == (std::size_t{1} << (n - 1)));
        CHECK(build_site_operator(SiteOp::pauli_z, s, n).nnz() == (std::size_t{1} << n));
      }
    }
  }
  SUBCASE("matches kronecker construction") {
    for (int n = 1; n <= 5; ++n) {
      for (int s = 1; s <= n; ++s) {
        CHECK(build_site_operator(SiteOp::lower, s, n).to_dense().isApprox(dense_site(sigma_minus(), s, n)));
        CHECK(build_site_operator(SiteOp::pauli_z, s, n).to_dense().isApprox(dense_site(sigma_z(), s, n)));
      }
    }
  }
  CHECK_THROWS_AS(build_site_operator(SiteOp::lower, 0, 3), std::out_of_range);
  CHECK_THROWS_AS(build_site_operator(SiteOp::lower, 4, 3), std::out_of_range);
}

TEST_CASE("collective operators") {
  SUBCASE("symmetric two-qubit case") {
    auto j = build_collective_lowering(0.0, 2).to_dense();
    Eigen::MatrixXcd expect = dense_site(sigma_minus(), 1, 2) + dense_site(sigma_minus(), 2, 2);
    CHECK((j - expect).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("asymmetric action on |11>") {
    auto j = build_collective_lowering(0.1, 2);
    auto out = j.apply(PureState::basis(2, 3).amplitudes());
    CHECK(std::abs(out[1] - 1.1) < 1e-15);  // |01>
    CHECK(std::abs(out[2] - 0.9) < 1e-15);  // |10>
    CHECK(std::abs(out[0]) == 0.0);
    CHECK(std::abs(out[3]) == 0.0);
  }
  SUBCASE("dense kronecker oracle") {
    for (int n : {2, 4, 6}) {
      for (double x : {-0.7, 0.0, 0.1, 0.5}) {
        const double err = (build_collective_lowering(x, n).to_dense() - dense_lowering(x, n)).cwiseAbs().maxCoeff();
        CHECK(err < 1e-15);
      }
    }
  }
  SUBCASE("raising is the adjoint entrywise") {
    for (double x : {-0.3, 0.0, 0.25}) {
      auto jm = build_collective_lowering(x, 6).to_dense();
      auto jp = build_collective_raising(x, 6).to_dense();
      CHECK((jp - jm.adjoint()).cwiseAbs().maxCoeff() <= 1e-15);
    }
  }
  SUBCASE("[Jz, J-] = -J- by sparse multiplication") {
    const auto jz = build_collective_jz(4);
    for (double x : {-0.4, 0.0, 0.1, 0.9}) {
      const auto jm = build_collective_lowering(x, 4);
      const auto comm = jz * jm - jm * jz;
      const auto residual = comm + jm;
      double worst = 0.0;
      for (const auto& e : residual.entries()) worst = std::max(worst, std::abs(e.value));
      CHECK(worst < 1e-15);
    }
  }
  SUBCASE("derivative with respect to x") {
    const double h = 0.125;
    auto fd = (build_collective_lowering(0.3 + h, 4) - build_collective_lowering(0.3, 4)).scaled(1.0 / h);
    CHECK((fd.to_dense() - build_collective_lowering_derivative(4).to_dense()).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK_THROWS_AS(build_collective_lowering(0.1, 3), std::invalid_argument);
  CHECK(build_collective_jz(4).hermitian());
}

TEST_CASE("sparse apply agrees with dense products") {
  std::mt19937_64 rng(2024);
  for (int n = 2; n <= 6; n += 2) {
    const auto jm = build_collective_lowering(0.37, n);
    const auto ops = {jm, jm.adjoint() * jm, build_collective_jz(n), jm + jm.adjoint()};
    for (const auto& op : ops) {
      for (int trial = 0; trial < 5; ++trial) {
        const auto psi = random_state(n, rng);
        const auto sparse = op.apply(psi.amplitudes());
        const Eigen::VectorXcd dense = op.to_dense() * as_eigen(psi);
        const Eigen::Map<const Eigen::VectorXcd> s(sparse.data(), static_cast<Eigen::Index>(sparse.size()));
        CHECK((s - dense).norm() <= 1e-12 * std::max(1.0, dense.norm()));
      }
    }
  }
}

TEST_CASE("pair product states") {
  SUBCASE("all pairs in t-") {
    auto psi = pair_product_state({1.0, 0.0, 0.0, 0.0}, 2);
    CHECK(std::abs(psi[0] - 1.0) < 1e-15);
  }
  SUBCASE("dark pair amplitudes") {
    auto psi = pair_product_state(PairCoefficients::dark(), 1);
    const double h = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(psi[0] - h) < 1e-15);
    CHECK(std::abs(psi[1] - 0.5) < 1e-15);
    CHECK(std::abs(psi[2] + 0.5) < 1e-15);
    CHECK(std::abs(psi[3]) == 0.0);
  }
  SUBCASE("pairing is (l, l + Np)") {
    PairCoefficients up{0.0, 0.0, 0.0, 1.0};
    auto psi = pair_product_state(up, 1);
    CHECK(std::abs(psi[3] - 1.0) < 1e-15);
    // Kronecker oracle for a generic state on Np = 2: reorder |a1 b1> (x) |a2 b2> into |a1 a2 b1 b2>.
    PairCoefficients g{Complex(0.3, 0.1), Complex(-0.5, 0.2), Complex(0.4, 0.0), Complex(0.1, -0.2)};
    const double nrm = std::sqrt(g.squared_norm());
    g = {g.a / nrm, g.b / nrm, g.c / nrm, g.d / nrm};
    auto state = pair_product_state(g, 2);
    const Eigen::Vector4cd p = g.amplitudes();
    for (int a1 = 0; a1 < 2; ++a1)
      for (int a2 = 0; a2 < 2; ++a2)
        for (int b1 = 0; b1 < 2; ++b1)
          for (int b2 = 0; b2 < 2; ++b2) {
            const int idx = (a1 << 3) | (a2 << 2) | (b1 << 1) | b2;
            CHECK(std::abs(state[idx] - p(2 * a1 + b1) * p(2 * a2 + b2)) < 1e-15);
          }
  }
  SUBCASE("dark state is annihilated by J-(0)") {
    for (int np = 1; np <= 7; ++np) {
      const auto psi = pair_product_state(PairCoefficients::dark(), np);
      const auto out = build_collective_lowering(0.0, 2 * np).apply(psi.amplitudes());
      CHECK(std::sqrt(squared_norm(out)) < 1e-13);
    }
  }
  CHECK_THROWS_AS(pair_product_state({1.0, 1.0, 0.0, 0.0}, 2), std::invalid_argument);
  CHECK_THROWS_AS(pair_product_state(PairCoefficients::dark(), 0), std::invalid_argument);
}

TEST_CASE("expectation values and variances") {
  std::mt19937_64 rng(99);
  SUBCASE("identity") {
    auto psi = random_state(3, rng);
    auto id = SparseOperator::identity(8);
    CHECK(std::abs(expectation(id, psi) - 1.0) < 1e-14);
    CHECK(std::abs(variance(id, psi)) < 1e-14);
  }
  SUBCASE("J+J- on the dark product state") {
    const auto jm = build_collective_lowering(0.1, 4);
    const auto psi = pair_product_state(PairCoefficients::dark(), 2);
    CHECK(std::abs(expectation(jm.adjoint() * jm, psi) - 0.03) < 1e-15);
  }
  SUBCASE("balanced populations") {
    CHECK(std::abs(expectation(build_collective_jz(4), PureState::basis(4, 0b0101))) == 0.0);
  }
  SUBCASE("hermitian expectations are real, variances nonnegative") {
    const auto jm = build_collective_lowering(0.2, 6);
    const auto ops = {jm.adjoint() * jm, jm + jm.adjoint(), build_collective_jz(6)};
    for (const auto& op : ops) {
      REQUIRE(op.hermitian());
      for (int k = 0; k < 10; ++k) {
        auto psi = random_state(6, rng);
        CHECK(std::abs(expectation(op, psi).imag()) < 1e-13);
        CHECK(variance(op, psi).real() >= -1e-12);
      }
    }
  }
  CHECK_THROWS_AS(expectation(SparseOperator::identity(4), PureState::basis(3, 0)), std::invalid_argument);
}
