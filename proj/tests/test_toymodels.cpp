#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "metrosim/dynamics.hpp"
#include "metrosim/errors.hpp"
#include "metrosim/numerics.hpp"
#include "metrosim/toymodels.hpp"
#include "toy_oracle.hpp"

using namespace metrosim;

using oracle::brute_force;

TEST_CASE("pure interaction examples") {
  const auto r = pure_interaction_sensitivity({10, 1.0, 1.0, -1.0, 0.2, 1.0}, 1);
  CHECK(r.delta_x == doctest::Approx(0.05).epsilon(1e-15));
  const auto z = pure_interaction_sensitivity({4, 0.5, 2.0, 1.0, 0.0, 3.0}, 1);
  CHECK(z.mean_a == 1.0);
  CHECK(z.var_a == 0.0);
  for (double x : {0.0, 0.3, 1.7}) {
    CHECK(pure_interaction_sensitivity({7, 0.8, 1.5, -0.5, x, 2.0}, 3).delta_x ==
          pure_interaction_sensitivity({7, 0.8, 1.5, -0.5, 0.0, 2.0}, 3).delta_x);
  }
  CHECK_THROWS_AS(pure_interaction_sensitivity({4, 0.0, 1.0, -1.0, 0.1, 1.0}, 1), NotEstimableError);
  CHECK_THROWS_AS(pure_interaction_sensitivity({4, 1.0, 1.0, 1.0, 0.1, 1.0}, 1), NotEstimableError);
  CHECK_THROWS_AS(pure_interaction_sensitivity({4, 1.0, 1.0, -1.0, 0.1, 0.0}, 1), std::invalid_argument);
}

TEST_CASE("pure interaction matches brute-force phase evolution") {
  for (int n : {1, 4, 10}) {
    for (double x : {0.37, -1.1}) {
      const PureInteractionModel m{n, 0.7, 1.3, -0.4, x, 0.9};
      const auto closed = pure_interaction_sensitivity(m, 1);
      const auto bf = brute_force(m);
      CHECK(std::abs(closed.mean_a - bf.mean) <= 1e-12);
      CHECK(std::abs(closed.var_a - bf.var) <= 1e-12);
      const double dx_bf = std::sqrt(bf.var) / std::abs(bf.slope);
      CHECK(std::abs(closed.delta_x - dx_bf) <= 1e-12 * closed.delta_x);
    }
  }
}

TEST_CASE("commuting generator variance") {
  const auto sql = commuting_qfi(9, 0.3, 0.25, 1.0, 0.0, 2.0, 4);
  CHECK(sql.result.delta_x == doctest::Approx(1.0 / (2.0 * std::sqrt(36.0) * 2.0 * 0.5)).epsilon(1e-14));
  CHECK(sql.dominant == ScalingRegime::standard_quantum_limit);
  const auto hl = commuting_qfi(9, 0.3, 0.0, 1.0, 0.5, 2.0, 1);
  CHECK(hl.result.delta_x == doctest::Approx(1.0 / (2.0 * 9.0 * 0.3 * std::sqrt(0.5) * 2.0)).epsilon(1e-14));
  CHECK(hl.dominant == ScalingRegime::heisenberg);
  // bus in an equal superposition of its extreme eigenvalues
  const double rmin = -0.5, rmax = 2.0;
  const double mean_r = (rmin + rmax) / 2.0, meansq_r = (rmin * rmin + rmax * rmax) / 2.0;
  CHECK(std::sqrt(meansq_r - mean_r * mean_r) == doctest::Approx(std::abs(rmax - rmin) / 2.0));
  CHECK_THROWS_AS(commuting_qfi(4, 0.0, 0.0, 1.0, 1.0, 1.0, 1), NotEstimableError);
  CHECK_THROWS_AS(commuting_qfi(4, 0.1, -1.0, 1.0, 1.0, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(commuting_qfi(4, 0.1, 1.0, 1.0, 1.0, 0.0, 1), std::invalid_argument);

  // subsystems close to an eigenstate of S, bus in the optimal superposition of R = sigma_z
  std::vector<double> ns, dxs;
  for (int n = 4; n <= 4096; n *= 2) {
    ns.push_back(n);
    dxs.push_back(commuting_qfi(n, 0.995, 1.0 - 0.995 * 0.995, 1.0, 1.0, 1.0, 1).result.delta_x);
  }
  CHECK(fit_power_law_exponent(ns, dxs) == doctest::Approx(-1.0).epsilon(0.01));
  // with a large var_S the N term still matters at small N and the fitted slope is shallower
  ns.clear();
  dxs.clear();
  for (int n = 4; n <= 4096; n *= 2) {
    ns.push_back(n);
    dxs.push_back(commuting_qfi(n, 0.6, 0.64, 1.0, 1.0, 1.0, 1).result.delta_x);
  }
  CHECK(fit_power_law_exponent(ns, dxs) > -1.0);
}

TEST_CASE("dephasing closed forms") {
  const auto bus = dephasing_reduced_coherence(5, 0.1, 0.1, 1.0, DephasingLocation::bus);
  CHECK(bus.coherence == doctest::Approx(std::exp(-0.2) * std::cos(1.0)).epsilon(1e-14));
  CHECK(bus.coherence == doctest::Approx(0.44236).epsilon(1e-5));
  CHECK(std::abs(bus.rho.trace() - 1.0) < 1e-15);
  for (auto where : {DephasingLocation::systems, DephasingLocation::bus}) {
    CHECK(dephasing_reduced_coherence(3, 0.4, 2.0, 0.0, where).coherence == 1.0);
  }
  const Eigen::Vector2cd q(Complex(0.6, 0.1), Complex(-0.3, 0.7));
  for (double t : {0.3, 2.0}) {
    const auto a = dephasing_reduced_coherence(6, 0.2, 0.0, t, DephasingLocation::systems, q);
    const auto b = dephasing_reduced_coherence(6, 0.2, 10.0, t, DephasingLocation::systems, q);
    CHECK((a.rho - b.rho).cwiseAbs().maxCoeff() <= 1e-14);
  }
  // bus decay rate 2 Gamma for every N
  const double gamma = 0.37;
  for (int n : {2, 4, 8}) {
    std::vector<double> ts, logs;
    for (double t = 0.1; t < 3.0; t += 0.2) {
      ts.push_back(t);
      logs.push_back(std::log(std::abs(dephasing_reduced_coherence(n, 0.3, gamma, t, DephasingLocation::bus).rho(0, 1))));
    }
    CHECK(-fit_line(ts, logs).slope == doctest::Approx(2.0 * gamma).epsilon(1e-6));
  }
  CHECK_THROWS_AS(dephasing_reduced_coherence(2, 0.1, -1.0, 1.0, DephasingLocation::bus), std::invalid_argument);
}

TEST_CASE("dephasing closed forms match a dense master equation") {
  const double x = 0.3, gamma = 0.8, t = 0.5;
  const Eigen::Vector2cd q = Eigen::Vector2cd(Complex(0.6, 0.1), Complex(-0.3, 0.7)).normalized();
  for (int n = 1; n <= 6; ++n) {
    const int nq = n + 1;  // bus is the last qubit
    const auto bus_z = build_site_operator(SiteOp::pauli_z, nq, nq);
    SparseOperator h = SparseOperator::zero(std::size_t{1} << nq);
    for (int i = 1; i <= n; ++i) h = h + (build_site_operator(SiteOp::pauli_z, i, nq) * bus_z).scaled(x);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Ones(1);
    for (int i = 0; i < n; ++i) psi = kron(psi, q);
    psi = kron(psi, Eigen::Vector2cd(1.0, 1.0) / std::sqrt(2.0));
    const DensityMatrix rho0(psi * psi.adjoint());
    for (auto where : {DephasingLocation::systems, DephasingLocation::bus}) {
      std::vector<LindbladTerm> terms;
      if (where == DephasingLocation::bus) {
        terms.push_back({gamma / 2.0, bus_z});
      } else {
        for (int i = 1; i <= n; ++i) terms.push_back({gamma / 2.0, build_site_operator(SiteOp::pauli_z, i, nq)});
      }
      Eigen::Matrix2cd reduced = Eigen::Matrix2cd::Zero();
      lindblad_evolve_dense(
          terms, rho0, {0.0, t, 1},
          [&](std::size_t k, double, const Eigen::MatrixXcd& rho) {
            if (k != 1) return;
            for (Eigen::Index s = 0; s < rho.rows(); s += 2) reduced += rho.block(s, s, 2, 2);
          },
          h);
      const auto closed = dephasing_reduced_coherence(n, x, gamma, t, where, q);
      CHECK((closed.rho - reduced).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}
