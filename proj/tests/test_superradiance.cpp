#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "metrosim/errors.hpp"
#include "metrosim/superradiance.hpp"

using namespace metrosim;

namespace {

// d<O>/dt at t = 0 from the adjoint generator gamma (2 J+ O J- - J+J- O - O J+J-)
double initial_slope(const SparseOperator& o, const SparseOperator& jm, double gamma, const PureState& psi) {
  const auto jp = jm.adjoint();
  const auto generator = (jp * o * jm).scaled(2.0) - jp * jm * o - o * jp * jm;
  return gamma * expectation(generator, psi).real();
}

}  // namespace

TEST_CASE("model parameters and advisories") {
  const SuperradianceModel m{8, 0.7, 3.1, 0.01, 0.0};
  CHECK_NOTHROW(m.validate());
  CHECK(std::abs(m.collective_rate() - 0.7 * 0.7 / 3.1) <= 1e-15);
  CHECK(m.n_pairs() == 4);
  CHECK_THROWS_AS((SuperradianceModel{3, 1.0, 5.0, 0.0, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((SuperradianceModel{0, 1.0, 5.0, 0.0, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((SuperradianceModel{2, 0.0, 5.0, 0.0, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((SuperradianceModel{2, 1.0, -5.0, 0.0, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((SuperradianceModel{2, 1.0, 5.0, 0.0, -1.0}.validate()), std::invalid_argument);

  CHECK_FALSE((SuperradianceModel{2, 1.0, 100.0, 0.0, 0.1}.outside_overdamped_regime()));
  CHECK((SuperradianceModel{12, 1.0, 5.0, 0.0, 0.0}.outside_overdamped_regime()));  // 3 g sqrt(12) > kappa
  CHECK((SuperradianceModel{2, 1.0, 100.0, 0.0, 1.0}.outside_overdamped_regime()));  // 3 Gamma > g sqrt(2)
  const SuperradianceModel w{4, 1.0, 5.0, 0.1, 0.0};
  CHECK(w.outside_expansion_window(0.1));   // gt below g/kappa
  CHECK_FALSE(w.outside_expansion_window(0.5));
  CHECK(w.outside_expansion_window(2.0));   // gt above kappa/(N g)
}

TEST_CASE("short-time moment expansions") {
  const SuperradianceModel m{4, 1.0, 5.0, 0.1, 0.0};
  const auto z = analytic_moments(m, 0.0);
  CHECK(z.jpjm == doctest::Approx(0.03).epsilon(1e-14));
  CHECK(z.jp2jm2 == doctest::Approx(4e-4).epsilon(1e-14));
  CHECK(z.jpjm_reexponentiated == doctest::Approx(0.03).epsilon(1e-14));
  for (double t : {0.0, 0.5, 3.0}) {
    const auto d = analytic_moments({6, 1.0, 5.0, 0.0, 0.0}, t);
    CHECK(d.jpjm == 0.0);
    CHECK(d.jp2jm2 == 0.0);
    CHECK(d.jpjm_reexponentiated == 0.0);
  }
  const auto later = analytic_moments(m, 0.3);
  const double a = 0.03, b = (later.jpjm - a) / (m.collective_rate() * 0.3);
  CHECK(later.jpjm_reexponentiated == doctest::Approx(a * std::exp(b * m.collective_rate() * 0.3 / a)));
  CHECK_THROWS_AS(analytic_moments(m, -1.0), std::invalid_argument);
}

TEST_CASE("expansion coefficients match the exact initial value and slope") {
  for (int n : {2, 4, 6, 8}) {
    for (double x : {0.1, 0.3}) {
      const SuperradianceModel m{n, 1.0, 5.0, x, 0.0};
      const auto jm = m.lowering();
      const auto jpjm = jm.adjoint() * jm;
      const auto jm2 = jm * jm;
      const auto jp2jm2 = jm2.adjoint() * jm2;
      const auto psi = m.dark_state();
      const double gamma = m.collective_rate();
      const auto at0 = analytic_moments(m, 0.0);
      const double h = 0.1;
      const auto at1 = analytic_moments(m, h);
      CHECK(at0.jpjm == doctest::Approx(expectation(jpjm, psi).real()).epsilon(1e-12));
      CHECK(at0.jp2jm2 == doctest::Approx(expectation(jp2jm2, psi).real()).epsilon(1e-12));
      if (n > 2) {
        CHECK((at1.jpjm - at0.jpjm) / h == doctest::Approx(initial_slope(jpjm, jm, gamma, psi)).epsilon(1e-10));
        CHECK((at1.jp2jm2 - at0.jp2jm2) / h == doctest::Approx(initial_slope(jp2jm2, jm, gamma, psi)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("escape rate identity 2 gamma <J+J-(0)> = gamma x^2 (2N + N^2) / 4") {
  for (int n = 2; n <= 100; n += 2) {
    for (double x : {0.01, 0.1, 1.0}) {
      const SuperradianceModel m{n, 1.0, 5.0, x, 0.0};
      const double gamma = m.collective_rate();
      const double lhs = 2.0 * gamma * analytic_moments(m, 0.0).jpjm;
      const double rhs = gamma / 4.0 * x * x * (2.0 * n + double(n) * n);
      CHECK(std::abs(lhs - rhs) <= 1e-14 * rhs);
    }
  }
}

TEST_CASE("photon kernel") {
  const double g = 1.0, kappa = 5.0;
  CHECK(photon_moment(1, 0.7, [](double) { return 0.0; }, g, kappa) == 0.0);
  CHECK(photon_moment(2, 0.0, [](double) { return 1.0; }, g, kappa) == 0.0);
  // constant input integrates to c (g/kappa)^(2m) (1 - e^(-kappa t))^(2m)
  const double c = 0.37;
  for (int order = 1; order <= 3; ++order) {
    for (double t : {0.05, 0.3, 2.0}) {
      const double expected = c * std::pow(g / kappa, 2 * order) * std::pow(-std::expm1(-kappa * t), 2 * order);
      CHECK(photon_moment(order, t, [=](double) { return c; }, g, kappa, 4001) ==
            doctest::Approx(expected).epsilon(1e-6));
    }
  }
  CHECK_THROWS_AS(photon_moment(0, 1.0, [](double) { return 1.0; }, g, kappa), std::invalid_argument);
  CHECK_THROWS_AS(photon_moment(1, -1.0, [](double) { return 1.0; }, g, kappa), std::invalid_argument);
  CHECK_THROWS_AS(photon_moment(1, 1.0, [](double) { return 1.0; }, g, kappa, 1), std::invalid_argument);
}

TEST_CASE("photon number at short times") {
  const SuperradianceModel m{4, 1.0, 5.0, 0.1, 0.0};
  CHECK(nph_short_time(m, 0.1) == doctest::Approx(3e-4).epsilon(1e-14));
  CHECK(nph_short_time({4, 1.0, 5.0, 0.0, 0.0}, 0.1) == 0.0);
  CHECK(nph_short_time({4, 1.0, 5.0, 0.2, 0.0}, 0.1) == 4.0 * nph_short_time(m, 0.1));
  CHECK_THROWS_AS(nph_short_time(m, -0.1), std::invalid_argument);
  for (int n : {2, 8}) {
    const SuperradianceModel s{n, 1.0, 5.0, 0.1, 0.0};
    const double t = 1e-4;
    const double via_kernel = photon_moment(1, t, [&](double u) { return analytic_moments(s, u).jpjm; }, 1.0, 5.0);
    CHECK(via_kernel / nph_short_time(s, t) == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("sensitivity bounds") {
  CHECK(superradiance_bound(2, 1.0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(superradiance_bound(12, 0.0485, 1) == doctest::Approx(std::sqrt(2.0) / (0.0485 * std::sqrt(168.0))));
  CHECK(superradiance_bound(12, 0.0485, 1) == doctest::Approx(2.25).epsilon(1e-3));
  CHECK(superradiance_bound_large_n(10, 0.5, 4) == doctest::Approx(std::sqrt(2.0) / 10.0));
}

TEST_CASE("pair product model") {
  const auto pm = pair_product_model({6, 1.0, 5.0, 0.2, 0.0}, 3, 1.0);
  CHECK(pm.n_systems == 3);
  CHECK(pm.system_dim() == 4);
  CHECK(pm.bus_dim() == 4);
  CHECK_NOTHROW(pm.validate(0.2));
  // the pair state is dark for the symmetric coupling
  CHECK((pm.couplings[0].s(0.0) * pm.system_state).norm() < 1e-15);
  CHECK((pm.couplings[0].s(0.2) * pm.system_state).norm() > 0.1);
  CHECK_THROWS_AS(truncated_annihilation(0), std::invalid_argument);
}

TEST_CASE("sensitivity curve") {
  const std::vector<int> ns{2, 4, 6, 8};
  const auto curve = sensitivity_curve(ns, 0.0485, 0.01, 1, 200, 77, {});
  REQUIRE(curve.entries.size() == 4);
  for (const auto& e : curve.entries) {
    CHECK(e.delta_x_bound == doctest::Approx(superradiance_bound(e.n_atoms, 0.0485, 1)));
    CHECK(e.delta_x_numeric > 0.0);
    CHECK(e.delta_x_stderr > 0.0);
    CHECK_FALSE(e.below_bound);
    CHECK(e.delta_x_numeric + 2.0 * e.delta_x_stderr >= e.delta_x_bound);
    // Poissonian photon statistics while <n_ph> << 1
    CHECK(e.nph_variance / e.nph == doctest::Approx(1.0).epsilon(0.1));
  }
  const auto again = sensitivity_curve(ns, 0.0485, 0.01, 1, 200, 77, {.jobs = 1});
  for (std::size_t i = 0; i < ns.size(); ++i) {
    CHECK(again.entries[i].delta_x_numeric == curve.entries[i].delta_x_numeric);
    CHECK(again.entries[i].delta_x_stderr == curve.entries[i].delta_x_stderr);
  }
  const auto m4 = sensitivity_curve(std::vector<int>{4}, 0.0485, 0.01, 4, 200, 77, {});
  CHECK(m4.entries[0].delta_x_numeric == doctest::Approx(curve.entries[1].delta_x_numeric / 2.0).epsilon(1e-14));

  CHECK_THROWS_AS(sensitivity_curve(std::vector<int>{4}, 0.0485, 0.0, 1, 20, 1), NotEstimableError);
  CHECK_THROWS_AS(sensitivity_curve(std::vector<int>{3}, 0.0485, 0.01, 1, 20, 1), std::invalid_argument);
  CHECK_THROWS_AS(sensitivity_curve(std::vector<int>{16}, 0.0485, 0.01, 1, 20, 1), std::invalid_argument);
  CHECK_THROWS_AS(sensitivity_curve(std::vector<int>{4}, 0.0, 0.01, 1, 20, 1), std::invalid_argument);
}

TEST_CASE("photon number curve") {
  const auto pc = photon_curve(4, 0.1, 5.0, {0.0, 0.3, 30}, 50, 3);
  REQUIRE(pc.gt.size() == 31);
  CHECK(pc.nph_numeric.front() == 0.0);
  CHECK(pc.nph_short.back() == doctest::Approx(0.5 * 0.09 * 6.0));
  for (std::size_t k = 1; k < pc.gt.size(); ++k) {
    CHECK(pc.nph_numeric[k] > 0.0);
    CHECK(pc.nph_numeric[k] == doctest::Approx(pc.nph_analytic[k]).epsilon(0.05));
  }
  CHECK_THROWS_AS(photon_curve(4, 0.0, 5.0, {0.0, 0.3, 30}, 50, 3), std::invalid_argument);
  CHECK_THROWS_AS(photon_curve(4, 0.1, 5.0, {0.1, 0.3, 30}, 50, 3), std::invalid_argument);
}
