#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "metrosim/toymodels.hpp"

namespace metrosim::oracle {

struct BruteForce {
  double mean, var, slope;
};

// Phase evolution of prod_i |s>_i (x) (|r0> + |r1>)/sqrt(2) in the product basis: every
// subsystem qubit is |0> (eigenvalue s) and the bus picks up exp(-i x N s r_m t).
inline BruteForce brute_force(const PureInteractionModel& m) {
  using C = std::complex<double>;
  const std::size_t dim = std::size_t{2} << m.n_systems;
  std::vector<C> psi(dim, 0.0);
  std::vector<double> phase_rate(dim, 0.0);  // sum_i s_i r_m for each basis state
  for (std::size_t idx = 0; idx < dim; ++idx) {
    const bool bus_one = idx & 1u;
    double sum_s = 0.0;
    for (int i = 0; i < m.n_systems; ++i) sum_s += ((idx >> (i + 1)) & 1u) ? -m.s_eigenvalue : m.s_eigenvalue;
    phase_rate[idx] = sum_s * (bus_one ? m.r1 : m.r0);
    if ((idx >> 1) == 0) psi[idx] = std::exp(C(0.0, -m.x * phase_rate[idx] * m.t)) / std::sqrt(2.0);
  }
  // A flips the bus bit; G = sum_i S_i (x) R is diagonal with entries phase_rate
  C a_mean = 0.0, a2 = 0.0, comm = 0.0;
  for (std::size_t idx = 0; idx < dim; ++idx) {
    const std::size_t flip = idx ^ 1u;
    a_mean += std::conj(psi[idx]) * psi[flip];
    a2 += std::conj(psi[idx]) * psi[idx];  // A^2 = 1 on the bus
    comm += std::conj(psi[idx]) * (phase_rate[idx] - phase_rate[flip]) * psi[flip];
  }
  // d<A>/dx = i t <[G, A]>
  return {a_mean.real(), a2.real() - a_mean.real() * a_mean.real(), (C(0.0, m.t) * comm).real()};
}

inline double brute_force_dx(const PureInteractionModel& m) {
  const auto bf = brute_force(m);
  return std::sqrt(bf.var) / std::abs(bf.slope);
}

}  // namespace metrosim::oracle
