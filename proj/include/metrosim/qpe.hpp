#pragma once

// Quantum parameter estimation for N identical subsystems coupled to a
// common bus through H = sum_i H_i + sum_{i,nu} S_nu(x) (x) R_nu + H_R.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "metrosim/hilbert.hpp"

namespace metrosim {

enum class SensitivityMethod { variance_bound, perturbative_bound, observable, markovian_bound };

struct SensitivityResult {
  double delta_x;
  int m_repetitions;
  SensitivityMethod method;
};

/// sqrt(2) * sqrt(1 - |<psi|phi>|).
double bures_distance(const PureState& psi, const PureState& phi);

/// 1 / (2 sqrt(M) <dh^2>^(1/2)) for a generator h with psi -> exp(-i h dx) psi.
SensitivityResult dxmin_from_variance(const SparseOperator& h, const PureState& psi, int m_repetitions);

struct Coupling {
  std::function<Eigen::MatrixXcd(double)> s;        // S_nu(x) on one subsystem
  std::function<Eigen::MatrixXcd(double)> s_prime;  // dS_nu/dx
  Eigen::MatrixXcd r;                               // R_nu on the bus
};

/// Identical subsystems in |phi> and a bus in |xi>, dense on the small factors.
struct ProductModel {
  int n_systems = 1;
  Eigen::MatrixXcd system_hamiltonian;
  Eigen::MatrixXcd bus_hamiltonian;
  std::vector<Coupling> couplings;
  Eigen::VectorXcd system_state;
  Eigen::VectorXcd bus_state;

  Eigen::Index system_dim() const { return system_hamiltonian.rows(); }
  Eigen::Index bus_dim() const { return bus_hamiltonian.rows(); }

  /// Checks shapes, normalization of both states, Hermitian Hamiltonians and
  /// a Hermitian derivative sum_nu S_nu'(x) (x) R_nu. Throws std::invalid_argument.
  void validate(double x) const;
};

/// Double time integral of K_psi0(H_I'(t1), H_I'(t2)) on [0, t]^2, trapezoid
/// on a uniform grid of `grid_points` nodes per axis.
double perturbative_fisher_integral(const ProductModel& model, double x, double t, int grid_points = 128);

/// Throws NotEstimableError when the integral vanishes.
SensitivityResult dxmin_perturbative(const ProductModel& model, double x, double t, int m_repetitions,
                                     int grid_points = 128);

/// max(1e-4, 0.01 |x|)
double default_fd_step(double x);

/// delta x = <dA^2>^(1/2) / (sqrt(M) |d<A>/dx|), slope by central difference.
SensitivityResult dx_observable(const std::function<double(double)>& expectation_of_a,
                                const std::function<double(double)>& variance_of_a, double x, int m_repetitions,
                                double fd_step);

/// Second-order sensitivity of a bus observable A. Requires A |xi> = a |xi>
/// and [A, H_R] = 0 (checked to 1e-10, PreconditionError otherwise). With
/// keep_linear_term = false only the N^2 part of the subsystem correlations
/// is kept and the result carries the extra 1/N.
SensitivityResult dx_bus_perturbative(const ProductModel& model, const Eigen::MatrixXcd& observable_a, double x,
                                      double t, int m_repetitions, int grid_points = 128,
                                      bool keep_linear_term = true);

/// Ultimate bound for a Markovian generator linearized at x = 0:
/// 1 / (2 sqrt(2 M gamma t) (sum_a K_psi(F_a'^dagger, F_a'))^(1/2)).
/// psi must be decoherence free for the x = 0 generators (not checked).
SensitivityResult dxmin_markovian(std::span<const SparseOperator> generator_derivatives, const PureState& psi,
                                  double gamma, double t, int m_repetitions);

/// K_psi(F^dagger, F) = ||F psi||^2 - |<F>|^2.
double markovian_correlation(const SparseOperator& f, const PureState& psi);

/// Local Lindblad channel: rate * (2 L rho L^dagger - L^dagger L rho - rho L^dagger L) per term.
struct Channel {
  struct Term {
    double rate;
    Eigen::MatrixXcd op;
  };
  std::vector<Term> terms;
};

/// Column-major superoperator of X -> -i[H, X] + channel terms.
Eigen::MatrixXcd liouvillian(const Eigen::MatrixXcd& hamiltonian, const Channel& channel);

/// <A(t)> to second order in the coupling with independent Markovian channels
/// on every subsystem and on the bus. The bus channel must leave |xi><xi|
/// invariant and satisfy tr(A P_R(tau)[X]) = f(tau) tr(A X) for all X; both
/// are probed numerically (1e-8) and violations raise PreconditionError.
double expectation_decoherent(const ProductModel& model, const Channel& subsystem_channel, const Channel& bus_channel,
                              const Eigen::MatrixXcd& observable_a, double x, double t, int grid_points = 128);

}  // namespace metrosim
