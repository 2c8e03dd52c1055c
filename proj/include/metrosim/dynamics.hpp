#pragma once

// Time evolution: the diffusive stochastic Schroedinger equation for a single
// collective jump operator, its parallel ensemble driver, and a dense Lindblad
// propagator for small systems.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metrosim/hilbert.hpp"

namespace metrosim {

struct TimeGrid {
  double t_start = 0.0;
  double t_end = 1.0;
  std::size_t n_steps = 1;

  /// Throws std::invalid_argument unless t_end > t_start >= 0 and n_steps >= 1.
  void validate() const;
  double dt() const { return (t_end - t_start) / static_cast<double>(n_steps); }
  double time(std::size_t k) const { return t_start + dt() * static_cast<double>(k); }
  /// Number of recorded points, n_steps + 1 (the initial time included).
  std::size_t points() const { return n_steps + 1; }

  /// 2000 steps over [0, 20/g].
  static TimeGrid standard(double g = 1.0) { return {0.0, 20.0 / g, 2000}; }
};

struct NamedObservable {
  std::string name;
  SparseOperator op;
};

/// series[o][k] = Re <psi(t_k)| O_o |psi(t_k)> for k = 0 .. n_steps.
using ObservableSeries = std::vector<std::vector<double>>;

/// One Euler-Maruyama integrator for
///   d psi = D1(psi) dt + D2(psi) dW,
///   D1 = gamma (2 m J - J^dagger J - m^2) psi,  D2 = sqrt(2 gamma) (J - m) psi,
/// with m = Re <J>, renormalizing after each step. The ensemble average
/// reproduces d rho/dt = gamma (2 J rho J^dagger - J^dagger J rho - rho J^dagger J).
class SseIntegrator {
 public:
  SseIntegrator(const SparseOperator& jump, double gamma, const PureState& psi0, double dt);

  /// Advances by one step with Wiener increment dW. Returns ||psi_new - psi_old||.
  /// Throws IntegrationDiverged on a non-finite or vanishing state.
  double step(double dW);

  std::size_t steps_taken() const { return steps_; }
  /// |1 - ||psi||| of the unnormalized state produced by the last step.
  double last_norm_defect() const { return last_norm_defect_; }
  std::span<const Complex> state() const { return psi_; }
  double expectation(const SparseOperator& op) const;

 private:
  SparseOperator jump_;
  SparseOperator jump_adjoint_;
  double gamma_;
  double dt_;
  ComplexVector psi_;
  ComplexVector j_psi_;
  ComplexVector jdj_psi_;
  ComplexVector next_;
  std::size_t steps_ = 0;
  double last_norm_defect_ = 0.0;
};

/// Wiener increment of `step` in the stream keyed by `seed`, distributed N(0, dt).
double wiener_increment(std::uint64_t seed, std::size_t step, double dt);

ObservableSeries sse_trajectory(const SparseOperator& jump, double gamma, const PureState& psi0, const TimeGrid& grid,
                                std::uint64_t seed, std::span<const NamedObservable> observables);

/// Same integration driven by explicit increments (increments.size() == n_steps).
/// If `norm_defects` is given it receives |1 - ||unnormalized psi_{k+1}|| | per step.
ObservableSeries sse_trajectory_with_increments(const SparseOperator& jump, double gamma, const PureState& psi0,
                                                const TimeGrid& grid, std::span<const double> increments,
                                                std::span<const NamedObservable> observables,
                                                std::vector<double>* norm_defects = nullptr);

struct TrajectoryEnsemble {
  TimeGrid grid;
  std::vector<std::string> observable_names;
  std::size_t n_trajectories = 0;
  std::uint64_t base_seed = 0;
  ObservableSeries mean_series;
  ObservableSeries variance_series;  // unbiased sample variance across trajectories
  ObservableSeries stderr_series;    // sqrt(variance / n_trajectories)
  /// per_trajectory[k] is trajectory k's series; filled only when requested.
  std::vector<ObservableSeries> per_trajectory;
};

struct EnsembleOptions {
  unsigned jobs = 0;  // 0 = all logical cores
  bool keep_trajectories = false;
};

/// Trajectory k is driven by derive_seed(base_seed, k). Results are reduced in
/// trajectory order, so they are bitwise independent of the worker count.
TrajectoryEnsemble ensemble_statistics(const SparseOperator& jump, double gamma, const PureState& psi0,
                                       const TimeGrid& grid, std::size_t n_trajectories, std::uint64_t base_seed,
                                       std::span<const NamedObservable> observables, EnsembleOptions options = {});

/// Reduces per-trajectory series into mean / variance / stderr in index order.
void reduce_ensemble(TrajectoryEnsemble& ensemble, const std::vector<ObservableSeries>& runs);

class DensityMatrix {
 public:
  /// Validates hermiticity and unit trace (1e-10) and eigenvalues >= -1e-8.
  explicit DensityMatrix(Eigen::MatrixXcd rho);
  static DensityMatrix from_pure(const PureState& psi);

  Eigen::Index dim() const { return rho_.rows(); }
  const Eigen::MatrixXcd& matrix() const { return rho_; }
  double min_eigenvalue() const;

 private:
  Eigen::MatrixXcd rho_;
};

/// Term rate * (2 L rho L^dagger - L^dagger L rho - rho L^dagger L).
struct LindbladTerm {
  double rate;
  SparseOperator op;
};

using DensityObserver = std::function<void(std::size_t k, double t, const Eigen::MatrixXcd& rho)>;

/// Fixed-step RK4 for d rho/dt = -i[H, rho] + sum of LindbladTerm contributions.
/// The observer is called at every grid point, including t_start. The internal
/// step is min(grid dt, 1e-3 / s) with s = sum rate*||L||_inf + ||H||_inf.
/// Throws StepSizeError if the trace drifts by more than 1e-6, and
/// std::invalid_argument for dim > 256 or negative rates.
void lindblad_evolve_dense(std::span<const LindbladTerm> terms, const DensityMatrix& rho0, const TimeGrid& grid,
                           const DensityObserver& observer, const std::optional<SparseOperator>& hamiltonian = {});

/// Re tr(O rho(t_k)) for each observable at every grid point.
ObservableSeries lindblad_expectations(std::span<const LindbladTerm> terms, const DensityMatrix& rho0,
                                       const TimeGrid& grid, std::span<const NamedObservable> observables,
                                       const std::optional<SparseOperator>& hamiltonian = {});

}  // namespace metrosim
