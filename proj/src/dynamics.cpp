#include "metrosim/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "metrosim/errors.hpp"
#include "metrosim/parallel.hpp"
#include "metrosim/random.hpp"

namespace metrosim {

void TimeGrid::validate() const {
  if (!(t_start >= 0.0) || !(t_end > t_start) || n_steps < 1 || !std::isfinite(t_end)) {
    throw std::invalid_argument("time grid needs t_end > t_start >= 0 and n_steps >= 1");
  }
}

SseIntegrator::SseIntegrator(const SparseOperator& jump, double gamma, const PureState& psi0, double dt)
    : jump_(jump),
      jump_adjoint_(jump.adjoint()),
      gamma_(gamma),
      dt_(dt),
      psi_(psi0.amplitudes().begin(), psi0.amplitudes().end()),
      j_psi_(psi0.dim()),
      jdj_psi_(psi0.dim()),
      next_(psi0.dim()) {
  if (!(gamma > 0.0)) throw std::invalid_argument("SSE needs gamma > 0");
  if (!(dt > 0.0)) throw std::invalid_argument("SSE needs dt > 0");
  if (jump.dim() != psi0.dim()) throw std::invalid_argument("jump operator and state dimensions differ");
}

double SseIntegrator::step(double dW) {
  jump_.apply(psi_, j_psi_);
  jump_adjoint_.apply(j_psi_, jdj_psi_);
  const double m = inner_product(psi_, j_psi_).real();
  const double diff = std::sqrt(2.0 * gamma_) * dW;
  const double drift = gamma_ * dt_;

  double norm2 = 0.0;
  for (std::size_t i = 0; i < psi_.size(); ++i) {
    const Complex jp = j_psi_[i];
    const Complex p = psi_[i];
    next_[i] = p + drift * (2.0 * m * jp - jdj_psi_[i] - m * m * p) + diff * (jp - m * p);
    norm2 += std::norm(next_[i]);
  }
  ++steps_;
  const double nrm = std::sqrt(norm2);
  if (!std::isfinite(nrm) || nrm == 0.0) throw IntegrationDiverged(steps_);
  last_norm_defect_ = std::abs(1.0 - nrm);

  double change2 = 0.0;
  for (std::size_t i = 0; i < psi_.size(); ++i) {
    const Complex v = next_[i] / nrm;
    change2 += std::norm(v - psi_[i]);
    psi_[i] = v;
  }
  return std::sqrt(change2);
}

double SseIntegrator::expectation(const SparseOperator& op) const {
  return inner_product(psi_, op.apply(psi_)).real();
}

double wiener_increment(std::uint64_t seed, std::size_t step, double dt) {
  return std::sqrt(dt) * counter_normal(seed, step);
}

namespace {

ObservableSeries integrate(const SparseOperator& jump, double gamma, const PureState& psi0, const TimeGrid& grid,
                           const std::function<double(std::size_t)>& increment,
                           std::span<const NamedObservable> observables, std::vector<double>* norm_defects) {
  grid.validate();
  SseIntegrator sse(jump, gamma, psi0, grid.dt());
  ObservableSeries series(observables.size(), std::vector<double>(grid.points()));
  auto record = [&](std::size_t k) {
    for (std::size_t o = 0; o < observables.size(); ++o) series[o][k] = sse.expectation(observables[o].op);
  };
  if (norm_defects) norm_defects->assign(grid.n_steps, 0.0);
  record(0);
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    sse.step(increment(k));
    if (norm_defects) (*norm_defects)[k] = sse.last_norm_defect();
    record(k + 1);
  }
  return series;
}

}  // namespace

ObservableSeries sse_trajectory(const SparseOperator& jump, double gamma, const PureState& psi0, const TimeGrid& grid,
                                std::uint64_t seed, std::span<const NamedObservable> observables) {
  const double dt = grid.dt();
  return integrate(
      jump, gamma, psi0, grid, [&](std::size_t k) { return wiener_increment(seed, k, dt); }, observables, nullptr);
}

ObservableSeries sse_trajectory_with_increments(const SparseOperator& jump, double gamma, const PureState& psi0,
                                                const TimeGrid& grid, std::span<const double> increments,
                                                std::span<const NamedObservable> observables,
                                                std::vector<double>* norm_defects) {
  if (increments.size() != grid.n_steps) {
    throw std::invalid_argument("need exactly one increment per step");
  }
  return integrate(
      jump, gamma, psi0, grid, [&](std::size_t k) { return increments[k]; }, observables, norm_defects);
}

void reduce_ensemble(TrajectoryEnsemble& ensemble, const std::vector<ObservableSeries>& runs) {
  const std::size_t n = runs.size();
  if (n == 0) throw std::invalid_argument("cannot reduce an empty ensemble");
  const std::size_t n_obs = runs.front().size();
  const std::size_t points = n_obs == 0 ? 0 : runs.front().front().size();
  ensemble.n_trajectories = n;
  ensemble.mean_series.assign(n_obs, std::vector<double>(points, 0.0));
  ensemble.variance_series.assign(n_obs, std::vector<double>(points, 0.0));
  ensemble.stderr_series.assign(n_obs, std::vector<double>(points, 0.0));
  const double dn = static_cast<double>(n);
  for (std::size_t o = 0; o < n_obs; ++o) {
    for (std::size_t k = 0; k < points; ++k) {
      double sum = 0.0;
      for (std::size_t r = 0; r < n; ++r) sum += runs[r][o][k];
      const double mean = sum / dn;
      double ss = 0.0;
      for (std::size_t r = 0; r < n; ++r) ss += (runs[r][o][k] - mean) * (runs[r][o][k] - mean);
      const double var = n > 1 ? ss / (dn - 1.0) : 0.0;
      ensemble.mean_series[o][k] = mean;
      ensemble.variance_series[o][k] = var;
      ensemble.stderr_series[o][k] = std::sqrt(var / dn);
    }
  }
}

TrajectoryEnsemble ensemble_statistics(const SparseOperator& jump, double gamma, const PureState& psi0,
                                       const TimeGrid& grid, std::size_t n_trajectories, std::uint64_t base_seed,
                                       std::span<const NamedObservable> observables, EnsembleOptions options) {
  if (n_trajectories < 1) throw std::invalid_argument("ensemble needs at least one trajectory");
  grid.validate();
  std::vector<ObservableSeries> runs(n_trajectories);
  parallel_for(n_trajectories, options.jobs, [&](std::size_t k) {
    try {
      runs[k] = sse_trajectory(jump, gamma, psi0, grid, derive_seed(base_seed, k), observables);
    } catch (const IntegrationDiverged& e) {
      throw IntegrationDiverged(e.step(), k);
    }
  });

  TrajectoryEnsemble ensemble;
  ensemble.grid = grid;
  ensemble.base_seed = base_seed;
  for (const auto& o : observables) ensemble.observable_names.push_back(o.name);
  reduce_ensemble(ensemble, runs);
  if (options.keep_trajectories) ensemble.per_trajectory = std::move(runs);
  return ensemble;
}

DensityMatrix::DensityMatrix(Eigen::MatrixXcd rho) : rho_(std::move(rho)) {
  if (rho_.rows() != rho_.cols() || rho_.rows() == 0) {
    throw std::invalid_argument("density matrix must be square and non-empty");
  }
  if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::invalid_argument("density matrix is not Hermitian");
  }
  if (std::abs(rho_.trace() - Complex(1.0)) > 1e-10) {
    throw std::invalid_argument("density matrix trace differs from 1");
  }
  if (min_eigenvalue() < -1e-8) throw std::invalid_argument("density matrix has a negative eigenvalue");
}

DensityMatrix DensityMatrix::from_pure(const PureState& psi) {
  const Eigen::Map<const Eigen::VectorXcd> v(psi.amplitudes().data(), static_cast<Eigen::Index>(psi.dim()));
  return DensityMatrix(v * v.adjoint());
}

double DensityMatrix::min_eigenvalue() const {
  const Eigen::MatrixXcd h = 0.5 * (rho_ + rho_.adjoint());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(h, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

namespace {

using Sparse = Eigen::SparseMatrix<Complex>;

struct Generator {
  struct Term {
    double rate;
    Sparse l;
    Sparse l_dag;
    Sparse l_dag_l;
  };
  std::vector<Term> terms;
  std::optional<Sparse> h;

  // Buffers are reused across calls; large temporaries otherwise dominate the cost.
  mutable Eigen::MatrixXcd work1, work2;

  void operator()(const Eigen::MatrixXcd& rho, Eigen::MatrixXcd& out) const {
    out.setZero(rho.rows(), rho.cols());
    if (h) {
      work1.noalias() = *h * rho;
      out.noalias() += Complex(0.0, -1.0) * work1;
      out.noalias() += Complex(0.0, 1.0) * work1.adjoint();
    }
    for (const auto& t : terms) {
      // rho stays Hermitian through every RK stage, so L rho L^dagger = L (L rho)^dagger
      work1.noalias() = t.l * rho;
      work2.noalias() = t.l * work1.adjoint();
      out.noalias() += (2.0 * t.rate) * work2;
      work1.noalias() = t.l_dag_l * rho;
      out.noalias() -= t.rate * work1;
      out.noalias() -= t.rate * work1.adjoint();
    }
  }
};

}  // namespace

void lindblad_evolve_dense(std::span<const LindbladTerm> terms, const DensityMatrix& rho0, const TimeGrid& grid,
                           const DensityObserver& observer, const std::optional<SparseOperator>& hamiltonian) {
  grid.validate();
  const auto dim = static_cast<std::size_t>(rho0.dim());
  if (dim > 256) throw std::invalid_argument("dense Lindblad propagation is limited to dim <= 256");

  Generator gen;
  double scale = 0.0;
  for (const auto& t : terms) {
    if (!(t.rate >= 0.0)) throw std::invalid_argument("Lindblad rates must be nonnegative");
    if (t.op.dim() != dim) throw std::invalid_argument("Lindblad operator dimension mismatch");
    Sparse l = t.op.to_eigen();
    Sparse l_dag = l.adjoint();
    Sparse l_dag_l = (l_dag * l).pruned();
    gen.terms.push_back({t.rate, std::move(l), std::move(l_dag), std::move(l_dag_l)});
    scale += t.rate * max_row_sum(t.op);
  }
  if (hamiltonian) {
    if (hamiltonian->dim() != dim) throw std::invalid_argument("Hamiltonian dimension mismatch");
    gen.h = hamiltonian->to_eigen();
    scale += max_row_sum(*hamiltonian);
  }

  const double grid_dt = grid.dt();
  std::size_t substeps = 1;
  if (scale > 0.0) substeps = static_cast<std::size_t>(std::ceil(grid_dt * scale / 1e-3 - 1e-9));
  substeps = std::max<std::size_t>(substeps, 1);
  const double h = grid_dt / static_cast<double>(substeps);

  Eigen::MatrixXcd rho = rho0.matrix();
  Eigen::MatrixXcd k1, k2, k3, k4, stage;
  observer(0, grid.t_start, rho);
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    if (scale > 0.0) {
      for (std::size_t s = 0; s < substeps; ++s) {
        gen(rho, k1);
        stage = rho + (0.5 * h) * k1;
        gen(stage, k2);
        stage = rho + (0.5 * h) * k2;
        gen(stage, k3);
        stage = rho + h * k3;
        gen(stage, k4);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      const double drift = std::abs(rho.trace() - Complex(1.0));
      if (!(drift <= 1e-6)) {
        throw StepSizeError("trace drifted by " + std::to_string(drift) + " at grid step " + std::to_string(k + 1) +
                            "; refine the time grid");
      }
    }
    observer(k + 1, grid.time(k + 1), rho);
  }
}

ObservableSeries lindblad_expectations(std::span<const LindbladTerm> terms, const DensityMatrix& rho0,
                                       const TimeGrid& grid, std::span<const NamedObservable> observables,
                                       const std::optional<SparseOperator>& hamiltonian) {
  ObservableSeries series(observables.size(), std::vector<double>(grid.points()));
  std::vector<Sparse> ops;
  for (const auto& o : observables) {
    if (o.op.dim() != static_cast<std::size_t>(rho0.dim())) {
      throw std::invalid_argument("observable '" + o.name + "' dimension mismatch");
    }
    ops.push_back(o.op.to_eigen());
  }
  lindblad_evolve_dense(
      terms, rho0, grid,
      [&](std::size_t k, double, const Eigen::MatrixXcd& rho) {
        for (std::size_t o = 0; o < ops.size(); ++o) series[o][k] = (ops[o] * rho).trace().real();
      },
      hamiltonian);
  return series;
}

}  // namespace metrosim
