#include "metrosim/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "metrosim/dynamics.hpp"
#include "metrosim/errors.hpp"
#include "metrosim/parallel.hpp"
#include "metrosim/random.hpp"

namespace metrosim {

namespace {

void require_even_atoms(int n_atoms) {
  if (n_atoms < 2 || n_atoms % 2 != 0) throw std::invalid_argument("number of atoms must be even and >= 2");
}

double entry_scale(const Eigen::MatrixXd& m) { return std::max(1.0, m.cwiseAbs().maxCoeff()); }

}  // namespace

double alpha_rate(const PairCoefficients& coeffs, double g1, double g2, double gamma, double g, int n_atoms) {
  require_even_atoms(n_atoms);
  if (!(g > 0.0)) throw std::invalid_argument("reference coupling g must be positive");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
  coeffs.require_normalized();

  // g S phi in the pair basis |00>, |01>, |10>, |11>; the first qubit couples with G1
  const Eigen::Vector4cd v = coeffs.amplitudes();
  const Eigen::Vector4cd s_phi(g1 * v(2) + g2 * v(1), g1 * v(3), g2 * v(3), 0.0);
  const double np = n_atoms / 2;
  const double self = s_phi.squaredNorm();
  const double cross = std::norm(v.dot(s_phi));
  return 2.0 * gamma * (np * self + np * (np - 1.0) * cross) / (g * g);
}

void CorrelationMatrix::validate() const {
  require_even_atoms(n_atoms);
  if (entries.rows() != n_atoms || entries.cols() != n_atoms)
    throw std::invalid_argument("correlation matrix must be N x N");
  if (!entries.allFinite()) throw std::invalid_argument("correlation matrix has non-finite entries");
  if ((entries - entries.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("correlation matrix is not symmetric");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(entries, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument("correlation matrix is not positive semidefinite");
}

CorrelationMatrix CorrelationMatrix::uncorrelated(int n_atoms, double c) {
  return {n_atoms, c * Eigen::MatrixXd::Identity(n_atoms, n_atoms)};
}

CorrelationMatrix CorrelationMatrix::fully_correlated(int n_atoms, double c) {
  return {n_atoms, Eigen::MatrixXd::Constant(n_atoms, n_atoms, c)};
}

CorrelationMatrix CorrelationMatrix::intra_set(int n_atoms, double c) {
  const int np = n_atoms / 2;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_atoms, n_atoms);
  m.topLeftCorner(np, np).setConstant(c);
  m.bottomRightCorner(n_atoms - np, n_atoms - np).setConstant(c);
  return {n_atoms, m};
}

const char* to_string(FluctuationCase c) {
  switch (c) {
    case FluctuationCase::uncorrelated: return "uncorrelated";
    case FluctuationCase::pairwise_identical: return "pairwise_identical";
    case FluctuationCase::intra_set_correlated: return "intra_set_correlated";
    case FluctuationCase::general: return "general";
  }
  return "general";
}

Eigen::MatrixXd pair_difference_correlations(const CorrelationMatrix& c) {
  const int np = c.n_atoms / 2;
  const auto& m = c.entries;
  return m.topLeftCorner(np, np) + m.bottomRightCorner(np, np) - m.topRightCorner(np, np) -
         m.bottomLeftCorner(np, np);
}

namespace {

FluctuationCase classify(const CorrelationMatrix& c) {
  const int np = c.n_atoms / 2;
  const auto& m = c.entries;
  const double tol = 1e-12 * entry_scale(m);
  const auto c11 = m.topLeftCorner(np, np);
  const auto c12 = m.topRightCorner(np, np);
  const auto c21 = m.bottomLeftCorner(np, np);
  const auto c22 = m.bottomRightCorner(np, np);
  auto close = [tol](const auto& a, const auto& b) { return (a - b).cwiseAbs().maxCoeff() <= tol; };

  if (close(c11, c12) && close(c11, c21) && close(c11, c22)) return FluctuationCase::pairwise_identical;
  Eigen::MatrixXd off = m;
  off.diagonal().setZero();
  if (off.cwiseAbs().maxCoeff() <= tol) return FluctuationCase::uncorrelated;
  const double level = m(0, 0);
  if (c12.cwiseAbs().maxCoeff() <= tol && (c11.array() - level).abs().maxCoeff() <= tol &&
      (c22.array() - level).abs().maxCoeff() <= tol)
    return FluctuationCase::intra_set_correlated;
  return FluctuationCase::general;
}

}  // namespace

FluctuationReport coupling_fluctuation_noise(const CorrelationMatrix& c, double x, double gamma) {
  c.validate();
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
  const double n = c.n_atoms;
  const Eigen::MatrixXd cp = pair_difference_correlations(c);
  const double diag = cp.trace();
  const double total = cp.sum();
  FluctuationReport r;
  r.alpha_zero = gamma / 4.0 * x * x * (2.0 * n + n * n);
  r.alpha_bg_mean = gamma / 2.0 * (diag + 0.5 * (total - diag));
  // total is a variance, so it is >= 0 up to rounding
  r.noise_factor = (n / 2.0 + 1.0) * std::sqrt(std::max(0.0, total));
  r.alpha_fluct_std = gamma * std::abs(x) * r.noise_factor;
  r.case_label = classify(c);
  return r;
}

AlphaSample sample_fluctuating_alpha(const CorrelationMatrix& c, double x, double gamma, double g,
                                     std::size_t n_samples, std::uint64_t seed) {
  c.validate();
  if (!(g > 0.0)) throw std::invalid_argument("reference coupling g must be positive");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
  if (n_samples < 2) throw std::invalid_argument("need at least two samples");
  const int n = c.n_atoms;
  const int np = n / 2;

  // atoms with zero variance are fixed (their whole row of C vanishes for PSD C)
  std::vector<int> active;
  for (int i = 0; i < n; ++i)
    if (c.entries(i, i) > 0.0) active.push_back(i);
  const int na = static_cast<int>(active.size());
  Eigen::MatrixXd sub(na, na);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j) sub(i, j) = c.entries(active[i], active[j]);
  // Pivoted LDL^T also factors singular PSD matrices (e.g. fully correlated
  // pairs) exactly; pivots below -1e-14 * scale count as a failure.
  const double scale = na > 0 ? sub.diagonal().maxCoeff() : 0.0;
  auto factorize = [&](const Eigen::MatrixXd& m) -> std::optional<Eigen::MatrixXd> {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    Eigen::VectorXd d = ldlt.vectorD();
    if (d.minCoeff() < -1e-14 * scale) return std::nullopt;
    d = d.cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd l = ldlt.matrixL();
    // m = P^T L D L^T P
    return ldlt.transpositionsP().transpose() * (l * d.asDiagonal());
  };
  auto root = na > 0 ? factorize(sub) : std::optional<Eigen::MatrixXd>(Eigen::MatrixXd(0, 0));
  if (!root) root = factorize(sub + 1e-12 * Eigen::MatrixXd::Identity(na, na));
  if (!root) throw std::invalid_argument("correlation matrix could not be factorized");
  Eigen::MatrixXd factor = Eigen::MatrixXd::Zero(n, na);
  for (int i = 0; i < na; ++i) factor.row(active[i]) = g * root->row(i);

  const double g1 = g * (1.0 + x), g2 = g * (1.0 - x);
  std::vector<double> alpha(n_samples);
  Eigen::VectorXd z(na);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const std::uint64_t key = derive_seed(seed, s);
    for (int i = 0; i < na; ++i) z(i) = counter_normal(key, static_cast<std::uint64_t>(i));
    const Eigen::VectorXd dg = factor * z;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < np; ++i) {
      const double u = (g1 + dg(i)) - (g2 + dg(i + np));
      sum += u;
      sum_sq += u * u;
    }
    // sum_{i != j} u_i u_j = (sum u)^2 - sum u^2
    alpha[s] = gamma / (2.0 * g * g) * (sum_sq + 0.5 * (sum * sum - sum_sq));
  }

  // shifted two-pass moments: identical samples give exactly zero spread
  const double shift = alpha[0];
  double mean_d = 0.0;
  for (double a : alpha) mean_d += a - shift;
  mean_d /= static_cast<double>(n_samples);
  double ss = 0.0;
  for (double a : alpha) ss += (a - shift - mean_d) * (a - shift - mean_d);
  const double ns = static_cast<double>(n_samples);
  const double sd = std::sqrt(ss / (ns - 1.0));
  return {shift + mean_d, sd, sd / std::sqrt(ns), sd / std::sqrt(2.0 * (ns - 1.0)), n_samples};
}

PairCoefficients imperfect_pair(double delta) {
  const double r = 1.0 / std::numbers::sqrt2;
  return {std::cos(delta) * r, r, 0.0, std::sin(delta) * r};
}

DfsRelaxationResult dfs_relaxation_alpha(double delta, int n_atoms, std::size_t n_realizations,
                                         std::uint64_t base_seed, const DfsRelaxationOptions& options) {
  require_even_atoms(n_atoms);
  if (!(delta >= 0.0 && delta <= std::numbers::pi / 2.0)) throw std::invalid_argument("delta must lie in [0, pi/2]");
  if (n_realizations < 2) throw std::invalid_argument("need at least two realizations");
  if (!(options.gamma > 0.0) || !(options.dt_gamma > 0.0) || !(options.tolerance > 0.0))
    throw std::invalid_argument("gamma, dt and tolerance must be positive");

  const SparseOperator jump = build_collective_lowering(0.0, n_atoms);
  const SparseOperator derivative = build_collective_lowering_derivative(n_atoms);
  const PureState psi0 = pair_product_state(imperfect_pair(delta), n_atoms / 2);
  const double dt = options.dt_gamma / options.gamma;

  std::vector<double> alpha(n_realizations), steps(n_realizations);
  parallel_for(n_realizations, options.jobs, [&](std::size_t k) {
    const std::uint64_t seed = derive_seed(base_seed, k);
    SseIntegrator sse(jump, options.gamma, psi0, dt);
    for (;;) {
      if (sse.steps_taken() >= options.max_steps)
        throw ConvergenceError("relaxation did not reach the decoherence-free subspace within " +
                               std::to_string(options.max_steps) + " steps");
      if (sse.step(wiener_increment(seed, sse.steps_taken(), dt)) < options.tolerance) break;
    }
    alpha[k] = 0.5 * squared_norm(derivative.apply(sse.state()));
    steps[k] = static_cast<double>(sse.steps_taken());
  });

  const double n = static_cast<double>(n_realizations);
  double mean = 0.0, mean_steps = 0.0;
  for (std::size_t k = 0; k < n_realizations; ++k) {
    mean += alpha[k];
    mean_steps += steps[k];
  }
  mean /= n;
  mean_steps /= n;
  double ss = 0.0;
  for (double a : alpha) ss += (a - mean) * (a - mean);
  return {delta, n_atoms, mean, std::sqrt(ss / (n - 1.0) / n), n_realizations, base_seed, mean_steps * dt};
}

DfsFit fit_dfs_alpha(std::span<const DfsRelaxationResult> points) {
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  if (n < 3) throw std::invalid_argument("fit needs at least three points");
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd y(n), var(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = points[i].delta;
    design.row(i) << 1.0, std::sin(2.0 * d), std::cos(4.0 * d);
    y(i) = points[i].mean_alpha;
    var(i) = points[i].alpha_stderr * points[i].alpha_stderr;
  }
  const Eigen::Matrix3d normal = design.transpose() * design;
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(normal);
  if (!lu.isInvertible()) throw std::invalid_argument("fit is degenerate: need three distinct delta values");
  const Eigen::Vector3d coef = lu.solve(design.transpose() * y);
  const Eigen::Matrix3d inv = lu.inverse();
  const Eigen::Matrix3d cov = inv * design.transpose() * var.asDiagonal() * design * inv;
  return {coef(0), coef(1), coef(2), std::sqrt(cov(0, 0)), std::sqrt(cov(1, 1)), std::sqrt(cov(2, 2))};
}

std::vector<double> dfs_delta_grid() {
  const double pi = std::numbers::pi;
  std::vector<double> grid;
  for (int k = 0; k <= 4; ++k) {
    grid.push_back(k * pi / 9.0);
    grid.push_back(pi / 2.0 - k * pi / 9.0);
  }
  std::sort(grid.begin(), grid.end());
  return grid;
}

std::size_t default_realizations(int n_atoms) {
  switch (n_atoms) {
    case 2: return 100'000;
    case 4: return 10'000;
    case 6: return 10'000;
    case 8: return 2'500;
    case 10: return 1'000;
    case 12: return 1'250;
    case 14: return 250;
    case 16: return 200;
    case 18: return 250;
    default: throw std::invalid_argument("no default realization count for N = " + std::to_string(n_atoms));
  }
}

DfsRelaxationScan dfs_relaxation_scan(int n_atoms, std::span<const double> deltas, std::size_t n_realizations,
                                      std::uint64_t base_seed, const DfsRelaxationOptions& options) {
  DfsRelaxationScan scan;
  for (double d : deltas) scan.points.push_back(dfs_relaxation_alpha(d, n_atoms, n_realizations, base_seed, options));
  scan.fit = fit_dfs_alpha(scan.points);
  return scan;
}

std::optional<double> dfs_alpha_reference(int n_atoms, double delta) {
  const double s = std::sin(2.0 * delta), c = std::cos(4.0 * delta);
  switch (n_atoms) {
    case 2: return 0.5;
    case 4: return (55.0 - 12.0 * s - c) / 36.0;
    case 6: return (303.0 - 110.0 * s - 3.0 * c) / 100.0;
    default: return std::nullopt;
  }
}

GoldenSectionResult golden_section_min(const std::function<double(double)>& f, double lo, double hi, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (!(lo < hi)) throw std::invalid_argument("bracket must satisfy lo < hi");
  const double midpoint = 0.5 * (lo + hi);
  if (hi - lo < tol) return {midpoint, 0};

  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  std::size_t evaluations = 2;
  const double first = fc;
  bool flat = fd == first;
  for (;;) {
    // ties keep the left part, so a flat function drifts but is caught below
    const bool left = fc < fd;
    if (left) {
      b = d;
    } else {
      a = c;
    }
    if (b - a < tol) break;
    if (left) {
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
      flat = flat && fc == first;
    } else {
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
      flat = flat && fd == first;
    }
    ++evaluations;
  }
  return {flat ? midpoint : 0.5 * (a + b), evaluations};
}

std::size_t golden_section_max_evaluations(double lo, double hi, double tol) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  return static_cast<std::size_t>(std::ceil(std::log((hi - lo) / tol) / std::log(phi))) + 2;
}

LengthToX length_to_x(double z1, int m, int nz, double length, double delta_length) {
  if (!(length > 0.0)) throw std::invalid_argument("cavity length must be positive");
  if (nz < 2 || m < 1 || m > nz - 1) throw std::invalid_argument("need 1 <= m <= nz - 1");
  const double theta = nz * std::numbers::pi * z1 / length;
  const double s = std::sin(theta), c = std::cos(theta);
  if (std::abs(s) < 1e-12) throw SingularityError("atoms sit at a node of the cavity mode");
  return {m * std::numbers::pi * (c / s) * delta_length / length, std::abs(c) < 1e-12};
}

}  // namespace metrosim
