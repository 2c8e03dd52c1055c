#pragma once

// Robustness of the dark-state scheme: photon escape rate alpha = 2 gamma <J+ J->
// for imperfect pair states, fluctuating coupling constants, relaxation into the
// decoherence-free subspace, lattice positioning and the cavity-length map.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "metrosim/hilbert.hpp"

namespace metrosim {

/// alpha for the product of identical pair states with couplings G1 (atoms 1..N/2)
/// and G2 (atoms N/2+1..N):
///   alpha = 2 gamma [Np ||S phi||^2 + Np (Np - 1) |<phi|S|phi>|^2],  S = (G1 sigma_- (x) 1 + G2 1 (x) sigma_-)/g.
/// For real coefficients this is
///   gamma [Np(((c-b)G1 + (c+b)G2)^2 + 2d^2(G1^2 + G2^2)) + Np(Np-1)((G2-G1)b(a-d) + (G2+G1)c(a+d))^2] / g^2.
/// Throws std::invalid_argument for odd N, g <= 0, gamma < 0 or unnormalized coefficients.
double alpha_rate(const PairCoefficients& coeffs, double g1, double g2, double gamma, double g, int n_atoms);

/// C_ij = mean(dg_i dg_j) / g^2 over the ensemble of coupling fluctuations.
struct CorrelationMatrix {
  int n_atoms = 2;
  Eigen::MatrixXd entries;

  /// Throws std::invalid_argument unless N is even, entries is N x N, symmetric
  /// to 1e-12 and has eigenvalues >= -1e-10.
  void validate() const;

  static CorrelationMatrix uncorrelated(int n_atoms, double c);
  /// Every entry equal to c: the two atoms of a pair always move together.
  static CorrelationMatrix fully_correlated(int n_atoms, double c);
  /// c within each lattice, zero between the lattices.
  static CorrelationMatrix intra_set(int n_atoms, double c);
};

enum class FluctuationCase { uncorrelated, pairwise_identical, intra_set_correlated, general };

const char* to_string(FluctuationCase c);

struct FluctuationReport {
  double alpha_zero;       // (gamma/4) x^2 (2N + N^2)
  double alpha_bg_mean;    // (gamma/2)(sum_i Cp_ii + 1/2 sum_{i!=j} Cp_ij)
  double alpha_fluct_std;  // gamma |x| D
  double noise_factor;     // D = (N/2 + 1) (sum_ij Cp_ij)^(1/2)
  FluctuationCase case_label;
};

/// Pair-difference correlations Cp_ij = C_ij + C_{i+N/2,j+N/2} - C_{i,j+N/2} - C_{i+N/2,j}, i,j <= N/2.
Eigen::MatrixXd pair_difference_correlations(const CorrelationMatrix& c);

/// Closed forms for couplings g(1+x) + dg_i and g(1-x) + dg_i with correlations C.
FluctuationReport coupling_fluctuation_noise(const CorrelationMatrix& c, double x, double gamma);

struct AlphaSample {
  double mean;
  double std;
  double mean_stderr;
  double std_stderr;  // std / sqrt(2 (n - 1)), exact for Gaussian alpha
  std::size_t n_samples;
};

/// Draws dg ~ Normal(0, g^2 C) (pivoted LDL^T over the atoms with nonzero
/// variance, one retry with 1e-12 diagonal jitter)
/// and evaluates alpha for the dark product state with the perturbed couplings.
/// Sample s uses the counter stream derive_seed(seed, s).
AlphaSample sample_fluctuating_alpha(const CorrelationMatrix& c, double x, double gamma, double g,
                                     std::size_t n_samples, std::uint64_t seed);

/// Pair state (cos delta, 1, 0, sin delta)/sqrt(2).
PairCoefficients imperfect_pair(double delta);

struct DfsRelaxationOptions {
  double gamma = 1.0;
  double dt_gamma = 0.01;  // dt = dt_gamma / gamma
  double tolerance = 1e-12;
  std::size_t max_steps = 10'000'000;
  unsigned jobs = 0;
};

/// Ensemble of relaxations from the imperfect pair product state at one delta.
/// alpha is in units gamma |G1 - G2|^2 / g^2.
struct DfsRelaxationResult {
  double delta;
  int n_atoms;
  double mean_alpha;
  double alpha_stderr;
  std::size_t n_realizations;
  std::uint64_t base_seed;
  double mean_relaxation_time;  // in 1/gamma
};

/// Runs the SSE under J_-(0) with dt = 0.01/gamma from imperfect_pair(delta)
/// until ||psi(t+dt) - psi(t)|| < tolerance, then takes ||D psi||^2 / 2 with
/// D = dJ_-/dx, which is alpha to leading order in G1 - G2. Realization k uses
/// derive_seed(base_seed, k). Throws ConvergenceError past max_steps and
/// std::invalid_argument for odd N or delta outside [0, pi/2].
DfsRelaxationResult dfs_relaxation_alpha(double delta, int n_atoms, std::size_t n_realizations,
                                         std::uint64_t base_seed, const DfsRelaxationOptions& options = {});

/// alpha(delta) = A + B sin(2 delta) + C cos(4 delta).
struct DfsFit {
  double a, b, c;
  double a_stderr, b_stderr, c_stderr;  // propagated from the per-point stderrs
};

/// Least squares through the normal equations; needs three distinct deltas.
DfsFit fit_dfs_alpha(std::span<const DfsRelaxationResult> points);

struct DfsRelaxationScan {
  std::vector<DfsRelaxationResult> points;
  DfsFit fit;
};

/// {0, pi/9, 2pi/9, 3pi/9, 4pi/9} and their mirrors pi/2 - delta, ascending.
std::vector<double> dfs_delta_grid();

/// 1e5, 1e4, 1e4, 2500, 1000, 1250, 250, 200, 250 for N = 2..18; throws otherwise.
std::size_t default_realizations(int n_atoms);

DfsRelaxationScan dfs_relaxation_scan(int n_atoms, std::span<const double> deltas, std::size_t n_realizations,
                                      std::uint64_t base_seed, const DfsRelaxationOptions& options = {});

/// Known exact relaxed alpha for N = 2, 4, 6; empty otherwise.
std::optional<double> dfs_alpha_reference(int n_atoms, double delta);

struct GoldenSectionResult {
  double position;
  std::size_t evaluations;
};

/// Golden-section reduction of [lo, hi] until hi - lo < tol. If every evaluation
/// returned the same value the midpoint of the original bracket is returned.
/// Throws std::invalid_argument for tol <= 0 or lo >= hi.
GoldenSectionResult golden_section_min(const std::function<double(double)>& f, double lo, double hi, double tol);

/// ceil(log((hi - lo)/tol) / log(golden ratio)) + 2.
std::size_t golden_section_max_evaluations(double lo, double hi, double tol);

struct LengthToX {
  double x;
  bool antinode;  // cot vanishes: no first-order sensitivity to dL
};

/// x = m pi cot(nz pi z1 / L) dL / L for lattices separated by m wavelengths.
/// Throws SingularityError at a node and std::invalid_argument unless 1 <= m <= nz - 1 and L > 0.
LengthToX length_to_x(double z1, int m, int nz, double length, double delta_length);

}  // namespace metrosim
