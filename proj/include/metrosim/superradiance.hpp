#pragma once

// N two-level atoms in two lattices coupled to one overdamped cavity mode with
// couplings g(1 + x) and g(1 - x). Atoms l and l + N/2 form a pair; the mode
// is adiabatically eliminated, leaving collective decay at gamma = g^2/kappa.

#include <cstdint>
#include <functional>
#include <vector>

#include "metrosim/dynamics.hpp"
#include "metrosim/qpe.hpp"

namespace metrosim {

struct SuperradianceModel {
  int n_atoms = 2;
  double coupling_g = 1.0;
  double cavity_rate = 5.0;  // kappa
  double asymmetry = 0.0;    // x
  double spontaneous_rate = 0.0;

  /// Throws std::invalid_argument unless N is even and >= 2, g > 0, kappa > 0, Gamma >= 0.
  void validate() const;
  int n_pairs() const { return n_atoms / 2; }
  double collective_rate() const { return coupling_g * coupling_g / cavity_rate; }
  /// True unless 3 Gamma <= g sqrt(N) and 3 g sqrt(N) <= kappa.
  bool outside_overdamped_regime() const;
  /// Qualitative window g/kappa << gt << kappa/(N g) where the moment expansion
  /// fed through the photon kernel is expected to hold. Flags only.
  bool outside_expansion_window(double t) const;

  /// J_-(x) on all N atoms.
  SparseOperator lowering() const { return build_collective_lowering(asymmetry, n_atoms); }
  /// Dark product state of the pairs, (|t-> + |s>)/sqrt(2) per pair.
  PureState dark_state() const { return pair_product_state(PairCoefficients::dark(), n_pairs()); }
};

/// One pair as subsystem, the truncated cavity mode (levels 0..n_max) as bus:
/// S_1 = g[(1+x) sigma_- (x) 1 + (1-x) 1 (x) sigma_-] with R_1 = a^dagger,
/// S_2 = S_1^dagger with R_2 = a, H_i = omega per excitation, H_R = omega a^dagger a.
ProductModel pair_product_model(const SuperradianceModel& model, int n_max = 2, double omega = 0.0);

/// Truncated annihilation operator on levels 0..n_max.
Eigen::MatrixXcd truncated_annihilation(int n_max);

struct AnalyticMoments {
  double jpjm;
  double jp2jm2;
  double jpjm_reexponentiated;
};

/// First-order short-time expansions of <J+J-> and <J+^2 J-^2> for the dark
/// product state; the third entry rewrites a + b t as a exp(b t / a) (linear if a <= 0).
AnalyticMoments analytic_moments(const SuperradianceModel& model, double t);

/// <a^dagger^m a^m (t)> = 2m (g/kappa)^(2m) int_0^t ds kappa e^(-2m kappa s) (e^(kappa s) - 1)^(2m-1) J_m(t - s)
/// by the trapezoid rule on quad_points nodes.
double photon_moment(int order_m, double t, const std::function<double(double)>& jm_series, double g, double kappa,
                     int quad_points = 201);

/// (1/2) g^2 t^2 x^2 Np (Np + 1)
double nph_short_time(const SuperradianceModel& model, double t);

/// sqrt(2) / (sqrt(M) g t sqrt(2N + N^2)) and its large-N form sqrt(2) / (sqrt(M) g t N).
double superradiance_bound(int n_atoms, double gt, int m_repetitions);
double superradiance_bound_large_n(int n_atoms, double gt, int m_repetitions);

struct SensitivityEntry {
  int n_atoms;
  double delta_x_numeric;
  double delta_x_stderr;  // jackknife over trajectories
  double delta_x_bound;
  double delta_x_large_n;
  double nph;
  double nph_variance;
  bool below_bound;  // numeric beats the bound by more than 2 stderr
};

struct SensitivityCurve {
  std::vector<SensitivityEntry> entries;
  double gt;
  double x;
  int m_repetitions;
  std::size_t n_trajectories;
  std::uint64_t base_seed;
  double kappa_over_g;
};

struct SensitivityOptions {
  double kappa_over_g = 5.0;
  double fd_fraction = 0.1;  // fd step = fd_fraction * |x|
  double max_dt = 0.01;      // in units of 1/g
  int max_atoms = 14;
  int quad_points = 201;
  unsigned jobs = 0;
};

/// delta x from A = n_ph for each N, with <n_ph> and <a^dagger^2 a^2> from
/// SSE ensembles of J+J- and J+^2J-^2 at x - h, x, x + h driven by the same
/// random numbers. Units g = 1.
SensitivityCurve sensitivity_curve(std::span<const int> n_list, double gt, double x, int m_repetitions,
                                   std::size_t n_trajectories, std::uint64_t base_seed,
                                   const SensitivityOptions& options = {});

struct PhotonCurve {
  int n_atoms;
  std::vector<double> gt;
  std::vector<double> nph_numeric;       // SSE ensemble through the photon kernel
  std::vector<double> nph_numeric_stderr;
  std::vector<double> nph_analytic;      // re-exponentiated expansion through the photon kernel
  std::vector<double> nph_short;         // (1/2) g^2 t^2 x^2 Np (Np + 1)
};

/// <n_ph>(t) on every point of `grid` (times in 1/g), all values divided by x^2.
PhotonCurve photon_curve(int n_atoms, double x, double kappa_over_g, const TimeGrid& grid,
                         std::size_t n_trajectories, std::uint64_t base_seed, int quad_points = 201,
                         unsigned jobs = 0);

}  // namespace metrosim
