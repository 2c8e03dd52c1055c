#include "metrosim/superradiance.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "metrosim/errors.hpp"
#include "metrosim/numerics.hpp"
#include "metrosim/random.hpp"

namespace metrosim {

void SuperradianceModel::validate() const {
  if (n_atoms < 2 || n_atoms % 2 != 0) throw std::invalid_argument("number of atoms must be even and at least 2");
  if (!(coupling_g > 0.0)) throw std::invalid_argument("coupling g must be positive");
  if (!(cavity_rate > 0.0)) throw std::invalid_argument("cavity rate kappa must be positive");
  if (!(spontaneous_rate >= 0.0)) throw std::invalid_argument("spontaneous rate must be nonnegative");
  if (!std::isfinite(asymmetry)) throw std::invalid_argument("asymmetry x must be finite");
}

bool SuperradianceModel::outside_overdamped_regime() const {
  const double collective = coupling_g * std::sqrt(static_cast<double>(n_atoms));
  return !(3.0 * spontaneous_rate <= collective && 3.0 * collective <= cavity_rate);
}

bool SuperradianceModel::outside_expansion_window(double t) const {
  const double gt = coupling_g * t;
  return !(gt > coupling_g / cavity_rate && gt < cavity_rate / (n_atoms * coupling_g));
}

Eigen::MatrixXcd truncated_annihilation(int n_max) {
  if (n_max < 1) throw std::invalid_argument("Fock truncation needs n_max >= 1");
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

ProductModel pair_product_model(const SuperradianceModel& model, int n_max, double omega) {
  model.validate();
  const Eigen::Matrix2cd lower{{0.0, 1.0}, {0.0, 0.0}};  // |0><1|
  const Eigen::Matrix2cd id2 = Eigen::Matrix2cd::Identity();
  const Eigen::MatrixXcd first = kron(lower, id2);
  const Eigen::MatrixXcd second = kron(id2, lower);
  const double g = model.coupling_g;

  ProductModel pm;
  pm.n_systems = model.n_pairs();
  const Eigen::Matrix2cd excitation{{-0.5, 0.0}, {0.0, 0.5}};
  pm.system_hamiltonian = omega * (kron(excitation, id2) + kron(id2, excitation));
  const Eigen::MatrixXcd a = truncated_annihilation(n_max);
  pm.bus_hamiltonian = omega * (a.adjoint() * a);
  auto s1 = [=](double x) -> Eigen::MatrixXcd { return g * ((1.0 + x) * first + (1.0 - x) * second); };
  auto s1p = [=](double) -> Eigen::MatrixXcd { return g * (first - second); };
  pm.couplings.push_back({s1, s1p, a.adjoint()});
  pm.couplings.push_back({[=](double x) -> Eigen::MatrixXcd { return s1(x).adjoint(); },
                          [=](double x) -> Eigen::MatrixXcd { return s1p(x).adjoint(); }, a});
  pm.system_state = PairCoefficients::dark().amplitudes();
  pm.bus_state = Eigen::VectorXcd::Zero(n_max + 1);
  pm.bus_state(0) = 1.0;
  return pm;
}

AnalyticMoments analytic_moments(const SuperradianceModel& model, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("time must be nonnegative");
  const double np = model.n_pairs();
  const double x = model.asymmetry;
  const double x2 = x * x, x4 = x2 * x2, x6 = x4 * x2;
  const double gt = model.collective_rate() * t;
  const double np2 = np * np, np3 = np2 * np, np4 = np3 * np, np5 = np4 * np;

  const double a = x2 * (np / 2.0 + np2 / 2.0);
  const double b = -(3.0 * np2 + np3) * (x2 + x4);
  AnalyticMoments m{};
  m.jpjm = a + b * gt;
  m.jp2jm2 = (np / 2.0 - 5.0 * np2 / 4.0 + np3 / 2.0 + np4 / 4.0) * x4 +
             2.0 * gt *
                 ((-np - 2.5 * np2 + 5.5 * np3 - 1.5 * np4 - 0.5 * np5) * x4 +
                  (-3.0 * np + 2.5 * np2 + 3.5 * np3 - 2.5 * np4 - 0.5 * np5) * x6);
  m.jpjm_reexponentiated = a > 0.0 ? a * std::exp(b * gt / a) : m.jpjm;
  return m;
}

double photon_moment(int order_m, double t, const std::function<double(double)>& jm_series, double g, double kappa,
                     int quad_points) {
  if (order_m < 1) throw std::invalid_argument("photon moment order must be at least 1");
  if (!(t >= 0.0)) throw std::invalid_argument("time must be nonnegative");
  if (quad_points < 2) throw std::invalid_argument("quad_points must be at least 2");
  if (t == 0.0) return 0.0;
  const double m = order_m;
  const auto kernel = [&](double s) {
    return kappa * std::exp(-2.0 * m * kappa * s) * std::pow(std::expm1(kappa * s), 2 * order_m - 1) *
           jm_series(std::max(0.0, t - s));
  };
  return 2.0 * m * std::pow(g / kappa, 2 * order_m) * trapezoid(kernel, 0.0, t, static_cast<std::size_t>(quad_points));
}

double nph_short_time(const SuperradianceModel& model, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("time must be nonnegative");
  const double np = model.n_pairs();
  const double gt = model.coupling_g * t;
  return 0.5 * gt * gt * model.asymmetry * model.asymmetry * np * (np + 1.0);
}

double superradiance_bound(int n_atoms, double gt, int m_repetitions) {
  const double n = n_atoms;
  return std::sqrt(2.0) / (std::sqrt(static_cast<double>(m_repetitions)) * gt * std::sqrt(2.0 * n + n * n));
}

double superradiance_bound_large_n(int n_atoms, double gt, int m_repetitions) {
  return std::sqrt(2.0) / (std::sqrt(static_cast<double>(m_repetitions)) * gt * n_atoms);
}

namespace {

// Photon moment of every trajectory of one ensemble observable, evaluated at the grid end.
std::vector<double> per_trajectory_moment(const TrajectoryEnsemble& ens, std::size_t obs, int order_m, double t,
                                          double kappa, int quad_points) {
  std::vector<double> out;
  out.reserve(ens.per_trajectory.size());
  const double dt = ens.grid.dt();
  for (const auto& run : ens.per_trajectory) {
    const auto& series = run[obs];
    out.push_back(photon_moment(
        order_m, t, [&](double s) { return interpolate_uniform(series, ens.grid.t_start, dt, s); }, 1.0, kappa,
        quad_points));
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

SensitivityCurve sensitivity_curve(std::span<const int> n_list, double gt, double x, int m_repetitions,
                                   std::size_t n_trajectories, std::uint64_t base_seed,
                                   const SensitivityOptions& options) {
  if (!(gt > 0.0)) throw std::invalid_argument("gt must be positive");
  if (m_repetitions < 1) throw std::invalid_argument("number of repetitions M must be at least 1");
  if (n_trajectories < 2) throw std::invalid_argument("need at least 2 trajectories");
  if (!(options.fd_fraction > 0.0) || !(options.max_dt > 0.0)) throw std::invalid_argument("bad sensitivity options");
  for (int n : n_list) {
    if (n < 2 || n % 2 != 0 || n > options.max_atoms) {
      throw std::invalid_argument("atom number " + std::to_string(n) + " must be even and in [2, " +
                                  std::to_string(options.max_atoms) + "]");
    }
  }
  if (x == 0.0) throw NotEstimableError("observable insensitive at this x (x = 0)");

  const double kappa = options.kappa_over_g;
  const double h = options.fd_fraction * std::abs(x);
  const std::size_t n_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(gt / options.max_dt - 1e-9)));
  const TimeGrid grid{0.0, gt, n_steps};

  SensitivityCurve curve{{}, gt, x, m_repetitions, n_trajectories, base_seed, kappa};
  for (int n_atoms : n_list) {
    const std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(n_atoms));
    // index 0: x - h, 1: x, 2: x + h
    std::vector<double> p1[3], p2[3];
    for (int side = 0; side < 3; ++side) {
      SuperradianceModel model{n_atoms, 1.0, kappa, x + (side - 1) * h, 0.0};
      model.validate();
      const SparseOperator jm = model.lowering();
      const SparseOperator jp = jm.adjoint();
      const SparseOperator jm2 = jm * jm;
      const std::vector<NamedObservable> obs{{"jpjm", jp * jm}, {"jp2jm2", jm2.adjoint() * jm2}};
      const auto ens = ensemble_statistics(jm, model.collective_rate(), model.dark_state(), grid, n_trajectories, seed,
                                           obs, {options.jobs, true});
      p1[side] = per_trajectory_moment(ens, 0, 1, gt, kappa, options.quad_points);
      p2[side] = per_trajectory_moment(ens, 1, 2, gt, kappa, options.quad_points);
    }

    const double nt = static_cast<double>(n_trajectories);
    struct Estimate {
      double dx, nph, var;
    };
    const auto estimate = [&](double nm, double n0, double np, double a2) -> Estimate {
      const double var = a2 + n0 - n0 * n0;
      const double slope = (np - nm) / (2.0 * h);
      return {std::sqrt(std::max(var, 0.0)) / (std::sqrt(static_cast<double>(m_repetitions)) * std::abs(slope)), n0,
              var};
    };
    double sums[4] = {mean_of(p1[0]) * nt, mean_of(p1[1]) * nt, mean_of(p1[2]) * nt, mean_of(p2[1]) * nt};
    const Estimate full = estimate(sums[0] / nt, sums[1] / nt, sums[2] / nt, sums[3] / nt);
    if (!std::isfinite(full.dx)) throw NotEstimableError("observable insensitive at this x");

    std::vector<double> loo(n_trajectories);
    for (std::size_t k = 0; k < n_trajectories; ++k) {
      loo[k] = estimate((sums[0] - p1[0][k]) / (nt - 1), (sums[1] - p1[1][k]) / (nt - 1),
                        (sums[2] - p1[2][k]) / (nt - 1), (sums[3] - p2[1][k]) / (nt - 1))
                   .dx;
    }
    const double loo_mean = mean_of(loo);
    double ss = 0.0;
    for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
    const double se = std::sqrt((nt - 1.0) / nt * ss);

    const double bound = superradiance_bound(n_atoms, gt, m_repetitions);
    curve.entries.push_back({n_atoms, full.dx, se, bound, superradiance_bound_large_n(n_atoms, gt, m_repetitions),
                             full.nph, full.var, full.dx + 2.0 * se < bound});
  }
  return curve;
}

PhotonCurve photon_curve(int n_atoms, double x, double kappa_over_g, const TimeGrid& grid,
                         std::size_t n_trajectories, std::uint64_t base_seed, int quad_points, unsigned jobs) {
  grid.validate();
  if (grid.t_start != 0.0) throw std::invalid_argument("photon curve grid must start at t = 0");
  if (x == 0.0) throw std::invalid_argument("photon curve is normalized by x^2 and needs x != 0");
  if (n_trajectories < 2) throw std::invalid_argument("need at least 2 trajectories");
  SuperradianceModel model{n_atoms, 1.0, kappa_over_g, x, 0.0};
  model.validate();
  const SparseOperator jm = model.lowering();
  const std::vector<NamedObservable> obs{{"jpjm", jm.adjoint() * jm}};
  const auto ens =
      ensemble_statistics(jm, model.collective_rate(), model.dark_state(), grid, n_trajectories, base_seed, obs,
                          {jobs, true});

  PhotonCurve out{n_atoms, {}, {}, {}, {}, {}};
  const double x2 = x * x;
  const double nt = static_cast<double>(n_trajectories);
  for (std::size_t k = 0; k < grid.points(); ++k) {
    const double t = grid.time(k);
    const auto per = per_trajectory_moment(ens, 0, 1, t, kappa_over_g, quad_points);
    const double mean = mean_of(per);
    double ss = 0.0;
    for (double v : per) ss += (v - mean) * (v - mean);
    out.gt.push_back(t);
    out.nph_numeric.push_back(mean / x2);
    out.nph_numeric_stderr.push_back(std::sqrt(ss / (nt - 1.0) / nt) / x2);
    out.nph_analytic.push_back(
        photon_moment(1, t, [&](double s) { return analytic_moments(model, s).jpjm_reexponentiated; }, 1.0,
                      kappa_over_g, quad_points) /
        x2);
    out.nph_short.push_back(nph_short_time(model, t) / x2);
  }
  return out;
}

}  // namespace metrosim
