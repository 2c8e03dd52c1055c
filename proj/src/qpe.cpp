#include "metrosim/qpe.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "metrosim/errors.hpp"
#include "metrosim/numerics.hpp"

namespace metrosim {

namespace {

constexpr double kNoInformation = 1e-30;

void require_positive_m(int m) {
  if (m < 1) throw std::invalid_argument("number of repetitions M must be at least 1");
}

bool hermitian(const Eigen::MatrixXcd& m, double tol) {
  return m.rows() == m.cols() && (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

Eigen::MatrixXcd propagator(const Eigen::MatrixXcd& h, double t) {
  return matrix_exponential(Complex(0.0, -t) * h);
}

// Uniform grid of `n` nodes on [0, t].
std::vector<double> grid_times(double t, int n) {
  std::vector<double> ts(static_cast<std::size_t>(n));
  const double h = t / static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i) ts[static_cast<std::size_t>(i)] = h * i;
  return ts;
}

}  // namespace

double bures_distance(const PureState& psi, const PureState& phi) {
  if (psi.dim() != phi.dim()) throw std::invalid_argument("Bures distance between states of unequal dimension");
  const double overlap = std::min(1.0, std::abs(inner_product(psi.amplitudes(), phi.amplitudes())));
  return std::sqrt(2.0) * std::sqrt(1.0 - overlap);
}

SensitivityResult dxmin_from_variance(const SparseOperator& h, const PureState& psi, int m_repetitions) {
  require_positive_m(m_repetitions);
  if (!h.hermitian()) throw std::invalid_argument("generator must be Hermitian");
  const double var = variance(h, psi).real();
  if (!(var >= kNoInformation)) throw NotEstimableError("parameter not estimable from this generator (zero variance)");
  return {1.0 / (2.0 * std::sqrt(static_cast<double>(m_repetitions)) * std::sqrt(var)), m_repetitions,
          SensitivityMethod::variance_bound};
}

void ProductModel::validate(double x) const {
  const Eigen::Index ds = system_dim();
  const Eigen::Index db = bus_dim();
  if (n_systems < 1) throw std::invalid_argument("model needs at least one subsystem");
  if (ds < 1 || db < 1) throw std::invalid_argument("model Hamiltonians must be non-empty");
  if (!hermitian(system_hamiltonian, 1e-12) || !hermitian(bus_hamiltonian, 1e-12)) {
    throw std::invalid_argument("subsystem and bus Hamiltonians must be square and Hermitian");
  }
  if (system_state.size() != ds || bus_state.size() != db) {
    throw std::invalid_argument("model states do not match the Hamiltonian dimensions");
  }
  if (std::abs(system_state.norm() - 1.0) > 1e-12 || std::abs(bus_state.norm() - 1.0) > 1e-12) {
    throw std::invalid_argument("model states must be normalized");
  }
  if (couplings.empty()) throw std::invalid_argument("model has no couplings");
  Eigen::MatrixXcd derivative = Eigen::MatrixXcd::Zero(ds * db, ds * db);
  for (std::size_t nu = 0; nu < couplings.size(); ++nu) {
    const auto& c = couplings[nu];
    if (!c.s || !c.s_prime) throw std::invalid_argument("coupling " + std::to_string(nu) + " lacks S(x) or S'(x)");
    const Eigen::MatrixXcd s = c.s(x);
    const Eigen::MatrixXcd sp = c.s_prime(x);
    if (s.rows() != ds || s.cols() != ds || sp.rows() != ds || sp.cols() != ds) {
      throw std::invalid_argument("coupling " + std::to_string(nu) + " has wrong subsystem dimension");
    }
    if (c.r.rows() != db || c.r.cols() != db) {
      throw std::invalid_argument("coupling " + std::to_string(nu) + " has wrong bus dimension");
    }
    derivative += kron(sp, c.r);
  }
  if (!hermitian(derivative, 1e-12)) {
    throw std::invalid_argument("derivative of the interaction, sum S'(x) (x) R, is not Hermitian");
  }
}

double perturbative_fisher_integral(const ProductModel& model, double x, double t, int grid_points) {
  model.validate(x);
  if (!(t > 0.0)) throw std::invalid_argument("evolution time must be positive");
  if (grid_points < 16) throw std::invalid_argument("grid_points must be at least 16");

  const auto ts = grid_times(t, grid_points);
  const auto w = trapezoid_weights(ts.size(), ts[1] - ts[0]);
  const std::size_t n = ts.size();
  const std::size_t nc = model.couplings.size();
  const double nsys = model.n_systems;
  const Eigen::VectorXcd& phi = model.system_state;
  const Eigen::VectorXcd& xi = model.bus_state;

  // u = S'(t) phi, v = S'(t)^dagger phi, p = R(t) xi, q = R(t)^dagger xi
  std::vector<std::vector<Eigen::VectorXcd>> u(nc), v(nc), p(nc), q(nc);
  std::vector<std::vector<Complex>> ms(nc), mr(nc);
  std::vector<Eigen::MatrixXcd> sp(nc);
  for (std::size_t c = 0; c < nc; ++c) sp[c] = model.couplings[c].s_prime(x);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::MatrixXcd us = propagator(model.system_hamiltonian, ts[i]);
    const Eigen::MatrixXcd ub = propagator(model.bus_hamiltonian, ts[i]);
    for (std::size_t c = 0; c < nc; ++c) {
      const Eigen::MatrixXcd s_t = us.adjoint() * sp[c] * us;
      const Eigen::MatrixXcd r_t = ub.adjoint() * model.couplings[c].r * ub;
      u[c].push_back(s_t * phi);
      v[c].push_back(s_t.adjoint() * phi);
      p[c].push_back(r_t * xi);
      q[c].push_back(r_t.adjoint() * xi);
      ms[c].push_back(phi.dot(u[c].back()));
      mr[c].push_back(xi.dot(p[c].back()));
    }
  }

  Complex total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Complex k = 0.0;
      for (std::size_t a = 0; a < nc; ++a) {
        for (std::size_t b = 0; b < nc; ++b) {
          const Complex ss = v[a][i].dot(u[b][j]);
          const Complex rr = q[a][i].dot(p[b][j]);
          const Complex mm = ms[a][i] * ms[b][j];
          k += nsys * (ss - mm) * rr + nsys * nsys * mm * (rr - mr[a][i] * mr[b][j]);
        }
      }
      total += w[i] * w[j] * k;
    }
  }
  return total.real();
}

SensitivityResult dxmin_perturbative(const ProductModel& model, double x, double t, int m_repetitions,
                                     int grid_points) {
  require_positive_m(m_repetitions);
  const double integral = perturbative_fisher_integral(model, x, t, grid_points);
  if (!(integral > kNoInformation)) throw NotEstimableError("no sensitivity at this x (zero correlation integral)");
  return {1.0 / (2.0 * std::sqrt(static_cast<double>(m_repetitions) * integral)), m_repetitions,
          SensitivityMethod::perturbative_bound};
}

double default_fd_step(double x) { return std::max(1e-4, 0.01 * std::abs(x)); }

SensitivityResult dx_observable(const std::function<double(double)>& expectation_of_a,
                                const std::function<double(double)>& variance_of_a, double x, int m_repetitions,
                                double fd_step) {
  require_positive_m(m_repetitions);
  if (!(fd_step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  const double slope = (expectation_of_a(x + fd_step) - expectation_of_a(x - fd_step)) / (2.0 * fd_step);
  if (!(std::abs(slope) >= kNoInformation)) throw NotEstimableError("observable insensitive at this x");
  const double var = variance_of_a(x);
  if (var < 0.0) throw std::invalid_argument("observable variance is negative");
  return {std::sqrt(var) / (std::sqrt(static_cast<double>(m_repetitions)) * std::abs(slope)), m_repetitions,
          SensitivityMethod::observable};
}

SensitivityResult dx_bus_perturbative(const ProductModel& model, const Eigen::MatrixXcd& observable_a, double x,
                                      double t, int m_repetitions, int grid_points, bool keep_linear_term) {
  require_positive_m(m_repetitions);
  model.validate(x);
  if (!(t > 0.0)) throw std::invalid_argument("evolution time must be positive");
  if (grid_points < 16) throw std::invalid_argument("grid_points must be at least 16");
  const Eigen::MatrixXcd& a_op = observable_a;
  if (a_op.rows() != model.bus_dim() || a_op.cols() != model.bus_dim()) {
    throw std::invalid_argument("observable does not act on the bus");
  }
  const Eigen::VectorXcd& xi = model.bus_state;
  const Complex a_xi = xi.dot(a_op * xi);
  if ((a_op * xi - a_xi * xi).norm() > 1e-10) throw PreconditionError("bus state is not an eigenstate of A");
  if ((a_op * model.bus_hamiltonian - model.bus_hamiltonian * a_op).cwiseAbs().maxCoeff() > 1e-10) {
    throw PreconditionError("A does not commute with the bus Hamiltonian");
  }

  const auto ts = grid_times(t, grid_points);
  const auto w = trapezoid_weights(ts.size(), ts[1] - ts[0]);
  const std::size_t n = ts.size();
  const std::size_t nc = model.couplings.size();
  const double nsys = model.n_systems;
  const Eigen::VectorXcd& phi = model.system_state;

  struct SysVecs {
    Eigen::VectorXcd s_phi, sd_phi, p_phi, pd_phi;  // S phi, S^dag phi, S' phi, S'^dag phi
    Complex ms, mp;
  };
  struct BusVecs {
    Eigen::VectorXcd left_dag_xi;  // [R(t), A]^dagger xi
    Eigen::VectorXcd right_xi;     // [A, R(t)] xi
    Eigen::VectorXcd r_dag_xi;     // R(t)^dagger xi
  };
  std::vector<std::vector<SysVecs>> sys(nc);
  std::vector<std::vector<BusVecs>> bus(nc);
  std::vector<Eigen::MatrixXcd> s_x(nc), sp_x(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    s_x[c] = model.couplings[c].s(x);
    sp_x[c] = model.couplings[c].s_prime(x);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::MatrixXcd us = propagator(model.system_hamiltonian, ts[i]);
    const Eigen::MatrixXcd ub = propagator(model.bus_hamiltonian, ts[i]);
    for (std::size_t c = 0; c < nc; ++c) {
      const Eigen::MatrixXcd s_t = us.adjoint() * s_x[c] * us;
      const Eigen::MatrixXcd p_t = us.adjoint() * sp_x[c] * us;
      SysVecs sv{s_t * phi, s_t.adjoint() * phi, p_t * phi, p_t.adjoint() * phi, 0.0, 0.0};
      sv.ms = phi.dot(sv.s_phi);
      sv.mp = phi.dot(sv.p_phi);
      sys[c].push_back(std::move(sv));
      const Eigen::MatrixXcd r_t = ub.adjoint() * model.couplings[c].r * ub;
      const Eigen::MatrixXcd left = r_t * a_op - a_op * r_t;
      bus[c].push_back({left.adjoint() * xi, -left * xi, r_t.adjoint() * xi});
    }
  }

  Complex numerator = 0.0, denominator = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double wij = w[i] * w[j];
      for (std::size_t a = 0; a < nc; ++a) {
        const SysVecs& s1 = sys[a][i];
        for (std::size_t b = 0; b < nc; ++b) {
          const SysVecs& s2 = sys[b][j];
          Complex chi = s1.ms * s2.ms;
          Complex dchi = s1.mp * s2.ms + s1.ms * s2.mp;
          if (keep_linear_term) {
            chi = nsys * (s1.sd_phi.dot(s2.s_phi) - chi) + nsys * nsys * chi;
            const Complex corr = s1.pd_phi.dot(s2.s_phi) + s1.sd_phi.dot(s2.p_phi);
            dchi = nsys * (corr - dchi) + nsys * nsys * dchi;
          }
          const Complex comm2 = bus[a][i].left_dag_xi.dot(bus[b][j].right_xi);
          const Complex comm1 = bus[a][i].r_dag_xi.dot(bus[b][j].right_xi);
          numerator += wij * chi * comm2;
          denominator += wij * dchi * comm1;
          scale += wij * std::abs(dchi) * std::abs(comm1);
        }
      }
    }
  }
  const double den = std::abs(denominator.real());
  if (!(scale > 0.0) || den <= 1e-12 * scale) {
    throw NotEstimableError("denominator vanishes: the bus observable carries no first-order signal at this x");
  }
  const double num = numerator.real();
  if (!(num > 0.0)) throw NotEstimableError("numerator vanishes: no fluctuations of A at this order");
  double dx = std::sqrt(num) / (std::sqrt(static_cast<double>(m_repetitions)) * den);
  if (!keep_linear_term) dx /= nsys;
  return {dx, m_repetitions, SensitivityMethod::perturbative_bound};
}

double markovian_correlation(const SparseOperator& f, const PureState& psi) {
  const ComplexVector f_psi = f.apply(psi.amplitudes());
  const Complex mean = inner_product(psi.amplitudes(), f_psi);
  return squared_norm(f_psi) - std::norm(mean);
}

SensitivityResult dxmin_markovian(std::span<const SparseOperator> generator_derivatives, const PureState& psi,
                                  double gamma, double t, int m_repetitions) {
  require_positive_m(m_repetitions);
  if (!(gamma * t > 0.0)) throw std::invalid_argument("gamma * t must be positive");
  double k = 0.0;
  for (const auto& f : generator_derivatives) {
    if (f.dim() != psi.dim()) throw std::invalid_argument("generator dimension does not match the state");
    k += markovian_correlation(f, psi);
  }
  if (!(k > kNoInformation)) throw NotEstimableError("no sensitivity: the correlation sum vanishes");
  return {1.0 / (2.0 * std::sqrt(2.0 * m_repetitions * gamma * t) * std::sqrt(k)), m_repetitions,
          SensitivityMethod::markovian_bound};
}

Eigen::MatrixXcd liouvillian(const Eigen::MatrixXcd& hamiltonian, const Channel& channel) {
  const Eigen::Index d = hamiltonian.rows();
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(d, d);
  Eigen::MatrixXcd sup = Complex(0.0, -1.0) * (kron(id, hamiltonian) - kron(hamiltonian.transpose(), id));
  for (const auto& term : channel.terms) {
    if (!(term.rate >= 0.0)) throw std::invalid_argument("channel rates must be nonnegative");
    if (term.op.rows() != d || term.op.cols() != d) throw std::invalid_argument("channel operator has wrong dimension");
    const Eigen::MatrixXcd ldl = term.op.adjoint() * term.op;
    sup += term.rate * (2.0 * kron(term.op.conjugate(), term.op) - kron(id, ldl) - kron(ldl.transpose(), id));
  }
  return sup;
}

double expectation_decoherent(const ProductModel& model, const Channel& subsystem_channel, const Channel& bus_channel,
                              const Eigen::MatrixXcd& observable_a, double x, double t, int grid_points) {
  model.validate(x);
  if (!(t >= 0.0)) throw std::invalid_argument("evolution time must be nonnegative");
  if (grid_points < 2) throw std::invalid_argument("grid_points must be at least 2");
  const Eigen::Index ds = model.system_dim();
  const Eigen::Index db = model.bus_dim();
  if (observable_a.rows() != db || observable_a.cols() != db) {
    throw std::invalid_argument("observable does not act on the bus");
  }

  const Eigen::MatrixXcd rho_k0 = model.system_state * model.system_state.adjoint();
  const Eigen::MatrixXcd rho_r0 = model.bus_state * model.bus_state.adjoint();
  // tr(A X) = ell . vec(X)
  const Eigen::RowVectorXcd ell = vectorize(observable_a.transpose()).transpose();
  if (t == 0.0) return (ell * vectorize(rho_r0)).value().real();

  const Eigen::MatrixXcd lk = liouvillian(model.system_hamiltonian, subsystem_channel);
  const Eigen::MatrixXcd lr = liouvillian(model.bus_hamiltonian, bus_channel);
  const auto ts = grid_times(t, grid_points);
  const std::size_t n = ts.size();
  const double h = ts[1] - ts[0];

  std::vector<Eigen::MatrixXcd> pk(n), pr(n);
  for (std::size_t j = 0; j < n; ++j) {
    pk[j] = matrix_exponential(ts[j] * lk);
    pr[j] = matrix_exponential(ts[j] * lr);
  }

  const Eigen::VectorXcd vr0 = vectorize(rho_r0);
  const double ell_norm2 = ell.squaredNorm();
  for (std::size_t j = 0; j < n; ++j) {
    if ((pr[j] * vr0 - vr0).cwiseAbs().maxCoeff() > 1e-8) {
      throw PreconditionError("bus channel does not leave the bus state invariant");
    }
    if (ell_norm2 > 0.0) {
      const Eigen::RowVectorXcd propagated = ell * pr[j];
      const Complex f = propagated.dot(ell) / ell_norm2;  // conj-linear in the first argument
      if ((propagated - std::conj(f) * ell).norm() > 1e-8 * std::sqrt(ell_norm2)) {
        throw PreconditionError("tr(A P_R(t)[X]) does not factorize as f(t) tr(A X) for this bus channel");
      }
    }
  }

  const std::size_t nc = model.couplings.size();
  const double nsys = model.n_systems;
  std::vector<Eigen::MatrixXcd> s_ops(nc), r_ops(nc);
  std::vector<Eigen::RowVectorXcd> s_rows(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    s_ops[c] = model.couplings[c].s(x);
    r_ops[c] = model.couplings[c].r;
    s_rows[c] = vectorize(s_ops[c].transpose()).transpose();
  }
  const Eigen::MatrixXcd id_b = Eigen::MatrixXcd::Identity(db, db);

  // Per node j: subsystem state, its S-products, the bus state and its R-products.
  std::vector<std::vector<Complex>> s_mean(nc, std::vector<Complex>(n));
  std::vector<std::vector<Eigen::VectorXcd>> s_left(nc, std::vector<Eigen::VectorXcd>(n));
  std::vector<std::vector<Eigen::VectorXcd>> s_right(nc, std::vector<Eigen::VectorXcd>(n));
  std::vector<std::vector<Eigen::VectorXcd>> r_left(nc, std::vector<Eigen::VectorXcd>(n));
  std::vector<std::vector<Eigen::VectorXcd>> r_right(nc, std::vector<Eigen::VectorXcd>(n));
  // m_rows[c][i] = ell P_R(t - t_i) [R_c, .] as a row functional
  std::vector<std::vector<Eigen::RowVectorXcd>> m_rows(nc, std::vector<Eigen::RowVectorXcd>(n));
  std::vector<Eigen::VectorXcd> rho_r(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::MatrixXcd rk = unvectorize(pk[j] * vectorize(rho_k0), ds);
    const Eigen::MatrixXcd rr = unvectorize(pr[j] * vr0, db);
    rho_r[j] = vectorize(rr);
    const Eigen::RowVectorXcd ell_t = ell * pr[n - 1 - j];
    for (std::size_t c = 0; c < nc; ++c) {
      s_mean[c][j] = (s_ops[c] * rk).trace();
      s_left[c][j] = vectorize(s_ops[c] * rk);
      s_right[c][j] = vectorize(rk * s_ops[c]);
      r_left[c][j] = vectorize(r_ops[c] * rr);
      r_right[c][j] = vectorize(rr * r_ops[c]);
      const Eigen::MatrixXcd comm = kron(id_b, r_ops[c]) - kron(r_ops[c].transpose(), id_b);
      m_rows[c][j] = ell_t * comm;
    }
  }

  // first order: -i N sum_nu int_0^t <S_nu(t1)> tr(A P_R(t - t1)[R_nu, rho_R(t1)]) dt1
  const auto w_outer = trapezoid_weights(n, h);
  Complex first = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < nc; ++c) first += w_outer[i] * s_mean[c][i] * (m_rows[c][i] * rho_r[i]).value();
  }
  first *= Complex(0.0, -nsys);

  Complex second = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const auto w_inner = trapezoid_weights(i + 1, h);
    Complex inner = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      const std::size_t tau = i - j;
      Complex f = 0.0;
      for (std::size_t mu = 0; mu < nc; ++mu) {
        const Eigen::VectorXcd sys1 = pk[tau] * s_left[mu][j];
        const Eigen::VectorXcd sys2 = pk[tau] * s_right[mu][j];
        const Eigen::VectorXcd bus1 = pr[tau] * r_left[mu][j];
        const Eigen::VectorXcd bus2 = pr[tau] * r_right[mu][j];
        for (std::size_t nu = 0; nu < nc; ++nu) {
          const Complex ss = s_mean[nu][i] * s_mean[mu][j];
          const Complex c1_sys = (s_rows[nu] * sys1).value() - ss;
          const Complex c2_sys = (s_rows[nu] * sys2).value() - ss;
          const Complex c1_bus = (m_rows[nu][i] * bus1).value();
          const Complex c2_bus = (m_rows[nu][i] * bus2).value();
          f += nsys * (c1_sys * c1_bus - c2_sys * c2_bus) + nsys * nsys * ss * (c1_bus - c2_bus);
        }
      }
      inner += w_inner[j] * f;
    }
    second += w_outer[i] * inner;
  }

  const Complex zeroth = (ell * rho_r[n - 1]).value();
  return (zeroth + first - second).real();
}

}  // namespace metrosim
