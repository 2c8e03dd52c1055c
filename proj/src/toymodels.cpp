#include "metrosim/toymodels.hpp"

#include <cmath>
#include <stdexcept>

#include "metrosim/errors.hpp"

namespace metrosim {

PureInteractionResult pure_interaction_sensitivity(const PureInteractionModel& model, int m_repetitions) {
  if (m_repetitions < 1) throw std::invalid_argument("number of repetitions M must be at least 1");
  if (model.n_systems < 1) throw std::invalid_argument("need at least one subsystem");
  if (!(model.t > 0.0)) throw std::invalid_argument("evolution time must be positive");
  const double coupling = model.n_systems * model.s_eigenvalue * (model.r0 - model.r1);
  if (coupling == 0.0) throw NotEstimableError("no sensitivity: s = 0 or r0 = r1");
  const double phase = model.x * coupling * model.t;
  const double sn = std::sin(phase);
  return {std::cos(phase), sn * sn, 1.0 / (std::sqrt(static_cast<double>(m_repetitions)) * std::abs(coupling) * model.t)};
}

CommutingQfi commuting_qfi(int n, double mean_s, double var_s, double meansq_r, double var_r, double t,
                           int m_repetitions) {
  if (m_repetitions < 1) throw std::invalid_argument("number of repetitions M must be at least 1");
  if (n < 1) throw std::invalid_argument("need at least one subsystem");
  if (var_s < 0.0 || var_r < 0.0 || meansq_r < 0.0) throw std::invalid_argument("variances must be nonnegative");
  if (!(t > 0.0)) throw std::invalid_argument("evolution time must be positive");
  const double linear = n * var_s * meansq_r;
  const double quadratic = static_cast<double>(n) * n * mean_s * mean_s * var_r;
  const double var_h = (linear + quadratic) * t * t;
  if (!(var_h >= 1e-30)) throw NotEstimableError("no sensitivity: the generator variance vanishes");
  return {{1.0 / (2.0 * std::sqrt(static_cast<double>(m_repetitions) * var_h)), m_repetitions,
           SensitivityMethod::variance_bound},
          var_h,
          quadratic > linear ? ScalingRegime::heisenberg : ScalingRegime::standard_quantum_limit};
}

BusCoherence dephasing_reduced_coherence(int n, double x, double gamma, double t, DephasingLocation location,
                                         const Eigen::Vector2cd& system_qubit) {
  if (n < 1) throw std::invalid_argument("need at least one subsystem");
  if (!(gamma >= 0.0) || !(t >= 0.0)) throw std::invalid_argument("Gamma and t must be nonnegative");
  const double norm2 = system_qubit.squaredNorm();
  if (!(norm2 > 0.0)) throw std::invalid_argument("subsystem state must be nonzero");
  const double p_plus = std::norm(system_qubit(0)) / norm2;
  const double p_minus = std::norm(system_qubit(1)) / norm2;

  // Each subsystem with a_i = +-1 imprints exp(-i x a_i (a0 - b0) t); only its
  // populations enter, so subsystem dephasing cannot act on the bus.
  const Complex per_system = p_plus * std::exp(Complex(0.0, -2.0 * x * t)) + p_minus * std::exp(Complex(0.0, 2.0 * x * t));
  Complex off = 0.5 * std::pow(per_system, n);
  if (location == DephasingLocation::bus) off *= std::exp(-2.0 * gamma * t);

  BusCoherence out;
  out.rho << 0.5, off, std::conj(off), 0.5;
  out.coherence = 2.0 * off.real();
  return out;
}

}  // namespace metrosim
