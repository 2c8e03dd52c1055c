#pragma once

// Exactly solvable models: N subsystems coupled to a bus by H = x sum_i S_i (x) R
// with no free evolution, and its qubit version under phase-flip noise.

#include <Eigen/Dense>

#include "metrosim/qpe.hpp"

namespace metrosim {

struct PureInteractionModel {
  int n_systems = 1;
  double s_eigenvalue = 1.0;  // S_i |s> = s |s>, same for every subsystem
  double r0 = 1.0;            // bus starts in (|r0> + |r1>)/sqrt(2)
  double r1 = -1.0;
  double x = 0.0;
  double t = 1.0;
};

struct PureInteractionResult {
  double mean_a;  // A = |r0><r1| + |r1><r0|
  double var_a;
  double delta_x;
};

/// <A> = cos(x N s (r0 - r1) t), <dA^2> = sin^2(...), delta x = 1/(sqrt(M) N |s| |r0 - r1| t).
/// Throws NotEstimableError if s = 0 or r0 = r1.
PureInteractionResult pure_interaction_sensitivity(const PureInteractionModel& model, int m_repetitions);

enum class ScalingRegime { standard_quantum_limit, heisenberg };

struct CommutingQfi {
  SensitivityResult result;
  double generator_variance;  // <dh^2>
  ScalingRegime dominant;     // which of the N and N^2 terms is larger
};

/// <dh^2> = (N var_S <R^2> + N^2 <S>^2 var_R) t^2 for h = t sum_i S_i (x) R on a product state.
CommutingQfi commuting_qfi(int n, double mean_s, double var_s, double meansq_r, double var_r, double t,
                           int m_repetitions);

enum class DephasingLocation { systems, bus };

struct BusCoherence {
  Eigen::Matrix2cd rho;  // reduced bus state in the sigma_z basis (|+> = +1 first)
  double coherence;      // 2 Re rho_{+-} = <sigma_x>, equal to 1 at t = 0
};

/// H = x sum_i sigma_z^(i) sigma_z^(0) with phase flips X -> Gamma (sigma_z X sigma_z - X) on
/// every subsystem qubit or on the bus qubit. Subsystems start in `system_qubit`
/// (default the +1 eigenstate), the bus in (|+> + |->)/sqrt(2).
BusCoherence dephasing_reduced_coherence(int n, double x, double gamma, double t, DephasingLocation location,
                                         const Eigen::Vector2cd& system_qubit = Eigen::Vector2cd(1.0, 0.0));

}  // namespace metrosim
