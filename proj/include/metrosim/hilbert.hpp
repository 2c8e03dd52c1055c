#pragma once

// States and operators on the N-qubit Hilbert space.
//
// Basis convention: qubit 1 is the most significant bit of the basis index,
// so for N = 2 the ordering is |00>, |01>, |10>, |11> with |a1 a2>. Atom pairs
// (l, l + Np) rely on this ordering.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace metrosim {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

class PureState {
 public:
  /// Normalizes the amplitudes; throws std::invalid_argument on a length
  /// mismatch or a zero vector.
  PureState(int n_qubits, ComplexVector amplitudes);

  static PureState basis(int n_qubits, std::uint64_t index);

  int n_qubits() const noexcept { return n_qubits_; }
  std::size_t dim() const noexcept { return amplitudes_.size(); }
  std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
  const Complex& operator[](std::size_t i) const { return amplitudes_[i]; }

  double norm() const;

 private:
  int n_qubits_;
  ComplexVector amplitudes_;
};

Complex inner_product(std::span<const Complex> bra, std::span<const Complex> ket);
double squared_norm(std::span<const Complex> v);

struct SparseEntry {
  std::size_t row;
  std::size_t col;
  Complex value;
};

/// Sparse linear map in sorted coordinate form with a row-offset index.
///
/// Duplicate (row, col) pairs passed to from_triplets are summed, and
/// entries below 1e-16 in magnitude are pruned afterwards. The hermitian
/// flag is computed on construction (A = A^dagger within 1e-14).
class SparseOperator {
 public:
  SparseOperator() = default;

  static SparseOperator from_triplets(std::size_t dim, std::vector<SparseEntry> entries);
  static SparseOperator identity(std::size_t dim);
  static SparseOperator zero(std::size_t dim);
  static SparseOperator from_dense(const Eigen::MatrixXcd& m);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  bool hermitian() const noexcept { return hermitian_; }
  std::span<const SparseEntry> entries() const noexcept { return entries_; }

  /// out = A * in. `out` must not alias `in`.
  void apply(std::span<const Complex> in, std::span<Complex> out) const;
  ComplexVector apply(std::span<const Complex> in) const;

  SparseOperator adjoint() const;
  SparseOperator scaled(Complex factor) const;

  Eigen::MatrixXcd to_dense() const;
  Eigen::SparseMatrix<Complex> to_eigen() const;

  friend SparseOperator operator*(const SparseOperator& a, const SparseOperator& b);
  friend SparseOperator operator+(const SparseOperator& a, const SparseOperator& b);
  friend SparseOperator operator-(const SparseOperator& a, const SparseOperator& b);

 private:
  std::size_t dim_ = 0;
  std::vector<SparseEntry> entries_;
  std::vector<std::size_t> row_offsets_;
  bool hermitian_ = true;
};

/// Largest absolute row sum (infinity norm).
double max_row_sum(const SparseOperator& a);

enum class SiteOp { lower, raise, pauli_z };

/// sigma_-, sigma_+ or sigma_z on `site` (1-based) tensored with identity.
SparseOperator build_site_operator(SiteOp kind, int site, int n_qubits);

/// J_-(x) = sum_{i<=N/2} [(1+x) sigma_-^(i) + (1-x) sigma_-^(i+N/2)].
SparseOperator build_collective_lowering(double x, int n_qubits);
/// J_+(x) = J_-(x)^dagger.
SparseOperator build_collective_raising(double x, int n_qubits);
/// J_z = (1/2) sum_i (|1><1| - |0><0|)_i, so that [J_z, J_-] = -J_- with sigma_- = |0><1|.
/// This is -(1/2) sum_i sigma_z^(i) in the site pauli_z convention (|0> -> +1).
SparseOperator build_collective_jz(int n_qubits);
/// d J_-(x) / dx = sum_i [sigma_-^(i) - sigma_-^(i+N/2)].
SparseOperator build_collective_lowering_derivative(int n_qubits);

/// Coefficients of |t->, |s>, |t0>, |t+> for one atom pair.
struct PairCoefficients {
  Complex a;
  Complex b;
  Complex c;
  Complex d;

  double squared_norm() const;
  /// Throws std::invalid_argument unless normalized within 1e-12.
  void require_normalized() const;

  /// (|t-> + |s>)/sqrt(2), annihilated by J_-(0).
  static PairCoefficients dark();
  /// Amplitudes in the pair basis |00>, |01>, |10>, |11>.
  Eigen::Vector4cd amplitudes() const;
};

/// Product of identical pair states; pair l occupies qubits (l, l + n_pairs).
PureState pair_product_state(const PairCoefficients& coeffs, int n_pairs);

/// <psi|A|psi>; throws std::invalid_argument on dimension mismatch.
Complex expectation(const SparseOperator& a, const PureState& psi);
/// <A^2> - <A>^2.
Complex variance(const SparseOperator& a, const PureState& psi);

}  // namespace metrosim
