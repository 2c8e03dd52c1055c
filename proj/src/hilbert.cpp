#include "metrosim/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace metrosim {

namespace {

constexpr double kPruneThreshold = 1e-16;
constexpr double kHermitianTolerance = 1e-14;

std::size_t checked_dim(int n_qubits) {
  if (n_qubits < 1 || n_qubits > 30) {
    throw std::invalid_argument("n_qubits must be in [1, 30], got " + std::to_string(n_qubits));
  }
  return std::size_t{1} << n_qubits;
}

// Bit position of `site` (1-based) in the basis index.
int bit_of(int site, int n_qubits) { return n_qubits - site; }

// Merge two sorted entry lists; equal within tolerance, absent entries count as zero.
bool is_hermitian(const std::vector<SparseEntry>& a, const std::vector<SparseEntry>& adj) {
  auto before = [](const SparseEntry& l, const SparseEntry& r) {
    return l.row != r.row ? l.row < r.row : l.col < r.col;
  };
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < adj.size()) {
    double diff = 0.0;
    if (j >= adj.size() || (i < a.size() && before(a[i], adj[j]))) {
      diff = std::abs(a[i++].value);
    } else if (i >= a.size() || before(adj[j], a[i])) {
      diff = std::abs(adj[j++].value);
    } else {
      diff = std::abs(a[i++].value - adj[j++].value);
    }
    if (diff > kHermitianTolerance) return false;
  }
  return true;
}

}  // namespace

PureState::PureState(int n_qubits, ComplexVector amplitudes)
    : n_qubits_(n_qubits), amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.size() != checked_dim(n_qubits)) {
    throw std::invalid_argument("amplitude vector length " + std::to_string(amplitudes_.size()) +
                                " does not match 2^" + std::to_string(n_qubits));
  }
  const double nrm = norm();
  if (!(nrm > 0.0) || !std::isfinite(nrm)) {
    throw std::invalid_argument("cannot normalize a zero or non-finite state");
  }
  for (auto& a : amplitudes_) a /= nrm;
}

PureState PureState::basis(int n_qubits, std::uint64_t index) {
  ComplexVector amps(checked_dim(n_qubits));
  if (index >= amps.size()) throw std::out_of_range("basis index out of range");
  amps[index] = 1.0;
  return PureState(n_qubits, std::move(amps));
}

double PureState::norm() const { return std::sqrt(squared_norm(amplitudes_)); }

Complex inner_product(std::span<const Complex> bra, std::span<const Complex> ket) {
  if (bra.size() != ket.size()) throw std::invalid_argument("inner product of unequal lengths");
  Complex acc = 0.0;
  for (std::size_t i = 0; i < bra.size(); ++i) acc += std::conj(bra[i]) * ket[i];
  return acc;
}

double squared_norm(std::span<const Complex> v) {
  double acc = 0.0;
  for (const auto& a : v) acc += std::norm(a);
  return acc;
}

SparseOperator SparseOperator::from_triplets(std::size_t dim, std::vector<SparseEntry> entries) {
  for (const auto& e : entries) {
    if (e.row >= dim || e.col >= dim) {
      throw std::out_of_range("sparse entry (" + std::to_string(e.row) + ", " +
                              std::to_string(e.col) + ") outside dimension " + std::to_string(dim));
    }
  }
  std::sort(entries.begin(), entries.end(), [](const SparseEntry& l, const SparseEntry& r) {
    return l.row != r.row ? l.row < r.row : l.col < r.col;
  });

  SparseOperator op;
  op.dim_ = dim;
  op.entries_.reserve(entries.size());
  for (const auto& e : entries) {
    if (!op.entries_.empty() && op.entries_.back().row == e.row && op.entries_.back().col == e.col) {
      op.entries_.back().value += e.value;
    } else {
      op.entries_.push_back(e);
    }
  }
  std::erase_if(op.entries_, [](const SparseEntry& e) { return std::abs(e.value) < kPruneThreshold; });

  op.row_offsets_.assign(dim + 1, 0);
  for (const auto& e : op.entries_) ++op.row_offsets_[e.row + 1];
  for (std::size_t r = 0; r < dim; ++r) op.row_offsets_[r + 1] += op.row_offsets_[r];

  op.hermitian_ = is_hermitian(op.entries_, op.adjoint().entries_);
  return op;
}

SparseOperator SparseOperator::identity(std::size_t dim) {
  std::vector<SparseEntry> entries;
  entries.reserve(dim);
  for (std::size_t i = 0; i < dim; ++i) entries.push_back({i, i, 1.0});
  return from_triplets(dim, std::move(entries));
}

SparseOperator SparseOperator::zero(std::size_t dim) { return from_triplets(dim, {}); }

SparseOperator SparseOperator::from_dense(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("dense operator must be square");
  std::vector<SparseEntry> entries;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (m(r, c) != Complex(0.0)) {
        entries.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(c), m(r, c)});
      }
    }
  }
  return from_triplets(static_cast<std::size_t>(m.rows()), std::move(entries));
}

void SparseOperator::apply(std::span<const Complex> in, std::span<Complex> out) const {
  if (in.size() != dim_ || out.size() != dim_) {
    throw std::invalid_argument("operator dimension " + std::to_string(dim_) +
                                " does not match vector length " + std::to_string(in.size()));
  }
  for (std::size_t r = 0; r < dim_; ++r) {
    Complex acc = 0.0;
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      acc += entries_[k].value * in[entries_[k].col];
    }
    out[r] = acc;
  }
}

ComplexVector SparseOperator::apply(std::span<const Complex> in) const {
  ComplexVector out(dim_);
  apply(in, out);
  return out;
}

SparseOperator SparseOperator::adjoint() const {
  std::vector<SparseEntry> entries;
  entries.reserve(entries_.size());
  for (const auto& e : entries_) entries.push_back({e.col, e.row, std::conj(e.value)});
  std::sort(entries.begin(), entries.end(), [](const SparseEntry& l, const SparseEntry& r) {
    return l.row != r.row ? l.row < r.row : l.col < r.col;
  });
  SparseOperator op;
  op.dim_ = dim_;
  op.entries_ = std::move(entries);
  op.row_offsets_.assign(dim_ + 1, 0);
  for (const auto& e : op.entries_) ++op.row_offsets_[e.row + 1];
  for (std::size_t r = 0; r < dim_; ++r) op.row_offsets_[r + 1] += op.row_offsets_[r];
  op.hermitian_ = hermitian_;
  return op;
}

SparseOperator SparseOperator::scaled(Complex factor) const {
  std::vector<SparseEntry> entries(entries_);
  for (auto& e : entries) e.value *= factor;
  return from_triplets(dim_, std::move(entries));
}

Eigen::MatrixXcd SparseOperator::to_dense() const {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
  for (const auto& e : entries_) m(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.value;
  return m;
}

Eigen::SparseMatrix<Complex> SparseOperator::to_eigen() const {
  std::vector<Eigen::Triplet<Complex>> trips;
  trips.reserve(entries_.size());
  for (const auto& e : entries_) {
    trips.emplace_back(static_cast<int>(e.row), static_cast<int>(e.col), e.value);
  }
  Eigen::SparseMatrix<Complex> m(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
  if (a.dim_ != b.dim_) throw std::invalid_argument("operator product of unequal dimensions");
  std::vector<SparseEntry> entries;
  for (const auto& ea : a.entries_) {
    for (std::size_t k = b.row_offsets_[ea.col]; k < b.row_offsets_[ea.col + 1]; ++k) {
      entries.push_back({ea.row, b.entries_[k].col, ea.value * b.entries_[k].value});
    }
  }
  return SparseOperator::from_triplets(a.dim_, std::move(entries));
}

SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
  if (a.dim_ != b.dim_) throw std::invalid_argument("operator sum of unequal dimensions");
  std::vector<SparseEntry> entries(a.entries_);
  entries.insert(entries.end(), b.entries_.begin(), b.entries_.end());
  return SparseOperator::from_triplets(a.dim_, std::move(entries));
}

SparseOperator operator-(const SparseOperator& a, const SparseOperator& b) { return a + b.scaled(-1.0); }

double max_row_sum(const SparseOperator& a) {
  std::vector<double> sums(a.dim(), 0.0);
  for (const auto& e : a.entries()) sums[e.row] += std::abs(e.value);
  return sums.empty() ? 0.0 : *std::max_element(sums.begin(), sums.end());
}

SparseOperator build_site_operator(SiteOp kind, int site, int n_qubits) {
  const std::size_t dim = checked_dim(n_qubits);
  if (site < 1 || site > n_qubits) {
    throw std::out_of_range("site " + std::to_string(site) + " outside [1, " + std::to_string(n_qubits) + "]");
  }
  const std::size_t mask = std::size_t{1} << bit_of(site, n_qubits);
  std::vector<SparseEntry> entries;
  entries.reserve(kind == SiteOp::pauli_z ? dim : dim / 2);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    const bool excited = (idx & mask) != 0;
    switch (kind) {
      case SiteOp::lower:  // |0><1|
        if (excited) entries.push_back({idx & ~mask, idx, 1.0});
        break;
      case SiteOp::raise:  // |1><0|
        if (!excited) entries.push_back({idx | mask, idx, 1.0});
        break;
      case SiteOp::pauli_z:  // |0> -> +1, |1> -> -1
        entries.push_back({idx, idx, excited ? -1.0 : 1.0});
        break;
    }
  }
  return SparseOperator::from_triplets(dim, std::move(entries));
}

namespace {

SparseOperator weighted_lowering(int n_qubits, double w_first, double w_second) {
  if (n_qubits < 2 || n_qubits % 2 != 0) {
    throw std::invalid_argument("collective operators need an even number of qubits, got " +
                                std::to_string(n_qubits));
  }
  const std::size_t dim = checked_dim(n_qubits);
  const int n_pairs = n_qubits / 2;
  std::vector<SparseEntry> entries;
  entries.reserve(static_cast<std::size_t>(n_qubits) * dim / 2);
  for (int site = 1; site <= n_qubits; ++site) {
    const double w = site <= n_pairs ? w_first : w_second;
    const std::size_t mask = std::size_t{1} << bit_of(site, n_qubits);
    for (std::size_t idx = 0; idx < dim; ++idx) {
      if (idx & mask) entries.push_back({idx & ~mask, idx, w});
    }
  }
  return SparseOperator::from_triplets(dim, std::move(entries));
}

}  // namespace

SparseOperator build_collective_lowering(double x, int n_qubits) {
  return weighted_lowering(n_qubits, 1.0 + x, 1.0 - x);
}

SparseOperator build_collective_raising(double x, int n_qubits) {
  return build_collective_lowering(x, n_qubits).adjoint();
}

SparseOperator build_collective_jz(int n_qubits) {
  const std::size_t dim = checked_dim(n_qubits);
  std::vector<SparseEntry> entries;
  entries.reserve(dim);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    const int excited = __builtin_popcountll(idx);
    entries.push_back({idx, idx, 0.5 * static_cast<double>(2 * excited - n_qubits)});
  }
  return SparseOperator::from_triplets(dim, std::move(entries));
}

SparseOperator build_collective_lowering_derivative(int n_qubits) { return weighted_lowering(n_qubits, 1.0, -1.0); }

double PairCoefficients::squared_norm() const {
  return std::norm(a) + std::norm(b) + std::norm(c) + std::norm(d);
}

void PairCoefficients::require_normalized() const {
  if (std::abs(squared_norm() - 1.0) > 1e-12) {
    throw std::invalid_argument("pair coefficients are not normalized: |a|^2+|b|^2+|c|^2+|d|^2 = " +
                                std::to_string(squared_norm()));
  }
}

PairCoefficients PairCoefficients::dark() {
  const double h = 1.0 / std::sqrt(2.0);
  return {h, h, 0.0, 0.0};
}

Eigen::Vector4cd PairCoefficients::amplitudes() const {
  const double h = 1.0 / std::sqrt(2.0);
  // |t-> = |00>, |s> = (|01>-|10>)/sqrt2, |t0> = (|01>+|10>)/sqrt2, |t+> = |11>
  return Eigen::Vector4cd(a, h * (c + b), h * (c - b), d);
}

PureState pair_product_state(const PairCoefficients& coeffs, int n_pairs) {
  if (n_pairs < 1) throw std::invalid_argument("n_pairs must be at least 1");
  coeffs.require_normalized();
  const int n_qubits = 2 * n_pairs;
  const std::size_t dim = checked_dim(n_qubits);
  const Eigen::Vector4cd pair = coeffs.amplitudes();
  ComplexVector amps(dim);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    Complex amp = 1.0;
    for (int l = 1; l <= n_pairs && amp != Complex(0.0); ++l) {
      const int first = static_cast<int>((idx >> bit_of(l, n_qubits)) & 1U);
      const int second = static_cast<int>((idx >> bit_of(l + n_pairs, n_qubits)) & 1U);
      amp *= pair(2 * first + second);
    }
    amps[idx] = amp;
  }
  return PureState(n_qubits, std::move(amps));
}

namespace {

void require_match(const SparseOperator& a, const PureState& psi) {
  if (a.dim() != psi.dim()) {
    throw std::invalid_argument("operator dimension " + std::to_string(a.dim()) +
                                " does not match state dimension " + std::to_string(psi.dim()));
  }
}

}  // namespace

Complex expectation(const SparseOperator& a, const PureState& psi) {
  require_match(a, psi);
  return inner_product(psi.amplitudes(), a.apply(psi.amplitudes()));
}

Complex variance(const SparseOperator& a, const PureState& psi) {
  require_match(a, psi);
  const ComplexVector a_psi = a.apply(psi.amplitudes());
  const ComplexVector adj_psi = a.adjoint().apply(psi.amplitudes());
  const Complex mean = inner_product(psi.amplitudes(), a_psi);
  return inner_product(adj_psi, a_psi) - mean * mean;
}

}  // namespace metrosim
