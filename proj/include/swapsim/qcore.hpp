#pragma once

// Dense complex linear algebra for single-photon (channel ⊗ polarization)
// states, Kraus channels, Pauli operator bases and state-level metrics.
//
// Global basis contract for dim-4 single-photon states:
//   0 = |TH>, 1 = |TV>, 2 = |BH>, 3 = |BV>
// i.e. the spatial channel is the most significant qubit.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "swapsim/errors.hpp"

namespace swapsim {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

namespace tol {
inline constexpr double kNorm = 1e-12;
inline constexpr double kHermitian = 1e-10;
inline constexpr double kPsd = 1e-10;
inline constexpr double kTrace = 1e-10;
inline constexpr double kChannel = 1e-10;
inline constexpr double kVacuum = 1e-15;
}  // namespace tol

enum class Port : int { T = 0, B = 1 };
enum class Polarization : int { H = 0, V = 1 };

constexpr int mode_index(Port c, Polarization p) { return 2 * static_cast<int>(c) + static_cast<int>(p); }

namespace mode {
inline constexpr int TH = 0;
inline constexpr int TV = 1;
inline constexpr int BH = 2;
inline constexpr int BV = 3;
}  // namespace mode

// ---------------------------------------------------------------------------
// small matrix helpers

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline Matrix identity(int d) { return Matrix::Identity(d, d); }

inline Matrix pauli_i() { return identity(2); }
inline Matrix pauli_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline Matrix pauli_y() {
  Matrix m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}
inline Matrix pauli_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

/// Two-qubit SWAP on a 4-dim space.
inline Matrix swap_gate() {
  Matrix s = Matrix::Zero(4, 4);
  s(0, 0) = 1;
  s(1, 2) = 1;
  s(2, 1) = 1;
  s(3, 3) = 1;
  return s;
}

inline double hermitian_defect(const Matrix& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

inline Matrix hermitize(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline double real_trace(const Matrix& m) { return m.trace().real(); }

/// Eigenvalues (ascending) of a Hermitian matrix.
inline Eigen::VectorXd hermitian_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Principal square root of a PSD matrix. Eigenvalues in [-kPsd, 0) are
/// clipped to zero; anything more negative is rejected.
inline Matrix sqrt_psd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(m));
  Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol::kPsd * scale) throw PhysicalityError("sqrt_psd: matrix is not positive semidefinite");
    // round-off level eigenvalues are zero; their square roots would not be
    ev(i) = ev(i) <= 64.0 * std::numeric_limits<double>::epsilon() * scale ? 0.0 : std::sqrt(ev(i));
  }
  return es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// states

class PureState {
 public:
  explicit PureState(Vector amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.size() == 0) throw DimensionError("PureState: empty amplitude vector");
    if (std::abs(amps_.norm() - 1.0) > tol::kNorm) throw PhysicalityError("PureState: amplitudes are not normalized");
  }

  /// Normalizes the given amplitudes before construction.
  static PureState normalized(Vector amplitudes) {
    const double n = amplitudes.norm();
    if (n == 0.0) throw PhysicalityError("PureState: zero vector");
    return PureState(amplitudes / n);
  }

  static PureState basis(int dim, int index) {
    if (index < 0 || index >= dim) throw DimensionError("PureState::basis: index out of range");
    Vector v = Vector::Zero(dim);
    v(index) = 1.0;
    return PureState(std::move(v));
  }

  int dim() const { return static_cast<int>(amps_.size()); }
  const Vector& amplitudes() const { return amps_; }

 private:
  Vector amps_;
};

class DensityMatrix {
 public:
  /// Validates Hermiticity, positivity and 0 <= Tr <= 1 (a zero trace is a
  /// fully absorbed photon and is allowed; heralding rejects it).
  explicit DensityMatrix(Matrix entries) : m_(std::move(entries)) {
    if (m_.rows() == 0 || m_.rows() != m_.cols()) throw DimensionError("DensityMatrix: matrix must be square");
    if (hermitian_defect(m_) > tol::kHermitian) throw PhysicalityError("DensityMatrix: not Hermitian");
    m_ = hermitize(m_);
    const double tr = real_trace(m_);
    if (tr > 1.0 + tol::kTrace) throw PhysicalityError("DensityMatrix: trace exceeds one");
    if (tr < -tol::kTrace) throw PhysicalityError("DensityMatrix: negative trace");
    if (hermitian_eigenvalues(m_).minCoeff() < -tol::kPsd) throw PhysicalityError("DensityMatrix: negative eigenvalue");
  }

  /// Skips validation. For matrices that are PSD by construction
  /// (channel outputs, convex mixtures of valid states).
  static DensityMatrix trusted(Matrix entries) { return DensityMatrix(hermitize(entries), Trusted{}); }

  static DensityMatrix from_pure(const PureState& psi) {
    return trusted(psi.amplitudes() * psi.amplitudes().adjoint());
  }

  static DensityMatrix maximally_mixed(int dim) { return trusted(identity(dim) / static_cast<double>(dim)); }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const { return m_; }
  double trace() const { return real_trace(m_); }
  double purity() const {
    const double tr = trace();
    return real_trace(m_ * m_) / (tr * tr);
  }
  /// <psi|rho|psi>
  double expectation(const PureState& psi) const {
    return (psi.amplitudes().adjoint() * m_ * psi.amplitudes())(0, 0).real();
  }

 private:
  struct Trusted {};
  DensityMatrix(Matrix m, Trusted) : m_(std::move(m)) {}
  Matrix m_;
};

// ---------------------------------------------------------------------------
// channels

/// Finite Kraus representation of a completely positive, trace-nonincreasing map.
class QuantumChannel {
 public:
  QuantumChannel(int dim_in, int dim_out, std::vector<Matrix> kraus) : dim_in_(dim_in), dim_out_(dim_out) {
    if (dim_in <= 0 || dim_out <= 0) throw DimensionError("QuantumChannel: dimensions must be positive");
    for (auto& k : kraus) {
      if (k.rows() != dim_out || k.cols() != dim_in) throw DimensionError("QuantumChannel: Kraus operator has wrong shape");
      if (k.squaredNorm() > 1e-30) kraus_.push_back(std::move(k));
    }
    if (kraus_.empty()) kraus_.push_back(Matrix::Zero(dim_out, dim_in));
    const double top = hermitian_eigenvalues(effect()).maxCoeff();
    if (top > 1.0 + tol::kChannel) throw PhysicalityError("QuantumChannel: sum of K^dag K exceeds identity");
  }

  static QuantumChannel identity(int d) { return unitary(swapsim::identity(d)); }
  static QuantumChannel unitary(Matrix u) {
    const int r = static_cast<int>(u.rows());
    const int c = static_cast<int>(u.cols());
    return QuantumChannel(c, r, {std::move(u)});
  }
  /// Uniform amplitude damping to a power transmission t in [0, 1].
  static QuantumChannel attenuator(int d, double power_transmission) {
    if (power_transmission < 0.0 || power_transmission > 1.0)
      throw PhysicalityError("attenuator: transmission must lie in [0, 1]");
    return unitary(std::sqrt(power_transmission) * swapsim::identity(d));
  }

  int dim_in() const { return dim_in_; }
  int dim_out() const { return dim_out_; }
  const std::vector<Matrix>& kraus() const { return kraus_; }

  /// Sum of K^dag K.
  Matrix effect() const {
    Matrix e = Matrix::Zero(dim_in_, dim_in_);
    for (const auto& k : kraus_) e += k.adjoint() * k;
    return e;
  }

  bool is_trace_preserving(double eps = 1e-12) const {
    return (effect() - swapsim::identity(dim_in_)).cwiseAbs().maxCoeff() <= eps;
  }

 private:
  int dim_in_;
  int dim_out_;
  std::vector<Matrix> kraus_;
};

/// Sequential composition: `first` acts before `second`.
inline QuantumChannel then(const QuantumChannel& first, const QuantumChannel& second) {
  if (first.dim_out() != second.dim_in()) throw DimensionError("then: dimension mismatch");
  std::vector<Matrix> ks;
  ks.reserve(first.kraus().size() * second.kraus().size());
  for (const auto& b : second.kraus())
    for (const auto& a : first.kraus()) ks.push_back(b * a);
  return QuantumChannel(first.dim_in(), second.dim_out(), std::move(ks));
}

/// Composes a list of channels in propagation order.
inline QuantumChannel compose(const std::vector<QuantumChannel>& stages) {
  if (stages.empty()) throw DimensionError("compose: no stages");
  QuantumChannel out = stages.front();
  for (std::size_t i = 1; i < stages.size(); ++i) out = then(out, stages[i]);
  return out;
}

/// Convex mixture sum_i w_i * channel_i (weights must sum to at most one).
inline QuantumChannel mixture(const std::vector<std::pair<double, QuantumChannel>>& parts) {
  if (parts.empty()) throw DimensionError("mixture: no parts");
  std::vector<Matrix> ks;
  for (const auto& [w, ch] : parts) {
    if (w < 0.0) throw PhysicalityError("mixture: negative weight");
    if (ch.dim_in() != parts.front().second.dim_in() || ch.dim_out() != parts.front().second.dim_out())
      throw DimensionError("mixture: dimension mismatch");
    for (const auto& k : ch.kraus()) ks.push_back(std::sqrt(w) * k);
  }
  return QuantumChannel(parts.front().second.dim_in(), parts.front().second.dim_out(), std::move(ks));
}

// ---------------------------------------------------------------------------
// tensor products (left operand is the most significant subsystem)

inline PureState tensor(const PureState& a, const PureState& b) {
  return PureState::normalized(kron(a.amplitudes(), b.amplitudes()));
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  return DensityMatrix::trusted(kron(a.matrix(), b.matrix()));
}

inline Matrix tensor(const Matrix& a, const Matrix& b) { return kron(a, b); }

inline QuantumChannel tensor(const QuantumChannel& a, const QuantumChannel& b) {
  std::vector<Matrix> ks;
  ks.reserve(a.kraus().size() * b.kraus().size());
  for (const auto& ka : a.kraus())
    for (const auto& kb : b.kraus()) ks.push_back(kron(ka, kb));
  return QuantumChannel(a.dim_in() * b.dim_in(), a.dim_out() * b.dim_out(), std::move(ks));
}

// ---------------------------------------------------------------------------
// channel application and heralding

/// sum_K K rho K^dag; the trace of the result is the survival probability.
inline DensityMatrix apply_channel(const QuantumChannel& ch, const DensityMatrix& rho) {
  if (ch.dim_in() != rho.dim()) throw DimensionError("apply_channel: channel input dimension does not match state");
  Matrix out = Matrix::Zero(ch.dim_out(), ch.dim_out());
  for (const auto& k : ch.kraus()) out.noalias() += k * rho.matrix() * k.adjoint();
  return DensityMatrix::trusted(out);
}

struct Heralded {
  DensityMatrix state;
  double probability;
};

/// Post-selects on photon survival: returns (rho / Tr rho, Tr rho).
inline Heralded heralded_normalize(const DensityMatrix& rho) {
  const double p = rho.trace();
  if (p <= tol::kVacuum) throw VacuumError("heralded_normalize: photon lost (trace is zero)");
  return {DensityMatrix::trusted(rho.matrix() / p), p};
}

// ---------------------------------------------------------------------------
// metrics

/// (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2. Both arguments are normalized to
/// unit trace first, so heralded and unheralded states compare equally.
inline double uhlmann_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw DimensionError("uhlmann_fidelity: dimension mismatch");
  const double tr = rho.trace();
  const double ts = sigma.trace();
  if (tr <= tol::kVacuum || ts <= tol::kVacuum) throw VacuumError("uhlmann_fidelity: zero-trace argument");
  const Matrix a = rho.matrix() / tr;
  const Matrix b = sigma.matrix() / ts;
  // Tr sqrt(sqrt(a) b sqrt(a)) is the trace norm of sqrt(a) sqrt(b); singular
  // values avoid the square-root blow-up of round-off eigenvalues near zero.
  const Eigen::JacobiSVD<Matrix> svd(sqrt_psd(a) * sqrt_psd(b));
  const double s = svd.singularValues().sum();
  return std::clamp(s * s, 0.0, 1.0);
}

/// Nearest physical state by eigenvalue redistribution: negative eigenvalues
/// are zeroed and their deficit is spread uniformly over the remaining ones,
/// starting from the smallest (fast maximum-likelihood projection).
inline DensityMatrix project_to_physical(const Matrix& h) {
  if (h.rows() == 0 || h.rows() != h.cols()) throw DimensionError("project_to_physical: matrix must be square");
  if (hermitian_defect(h) > 1e-8) throw PhysicalityError("project_to_physical: input is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(h));
  Eigen::VectorXd ev = es.eigenvalues();  // ascending
  const double total = ev.sum();
  if (ev.maxCoeff() <= 0.0 || total <= 0.0) throw PhysicalityError("project_to_physical: spectrum has no positive part");
  ev /= total;

  const Eigen::Index d = ev.size();
  // Walk from the smallest eigenvalue upwards; `remaining` counts the
  // eigenvalues that stay positive.
  double deficit = 0.0;
  Eigen::Index first_kept = 0;
  while (first_kept < d) {
    const double remaining = static_cast<double>(d - first_kept);
    if (ev(first_kept) + deficit / remaining >= 0.0) break;
    deficit += ev(first_kept);
    ev(first_kept) = 0.0;
    ++first_kept;
  }
  const double share = deficit / static_cast<double>(d - first_kept);
  for (Eigen::Index i = first_kept; i < d; ++i) ev(i) += share;

  Matrix rho = es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  rho = hermitize(rho);
  rho /= real_trace(rho);
  return DensityMatrix::trusted(rho);
}

// ---------------------------------------------------------------------------
// Pauli bases

/// {I, X, Y, Z}^{(x) n} in lexicographic order, first factor most significant.
class PauliBasis {
 public:
  explicit PauliBasis(int n_qubits) : n_(n_qubits) {
    if (n_qubits != 1 && n_qubits != 2) throw DimensionError("PauliBasis: only 1 or 2 qubits are supported");
    const Matrix single[4] = {pauli_i(), pauli_x(), pauli_y(), pauli_z()};
    const char names[4] = {'I', 'X', 'Y', 'Z'};
    if (n_ == 1) {
      for (int a = 0; a < 4; ++a) {
        ops_.push_back(single[a]);
        labels_.emplace_back(1, names[a]);
      }
    } else {
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          ops_.push_back(kron(single[a], single[b]));
          labels_.push_back(std::string{names[a], names[b]});
        }
    }
  }

  int n_qubits() const { return n_; }
  int dim() const { return 1 << n_; }
  int size() const { return static_cast<int>(ops_.size()); }
  const Matrix& operator[](int m) const { return ops_.at(static_cast<std::size_t>(m)); }
  const std::vector<Matrix>& operators() const { return ops_; }
  const std::string& label(int m) const { return labels_.at(static_cast<std::size_t>(m)); }
  int index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label) return static_cast<int>(i);
    throw DimensionError("PauliBasis: unknown label " + label);
  }

 private:
  int n_;
  std::vector<Matrix> ops_;
  std::vector<std::string> labels_;
};

/// c_m = Tr(E_m rho) / 2^n, so that rho = sum_m c_m E_m.
inline std::vector<double> pauli_coefficients(const DensityMatrix& rho, const PauliBasis& basis) {
  if (rho.dim() != basis.dim()) throw DimensionError("pauli_coefficients: dimension mismatch");
  std::vector<double> c;
  c.reserve(static_cast<std::size_t>(basis.size()));
  for (const auto& e : basis.operators()) c.push_back((e * rho.matrix()).trace().real() / basis.dim());
  return c;
}

inline Matrix from_pauli_coefficients(const std::vector<double>& c, const PauliBasis& basis) {
  if (static_cast<int>(c.size()) != basis.size()) throw DimensionError("from_pauli_coefficients: wrong length");
  Matrix m = Matrix::Zero(basis.dim(), basis.dim());
  for (int i = 0; i < basis.size(); ++i) m += c[static_cast<std::size_t>(i)] * basis[i];
  return m;
}

// ---------------------------------------------------------------------------
// process matrices

/// chi over the ordered Pauli basis: eps(rho) = sum_mn chi_mn E_m rho E_n^dag.
class ProcessMatrix {
 public:
  ProcessMatrix(int n_qubits, Matrix chi) : n_(n_qubits), chi_(std::move(chi)) {
    if (n_qubits != 1 && n_qubits != 2) throw DimensionError("ProcessMatrix: only 1 or 2 qubits are supported");
    const int d = 1 << (2 * n_qubits);
    if (chi_.rows() != d || chi_.cols() != d) throw DimensionError("ProcessMatrix: chi has wrong shape");
    if (hermitian_defect(chi_) > tol::kHermitian) throw PhysicalityError("ProcessMatrix: chi is not Hermitian");
    chi_ = hermitize(chi_);
  }

  int n_qubits() const { return n_; }
  const Matrix& chi() const { return chi_; }
  double trace() const { return real_trace(chi_); }

 private:
  int n_;
  Matrix chi_;
};

/// chi of the channel with the given Kraus operators, via their Pauli
/// expansions K = sum_m a_m E_m, chi = sum_K a a^dag.
inline ProcessMatrix chi_from_kraus(const std::vector<Matrix>& kraus, int n_qubits) {
  const PauliBasis basis(n_qubits);
  const int d = basis.dim();
  Matrix chi = Matrix::Zero(basis.size(), basis.size());
  for (const auto& k : kraus) {
    if (k.rows() != d || k.cols() != d) throw DimensionError("chi_from_kraus: Kraus operator has wrong shape");
    Vector a(basis.size());
    for (int m = 0; m < basis.size(); ++m) a(m) = (basis[m].adjoint() * k).trace() / static_cast<double>(d);
    chi += a * a.adjoint();
  }
  return ProcessMatrix(n_qubits, chi);
}

/// Applies a process matrix to a state.
inline Matrix apply_chi(const ProcessMatrix& chi, const Matrix& rho) {
  const PauliBasis basis(chi.n_qubits());
  Matrix out = Matrix::Zero(basis.dim(), basis.dim());
  for (int m = 0; m < basis.size(); ++m)
    for (int n = 0; n < basis.size(); ++n) {
      const cplx c = chi.chi()(m, n);
      if (std::abs(c) > 0.0) out += c * basis[m] * rho * basis[n].adjoint();
    }
  return out;
}

// ---------------------------------------------------------------------------
// partial traces on a bipartite space d_a x d_b (a most significant)

inline Matrix trace_out_second(const Matrix& m, int da, int db) {
  Matrix out = Matrix::Zero(da, da);
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < da; ++j)
      for (int k = 0; k < db; ++k) out(i, j) += m(i * db + k, j * db + k);
  return out;
}

inline Matrix trace_out_first(const Matrix& m, int da, int db) {
  Matrix out = Matrix::Zero(db, db);
  for (int i = 0; i < db; ++i)
    for (int j = 0; j < db; ++j)
      for (int k = 0; k < da; ++k) out(i, j) += m(k * db + i, k * db + j);
  return out;
}

}  // namespace swapsim
