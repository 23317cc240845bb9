#pragma once

// State and process tomography, truth tables, and fringe fitting.
//
// Qubit setting labels, in canonical order (index 0..5):
//   momentum      0  1  +  -  i  -i
//   polarization  H  V  D  A  R  L
// Index k is the (+/-) eigenstate of Pauli axis Z, X, Y for k/2 = 0, 1, 2.

#include <array>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "swapsim/csv.hpp"
#include "swapsim/devices.hpp"
#include "swapsim/numerics.hpp"
#include "swapsim/rng.hpp"

namespace swapsim {

enum class Subsystem { POLARIZATION, MOMENTUM };

inline constexpr std::array<std::string_view, 6> kMomentumLabels = {"0", "1", "+", "-", "i", "-i"};
inline constexpr std::array<std::string_view, 6> kPolarizationLabels = {"H", "V", "D", "A", "R", "L"};

struct MeasurementSetting {
  Subsystem subsystem = Subsystem::MOMENTUM;
  int index = 0;

  std::string_view label() const {
    return subsystem == Subsystem::MOMENTUM ? kMomentumLabels.at(static_cast<std::size_t>(index))
                                            : kPolarizationLabels.at(static_cast<std::size_t>(index));
  }
};

/// Parses a setting label; the Unicode minus (U+2212) is accepted for "-".
inline std::optional<MeasurementSetting> setting_from_label(std::string_view s) {
  std::string ascii(s);
  for (auto p = ascii.find("\xE2\x88\x92"); p != std::string::npos; p = ascii.find("\xE2\x88\x92")) ascii.replace(p, 3, "-");
  for (int k = 0; k < 6; ++k) {
    if (kMomentumLabels[static_cast<std::size_t>(k)] == ascii) return MeasurementSetting{Subsystem::MOMENTUM, k};
    if (kPolarizationLabels[static_cast<std::size_t>(k)] == ascii) return MeasurementSetting{Subsystem::POLARIZATION, k};
  }
  return std::nullopt;
}

/// Bloch state of setting index k.
inline Vector setting_state(int k) {
  const double r = 1.0 / std::sqrt(2.0);
  Vector v(2);
  switch (k) {
    case 0: v << 1.0, 0.0; break;
    case 1: v << 0.0, 1.0; break;
    case 2: v << r, r; break;
    case 3: v << r, -r; break;
    case 4: v << r, cplx(0.0, r); break;
    case 5: v << r, cplx(0.0, -r); break;
    default: throw DimensionError("setting_state: index must be 0..5");
  }
  return v;
}

inline Matrix setting_projector(int k) {
  const Vector v = setting_state(k);
  return v * v.adjoint();
}

/// The analyzer as a filter channel on the qubit. Momentum settings use an
/// MZI projector; polarization uses a polarizer, preceded by a quarter-wave
/// plate at 0 for R and L.
inline QuantumChannel analyzer_channel(const MeasurementSetting& s, double extinction_db = kInf) {
  if (s.subsystem == Subsystem::MOMENTUM) {
    static constexpr MomentumSetting order[6] = {MomentumSetting::T,     MomentumSetting::B,      MomentumSetting::PLUS,
                                                 MomentumSetting::MINUS, MomentumSetting::PLUS_I, MomentumSetting::MINUS_I};
    return mzi_projector(order[s.index], extinction_db);
  }
  static constexpr double angle[6] = {0.0, kPi / 2, kPi / 4, -kPi / 4, kPi / 4, -kPi / 4};
  const auto pol = polarizer(angle[s.index], extinction_db);
  if (s.index < 4) return pol;
  return then(QuantumChannel::unitary(waveplate_jones(Retarder::QWP, 0.0)), pol);
}

// ---------------------------------------------------------------------------
// count records

struct CountEntry {
  std::string q1;
  std::string q2;  // empty for one-qubit records
  std::int64_t counts = 0;
  double integration_time_s = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::string format_number(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw ConfigError(std::string("count record: bad ") + what + " '" + s + "'");
  return v;
}

}  // namespace detail

struct CountRecord {
  std::vector<CountEntry> entries;

  static constexpr std::array<std::string_view, 5> kColumns = {"setting_label_q1", "setting_label_q2", "counts",
                                                               "integration_time_s", "seed"};

  std::string to_csv() const {
    std::vector<csv::Row> rows;
    rows.emplace_back(kColumns.begin(), kColumns.end());
    for (const auto& e : entries)
      rows.push_back({e.q1, e.q2, std::to_string(e.counts), detail::format_number(e.integration_time_s), std::to_string(e.seed)});
    return csv::write(rows);
  }

  static CountRecord from_csv(std::string_view text) {
    const auto rows = csv::parse(text);
    if (rows.empty() || rows[0] != csv::Row(kColumns.begin(), kColumns.end()))
      throw ConfigError("count record: missing or wrong header");
    CountRecord rec;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (r.size() != kColumns.size()) throw ConfigError("count record: row " + std::to_string(i) + " has wrong width");
      CountEntry e;
      e.q1 = r[0];
      e.q2 = r[1];
      e.counts = detail::parse_number<std::int64_t>(r[2], "counts");
      e.integration_time_s = detail::parse_number<double>(r[3], "integration time");
      e.seed = detail::parse_number<std::uint64_t>(r[4], "seed");
      if (e.counts < 0) throw ConfigError("count record: negative counts");
      rec.entries.push_back(std::move(e));
    }
    return rec;
  }
};

using Frequencies1q = std::array<double, 6>;
using Frequencies2q = std::array<std::array<double, 6>, 6>;

// ---------------------------------------------------------------------------
// state tomography

/// Stokes inversion followed by physical projection.
inline DensityMatrix state_tomo_1q(const Frequencies1q& n) {
  const Matrix sigma[3] = {pauli_z(), pauli_x(), pauli_y()};
  Matrix rho = identity(2);
  for (int axis = 0; axis < 3; ++axis) {
    const double p = n[static_cast<std::size_t>(2 * axis)], m = n[static_cast<std::size_t>(2 * axis + 1)];
    if (p < 0.0 || m < 0.0) throw EstimationError("state_tomo_1q: negative counts");
    if (!(p + m > 0.0)) throw EstimationError("state_tomo_1q: antipodal setting pair has zero counts");
    rho += ((p - m) / (p + m)) * sigma[axis];
  }
  return project_to_physical(0.5 * rho);
}

/// Linear inversion over the 6x6 local grid followed by physical projection.
/// Qubit 1 is the more significant factor.
inline DensityMatrix state_tomo_2q(const Frequencies2q& n) {
  const Matrix sigma[4] = {pauli_i(), pauli_z(), pauli_x(), pauli_y()};  // slot 0 = I, then axis + 1
  // e[a][b]: <sigma_a (x) sigma_b>, each entry averaged over the settings that determine it.
  double e[4][4] = {};
  int hits[4][4] = {};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double c[2][2];
      double total = 0.0;
      for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t) {
          c[s][t] = n[static_cast<std::size_t>(2 * a + s)][static_cast<std::size_t>(2 * b + t)];
          if (c[s][t] < 0.0) throw EstimationError("state_tomo_2q: negative counts");
          total += c[s][t];
        }
      if (!(total > 0.0)) throw EstimationError("state_tomo_2q: setting block has zero counts");
      e[a + 1][b + 1] += (c[0][0] - c[0][1] - c[1][0] + c[1][1]) / total;
      e[a + 1][0] += (c[0][0] + c[0][1] - c[1][0] - c[1][1]) / total;
      e[0][b + 1] += (c[0][0] - c[0][1] + c[1][0] - c[1][1]) / total;
      ++hits[a + 1][b + 1];
      ++hits[a + 1][0];
      ++hits[0][b + 1];
    }
  Matrix rho = kron(identity(2), identity(2));
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      if (hits[a][b]) rho += (e[a][b] / hits[a][b]) * kron(sigma[a], sigma[b]);
  return project_to_physical(0.25 * rho);
}

/// Exact (infinite-shot) frequencies of a one-qubit state.
inline Frequencies1q exact_frequencies_1q(const DensityMatrix& rho) {
  if (rho.dim() != 2) throw DimensionError("exact_frequencies_1q: state must be a qubit");
  Frequencies1q f{};
  for (int k = 0; k < 6; ++k) f[static_cast<std::size_t>(k)] = (setting_projector(k) * rho.matrix()).trace().real();
  return f;
}

inline Frequencies2q exact_frequencies_2q(const DensityMatrix& rho) {
  if (rho.dim() != 4) throw DimensionError("exact_frequencies_2q: state must be two qubits");
  Frequencies2q f{};
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      f[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
          std::max(0.0, (kron(setting_projector(a), setting_projector(b)) * rho.matrix()).trace().real());
  return f;
}

namespace detail {

inline int setting_index(const std::string& label) {
  const auto s = setting_from_label(label);
  if (!s) throw ConfigError("count record: unknown setting label '" + label + "'");
  return s->index;
}

}  // namespace detail

inline DensityMatrix state_tomo_1q(const CountRecord& rec) {
  Frequencies1q n{};
  for (const auto& e : rec.entries) {
    if (!e.q2.empty()) throw EstimationError("state_tomo_1q: record has a second-qubit label");
    n[static_cast<std::size_t>(detail::setting_index(e.q1))] += static_cast<double>(e.counts);
  }
  return state_tomo_1q(n);
}

inline DensityMatrix state_tomo_2q(const CountRecord& rec) {
  Frequencies2q n{};
  bool seen[6][6] = {};
  for (const auto& e : rec.entries) {
    const int a = detail::setting_index(e.q1), b = detail::setting_index(e.q2);
    n[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] += static_cast<double>(e.counts);
    seen[a][b] = true;
  }
  for (const auto& row : seen)
    for (bool s : row)
      if (!s) throw EstimationError("state_tomo_2q: incomplete 6x6 setting grid");
  return state_tomo_2q(n);
}

// ---------------------------------------------------------------------------
// process tomography

/// One-qubit inputs |0>, |1>, |+>, |+i>; two-qubit inputs are their 16 products.
inline std::vector<DensityMatrix> standard_process_inputs(int n_qubits) {
  static constexpr int single[4] = {0, 1, 2, 4};
  std::vector<DensityMatrix> out;
  if (n_qubits == 1) {
    for (int k : single) out.push_back(DensityMatrix::trusted(setting_projector(k)));
  } else if (n_qubits == 2) {
    for (int a : single)
      for (int b : single) out.push_back(DensityMatrix::trusted(kron(setting_projector(a), setting_projector(b))));
  } else {
    throw DimensionError("standard_process_inputs: only 1 or 2 qubits are supported");
  }
  return out;
}

/// Least-squares chi from input/output pairs:
/// eps(rho_j) = sum_mn chi_mn E_m rho_j E_n^dag, then Hermitize, clip to PSD
/// and normalize to unit trace. The design matrix depends only on the inputs,
/// so its factorization is kept for repeated reconstructions.
class ProcessTomography {
 public:
  ProcessTomography(std::vector<DensityMatrix> inputs, int n_qubits)
      : n_(n_qubits), basis_(n_qubits), inputs_(std::move(inputs)) {
    const int d = basis_.dim(), nb = basis_.size();
    if (inputs_.empty()) throw EstimationError("process_tomo: no input states");
    Matrix a(static_cast<Eigen::Index>(inputs_.size()) * d * d, nb * nb);
    for (std::size_t j = 0; j < inputs_.size(); ++j) {
      if (inputs_[j].dim() != d) throw DimensionError("process_tomo: state dimension mismatch");
      const auto r0 = static_cast<Eigen::Index>(j) * d * d;
      for (int m = 0; m < nb; ++m)
        for (int n = 0; n < nb; ++n) {
          const Matrix t = basis_[m] * inputs_[j].matrix() * basis_[n].adjoint();
          a.col(m * nb + n).segment(r0, d * d) = t.reshaped();
        }
    }
    qr_.compute(a);
    if (qr_.rank() < nb * nb) throw EstimationError("process_tomo: input states are not linearly independent");
  }

  int n_qubits() const { return n_; }
  const std::vector<DensityMatrix>& inputs() const { return inputs_; }

  ProcessMatrix reconstruct(const std::vector<DensityMatrix>& outputs) const {
    const int d = basis_.dim(), nb = basis_.size();
    if (outputs.size() != inputs_.size()) throw EstimationError("process_tomo: inputs and outputs differ in length");
    Vector y(static_cast<Eigen::Index>(outputs.size()) * d * d);
    for (std::size_t j = 0; j < outputs.size(); ++j) {
      if (outputs[j].dim() != d) throw DimensionError("process_tomo: state dimension mismatch");
      y.segment(static_cast<Eigen::Index>(j) * d * d, d * d) = outputs[j].matrix().reshaped();
    }
    const Vector x = qr_.solve(y);
    Matrix chi(nb, nb);
    for (int m = 0; m < nb; ++m)
      for (int n = 0; n < nb; ++n) chi(m, n) = x(m * nb + n);

    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(chi));
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    if (!(ev.sum() > 0.0)) throw EstimationError("process_tomo: reconstructed chi has no positive part");
    Matrix clipped = es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    clipped = hermitize(clipped) / ev.sum();
    return ProcessMatrix(n_, clipped);
  }

 private:
  int n_;
  PauliBasis basis_;
  std::vector<DensityMatrix> inputs_;
  Eigen::ColPivHouseholderQR<Matrix> qr_;
};

inline ProcessMatrix process_tomo(const std::vector<DensityMatrix>& inputs, const std::vector<DensityMatrix>& outputs,
                                  int n_qubits) {
  return ProcessTomography(inputs, n_qubits).reconstruct(outputs);
}

/// Tr(chi chi_i) / (Tr chi Tr chi_i).
inline double process_fidelity(const ProcessMatrix& chi, const ProcessMatrix& chi_ideal) {
  if (chi.n_qubits() != chi_ideal.n_qubits()) throw DimensionError("process_fidelity: qubit count mismatch");
  const double t = chi.trace() * chi_ideal.trace();
  if (std::abs(t) <= tol::kVacuum) throw EstimationError("process_fidelity: zero trace");
  return (chi.chi() * chi_ideal.chi()).trace().real() / t;
}

/// Tr(chi^2) / Tr(chi)^2.
inline double process_purity(const ProcessMatrix& chi) {
  const double t = chi.trace();
  if (std::abs(t) <= tol::kVacuum) throw EstimationError("process_purity: zero trace");
  return (chi.chi() * chi.chi()).trace().real() / (t * t);
}

/// Uhlmann fidelity between the two chi matrices read as density matrices.
/// Equals process_fidelity when either process is unitary.
inline double process_state_fidelity(const ProcessMatrix& chi, const ProcessMatrix& chi_ideal) {
  if (chi.n_qubits() != chi_ideal.n_qubits()) throw DimensionError("process_state_fidelity: qubit count mismatch");
  return uhlmann_fidelity(DensityMatrix::trusted(chi.chi() / chi.trace()),
                          DensityMatrix::trusted(chi_ideal.chi() / chi_ideal.trace()));
}

/// Random CPTP map on n qubits with `rank` Kraus operators: a Gaussian
/// isometry from Stinespring dilation.
inline QuantumChannel random_cptp(int n_qubits, int rank, Rng& rng) {
  const int d = 1 << n_qubits;
  Matrix g(rank * d, d);
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = cplx(rng.normal(), rng.normal());
  const Eigen::SelfAdjointEigenSolver<Matrix> es(g.adjoint() * g);
  const Matrix inv_sqrt =
      es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  const Matrix v = g * inv_sqrt;
  std::vector<Matrix> ks;
  for (int k = 0; k < rank; ++k) ks.push_back(v.block(k * d, 0, d, d));
  return QuantumChannel(d, d, std::move(ks));
}

// ---------------------------------------------------------------------------
// truth tables

/// Rows are outputs |TH>..|BV>, columns are inputs. Columns sum to at most 1.
class TruthTable {
 public:
  explicit TruthTable(Eigen::Matrix4d m) : m_(m) {
    if (m_.minCoeff() < -1e-12 || m_.maxCoeff() > 1.0 + 1e-12) throw PhysicalityError("TruthTable: entries must lie in [0, 1]");
    if (m_.colwise().sum().maxCoeff() > 1.0 + 1e-9) throw PhysicalityError("TruthTable: column sum exceeds 1");
  }

  const Eigen::Matrix4d& matrix() const { return m_; }

  bool is_normalized(double tol = 1e-9) const {
    return ((m_.colwise().sum().array() - 1.0).abs() <= tol).all();
  }

  TruthTable column_normalized() const {
    Eigen::Matrix4d n = m_;
    for (int j = 0; j < 4; ++j) {
      const double s = n.col(j).sum();
      if (!(s > 0.0)) throw EstimationError("TruthTable: column " + std::to_string(j) + " has no counts");
      n.col(j) /= s;
    }
    return TruthTable(n);
  }

  /// Output relabeling by X (x) X: row i -> i ^ 3.
  TruthTable relabeled() const {
    Eigen::Matrix4d r;
    for (int i = 0; i < 4; ++i) r.row(i ^ 3) = m_.row(i);
    return TruthTable(r);
  }

 private:
  Eigen::Matrix4d m_;
};

/// Output-basis probabilities of a dim-4 channel for each basis input.
inline TruthTable truth_table_of(const QuantumChannel& ch) {
  if (ch.dim_in() != 4 || ch.dim_out() != 4) throw DimensionError("truth_table_of: channel must act on dim 4");
  Eigen::Matrix4d m;
  for (int j = 0; j < 4; ++j) {
    const auto out = apply_channel(ch, DensityMatrix::from_pure(PureState::basis(4, j)));
    for (int i = 0; i < 4; ++i) m(i, j) = std::max(0.0, out.matrix()(i, i).real());
  }
  return TruthTable(m);
}

inline TruthTable ideal_truth_table(LogicalFrame frame = LogicalFrame::RAW) {
  const auto t = truth_table_of(QuantumChannel::unitary(ideal_swap_operator()));
  return frame == LogicalFrame::RAW ? t : t.relabeled();
}

/// Tr(M_exp M_ideal^T) / Tr(M_ideal M_ideal^T); the denominator is 4 for
/// permutation tables.
inline double truth_table_fidelity(const TruthTable& m_exp, const TruthTable& m_ideal) {
  if (!m_exp.is_normalized()) throw EstimationError("truth_table_fidelity: measured columns are not normalized");
  const double den = (m_ideal.matrix() * m_ideal.matrix().transpose()).trace();
  if (!(den > 0.0)) throw EstimationError("truth_table_fidelity: ideal table is zero");
  return (m_exp.matrix() * m_ideal.matrix().transpose()).trace() / den;
}

// ---------------------------------------------------------------------------
// fringe fitting

struct FringeFit {
  double visibility = 0.0;
  double visibility_subtracted = 0.0;
  double visibility_stderr = 0.0;
  double phase_offset = 0.0;  // delta
  double amplitude = 0.0;     // A
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Fits C(phi) = A (1 + V cos(phi + delta)) by iteratively reweighted linear
/// least squares on [1, cos phi, sin phi] with Poisson weights 1 / C_model.
/// `background` is the accidental count per bin, removed for V_subtracted.
inline FringeFit fringe_fit(const std::vector<double>& phi, const std::vector<double>& counts, double background = 0.0) {
  const std::size_t n = phi.size();
  if (n < 5 || counts.size() != n) throw EstimationError("fringe_fit: need at least 5 (phase, counts) points");
  const double span = *std::max_element(phi.begin(), phi.end()) - *std::min_element(phi.begin(), phi.end());
  // Equally spaced samples with the endpoint dropped still cover a period.
  if (span * static_cast<double>(n) / static_cast<double>(n - 1) < 2.0 * kPi - 1e-9)
    throw EstimationError("fringe_fit: scan must span one period");
  const auto rows = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd a(rows, 3);
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double p = phi[static_cast<std::size_t>(i)];
    a(i, 0) = 1.0;
    a(i, 1) = std::cos(p);
    a(i, 2) = std::sin(p);
    y(i) = counts[static_cast<std::size_t>(i)];
    if (y(i) < 0.0) throw EstimationError("fringe_fit: negative counts");
  }
  const double peak = y.cwiseAbs().maxCoeff();
  FringeFit out;
  if (!(peak > 0.0)) throw EstimationError("fringe_fit: all counts are zero");

  Eigen::VectorXd w = Eigen::VectorXd::Ones(rows);
  numerics::LinearFit fit = numerics::weighted_least_squares(a, y, w);
  constexpr int kMaxIter = 50;
  for (int it = 1; it <= kMaxIter; ++it) {
    const Eigen::VectorXd model = (a * fit.coef).cwiseMax(1e-6 * peak);
    w = model.cwiseInverse();
    const auto next = numerics::weighted_least_squares(a, y, w);
    const double change = (next.coef - fit.coef).cwiseAbs().maxCoeff();
    fit = next;
    out.iterations = it;
    if (change <= 1e-12 * peak) {
      out.converged = true;
      break;
    }
  }

  const double c0 = fit.coef(0), cb = fit.coef(1), cs = fit.coef(2);
  const double r = std::hypot(cb, cs);
  out.amplitude = c0;
  out.phase_offset = std::atan2(-cs, cb);
  out.chi2 = fit.chi2;
  if (!(c0 > 0.0)) {
    out.converged = false;
    return out;
  }
  out.visibility = std::clamp(r / c0, 0.0, 1.0);
  out.visibility_subtracted = c0 > background ? std::clamp(r / (c0 - background), 0.0, 1.0) : 1.0;

  // Delta method on V = r / c0; reduced chi2 inflates the Poisson covariance.
  Eigen::Vector3d g;
  if (r > 0.0) g << -r / (c0 * c0), cb / (c0 * r), cs / (c0 * r);
  else g << 0.0, 1.0 / c0, 0.0;
  const double dof = static_cast<double>(n) - 3.0;
  const double scale = dof > 0.0 ? std::max(1.0, fit.chi2 / dof) : 1.0;
  out.visibility_stderr = std::sqrt(std::max(0.0, (g.transpose() * fit.covariance * g)(0, 0) * scale));
  return out;
}

}  // namespace swapsim
