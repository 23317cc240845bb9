#pragma once

// Channel models of the on-chip and free-space optical components, and the
// PC-NOT / MC-NOT / PC-NOT SWAP chip.

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "swapsim/qcore.hpp"

namespace swapsim {

enum class ComponentKind { PCNOT, MCNOT, HWP, QWP, PHASE_V, POLARIZER, BS5050, MZI, FIBER, FACET, LOSS };

inline std::string_view kind_name(ComponentKind k) {
  switch (k) {
    case ComponentKind::PCNOT: return "pcnot";
    case ComponentKind::MCNOT: return "mcnot";
    case ComponentKind::HWP: return "hwp";
    case ComponentKind::QWP: return "qwp";
    case ComponentKind::PHASE_V: return "phase";
    case ComponentKind::POLARIZER: return "polarizer";
    case ComponentKind::BS5050: return "bs5050";
    case ComponentKind::MZI: return "mzi";
    case ComponentKind::FIBER: return "fiber";
    case ComponentKind::FACET: return "facet";
    case ComponentKind::LOSS: return "loss";
  }
  return "?";
}

inline std::optional<ComponentKind> kind_from_name(std::string_view s) {
  for (auto k : {ComponentKind::PCNOT, ComponentKind::MCNOT, ComponentKind::HWP, ComponentKind::QWP,
                 ComponentKind::PHASE_V, ComponentKind::POLARIZER, ComponentKind::BS5050, ComponentKind::MZI,
                 ComponentKind::FIBER, ComponentKind::FACET, ComponentKind::LOSS})
    if (kind_name(k) == s) return k;
  return std::nullopt;
}

/// Parameter vocabulary. Units are implied by the name: extinction*, loss*
/// and imbalance in dB, angle/phase/alpha/beta/gamma in rad, wavelength in nm,
/// coherence/xtalk/depol dimensionless.
///
///   extinction, extinction_h, extinction_v  ER of couplers/rotators/MZIs
///   loss, loss_other, loss_h, loss_v        insertion loss
///   imbalance                               extra V-polarization loss
///   angle                                   waveplate/polarizer axis, MC-NOT rotation error
///   phase                                   phase_v retardance
///   coherence                               1 = coherent leakage, 0 = incoherent
///   xtalk                                   T<->B amplitude crosstalk at a facet
///   depol                                   polarization depolarizing probability
///   alpha, beta, gamma                      MZI phases / fiber ZYZ angles
struct ComponentSpec {
  ComponentKind kind = ComponentKind::LOSS;
  std::map<std::string, double> params;
  /// Spatial channels the component acts on (0 = T, 1 = B). Empty = kind default.
  std::vector<int> targets;

  double get(const std::string& name, double fallback) const {
    auto it = params.find(name);
    return it == params.end() ? fallback : it->second;
  }
  bool has(const std::string& name) const { return params.count(name) != 0; }
};

inline const std::vector<std::string>& allowed_params(ComponentKind k) {
  static const std::map<ComponentKind, std::vector<std::string>> table = {
      {ComponentKind::PCNOT, {"extinction", "extinction_h", "extinction_v", "loss", "coherence", "depol", "wavelength"}},
      {ComponentKind::MCNOT, {"extinction", "loss", "loss_other", "angle", "coherence", "depol", "wavelength"}},
      {ComponentKind::HWP, {"angle", "wavelength"}},
      {ComponentKind::QWP, {"angle", "wavelength"}},
      {ComponentKind::PHASE_V, {"phase"}},
      {ComponentKind::POLARIZER, {"angle", "extinction"}},
      {ComponentKind::BS5050, {"loss"}},
      {ComponentKind::MZI, {"alpha", "beta", "extinction"}},
      {ComponentKind::FIBER, {"alpha", "beta", "gamma", "loss"}},
      {ComponentKind::FACET, {"loss", "loss_h", "loss_v", "imbalance", "xtalk"}},
      {ComponentKind::LOSS, {"loss", "loss_h", "loss_v"}},
  };
  return table.at(k);
}

// ---------------------------------------------------------------------------
// unit conversions

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Power leakage fraction of an extinction ratio; +inf gives 0.
inline double er_to_leakage(double er_db) {
  if (std::isnan(er_db) || er_db <= 0.0) throw ConfigError("extinction ratio must be positive (dB)");
  if (std::isinf(er_db)) return 0.0;
  return std::pow(10.0, -er_db / 10.0);
}

inline double db_to_transmission(double loss_db) {
  if (std::isnan(loss_db) || loss_db < 0.0) throw ConfigError("loss must be non-negative (dB)");
  return std::pow(10.0, -loss_db / 10.0);
}

inline double db_to_amplitude(double loss_db) { return std::sqrt(db_to_transmission(loss_db)); }

// ---------------------------------------------------------------------------
// 2x2 polarization and spatial elements

inline Matrix rotation2(double theta) {
  Matrix r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

enum class Retarder { HWP, QWP };

/// R(theta) diag(1, e^{-i Gamma}) R(-theta), Gamma = pi (HWP) or pi/2 (QWP).
inline Matrix waveplate_jones(Retarder kind, double theta) {
  const double gamma = kind == Retarder::HWP ? kPi : kPi / 2.0;
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = std::exp(-kI * gamma);
  return rotation2(theta) * d * rotation2(-theta);
}

inline Matrix phase_v(double phi) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = std::exp(kI * phi);
  return m;
}

/// Rz(alpha) Ry(beta) Rz(gamma).
inline Matrix su2_zyz(double alpha, double beta, double gamma) {
  auto rz = [](double a) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = std::exp(-kI * (a / 2.0));
    m(1, 1) = std::exp(kI * (a / 2.0));
    return m;
  };
  Matrix ry(2, 2);
  ry << std::cos(beta / 2.0), -std::sin(beta / 2.0), std::sin(beta / 2.0), std::cos(beta / 2.0);
  return rz(alpha) * ry * rz(gamma);
}

/// Symmetric 50:50 coupler with cross amplitude i.
inline Matrix bs5050() {
  Matrix m(2, 2);
  m << 1.0, kI, kI, 1.0;
  return m / std::sqrt(2.0);
}

/// Unit vector cos(theta)|H> + sin(theta)|V>.
inline Vector linear_pol(double theta) {
  Vector v(2);
  v << std::cos(theta), std::sin(theta);
  return v;
}

/// Linear polarizer; finite extinction leaks the orthogonal state incoherently.
inline QuantumChannel polarizer(double theta, double extinction_db = kInf) {
  const double eps = er_to_leakage(extinction_db);
  const Vector a = linear_pol(theta);
  const Vector b = linear_pol(theta + kPi / 2.0);
  std::vector<Matrix> ks{std::sqrt(1.0 - eps) * a * a.adjoint()};
  if (eps > 0.0) ks.push_back(std::sqrt(eps) * a * b.adjoint());
  return QuantumChannel(2, 2, std::move(ks));
}

/// BS diag(1, e^{i alpha}) BS diag(1, e^{i beta}).
inline Matrix mzi_unitary(double alpha, double beta) {
  Matrix da = Matrix::Zero(2, 2), db = Matrix::Zero(2, 2);
  da(0, 0) = 1.0;
  da(1, 1) = std::exp(kI * alpha);
  db(0, 0) = 1.0;
  db(1, 1) = std::exp(kI * beta);
  return bs5050() * da * bs5050() * db;
}

enum class MomentumSetting { T, B, PLUS, MINUS, PLUS_I, MINUS_I };

/// Bloch angles (theta, phi) of cos(theta/2)|T> + e^{i phi} sin(theta/2)|B>.
inline std::pair<double, double> bloch_angles(MomentumSetting s) {
  switch (s) {
    case MomentumSetting::T: return {0.0, 0.0};
    case MomentumSetting::B: return {kPi, 0.0};
    case MomentumSetting::PLUS: return {kPi / 2.0, 0.0};
    case MomentumSetting::MINUS: return {kPi / 2.0, kPi};
    case MomentumSetting::PLUS_I: return {kPi / 2.0, kPi / 2.0};
    case MomentumSetting::MINUS_I: return {kPi / 2.0, -kPi / 2.0};
  }
  return {0.0, 0.0};
}

/// Spatial-momentum projector built from an MZI whose output port 0 is
/// detected. Finite extinction admits the orthogonal state incoherently.
inline QuantumChannel mzi_projector(MomentumSetting setting, double extinction_db = kInf) {
  const auto [theta, phi] = bloch_angles(setting);
  const Matrix m = mzi_unitary(kPi - theta, kPi - phi);
  const double eps = er_to_leakage(extinction_db);
  // Row 0 of m is <psi|, row 1 is proportional to <psi_perp|.
  Matrix k0 = Matrix::Zero(2, 2), k1 = Matrix::Zero(2, 2);
  k0.row(0) = std::sqrt(1.0 - eps) * m.row(0);
  k1.row(0) = std::sqrt(eps) * m.row(1);
  return QuantumChannel(2, 2, {k0, k1});
}

// ---------------------------------------------------------------------------
// lifting 2x2 operators onto the 4-dim (channel x polarization) space

/// Polarization operator applied on the listed channels, identity elsewhere.
inline Matrix on_channels(const Matrix& pol_op, const std::vector<int>& channels) {
  Matrix out = Matrix::Zero(4, 4);
  out.block(0, 0, 2, 2) = identity(2);
  out.block(2, 2, 2, 2) = identity(2);
  for (int c : channels) out.block(2 * c, 2 * c, 2, 2) = pol_op;
  return out;
}

/// Spatial operator on (T, B), identity on polarization.
inline Matrix spatial(const Matrix& op) { return kron(op, identity(2)); }

/// Pauli-twirl style polarization depolarizer on the full photon.
inline QuantumChannel depolarizer4(double p) {
  if (p < 0.0 || p > 1.0) throw ConfigError("depol must lie in [0, 1]");
  std::vector<Matrix> ks{std::sqrt(1.0 - 0.75 * p) * identity(4)};
  if (p > 0.0)
    for (const auto& s : {pauli_x(), pauli_y(), pauli_z()}) ks.push_back(std::sqrt(p / 4.0) * kron(identity(2), s));
  return QuantumChannel(4, 4, std::move(ks));
}

namespace detail {

inline double coherence_of(const ComponentSpec& s) {
  const double c = s.get("coherence", 1.0);
  if (c < 0.0 || c > 1.0) throw ConfigError("coherence must lie in [0, 1]");
  return c;
}

/// {sqrt(c)(K0 + K1), sqrt(1-c) K0, sqrt(1-c) K1}.
inline QuantumChannel leakage_channel(const Matrix& k0, const Matrix& k1, double c) {
  std::vector<Matrix> ks;
  if (c > 0.0) ks.push_back(std::sqrt(c) * (k0 + k1));
  if (c < 1.0) {
    ks.push_back(std::sqrt(1.0 - c) * k0);
    ks.push_back(std::sqrt(1.0 - c) * k1);
  }
  return QuantumChannel(4, 4, std::move(ks));
}

inline QuantumChannel with_depol(QuantumChannel ch, const ComponentSpec& s) {
  const double p = s.get("depol", 0.0);
  if (p == 0.0) return ch;
  return then(ch, depolarizer4(p));
}

inline void require_kind(const ComponentSpec& s, ComponentKind k) {
  if (s.kind != k) throw ConfigError("component kind mismatch: expected " + std::string(kind_name(k)));
}

inline std::vector<int> targets_or(const ComponentSpec& s, std::vector<int> fallback) {
  const auto& t = s.targets.empty() ? fallback : s.targets;
  for (int c : t)
    if (c != 0 && c != 1) throw ConfigError("target channel out of range");
  return t;
}

}  // namespace detail

/// Polarizing directional coupler: TE (H) stays in its waveguide, TM (V)
/// crosses. Leakage: H crosses with power eps_H, V stays with power eps_V.
inline QuantumChannel pcnot_channel(const ComponentSpec& spec) {
  detail::require_kind(spec, ComponentKind::PCNOT);
  const double er = spec.get("extinction", kInf);
  const double eh = er_to_leakage(spec.get("extinction_h", er));
  const double ev = er_to_leakage(spec.get("extinction_v", er));
  const double a = db_to_amplitude(spec.get("loss", 0.0));
  Matrix k0 = Matrix::Zero(4, 4), k1 = Matrix::Zero(4, 4);
  for (int c = 0; c < 2; ++c) {
    const int o = 1 - c;
    k0(2 * c + 0, 2 * c + 0) = a * std::sqrt(1.0 - eh);
    k1(2 * o + 0, 2 * c + 0) = a * kI * std::sqrt(eh);
    k0(2 * o + 1, 2 * c + 1) = a * kI * std::sqrt(1.0 - ev);
    k1(2 * c + 1, 2 * c + 1) = a * std::sqrt(ev);
  }
  return detail::with_depol(detail::leakage_channel(k0, k1, detail::coherence_of(spec)), spec);
}

/// Polarization rotator on one channel (default T). The rotating arm acts as
/// -i(sin d Z + cos d X) with sin^2 d = eps (+ optional extra angle error);
/// the passive arm carries a pi TE/TM phase (Z).
inline QuantumChannel mcnot_channel(const ComponentSpec& spec) {
  detail::require_kind(spec, ComponentKind::MCNOT);
  const auto t = detail::targets_or(spec, {0});
  if (t.size() != 1) throw ConfigError("mcnot acts on exactly one channel");
  const int target = t.front();
  const int other = 1 - target;
  const double eps = er_to_leakage(spec.get("extinction", kInf));
  const double delta = std::asin(std::sqrt(eps)) + spec.get("angle", 0.0);
  const double at = db_to_amplitude(spec.get("loss", 0.0));
  const double ao = db_to_amplitude(spec.get("loss_other", 0.0));
  Matrix k0 = Matrix::Zero(4, 4), k1 = Matrix::Zero(4, 4);
  k0.block(2 * target, 2 * target, 2, 2) = -kI * std::cos(delta) * at * pauli_x();
  k1.block(2 * target, 2 * target, 2, 2) = -kI * std::sin(delta) * at * pauli_z();
  k0.block(2 * other, 2 * other, 2, 2) = ao * pauli_z();
  return detail::with_depol(detail::leakage_channel(k0, k1, detail::coherence_of(spec)), spec);
}

/// Polarization-dependent attenuation on both channels, then optional
/// T<->B amplitude crosstalk kappa.
inline QuantumChannel facet_channel(double loss_h_db, double loss_v_db, double xtalk_amp = 0.0) {
  if (xtalk_amp < 0.0 || xtalk_amp > 1.0) throw ConfigError("xtalk must lie in [0, 1]");
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = db_to_amplitude(loss_h_db);
  d(1, 1) = db_to_amplitude(loss_v_db);
  Matrix m = kron(identity(2), d);
  if (xtalk_amp > 0.0) {
    Matrix x(2, 2);
    const double s = std::sqrt(1.0 - xtalk_amp * xtalk_amp);
    x << s, kI * xtalk_amp, kI * xtalk_amp, s;
    m = spatial(x) * m;
  }
  return QuantumChannel::unitary(m);
}

inline QuantumChannel facet_channel(const ComponentSpec& spec) {
  detail::require_kind(spec, ComponentKind::FACET);
  const double base = spec.get("loss", 0.0);
  return facet_channel(base + spec.get("loss_h", 0.0), base + spec.get("loss_v", 0.0) + spec.get("imbalance", 0.0),
                       spec.get("xtalk", 0.0));
}

/// Lowers any component to a channel on the 4-dim single-photon space.
inline QuantumChannel component_channel(const ComponentSpec& spec) {
  using K = ComponentKind;
  switch (spec.kind) {
    case K::PCNOT: return pcnot_channel(spec);
    case K::MCNOT: return mcnot_channel(spec);
    case K::FACET: return facet_channel(spec);
    case K::HWP:
    case K::QWP: {
      const auto r = spec.kind == K::HWP ? Retarder::HWP : Retarder::QWP;
      return QuantumChannel::unitary(
          on_channels(waveplate_jones(r, spec.get("angle", 0.0)), detail::targets_or(spec, {0, 1})));
    }
    case K::PHASE_V:
      return QuantumChannel::unitary(on_channels(phase_v(spec.get("phase", 0.0)), detail::targets_or(spec, {0, 1})));
    case K::POLARIZER: {
      const auto p = polarizer(spec.get("angle", 0.0), spec.get("extinction", kInf));
      const auto t = detail::targets_or(spec, {0, 1});
      // Each per-channel Kraus set is lifted as {K_0 + I_other, K_k>0}.
      std::vector<Matrix> ks{identity(4)};
      for (int c : t) {
        std::vector<Matrix> next;
        for (const auto& k : ks)
          for (std::size_t j = 0; j < p.kraus().size(); ++j) {
            Matrix lifted = j == 0 ? identity(4) : Matrix::Zero(4, 4);
            lifted.block(2 * c, 2 * c, 2, 2) = p.kraus()[j];
            next.push_back(lifted * k);
          }
        ks = std::move(next);
      }
      return QuantumChannel(4, 4, std::move(ks));
    }
    case K::BS5050:
      return QuantumChannel::unitary(db_to_amplitude(spec.get("loss", 0.0)) * spatial(bs5050()));
    case K::MZI: {
      const double eps = er_to_leakage(spec.get("extinction", kInf));
      // finite extinction: imperfect beamsplitter ratio inside the MZI
      const double s = std::sqrt(0.5 + std::sqrt(eps) / 2.0);
      const double c = std::sqrt(0.5 - std::sqrt(eps) / 2.0);
      Matrix bs(2, 2);
      bs << s, kI * c, kI * c, s;
      Matrix da = Matrix::Zero(2, 2), db = Matrix::Zero(2, 2);
      da(0, 0) = db(0, 0) = 1.0;
      da(1, 1) = std::exp(kI * spec.get("alpha", 0.0));
      db(1, 1) = std::exp(kI * spec.get("beta", 0.0));
      return QuantumChannel::unitary(spatial(bs * da * bs * db));
    }
    case K::FIBER: {
      const Matrix u = su2_zyz(spec.get("alpha", 0.0), spec.get("beta", 0.0), spec.get("gamma", 0.0));
      return QuantumChannel::unitary(db_to_amplitude(spec.get("loss", 0.0)) *
                                     on_channels(u, detail::targets_or(spec, {0, 1})));
    }
    case K::LOSS: {
      const double base = spec.get("loss", 0.0);
      Matrix d = Matrix::Zero(2, 2);
      d(0, 0) = db_to_amplitude(base + spec.get("loss_h", 0.0));
      d(1, 1) = db_to_amplitude(base + spec.get("loss_v", 0.0));
      return QuantumChannel::unitary(on_channels(d, detail::targets_or(spec, {0, 1})));
    }
  }
  throw ConfigError("unknown component kind");
}

// ---------------------------------------------------------------------------
// chip assembly

/// Ordered list of dim-4 stages.
class ChipModel {
 public:
  ChipModel(std::vector<QuantumChannel> stages, std::string label) : stages_(std::move(stages)), label_(std::move(label)) {
    if (stages_.empty()) throw ConfigError("ChipModel: no stages");
    for (const auto& s : stages_)
      if (s.dim_in() != 4 || s.dim_out() != 4) throw DimensionError("ChipModel: every stage must act on dim 4");
    channel_ = compose(stages_);
  }

  const std::vector<QuantumChannel>& stages() const { return stages_; }
  const std::string& label() const { return label_; }
  const QuantumChannel& channel() const { return *channel_; }
  DensityMatrix apply(const DensityMatrix& rho) const { return apply_channel(*channel_, rho); }

  /// The composed operator when the chip is a single-Kraus map.
  std::optional<Matrix> operator_if_pure() const {
    if (channel_->kraus().size() != 1) return std::nullopt;
    return channel_->kraus().front();
  }

 private:
  std::vector<QuantumChannel> stages_;
  std::string label_;
  std::optional<QuantumChannel> channel_;
};

/// Stages [facet_in, pcnot, mcnot, pcnot, facet_out].
inline ChipModel build_swap_chip(const ComponentSpec& pc1, const ComponentSpec& mc, const ComponentSpec& pc2,
                                 const ComponentSpec& facet_in, const ComponentSpec& facet_out,
                                 std::string label = "swap") {
  return ChipModel({facet_channel(facet_in), pcnot_channel(pc1), mcnot_channel(mc), pcnot_channel(pc2),
                    facet_channel(facet_out)},
                   std::move(label));
}

inline ChipModel build_swap_chip(const ComponentSpec& pc1, const ComponentSpec& mc, const ComponentSpec& pc2,
                                 const ComponentSpec& facets) {
  return build_swap_chip(pc1, mc, pc2, facets, facets);
}

inline ChipModel ideal_swap_chip() {
  return build_swap_chip({ComponentKind::PCNOT, {}, {}}, {ComponentKind::MCNOT, {}, {}}, {ComponentKind::PCNOT, {}, {}},
                         {ComponentKind::FACET, {}, {}});
}

/// (X (x) X) SWAP: the ideal chip's operator on (momentum, polarization).
inline Matrix ideal_swap_operator() { return kron(pauli_x(), pauli_x()) * swap_gate(); }

/// min over alpha of ||A - e^{i alpha} B||_F.
inline double phase_insensitive_distance(const Matrix& a, const Matrix& b) {
  const cplx ov = (b.adjoint() * a).trace();
  const double na = a.squaredNorm();
  const double nb = b.squaredNorm();
  return std::sqrt(std::max(0.0, na + nb - 2.0 * std::abs(ov)));
}

enum class LogicalFrame { RAW, RELABELED };

inline Matrix frame_operator(int dim) {
  if (dim == 2) return pauli_x();
  if (dim == 4) return kron(pauli_x(), pauli_x());
  throw DimensionError("logical_frame: dim must be 2 or 4");
}

/// RELABELED conjugates by X (x) X (X for a single qubit) so the ideal chip
/// reads as a plain SWAP.
inline DensityMatrix logical_frame(const DensityMatrix& rho, LogicalFrame frame) {
  if (frame == LogicalFrame::RAW) return rho;
  const Matrix f = frame_operator(rho.dim());
  return DensityMatrix::trusted(f * rho.matrix() * f);
}

}  // namespace swapsim
