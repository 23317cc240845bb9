#pragma once

// Two-photon states on (signal 4-dim) x (idler 4-dim), SPDC and Bell-state
// sources, local channels, and Hong-Ou-Mandel coincidence with a scalar
// spectral overlap.
//
// Joint index = 4 * (2 cs + ps) + (2 ci + pi): signal most significant.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "swapsim/devices.hpp"
#include "swapsim/numerics.hpp"

namespace swapsim {

struct Wavelengths {
  double pump_nm = 778.0;
  double signal_nm = 1556.0;
  double idler_nm = 1556.0;
};

/// 1/idler = 1/pump - 1/signal.
inline double idler_wavelength_nm(double pump_nm, double signal_nm) {
  if (!(pump_nm > 0.0) || !(signal_nm > pump_nm))
    throw ConfigError("spdc: require 0 < pump wavelength < signal wavelength");
  return 1.0 / (1.0 / pump_nm - 1.0 / signal_nm);
}

inline bool energy_conserved(const Wavelengths& w, double tol_inv_nm = 1e-6) {
  return std::abs(1.0 / w.pump_nm - 1.0 / w.signal_nm - 1.0 / w.idler_nm) <= tol_inv_nm;
}

class BiphotonState {
 public:
  BiphotonState(DensityMatrix joint, double coherence_time_ps, Wavelengths wl)
      : joint_(std::move(joint)), t_c_(coherence_time_ps), wl_(wl) {
    if (joint_.dim() != 16) throw DimensionError("BiphotonState: joint state must have dim 16");
    if (!(t_c_ > 0.0)) throw ConfigError("BiphotonState: coherence time must be positive");
    if (!energy_conserved(wl_)) throw ConfigError("BiphotonState: wavelengths violate energy conservation");
  }

  const DensityMatrix& joint() const { return joint_; }
  double coherence_time_ps() const { return t_c_; }
  const Wavelengths& wavelengths() const { return wl_; }
  BiphotonState with_joint(DensityMatrix j) const { return BiphotonState(std::move(j), t_c_, wl_); }

 private:
  DensityMatrix joint_;
  double t_c_;
  Wavelengths wl_;
};

inline constexpr double kDefaultCoherenceTimePs = 3.15;

/// Places a (ps, pi) polarization density matrix on spatial channels (cs, ci).
inline Matrix embed_polarization_pair(Port cs, Port ci, const Matrix& pol) {
  if (pol.rows() != 4 || pol.cols() != 4) throw DimensionError("embed_polarization_pair: pol must be 4x4");
  Matrix j = Matrix::Zero(16, 16);
  const int s = static_cast<int>(cs), i = static_cast<int>(ci);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const int ra = 4 * (2 * s + a / 2) + 2 * i + a % 2;
      const int rb = 4 * (2 * s + b / 2) + 2 * i + b % 2;
      j(ra, rb) = pol(a, b);
    }
  return j;
}

/// (ps, pi) block of the joint matrix for photons on (cs, ci).
inline Matrix polarization_block(const Matrix& joint, Port cs, Port ci) {
  Matrix pol(4, 4);
  const int s = static_cast<int>(cs), i = static_cast<int>(ci);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      pol(a, b) = joint(4 * (2 * s + a / 2) + 2 * i + a % 2, 4 * (2 * s + b / 2) + 2 * i + b % 2);
  return pol;
}

/// Collinear type-II pair |V_S H_I> on the chosen channels; idler wavelength
/// from energy conservation.
inline BiphotonState spdc_state(double pump_nm, double signal_nm, double coherence_time_ps,
                                Port signal_port = Port::T, Port idler_port = Port::B) {
  const double idler = idler_wavelength_nm(pump_nm, signal_nm);
  const Vector s = PureState::basis(4, mode_index(signal_port, Polarization::V)).amplitudes();
  const Vector i = PureState::basis(4, mode_index(idler_port, Polarization::H)).amplitudes();
  const Vector psi = kron(s, i);
  return BiphotonState(DensityMatrix::trusted(psi * psi.adjoint()), coherence_time_ps, {pump_nm, signal_nm, idler});
}

/// Product of two single-photon pure states.
inline BiphotonState product_state(const PureState& signal, const PureState& idler,
                                   double coherence_time_ps = kDefaultCoherenceTimePs, Wavelengths wl = {}) {
  const Vector psi = kron(signal.amplitudes(), idler.amplitudes());
  return BiphotonState(DensityMatrix::trusted(psi * psi.adjoint()), coherence_time_ps, wl);
}

enum class BellLabel { PSI_PLUS, PSI_MINUS, PHI_PLUS, PHI_MINUS };

inline std::string_view bell_name(BellLabel b) {
  switch (b) {
    case BellLabel::PSI_PLUS: return "PSI_PLUS";
    case BellLabel::PSI_MINUS: return "PSI_MINUS";
    case BellLabel::PHI_PLUS: return "PHI_PLUS";
    case BellLabel::PHI_MINUS: return "PHI_MINUS";
  }
  return "?";
}

inline std::optional<BellLabel> bell_from_name(std::string_view s) {
  for (auto b : {BellLabel::PSI_PLUS, BellLabel::PSI_MINUS, BellLabel::PHI_PLUS, BellLabel::PHI_MINUS})
    if (bell_name(b) == s) return b;
  return std::nullopt;
}

/// Polarization Bell vector over (ps, pi) = HH, HV, VH, VV.
inline Vector bell_vector(BellLabel b) {
  Vector v = Vector::Zero(4);
  const double r = 1.0 / std::sqrt(2.0);
  switch (b) {
    case BellLabel::PSI_PLUS: v(1) = r, v(2) = r; break;
    case BellLabel::PSI_MINUS: v(1) = r, v(2) = -r; break;
    case BellLabel::PHI_PLUS: v(0) = r, v(3) = r; break;
    case BellLabel::PHI_MINUS: v(0) = r, v(3) = -r; break;
  }
  return v;
}

/// v |Bell><Bell| + (1 - v) I/4 on polarization; signal on T, idler on B.
inline BiphotonState prepare_bell(BellLabel label, double visibility,
                                  double coherence_time_ps = kDefaultCoherenceTimePs, Wavelengths wl = {}) {
  if (visibility < 0.0 || visibility > 1.0) throw ConfigError("prepare_bell: visibility must lie in [0, 1]");
  const Vector b = bell_vector(label);
  const Matrix pol = visibility * (b * b.adjoint()) + (1.0 - visibility) * identity(4) / 4.0;
  return BiphotonState(DensityMatrix::trusted(embed_polarization_pair(Port::T, Port::B, pol)), coherence_time_ps, wl);
}

enum class Photon { SIGNAL, IDLER };

/// (ch x I) or (I x ch) on the joint state.
inline BiphotonState apply_local(const BiphotonState& st, const QuantumChannel& ch, Photon which) {
  if (ch.dim_in() != 4 || ch.dim_out() != 4) throw DimensionError("apply_local: channel must act on dim 4");
  const auto id = QuantumChannel::identity(4);
  const auto lifted = which == Photon::SIGNAL ? tensor(ch, id) : tensor(id, ch);
  return st.with_joint(apply_channel(lifted, st.joint()));
}

/// The same channel on both photons.
inline BiphotonState apply_both(const BiphotonState& st, const QuantumChannel& ch) {
  return st.with_joint(apply_channel(tensor(ch, ch), st.joint()));
}

// ---------------------------------------------------------------------------
// Hong-Ou-Mandel

enum class SpectralShape { GAUSSIAN, TRIANGULAR };

struct SpectralOverlap {
  double coherence_time_ps = kDefaultCoherenceTimePs;
  SpectralShape shape = SpectralShape::GAUSSIAN;
};

inline double gaussian_fwhm(double sigma) { return 2.0 * std::sqrt(2.0 * std::log(2.0)) * sigma; }

/// mu(tau). Gaussian: exp(-tau^2 / (2 Tc^2)). Triangular: same FWHM, linear flanks.
inline double spectral_overlap(double tau_ps, const SpectralOverlap& s) {
  if (!(s.coherence_time_ps > 0.0)) throw ConfigError("spectral_overlap: coherence time must be positive");
  if (s.shape == SpectralShape::GAUSSIAN)
    return std::exp(-tau_ps * tau_ps / (2.0 * s.coherence_time_ps * s.coherence_time_ps));
  const double base = gaussian_fwhm(s.coherence_time_ps);
  return std::max(0.0, 1.0 - std::abs(tau_ps) / base);
}

/// Sum over the (T, B) and (B, T) channel blocks of Tr(rho_block SWAP_pol),
/// with the controller W acting on whichever photon sits in channel B.
inline double hom_overlap(const Matrix& joint, const Matrix& controller = identity(2)) {
  double o = 0.0;
  for (const auto& [cs, ci] : {std::pair{Port::T, Port::B}, std::pair{Port::B, Port::T}}) {
    const Matrix w = cs == Port::T ? kron(identity(2), controller) : kron(controller, identity(2));
    const Matrix blk = w * polarization_block(joint, cs, ci) * w.adjoint();
    o += (blk * swap_gate()).trace().real();
  }
  return o;
}

/// Polarization controller on channel B maximizing the two-photon overlap.
inline Matrix optimize_controller(const Matrix& joint) {
  auto cost = [&](const std::vector<double>& p) { return -hom_overlap(joint, su2_zyz(p[0], p[1], p[2])); };
  const std::vector<std::vector<double>> starts = {
      {0.0, 0.0, 0.0}, {0.0, kPi, 0.0}, {kPi / 2, kPi / 2, -kPi / 2}, {0.7, 0.3, 0.2}, {1.2, 1.0, 2.0}};
  numerics::NelderMeadOptions opt;
  opt.initial_step = 0.4;
  double best = 1e300;
  std::vector<double> arg;
  for (const auto& s : starts) {
    const auto r = numerics::nelder_mead(cost, s, opt);
    if (r.fx < best) best = r.fx, arg = r.x;
  }
  return su2_zyz(arg[0], arg[1], arg[2]);
}

/// Coincidence probability at the 50:50 combiner:
/// P = (1 - mu(tau) O) / 2 + background.
inline double hom_coincidence(const BiphotonState& st, double tau_ps, double background,
                              SpectralShape shape = SpectralShape::GAUSSIAN, const Matrix& controller = identity(2)) {
  if (background < 0.0) throw ConfigError("hom_coincidence: background must be non-negative");
  if (std::abs(st.joint().trace() - 1.0) > 1e-9) throw PhysicalityError("hom_coincidence: state must be heralded");
  const double mu = spectral_overlap(tau_ps, {st.coherence_time_ps(), shape});
  return 0.5 * (1.0 - mu * hom_overlap(st.joint().matrix(), controller)) + background;
}

struct DipFit {
  double baseline = 0.0;  // c0
  double depth = 0.0;     // a
  double center_ps = 0.0;
  double sigma_ps = 0.0;  // coherence time of the Gaussian dip
  double fwhm_ps = 0.0;
  double visibility_raw = 0.0;
  double visibility_subtracted = 0.0;
  bool converged = false;
};

/// Gaussian-dip fit C(tau) = c0 - a exp(-(tau - tau0)^2 / (2 s^2)).
/// (tau0, s) by simplex search, (c0, a) by linear least squares at each step.
/// V_raw = a / c0; V_sub = a / (c0 - background).
inline DipFit hom_visibility(const std::vector<double>& tau, const std::vector<double>& value, double background = 0.0,
                             const std::vector<double>& weights = {}) {
  const std::size_t n = tau.size();
  if (n < 5 || value.size() != n) throw EstimationError("hom_visibility: need at least 5 (tau, value) points");
  Eigen::VectorXd y(static_cast<Eigen::Index>(n)), w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = value[i];
  if (!weights.empty()) {
    if (weights.size() != n) throw EstimationError("hom_visibility: weights size mismatch");
    for (std::size_t i = 0; i < n; ++i) w(static_cast<Eigen::Index>(i)) = weights[i];
  }

  auto linear = [&](double center, double sigma) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (tau[i] - center) / sigma;
      a(static_cast<Eigen::Index>(i), 0) = 1.0;
      a(static_cast<Eigen::Index>(i), 1) = -std::exp(-0.5 * d * d);
    }
    return numerics::weighted_least_squares(a, y, w);
  };

  // Starting point: deepest sample and the half-depth width.
  std::size_t imin = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (value[i] < value[imin]) imin = i;
  const double hi = *std::max_element(value.begin(), value.end());
  const double half = 0.5 * (hi + value[imin]);
  double lo_t = tau[imin], hi_t = tau[imin];
  for (std::size_t i = 0; i < n; ++i)
    if (value[i] <= half) lo_t = std::min(lo_t, tau[i]), hi_t = std::max(hi_t, tau[i]);
  double span = *std::max_element(tau.begin(), tau.end()) - *std::min_element(tau.begin(), tau.end());
  double sigma0 = std::max((hi_t - lo_t) / gaussian_fwhm(1.0), span / (4.0 * static_cast<double>(n)));

  auto cost = [&](const std::vector<double>& p) {
    const double sigma = std::exp(p[1]);
    try {
      return linear(p[0], sigma).chi2;
    } catch (const EstimationError&) {
      return 1e300;
    }
  };
  numerics::NelderMeadOptions opt;
  opt.initial_step = 0.2;
  opt.f_tol = 1e-15;
  auto r = numerics::nelder_mead(cost, {tau[imin], std::log(sigma0)}, opt);
  r = numerics::nelder_mead(cost, r.x, opt);  // restart to escape a collapsed simplex

  DipFit fit;
  fit.center_ps = r.x[0];
  fit.sigma_ps = std::exp(r.x[1]);
  fit.fwhm_ps = gaussian_fwhm(fit.sigma_ps);
  fit.converged = r.converged;
  const auto lin = linear(fit.center_ps, fit.sigma_ps);
  fit.baseline = lin.coef(0);
  fit.depth = lin.coef(1);

  bool left = false, right = false;
  for (double t : tau) {
    left = left || t <= fit.center_ps - 2.0 * fit.sigma_ps;
    right = right || t >= fit.center_ps + 2.0 * fit.sigma_ps;
  }
  if (!left || !right) throw EstimationError("hom_visibility: scan does not reach the wings of the dip");
  if (!(fit.baseline > background)) throw EstimationError("hom_visibility: baseline not above background");
  fit.visibility_raw = fit.depth / fit.baseline;
  fit.visibility_subtracted = fit.depth / (fit.baseline - background);
  return fit;
}

}  // namespace swapsim
