#pragma once

// End-to-end experiment pipelines with Poisson shot noise. Every run has an
// exact (noiseless) value from density-matrix propagation, a measured value
// from one seeded draw of counts (trial 0), and a parametric-bootstrap
// standard error from n_trials Poisson resamples of the measured counts.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "swapsim/biphoton.hpp"
#include "swapsim/report.hpp"
#include "swapsim/rng.hpp"
#include "swapsim/tomography.hpp"

namespace swapsim {

// ---------------------------------------------------------------------------
// chip parameters

/// Lumped parameters for the five-stage SWAP chip.
struct ChipParams {
  double pc1_extinction_db = kInf;
  double mc_extinction_db = kInf;
  double pc2_extinction_db = kInf;
  double mc_loss_db = 0.0;
  double facet_loss_db = 0.0;
  double imbalance_db = 0.0;  // extra V loss at the output facet
  double xtalk_amp = 0.0;     // T<->B amplitude crosstalk at both facets
  double rotation_error_rad = 0.0;
  double coherence = 1.0;  // leakage coherence of couplers and rotator
};

inline ChipParams calibrated_chip_params() {
  ChipParams p;
  p.pc1_extinction_db = 18.0;
  p.mc_extinction_db = 20.0;
  p.pc2_extinction_db = 18.0;
  p.mc_loss_db = 1.0;
  p.facet_loss_db = 2.5;
  p.imbalance_db = 0.9;
  p.coherence = 0.0;
  return p;
}

inline ChipModel build_chip(const ChipParams& p, std::string label = "swap") {
  using K = ComponentKind;
  const ComponentSpec fin{K::FACET, {{"loss", p.facet_loss_db}, {"xtalk", p.xtalk_amp}}, {}};
  const ComponentSpec fout{K::FACET, {{"loss", p.facet_loss_db}, {"imbalance", p.imbalance_db}, {"xtalk", p.xtalk_amp}}, {}};
  const ComponentSpec pc1{K::PCNOT, {{"extinction", p.pc1_extinction_db}, {"coherence", p.coherence}}, {}};
  const ComponentSpec mc{K::MCNOT,
                         {{"extinction", p.mc_extinction_db},
                          {"loss", p.mc_loss_db},
                          {"angle", p.rotation_error_rad},
                          {"coherence", p.coherence}},
                         {0}};
  const ComponentSpec pc2{K::PCNOT, {{"extinction", p.pc2_extinction_db}, {"coherence", p.coherence}}, {}};
  return build_swap_chip(pc1, mc, pc2, fin, fout, std::move(label));
}

// ---------------------------------------------------------------------------
// configuration

enum class HomInput { TV_BH, TH_BV, SOURCE_ONLY };

inline std::string_view hom_input_name(HomInput h) {
  switch (h) {
    case HomInput::TV_BH: return "TV_BH";
    case HomInput::TH_BV: return "TH_BV";
    case HomInput::SOURCE_ONLY: return "SOURCE_ONLY";
  }
  return "?";
}

struct ExperimentConfig {
  std::vector<ChipModel> chips{ideal_swap_chip()};  // [chip 1, optional chip 2]
  ChipParams chip_params{};                          // base point for parameter sweeps

  double signal_wavelength_nm = 1557.0;
  double pump_wavelength_nm = 778.5;
  double coherence_time_ps = kDefaultCoherenceTimePs;
  double bell_visibility = 1.0;
  double fiber_residual_rad = 0.0;

  double pair_rate_hz = 2500.0;        // heralded pairs reaching the analyzers
  double integration_time_s = 160.0;   // total budget, split equally over settings
  double background_rate_hz = 0.0;     // accidental coincidences per setting
  double fringe_bin_s = 30.0;
  std::optional<double> fringe_target_raw_visibility;
  bool fringe_analyzer = true;
  double fringe_arm_phase_rad = 0.0;
  std::optional<double> hom_target_raw_visibility;
  bool hom_controller = true;
  SpectralShape hom_shape = SpectralShape::GAUSSIAN;

  int n_trials = 100;
  std::uint64_t rng_seed = 1;
  LogicalFrame logical_frame = LogicalFrame::RELABELED;
  std::string config_hash;  // provenance of the source document, if any

  void validate() const {
    if (chips.empty()) throw ConfigError("config: at least one chip is required");
    if (!(pair_rate_hz > 0.0)) throw ConfigError("config: pair_rate_hz must be positive");
    if (!(integration_time_s > 0.0)) throw ConfigError("config: integration_time_s must be positive");
    if (!(fringe_bin_s > 0.0)) throw ConfigError("config: fringe bin_s must be positive");
    if (!(background_rate_hz >= 0.0)) throw ConfigError("config: background_rate_hz must be non-negative");
    if (!(coherence_time_ps > 0.0)) throw ConfigError("config: coherence_time_ps must be positive");
    if (!(bell_visibility >= 0.0 && bell_visibility <= 1.0)) throw ConfigError("config: bell_visibility must lie in [0, 1]");
    if (n_trials < 1) throw ConfigError("config: n_trials must be at least 1");
    for (const auto& t : {fringe_target_raw_visibility, hom_target_raw_visibility})
      if (t && !(*t > 0.0 && *t <= 1.0)) throw ConfigError("config: target_raw_visibility must lie in (0, 1]");
    idler_wavelength_nm(pump_wavelength_nm, signal_wavelength_nm);
  }

  const ChipModel& chip(std::size_t i) const { return chips.at(std::min(i, chips.size() - 1)); }

  Wavelengths wavelengths() const {
    return {pump_wavelength_nm, signal_wavelength_nm, idler_wavelength_nm(pump_wavelength_nm, signal_wavelength_nm)};
  }
};

inline std::string_view frame_name(LogicalFrame f) { return f == LogicalFrame::RAW ? "RAW" : "RELABELED"; }

// ---------------------------------------------------------------------------
// counting and bootstrap

namespace detail {

inline std::vector<double> draw_counts(const std::vector<double>& means, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(means.size());
  for (double m : means) out.push_back(static_cast<double>(rng.poisson(m)));
  return out;
}

struct Measured {
  std::vector<double> counts;       // trial 0
  std::vector<Estimate> estimates;  // one per metric
};

/// Trial 0 draws the measurement from `means`; trials 1..n resample Poisson
/// around the measured counts. Resamples the estimator rejects are counted,
/// not averaged.
inline Measured measure(const std::vector<double>& means, const ExperimentConfig& cfg,
                        const std::function<std::vector<double>(const std::vector<double>&)>& estimator) {
  Measured m;
  m.counts = draw_counts(means, trial_seed(cfg.rng_seed, 0));
  const auto point = estimator(m.counts);
  std::vector<double> sum(point.size(), 0.0), sum2(point.size(), 0.0);
  int ok = 0, failed = 0;
  for (int k = 1; k <= cfg.n_trials; ++k) {
    const auto resample = draw_counts(m.counts, trial_seed(cfg.rng_seed, static_cast<std::uint64_t>(k)));
    try {
      const auto v = estimator(resample);
      for (std::size_t i = 0; i < v.size(); ++i) {
        sum[i] += v[i];
        sum2[i] += v[i] * v[i];
      }
      ++ok;
    } catch (const EstimationError&) {
      ++failed;
    }
  }
  for (std::size_t i = 0; i < point.size(); ++i) {
    Estimate e;
    e.value = point[i];
    if (ok >= 2) {
      const double mean = sum[i] / ok;
      e.std_error = std::sqrt(std::max(0.0, (sum2[i] - ok * mean * mean) / (ok - 1)));
    }
    e.failed_trials = failed;
    m.estimates.push_back(e);
  }
  return m;
}

inline Json base_payload(std::string_view experiment, const ExperimentConfig& cfg) {
  Json p;
  p["experiment"] = experiment;
  p["schema_version"] = 1;
  p["config_hash"] = cfg.config_hash;
  p["seed"] = cfg.rng_seed;
  p["n_trials"] = cfg.n_trials;
  p["logical_frame"] = frame_name(cfg.logical_frame);
  Json chips = Json::array();
  for (const auto& c : cfg.chips) chips.push_back(c.label());
  p["chips"] = chips;
  return p;
}

inline DensityMatrix herald(const DensityMatrix& rho) { return heralded_normalize(rho).state; }

}  // namespace detail

inline constexpr std::array<std::string_view, 4> kBasisLabels = {"TH", "TV", "BH", "BV"};

// ---------------------------------------------------------------------------
// truth table

/// Column-normalized truth table of the chip in the requested frame.
inline TruthTable exact_truth_table(const ChipModel& chip, LogicalFrame frame) {
  const auto t = truth_table_of(chip.channel()).column_normalized();
  return frame == LogicalFrame::RAW ? t : t.relabeled();
}

inline double exact_truth_table_fidelity(const ChipModel& chip, LogicalFrame frame) {
  return truth_table_fidelity(exact_truth_table(chip, frame), ideal_truth_table(frame));
}

inline Report run_truth_table(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& chip = cfg.chip(0);
  const auto exact = exact_truth_table(chip, cfg.logical_frame);
  const auto ideal = ideal_truth_table(cfg.logical_frame);
  const double t = cfg.integration_time_s / 16.0;

  // Count index 4 * input + output.
  std::vector<double> means(16);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) means[4 * j + i] = cfg.pair_rate_hz * t * exact.matrix()(i, j) + cfg.background_rate_hz * t;
  auto table_of = [](const std::vector<double>& c) {
    Eigen::Matrix4d m;
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) m(i, j) = c[static_cast<std::size_t>(4 * j + i)];
    const double peak = std::max(1.0, m.maxCoeff());
    return TruthTable(m / (4.0 * peak)).column_normalized();
  };
  const auto meas = detail::measure(means, cfg, [&](const std::vector<double>& c) {
    return std::vector<double>{truth_table_fidelity(table_of(c), ideal)};
  });
  const auto measured = table_of(meas.counts);

  Report r{"truth-table", detail::base_payload("truth-table", cfg), {}};
  r.payload["estimates"]["fidelity"] = to_json(meas.estimates[0]);
  r.payload["exact"]["fidelity"] = truth_table_fidelity(exact, ideal);
  r.payload["basis"] = kBasisLabels;
  Json mt = Json::array(), ct = Json::array();
  for (int i = 0; i < 4; ++i) {
    Json row = Json::array(), crow = Json::array();
    for (int j = 0; j < 4; ++j) {
      row.push_back(measured.matrix()(i, j));
      crow.push_back(static_cast<std::int64_t>(meas.counts[static_cast<std::size_t>(4 * j + i)]));
    }
    mt.push_back(row);
    ct.push_back(crow);
  }
  r.payload["measured_table"] = mt;
  r.payload["counts"] = ct;
  r.payload["setting_time_s"] = t;

  Table tab{"truth_table", {"input", "output", "counts", "probability", "exact_probability"}, {}};
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i)
      tab.rows.push_back({std::string(kBasisLabels[static_cast<std::size_t>(j)]), std::string(kBasisLabels[static_cast<std::size_t>(i)]),
                          number_text(meas.counts[static_cast<std::size_t>(4 * j + i)]), number_text(measured.matrix()(i, j)),
                          number_text(exact.matrix()(i, j))});
  r.tables.push_back(std::move(tab));
  return r;
}

// ---------------------------------------------------------------------------
// process tomography

/// Ideal chi: identity (relabeled) or X (raw) for polarization -> momentum;
/// SWAP or (X (x) X) SWAP for the two-qubit gate.
inline ProcessMatrix ideal_process(int n_qubits, LogicalFrame frame) {
  if (n_qubits == 1) return chi_from_kraus({frame == LogicalFrame::RAW ? pauli_x() : identity(2)}, 1);
  return chi_from_kraus({frame == LogicalFrame::RAW ? ideal_swap_operator() : swap_gate()}, 2);
}

/// Spatial inputs for the one-qubit process: setting indices of |T>, |B>, |+>, |+i>.
inline constexpr std::array<int, 4> kSpatialInputs = {0, 1, 2, 4};
inline constexpr std::array<std::string_view, 4> kSpatialInputNames = {"T", "B", "+", "+i"};

/// Heralded momentum output for polarization input `pol` with the momentum
/// qubit prepared in setting `spatial`.
inline DensityMatrix process_1q_output(const ChipModel& chip, int spatial, const DensityMatrix& pol, LogicalFrame frame) {
  const auto in = DensityMatrix::trusted(kron(setting_projector(spatial), pol.matrix()));
  const auto out = logical_frame(detail::herald(chip.apply(in)), frame);
  return DensityMatrix::trusted(trace_out_second(out.matrix(), 2, 2));
}

inline DensityMatrix process_2q_output(const ChipModel& chip, const DensityMatrix& in, LogicalFrame frame) {
  return logical_frame(detail::herald(chip.apply(in)), frame);
}

struct ProcessResult {
  ProcessMatrix exact_chi;
  double exact_fidelity;
  double exact_purity;
};

inline ProcessResult exact_process_1q(const ChipModel& chip, int spatial, LogicalFrame frame) {
  const auto inputs = standard_process_inputs(1);
  std::vector<DensityMatrix> outs;
  for (const auto& p : inputs) outs.push_back(process_1q_output(chip, spatial, p, frame));
  auto chi = process_tomo(inputs, outs, 1);
  const double f = process_fidelity(chi, ideal_process(1, frame));
  const double pur = process_purity(chi);
  return {std::move(chi), f, pur};
}

inline const ProcessTomography& process_2q_solver() {
  static const ProcessTomography solver(standard_process_inputs(2), 2);
  return solver;
}

inline ProcessResult exact_process_2q(const ChipModel& chip, LogicalFrame frame) {
  const auto& solver = process_2q_solver();
  std::vector<DensityMatrix> outs;
  for (const auto& in : solver.inputs()) outs.push_back(process_2q_output(chip, in, frame));
  auto chi = solver.reconstruct(outs);
  const double f = process_fidelity(chi, ideal_process(2, frame));
  const double pur = process_purity(chi);
  return {std::move(chi), f, pur};
}

inline Report run_process_1q(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& chip = cfg.chip(0);
  const auto inputs = standard_process_inputs(1);
  const ProcessTomography solver(inputs, 1);
  const auto ideal = ideal_process(1, cfg.logical_frame);
  const double t = cfg.integration_time_s / (4.0 * 4.0 * 6.0);

  Report r{"tomo-process", detail::base_payload("tomo-process", cfg), {}};
  r.payload["qubits"] = 1;
  Json per = Json::object();
  double sum_f = 0.0, sum_p = 0.0, sum_ef = 0.0, sum_ep = 0.0;
  Table tab{"process_1q_counts", {"spatial_input", "polarization_input", "setting", "counts"}, {}};
  for (std::size_t s = 0; s < kSpatialInputs.size(); ++s) {
    const auto ex = exact_process_1q(chip, kSpatialInputs[s], cfg.logical_frame);
    std::vector<double> means;
    for (const auto& p : inputs) {
      const auto f = exact_frequencies_1q(process_1q_output(chip, kSpatialInputs[s], p, cfg.logical_frame));
      for (double x : f) means.push_back(cfg.pair_rate_hz * t * x + cfg.background_rate_hz * t);
    }
    auto est = [&](const std::vector<double>& c) {
      std::vector<DensityMatrix> outs;
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        Frequencies1q n{};
        for (std::size_t k = 0; k < 6; ++k) n[k] = c[6 * j + k];
        outs.push_back(state_tomo_1q(n));
      }
      const auto chi = solver.reconstruct(outs);
      return std::vector<double>{process_fidelity(chi, ideal), process_purity(chi)};
    };
    ExperimentConfig sub = cfg;
    sub.rng_seed = trial_seed(cfg.rng_seed, 1000 + s);
    const auto meas = detail::measure(means, sub, est);
    const std::string name(kSpatialInputNames[s]);
    per[name]["fidelity"] = to_json(meas.estimates[0]);
    per[name]["purity"] = to_json(meas.estimates[1]);
    per[name]["exact_fidelity"] = ex.exact_fidelity;
    per[name]["exact_purity"] = ex.exact_purity;
    per[name]["exact_chi"] = matrix_json(ex.exact_chi.chi());
    sum_f += meas.estimates[0].value;
    sum_p += meas.estimates[1].value;
    sum_ef += ex.exact_fidelity;
    sum_ep += ex.exact_purity;
    static constexpr std::array<std::string_view, 4> pol_names = {"H", "V", "D", "R"};
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 6; ++k)
        tab.rows.push_back({name, std::string(pol_names[j]), std::string(kMomentumLabels[k]), number_text(meas.counts[6 * j + k])});
  }
  r.payload["inputs"] = per;
  r.payload["estimates"]["mean_fidelity"] = sum_f / 4.0;
  r.payload["estimates"]["mean_purity"] = sum_p / 4.0;
  r.payload["exact"]["mean_fidelity"] = sum_ef / 4.0;
  r.payload["exact"]["mean_purity"] = sum_ep / 4.0;
  r.payload["setting_time_s"] = t;
  r.tables.push_back(std::move(tab));
  return r;
}

inline Report run_process_2q(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& chip = cfg.chip(0);
  const auto& solver = process_2q_solver();
  const auto ideal = ideal_process(2, cfg.logical_frame);
  const auto ex = exact_process_2q(chip, cfg.logical_frame);
  const double t = cfg.integration_time_s / (16.0 * 36.0);

  std::vector<double> means;
  for (const auto& in : solver.inputs()) {
    const auto f = exact_frequencies_2q(process_2q_output(chip, in, cfg.logical_frame));
    for (const auto& row : f)
      for (double x : row) means.push_back(cfg.pair_rate_hz * t * x + cfg.background_rate_hz * t);
  }
  ProcessMatrix last = ex.exact_chi;
  auto est = [&](const std::vector<double>& c) {
    std::vector<DensityMatrix> outs;
    for (std::size_t j = 0; j < 16; ++j) {
      Frequencies2q n{};
      for (std::size_t a = 0; a < 6; ++a)
        for (std::size_t b = 0; b < 6; ++b) n[a][b] = c[36 * j + 6 * a + b];
      outs.push_back(state_tomo_2q(n));
    }
    last = solver.reconstruct(outs);
    return std::vector<double>{process_fidelity(last, ideal), process_purity(last)};
  };
  const auto meas = detail::measure(means, cfg, [&](const std::vector<double>& c) { return est(c); });
  est(meas.counts);  // leaves the measured chi in `last`

  Report r{"tomo-process", detail::base_payload("tomo-process", cfg), {}};
  r.payload["qubits"] = 2;
  r.payload["estimates"]["fidelity"] = to_json(meas.estimates[0]);
  r.payload["estimates"]["purity"] = to_json(meas.estimates[1]);
  r.payload["exact"]["fidelity"] = ex.exact_fidelity;
  r.payload["exact"]["purity"] = ex.exact_purity;
  r.payload["measured_chi"] = matrix_json(last.chi());
  r.payload["setting_time_s"] = t;
  r.tables.push_back(matrix_table("chi_measured", last.chi()));
  r.tables.push_back(matrix_table("chi_exact", ex.exact_chi.chi()));
  return r;
}

// ---------------------------------------------------------------------------
// state tomography of a chip output

/// |m> (x) |p> through the chip, heralded, in the configured frame; 6x6 grid
/// tomography compared with the ideal gate's output.
inline Report run_state_tomography(const ExperimentConfig& cfg, int momentum_setting, int polarization_setting) {
  cfg.validate();
  const auto in = DensityMatrix::trusted(kron(setting_projector(momentum_setting), setting_projector(polarization_setting)));
  const auto exact = process_2q_output(cfg.chip(0), in, cfg.logical_frame);
  const Matrix u = cfg.logical_frame == LogicalFrame::RAW ? ideal_swap_operator() : swap_gate();
  const auto target = DensityMatrix::trusted(u * in.matrix() * u.adjoint());
  const double t = cfg.integration_time_s / 36.0;
  std::vector<double> means;
  for (const auto& row : exact_frequencies_2q(exact))
    for (double x : row) means.push_back(cfg.pair_rate_hz * t * x + cfg.background_rate_hz * t);
  auto grid = [](const std::vector<double>& c) {
    Frequencies2q n{};
    for (std::size_t a = 0; a < 6; ++a)
      for (std::size_t b = 0; b < 6; ++b) n[a][b] = c[6 * a + b];
    return n;
  };
  const auto meas = detail::measure(means, cfg, [&](const std::vector<double>& c) {
    return std::vector<double>{uhlmann_fidelity(state_tomo_2q(grid(c)), target)};
  });
  const auto rho = state_tomo_2q(grid(meas.counts));

  Report r{"tomo-state", detail::base_payload("tomo-state", cfg), {}};
  r.payload["input"] = {{"momentum", kMomentumLabels[static_cast<std::size_t>(momentum_setting)]},
                        {"polarization", kPolarizationLabels[static_cast<std::size_t>(polarization_setting)]}};
  r.payload["estimates"]["fidelity"] = to_json(meas.estimates[0]);
  r.payload["exact"]["fidelity"] = uhlmann_fidelity(exact, target);
  r.payload["density_matrix"] = matrix_json(rho.matrix());
  CountRecord rec;
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = 0; b < 6; ++b)
      rec.entries.push_back({std::string(kMomentumLabels[a]), std::string(kPolarizationLabels[b]),
                             static_cast<std::int64_t>(meas.counts[6 * a + b]), t, cfg.rng_seed});
  const auto rows = csv::parse(rec.to_csv());
  r.tables.push_back({"counts", rows.front(), {rows.begin() + 1, rows.end()}});
  r.tables.push_back(matrix_table("density_matrix", rho.matrix()));
  return r;
}

// ---------------------------------------------------------------------------
// fringe scan

/// Probability of a detection at combiner port 0 for |port> (x) phase_v(phi)|D>.
/// Port 0 collects (T + e^{i theta} B) / sqrt 2. Leakage gives the two arms a
/// phi-independent coherence, so the visibility depends on theta.
/// The analyzer passes the ideal output polarization (V for T, H for B).
inline double fringe_probability(const ChipModel& chip, Port port, double phi, bool analyzer, double arm_phase_rad = 0.0) {
  const Vector pol = phase_v(phi) * linear_pol(kPi / 4.0);
  const Vector psi = kron(PureState::basis(2, static_cast<int>(port)).amplitudes(), pol);
  Matrix rho = chip.apply(DensityMatrix::trusted(psi * psi.adjoint())).matrix();
  if (analyzer) {
    const Vector a = PureState::basis(2, port == Port::T ? 1 : 0).amplitudes();
    const Matrix p = kron(identity(2), a * a.adjoint());
    rho = p * rho * p;
  }
  Matrix arm = identity(2);
  arm(1, 1) = -kI * std::exp(kI * arm_phase_rad);
  const Matrix bs = spatial(bs5050() * arm);
  rho = bs * rho * bs.adjoint();
  return (rho(0, 0) + rho(1, 1)).real();
}

inline std::vector<double> default_fringe_phases(int n = 24) {
  std::vector<double> p;
  for (int k = 0; k < n; ++k) p.push_back(2.0 * kPi * k / n);
  return p;
}

inline Report run_fringe_scan(const ExperimentConfig& cfg, const std::vector<double>& phases, Port port = Port::T) {
  cfg.validate();
  if (phases.size() < 5) throw ConfigError("fringe: need at least 5 phases");
  const auto& chip = cfg.chip(0);
  const double scale = cfg.pair_rate_hz * cfg.fringe_bin_s;
  std::vector<double> ideal;
  for (double phi : phases) ideal.push_back(scale * fringe_probability(chip, port, phi, cfg.fringe_analyzer, cfg.fringe_arm_phase_rad));
  const auto noiseless = fringe_fit(phases, ideal);

  // Background per bin: calibrated to a target raw visibility, else the configured rate.
  double bg = cfg.background_rate_hz * cfg.fringe_bin_s;
  if (cfg.fringe_target_raw_visibility)
    bg = std::max(0.0, noiseless.amplitude * (noiseless.visibility / *cfg.fringe_target_raw_visibility - 1.0));
  std::vector<double> means;
  for (double x : ideal) means.push_back(x + bg);

  const auto meas = detail::measure(means, cfg, [&](const std::vector<double>& c) {
    const auto f = fringe_fit(phases, c, bg);
    return std::vector<double>{f.visibility, f.visibility_subtracted, f.phase_offset};
  });
  const auto fit = fringe_fit(phases, meas.counts, bg);

  Report r{"fringe", detail::base_payload("fringe", cfg), {}};
  r.payload["input_port"] = port == Port::T ? "T" : "B";
  r.payload["analyzer"] = cfg.fringe_analyzer;
  r.payload["arm_phase_rad"] = cfg.fringe_arm_phase_rad;
  r.payload["bin_s"] = cfg.fringe_bin_s;
  r.payload["background_counts_per_bin"] = bg;
  r.payload["background_rate_hz"] = bg / cfg.fringe_bin_s;
  r.payload["estimates"]["visibility_raw"] = to_json(meas.estimates[0]);
  r.payload["estimates"]["visibility_subtracted"] = to_json(meas.estimates[1]);
  r.payload["estimates"]["phase_offset_rad"] = to_json(meas.estimates[2]);
  r.payload["estimates"]["fit_visibility_stderr"] = fit.visibility_stderr;
  r.payload["estimates"]["fit_converged"] = fit.converged;
  r.payload["exact"]["visibility"] = noiseless.visibility;
  r.payload["exact"]["phase_offset_rad"] = noiseless.phase_offset;
  Table tab{"fringe", {"phase_rad", "counts", "expected_counts"}, {}};
  for (std::size_t i = 0; i < phases.size(); ++i)
    tab.rows.push_back({number_text(phases[i]), number_text(meas.counts[i]), number_text(means[i])});
  r.tables.push_back(std::move(tab));
  return r;
}

// ---------------------------------------------------------------------------
// Hong-Ou-Mandel

/// Heralded two-photon state at the combiner and the controller setting.
struct HomSetup {
  BiphotonState state;
  Matrix controller;
};

inline HomSetup hom_setup(const ExperimentConfig& cfg, HomInput input) {
  const auto wl = cfg.wavelengths();
  std::optional<BiphotonState> st;
  if (input == HomInput::SOURCE_ONLY) {
    st = spdc_state(wl.pump_nm, wl.signal_nm, cfg.coherence_time_ps);
  } else {
    const bool tv = input == HomInput::TV_BH;
    const auto s = PureState::basis(4, tv ? mode::TV : mode::TH);
    const auto i = PureState::basis(4, tv ? mode::BH : mode::BV);
    const auto raw = apply_both(product_state(s, i, cfg.coherence_time_ps, wl), cfg.chip(0).channel());
    st = raw.with_joint(detail::herald(raw.joint()));
  }
  const Matrix w = cfg.hom_controller ? optimize_controller(st->joint().matrix()) : identity(2);
  return {*st, w};
}

inline std::vector<double> default_hom_delays() {
  std::vector<double> d;
  for (int k = -30; k <= 30; ++k) d.push_back(0.5 * k);
  return d;
}

inline Report run_hom_scan(const ExperimentConfig& cfg, const std::vector<double>& delays_ps,
                           HomInput input = HomInput::TV_BH) {
  cfg.validate();
  if (delays_ps.size() < 5) throw ConfigError("hom: need at least 5 delays");
  const auto setup = hom_setup(cfg, input);
  const double t = cfg.integration_time_s / static_cast<double>(delays_ps.size());
  const double scale = cfg.pair_rate_hz * t;
  std::vector<double> ideal;
  for (double tau : delays_ps) ideal.push_back(scale * hom_coincidence(setup.state, tau, 0.0, cfg.hom_shape, setup.controller));

  std::optional<DipFit> noiseless;
  try {
    noiseless = hom_visibility(delays_ps, ideal);
  } catch (const EstimationError&) {
  }
  double bg = cfg.background_rate_hz * t;
  if (cfg.hom_target_raw_visibility && noiseless)
    bg = std::max(0.0, noiseless->baseline * (noiseless->visibility_raw / *cfg.hom_target_raw_visibility - 1.0));
  std::vector<double> means;
  for (double x : ideal) means.push_back(x + bg);

  auto weights = [](const std::vector<double>& c) {
    std::vector<double> w;
    for (double x : c) w.push_back(1.0 / std::max(1.0, x));
    return w;
  };
  const auto meas = detail::measure(means, cfg, [&](const std::vector<double>& c) {
    const auto f = hom_visibility(delays_ps, c, bg, weights(c));
    return std::vector<double>{f.visibility_raw, f.visibility_subtracted, f.sigma_ps, f.fwhm_ps};
  });

  Report r{"hom", detail::base_payload("hom", cfg), {}};
  r.payload["input"] = hom_input_name(input);
  r.payload["controller"] = cfg.hom_controller;
  r.payload["overlap"] = hom_overlap(setup.state.joint().matrix(), setup.controller);
  r.payload["point_time_s"] = t;
  r.payload["background_counts_per_point"] = bg;
  r.payload["estimates"]["visibility_raw"] = to_json(meas.estimates[0]);
  r.payload["estimates"]["visibility_subtracted"] = to_json(meas.estimates[1]);
  r.payload["estimates"]["coherence_time_ps"] = to_json(meas.estimates[2]);
  r.payload["estimates"]["fwhm_ps"] = to_json(meas.estimates[3]);
  if (noiseless) {
    r.payload["exact"]["visibility"] = noiseless->visibility_raw;
    r.payload["exact"]["coherence_time_ps"] = noiseless->sigma_ps;
  } else {
    r.payload["exact"]["visibility"] = 0.0;
  }
  r.payload["exact"]["coincidence_at_zero"] = hom_coincidence(setup.state, 0.0, 0.0, cfg.hom_shape, setup.controller);
  Table tab{"hom", {"delay_ps", "counts", "expected_counts"}, {}};
  for (std::size_t i = 0; i < delays_ps.size(); ++i)
    tab.rows.push_back({number_text(delays_ps[i]), number_text(meas.counts[i]), number_text(means[i])});
  r.tables.push_back(std::move(tab));
  return r;
}

// ---------------------------------------------------------------------------
// Bell-state distribution between two chips

/// Haar-random polarization unitary for the link of one photon.
inline Matrix fiber_unitary(Rng& rng) {
  const double a = 2.0 * kPi * rng.uniform();
  const double b = std::acos(1.0 - 2.0 * rng.uniform());
  const double c = 2.0 * kPi * rng.uniform();
  return su2_zyz(a, b, c);
}

/// Fiber rotation, its compensation, and a residual rotation about y.
inline QuantumChannel fiber_link(const Matrix& u, double residual_rad) {
  const Matrix total = su2_zyz(0.0, residual_rad, 0.0) * u.adjoint() * u;
  return QuantumChannel::unitary(on_channels(total, {0, 1}));
}

/// Post-selected (signal at T, idler at B) polarization state after
/// chip 1 -> fiber -> chip 2, normalized.
inline DensityMatrix bell_output_state(const ExperimentConfig& cfg, BellLabel label) {
  auto st = prepare_bell(label, cfg.bell_visibility, cfg.coherence_time_ps, cfg.wavelengths());
  st = apply_both(st, cfg.chip(0).channel());
  Rng rng(trial_seed(cfg.rng_seed, 0xF1BE7ULL));
  st = apply_local(st, fiber_link(fiber_unitary(rng), cfg.fiber_residual_rad), Photon::SIGNAL);
  st = apply_local(st, fiber_link(fiber_unitary(rng), cfg.fiber_residual_rad), Photon::IDLER);
  st = apply_both(st, cfg.chip(1).channel());
  const Matrix pol = polarization_block(st.joint().matrix(), Port::T, Port::B);
  const double p = real_trace(pol);
  if (p <= tol::kVacuum) throw VacuumError("bell: no coincidences on the analyzer ports");
  return DensityMatrix::trusted(pol / p);
}

struct BellResult {
  BellLabel label;
  double exact_fidelity;
  Estimate fidelity;
  DensityMatrix measured;
  std::vector<double> counts;
};

inline BellResult run_bell_distribution(const ExperimentConfig& cfg, BellLabel label) {
  cfg.validate();
  const auto exact = bell_output_state(cfg, label);
  const auto ideal = DensityMatrix::from_pure(PureState(bell_vector(label)));
  const double t = cfg.integration_time_s / 36.0;
  std::vector<double> means;
  for (const auto& row : exact_frequencies_2q(exact))
    for (double x : row) means.push_back(cfg.pair_rate_hz * t * x + cfg.background_rate_hz * t);
  auto grid = [](const std::vector<double>& c) {
    Frequencies2q n{};
    for (std::size_t a = 0; a < 6; ++a)
      for (std::size_t b = 0; b < 6; ++b) n[a][b] = c[6 * a + b];
    return n;
  };
  ExperimentConfig sub = cfg;
  sub.rng_seed = trial_seed(cfg.rng_seed, 2000 + static_cast<std::uint64_t>(label));
  const auto meas = detail::measure(means, sub, [&](const std::vector<double>& c) {
    return std::vector<double>{uhlmann_fidelity(state_tomo_2q(grid(c)), ideal)};
  });
  return {label, uhlmann_fidelity(exact, ideal), meas.estimates[0], state_tomo_2q(grid(meas.counts)), meas.counts};
}

inline constexpr std::array<BellLabel, 4> kAllBellLabels = {BellLabel::PSI_PLUS, BellLabel::PSI_MINUS, BellLabel::PHI_PLUS,
                                                            BellLabel::PHI_MINUS};

inline Report run_bell_distribution(const ExperimentConfig& cfg, const std::vector<BellLabel>& labels) {
  if (labels.empty()) throw ConfigError("bell: no labels requested");
  Report r{"bell", detail::base_payload("bell", cfg), {}};
  r.payload["bell_visibility"] = cfg.bell_visibility;
  r.payload["fiber_residual_rad"] = cfg.fiber_residual_rad;
  Json per = Json::object();
  double sum = 0.0, var = 0.0, sum_exact = 0.0;
  int failed = 0;
  for (auto l : labels) {
    const auto b = run_bell_distribution(cfg, l);
    const std::string name(bell_name(l));
    per[name]["fidelity"] = to_json(b.fidelity);
    per[name]["exact_fidelity"] = b.exact_fidelity;
    per[name]["density_matrix"] = matrix_json(b.measured.matrix());
    sum += b.fidelity.value;
    var += b.fidelity.std_error * b.fidelity.std_error;
    failed += b.fidelity.failed_trials;
    sum_exact += b.exact_fidelity;
    r.tables.push_back(matrix_table("rho_" + name, b.measured.matrix()));
  }
  r.payload["states"] = per;
  // Labels are drawn independently.
  const double n = static_cast<double>(labels.size());
  r.payload["estimates"]["mean_fidelity"] = to_json(Estimate{sum / n, std::sqrt(var) / n, failed});
  r.payload["exact"]["mean_fidelity"] = sum_exact / static_cast<double>(labels.size());
  r.payload["exact"]["chip2_truth_table_fidelity"] = exact_truth_table_fidelity(cfg.chip(1), cfg.logical_frame);
  return r;
}

// ---------------------------------------------------------------------------
// error budget

struct SweepAxis {
  std::string key;
  std::vector<double> values;
};

inline const std::vector<std::string>& sweep_keys() {
  static const std::vector<std::string> keys = {"er_db",       "pc_er_db",  "mc_er_db",          "imbalance_db",
                                                "mc_loss_db", "xtalk_amp", "rotation_error_rad"};
  return keys;
}

/// Canonical key; the unit suffix may be omitted ("er" for "er_db").
inline std::string canonical_sweep_key(const std::string& key) {
  for (const auto& k : sweep_keys())
    if (k == key || k.substr(0, k.rfind('_')) == key) return k;
  throw ConfigError("sweep: unknown parameter '" + key + "'");
}

/// Larger is worse for every key except extinction ratios.
inline bool worse_when_larger(const std::string& key) { return key.find("er_db") == std::string::npos; }

/// Extinction ratios must be positive; every other imperfection is a
/// non-negative magnitude (a negative rotation error would cancel the
/// extinction-limited rotation rather than add to it).
inline void set_sweep_param(ChipParams& p, const std::string& key, double v) {
  const auto k = canonical_sweep_key(key);
  if (std::isnan(v)) throw ConfigError("sweep: " + k + " is NaN");
  if (worse_when_larger(k) ? v < 0.0 : !(v > 0.0))
    throw ConfigError("sweep: " + k + " value " + number_text(v) + " out of range");
  if (k == "er_db") p.pc1_extinction_db = p.pc2_extinction_db = p.mc_extinction_db = v;
  else if (k == "pc_er_db") p.pc1_extinction_db = p.pc2_extinction_db = v;
  else if (k == "mc_er_db") p.mc_extinction_db = v;
  else if (k == "imbalance_db") p.imbalance_db = v;
  else if (k == "mc_loss_db") p.mc_loss_db = v;
  else if (k == "xtalk_amp") p.xtalk_amp = v;
  else p.rotation_error_rad = v;
}

struct BudgetPoint {
  std::vector<double> values;  // one per axis
  double truth_table_fidelity;
  double process_fidelity;
};

struct BudgetResult {
  std::vector<std::string> keys;
  std::vector<BudgetPoint> points;
  std::map<std::string, bool> monotone_truth_table;
  std::map<std::string, bool> monotone_process;
};

inline BudgetResult error_budget(const ChipParams& base, const std::vector<SweepAxis>& axes, LogicalFrame frame) {
  if (axes.empty()) throw ConfigError("sweep: empty grid");
  BudgetResult res;
  std::vector<std::size_t> sizes;
  for (const auto& a : axes) {
    if (a.values.empty()) throw ConfigError("sweep: axis '" + a.key + "' has no values");
    res.keys.push_back(canonical_sweep_key(a.key));
    sizes.push_back(a.values.size());
  }
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;) {
    ChipParams p = base;
    BudgetPoint pt;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      pt.values.push_back(axes[k].values[idx[k]]);
      set_sweep_param(p, res.keys[k], axes[k].values[idx[k]]);
    }
    const auto chip = build_chip(p);
    pt.truth_table_fidelity = exact_truth_table_fidelity(chip, frame);
    pt.process_fidelity = exact_process_2q(chip, frame).exact_fidelity;
    res.points.push_back(std::move(pt));
    // Odometer increment, last axis fastest.
    std::size_t k = axes.size();
    while (k > 0 && ++idx[k - 1] == sizes[k - 1]) idx[--k] = 0;
    if (k == 0) break;
  }

  // Along each axis, with the others fixed, fidelity must not rise as the
  // imperfection grows.
  for (std::size_t k = 0; k < axes.size(); ++k) {
    bool tt_ok = true, pf_ok = true;
    for (std::size_t a = 0; a < res.points.size(); ++a)
      for (std::size_t b = 0; b < res.points.size(); ++b) {
        const auto& pa = res.points[a];
        const auto& pb = res.points[b];
        bool same_others = true;
        for (std::size_t o = 0; o < axes.size(); ++o)
          if (o != k && pa.values[o] != pb.values[o]) same_others = false;
        if (!same_others) continue;
        const bool b_worse = worse_when_larger(res.keys[k]) ? pb.values[k] > pa.values[k] : pb.values[k] < pa.values[k];
        if (!b_worse) continue;
        if (pb.truth_table_fidelity > pa.truth_table_fidelity + 1e-12) tt_ok = false;
        if (pb.process_fidelity > pa.process_fidelity + 1e-12) pf_ok = false;
      }
    res.monotone_truth_table[res.keys[k]] = tt_ok;
    res.monotone_process[res.keys[k]] = pf_ok;
  }
  return res;
}

inline Report run_error_budget(const ExperimentConfig& cfg, const std::vector<SweepAxis>& axes) {
  cfg.validate();
  const auto res = error_budget(cfg.chip_params, axes, cfg.logical_frame);
  Report r{"sweep", detail::base_payload("sweep", cfg), {}};
  r.payload["keys"] = res.keys;
  Json pts = Json::array();
  Table tab{"sweep", res.keys, {}};
  tab.header.push_back("truth_table_fidelity");
  tab.header.push_back("process_fidelity");
  for (const auto& p : res.points) {
    Json j;
    std::vector<std::string> row;
    for (std::size_t k = 0; k < res.keys.size(); ++k) {
      j[res.keys[k]] = std::isinf(p.values[k]) ? Json("inf") : Json(p.values[k]);
      row.push_back(number_text(p.values[k]));
    }
    j["truth_table_fidelity"] = p.truth_table_fidelity;
    j["process_fidelity"] = p.process_fidelity;
    row.push_back(number_text(p.truth_table_fidelity));
    row.push_back(number_text(p.process_fidelity));
    pts.push_back(j);
    tab.rows.push_back(std::move(row));
  }
  r.payload["points"] = pts;
  Json mono;
  for (const auto& k : res.keys) {
    mono[k]["truth_table"] = res.monotone_truth_table.at(k);
    mono[k]["process"] = res.monotone_process.at(k);
  }
  r.payload["monotone"] = mono;
  r.tables.push_back(std::move(tab));
  return r;
}

}  // namespace swapsim
