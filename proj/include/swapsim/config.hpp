#pragma once

// JSON run configuration (schema_version 1). Every physical quantity carries
// its unit in the field name; unknown keys are rejected so typos surface.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "swapsim/experiments.hpp"
#include "swapsim/netlist.hpp"

namespace swapsim {

struct RunConfig {
  ExperimentConfig experiment;
  Port fringe_port = Port::T;
  std::vector<double> fringe_phases = default_fringe_phases();
  HomInput hom_input = HomInput::TV_BH;
  std::vector<double> hom_delays_ps = default_hom_delays();
  std::vector<BellLabel> bell_labels{kAllBellLabels.begin(), kAllBellLabels.end()};
  int tomo_momentum_input = 0;      // setting index, see kMomentumLabels
  int tomo_polarization_input = 0;  // setting index, see kPolarizationLabels
  int process_qubits = 1;
  std::vector<SweepAxis> sweep_grid;
  std::string netlist_path;  // resolved; empty when chips come from parameters
};

inline HomInput hom_input_from_name(const std::string& s) {
  for (auto h : {HomInput::TV_BH, HomInput::TH_BV, HomInput::SOURCE_ONLY})
    if (hom_input_name(h) == s) return h;
  throw ConfigError("config: hom input must be TV_BH, TH_BV or SOURCE_ONLY");
}

inline Port port_from_name(const std::string& s) {
  if (s == "T") return Port::T;
  if (s == "B") return Port::B;
  throw ConfigError("config: port must be T or B");
}

namespace config_detail {

using nlohmann::json;

inline std::string path_of(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: '" + (where.empty() ? std::string("<root>") : where) + "' must be an object");
}

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  require_object(j, where);
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("config: unknown key '" + path_of(where, k) + "'");
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError("config: '" + where + "' must be a number");
  return j.get<double>();
}

/// Numbers, plus the strings "inf" / "infinity" for extinction ratios.
inline double number_or_inf(const json& j, const std::string& where) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return kInf;
  }
  return number(j, where);
}

inline bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) throw ConfigError("config: '" + where + "' must be true or false");
  return j.get<bool>();
}

inline std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError("config: '" + where + "' must be a string");
  return j.get<std::string>();
}

inline std::vector<double> number_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError("config: '" + where + "' must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number_or_inf(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline ChipParams chip_params(const json& j, const std::string& where) {
  reject_unknown(j,
                 {"pc1_extinction_db", "mc_extinction_db", "pc2_extinction_db", "mc_loss_db", "facet_loss_db",
                  "imbalance_db", "xtalk_amp", "rotation_error_rad", "coherence"},
                 where);
  ChipParams p;
  auto get = [&](const char* key, double& dst, bool allow_inf = false) {
    if (!j.contains(key)) return;
    dst = allow_inf ? number_or_inf(j[key], path_of(where, key)) : number(j[key], path_of(where, key));
  };
  get("pc1_extinction_db", p.pc1_extinction_db, true);
  get("mc_extinction_db", p.mc_extinction_db, true);
  get("pc2_extinction_db", p.pc2_extinction_db, true);
  get("mc_loss_db", p.mc_loss_db);
  get("facet_loss_db", p.facet_loss_db);
  get("imbalance_db", p.imbalance_db);
  get("xtalk_amp", p.xtalk_amp);
  get("rotation_error_rad", p.rotation_error_rad);
  get("coherence", p.coherence);
  return p;
}

inline int setting_of(const std::string& label, Subsystem want, const std::string& where) {
  const auto s = setting_from_label(label);
  if (!s || s->subsystem != want) throw ConfigError("config: '" + where + "' has unknown setting '" + label + "'");
  return s->index;
}

inline LogicalFrame frame_from_name(const std::string& s) {
  if (s == "RAW") return LogicalFrame::RAW;
  if (s == "RELABELED") return LogicalFrame::RELABELED;
  throw ConfigError("config: logical_frame must be RAW or RELABELED");
}

inline std::string read_text(const std::filesystem::path& p, const char* what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError(std::string("cannot read ") + what + " '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace config_detail

/// Chips from netlist source: every declared chip in order (chip 1, chip 2).
/// Parse and compile failures propagate as netlist::NetlistError.
inline std::vector<ChipModel> chips_from_netlist(std::string_view source) {
  return netlist::compile_all(netlist::parse(source));
}

/// Netlist referenced by a configuration, kept for error rendering.
struct ConfigSources {
  std::string netlist_path;
  std::string netlist_text;
};

/// Parses a configuration document. `base_dir` resolves a relative
/// "netlist" path. `sources` is filled before the netlist is compiled, so a
/// caller catching netlist::NetlistError can render it.
inline RunConfig parse_config(std::string_view document, const std::filesystem::path& base_dir = {},
                              ConfigSources* sources = nullptr) {
  using namespace config_detail;
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  reject_unknown(doc,
                 {"schema_version", "netlist", "chip", "chip2", "source", "counting", "fringe", "hom", "bell",
                  "tomography", "sweep", "n_trials", "rng_seed", "logical_frame"},
                 "");
  if (!doc.contains("schema_version")) throw ConfigError("config: missing schema_version");
  if (!doc["schema_version"].is_number_integer() || doc["schema_version"].get<int>() != 1)
    throw ConfigError("config: unsupported schema_version (expected 1)");

  RunConfig rc;
  auto& e = rc.experiment;
  std::string nl_src;

  if (doc.contains("chip")) e.chip_params = chip_params(doc["chip"], "chip");
  e.chips = {build_chip(e.chip_params, "chip1")};
  if (doc.contains("chip2")) e.chips.push_back(build_chip(chip_params(doc["chip2"], "chip2"), "chip2"));
  if (doc.contains("netlist")) {
    const auto rel = text(doc["netlist"], "netlist");
    const auto p = std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel) : base_dir / rel;
    nl_src = read_text(p, "netlist");
    rc.netlist_path = p.string();
    if (sources) *sources = {rc.netlist_path, nl_src};
    e.chips = chips_from_netlist(nl_src);
  }

  if (doc.contains("source")) {
    const auto& s = doc["source"];
    reject_unknown(s, {"pump_wavelength_nm", "signal_wavelength_nm", "coherence_time_ps", "bell_visibility"}, "source");
    if (s.contains("pump_wavelength_nm")) e.pump_wavelength_nm = number(s["pump_wavelength_nm"], "source.pump_wavelength_nm");
    if (s.contains("signal_wavelength_nm")) e.signal_wavelength_nm = number(s["signal_wavelength_nm"], "source.signal_wavelength_nm");
    if (s.contains("coherence_time_ps")) e.coherence_time_ps = number(s["coherence_time_ps"], "source.coherence_time_ps");
    if (s.contains("bell_visibility")) e.bell_visibility = number(s["bell_visibility"], "source.bell_visibility");
  }
  if (doc.contains("counting")) {
    const auto& c = doc["counting"];
    reject_unknown(c, {"pair_rate_hz", "integration_time_s", "background_rate_hz"}, "counting");
    if (c.contains("pair_rate_hz")) e.pair_rate_hz = number(c["pair_rate_hz"], "counting.pair_rate_hz");
    if (c.contains("integration_time_s")) e.integration_time_s = number(c["integration_time_s"], "counting.integration_time_s");
    if (c.contains("background_rate_hz")) e.background_rate_hz = number(c["background_rate_hz"], "counting.background_rate_hz");
  }
  if (doc.contains("fringe")) {
    const auto& f = doc["fringe"];
    reject_unknown(f, {"bin_s", "target_raw_visibility", "analyzer", "arm_phase_rad", "input_port", "phases_rad"}, "fringe");
    if (f.contains("bin_s")) e.fringe_bin_s = number(f["bin_s"], "fringe.bin_s");
    if (f.contains("target_raw_visibility") && !f["target_raw_visibility"].is_null())
      e.fringe_target_raw_visibility = number(f["target_raw_visibility"], "fringe.target_raw_visibility");
    if (f.contains("analyzer")) e.fringe_analyzer = boolean(f["analyzer"], "fringe.analyzer");
    if (f.contains("arm_phase_rad")) e.fringe_arm_phase_rad = number(f["arm_phase_rad"], "fringe.arm_phase_rad");
    if (f.contains("input_port")) rc.fringe_port = port_from_name(text(f["input_port"], "fringe.input_port"));
    if (f.contains("phases_rad")) rc.fringe_phases = number_list(f["phases_rad"], "fringe.phases_rad");
  }
  if (doc.contains("hom")) {
    const auto& h = doc["hom"];
    reject_unknown(h, {"target_raw_visibility", "controller", "shape", "input", "delays_ps"}, "hom");
    if (h.contains("target_raw_visibility") && !h["target_raw_visibility"].is_null())
      e.hom_target_raw_visibility = number(h["target_raw_visibility"], "hom.target_raw_visibility");
    if (h.contains("controller")) e.hom_controller = boolean(h["controller"], "hom.controller");
    if (h.contains("shape")) {
      const auto s = text(h["shape"], "hom.shape");
      if (s == "GAUSSIAN") e.hom_shape = SpectralShape::GAUSSIAN;
      else if (s == "TRIANGULAR") e.hom_shape = SpectralShape::TRIANGULAR;
      else throw ConfigError("config: hom.shape must be GAUSSIAN or TRIANGULAR");
    }
    if (h.contains("input")) rc.hom_input = hom_input_from_name(text(h["input"], "hom.input"));
    if (h.contains("delays_ps")) rc.hom_delays_ps = number_list(h["delays_ps"], "hom.delays_ps");
  }
  if (doc.contains("bell")) {
    const auto& b = doc["bell"];
    reject_unknown(b, {"labels", "fiber_residual_rad"}, "bell");
    if (b.contains("fiber_residual_rad")) e.fiber_residual_rad = number(b["fiber_residual_rad"], "bell.fiber_residual_rad");
    if (b.contains("labels")) {
      if (!b["labels"].is_array()) throw ConfigError("config: 'bell.labels' must be an array");
      rc.bell_labels.clear();
      for (const auto& l : b["labels"]) {
        const auto lab = bell_from_name(text(l, "bell.labels"));
        if (!lab) throw ConfigError("config: unknown Bell label '" + l.get<std::string>() + "'");
        rc.bell_labels.push_back(*lab);
      }
    }
  }
  if (doc.contains("tomography")) {
    const auto& t = doc["tomography"];
    reject_unknown(t, {"momentum_input", "polarization_input", "process_qubits"}, "tomography");
    if (t.contains("momentum_input"))
      rc.tomo_momentum_input = setting_of(text(t["momentum_input"], "tomography.momentum_input"), Subsystem::MOMENTUM,
                                          "tomography.momentum_input");
    if (t.contains("polarization_input"))
      rc.tomo_polarization_input = setting_of(text(t["polarization_input"], "tomography.polarization_input"),
                                              Subsystem::POLARIZATION, "tomography.polarization_input");
    if (t.contains("process_qubits")) {
      if (!t["process_qubits"].is_number_integer()) throw ConfigError("config: tomography.process_qubits must be 1 or 2");
      rc.process_qubits = t["process_qubits"].get<int>();
      if (rc.process_qubits != 1 && rc.process_qubits != 2)
        throw ConfigError("config: tomography.process_qubits must be 1 or 2");
    }
  }
  if (doc.contains("sweep")) {
    const auto& s = doc["sweep"];
    reject_unknown(s, {"grid"}, "sweep");
    if (s.contains("grid")) {
      require_object(s["grid"], "sweep.grid");
      for (const auto& [k, v] : s["grid"].items())
        rc.sweep_grid.push_back({canonical_sweep_key(k), number_list(v, "sweep.grid." + k)});
    }
  }
  if (doc.contains("n_trials")) {
    if (!doc["n_trials"].is_number_integer()) throw ConfigError("config: n_trials must be an integer");
    e.n_trials = doc["n_trials"].get<int>();
  }
  if (doc.contains("rng_seed")) {
    if (!doc["rng_seed"].is_number_unsigned()) throw ConfigError("config: rng_seed must be a non-negative integer");
    e.rng_seed = doc["rng_seed"].get<std::uint64_t>();
  }
  if (doc.contains("logical_frame")) e.logical_frame = frame_from_name(text(doc["logical_frame"], "logical_frame"));

  // Canonical dump sorts keys, so formatting of the source file does not matter.
  e.config_hash = "fnv1a64:" + hex64(fnv1a64(doc.dump() + nl_src));
  e.validate();
  return rc;
}

/// Replaces the chips with those declared in `source` and folds the
/// netlist text into the configuration hash.
inline void use_netlist(RunConfig& rc, std::string_view source, std::string path) {
  rc.experiment.chips = chips_from_netlist(source);
  rc.experiment.config_hash = "fnv1a64:" + hex64(fnv1a64(rc.experiment.config_hash + std::string(source)));
  rc.netlist_path = std::move(path);
}

inline RunConfig load_config(const std::filesystem::path& path, ConfigSources* sources = nullptr) {
  return parse_config(config_detail::read_text(path, "config"), path.parent_path(), sources);
}

}  // namespace swapsim
