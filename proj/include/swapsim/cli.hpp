#pragma once

// Command-line dispatch. Exit codes: 0 success, 1 configuration or runtime
// error, 2 netlist parse/compile error (spanned message on stderr), 64 usage.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "swapsim/config.hpp"

namespace swapsim::cli {

inline constexpr const char* kToolName = "swapsim";
inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kConfigError = 1, kParseError = 2, kUsage = 64 };

struct Options {
  std::string netlist;
  std::string config;
  std::string out_dir;
  std::string format;  // json | csv; empty picks the subcommand default
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<double> signal_nm;
  std::optional<double> pump_nm;
  std::optional<double> total_counts;
  std::string port;
  std::string hom_input;
  std::vector<std::string> labels;
  std::string input;
  std::string counts_path;
  std::optional<int> qubits;
  std::vector<std::string> grid;
  std::vector<std::string> files;
  bool write = false;
  bool check_only = false;
};

namespace detail {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

/// "er=18,25,35" or "er=18,25;imbalance=0,0.9".
inline std::vector<SweepAxis> parse_grid(const std::vector<std::string>& specs) {
  std::vector<SweepAxis> axes;
  for (const auto& spec : specs) {
    std::stringstream groups(spec);
    std::string group;
    while (std::getline(groups, group, ';')) {
      if (group.empty()) continue;
      const auto eq = group.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("grid: expected key=v1,v2,... in '" + group + "'");
      SweepAxis axis{canonical_sweep_key(group.substr(0, eq)), {}};
      std::stringstream vals(group.substr(eq + 1));
      std::string v;
      while (std::getline(vals, v, ',')) {
        if (v == "inf") {
          axis.values.push_back(kInf);
          continue;
        }
        double x = 0.0;
        const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
        if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) throw ConfigError("grid: bad number '" + v + "'");
        axis.values.push_back(x);
      }
      if (axis.values.empty()) throw ConfigError("grid: axis '" + axis.key + "' has no values");
      axes.push_back(std::move(axis));
    }
  }
  return axes;
}

/// "<momentum>,<polarization>", e.g. "+,H".
inline std::pair<int, int> parse_input(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ConfigError("input: expected '<momentum>,<polarization>' such as '+,H'");
  const auto m = setting_from_label(s.substr(0, comma));
  const auto p = setting_from_label(s.substr(comma + 1));
  if (!m || m->subsystem != Subsystem::MOMENTUM) throw ConfigError("input: unknown momentum setting '" + s.substr(0, comma) + "'");
  if (!p || p->subsystem != Subsystem::POLARIZATION)
    throw ConfigError("input: unknown polarization setting '" + s.substr(comma + 1) + "'");
  return {m->index, p->index};
}

inline RunConfig resolve_config(const Options& o, std::ostream& err, int& code) {
  RunConfig rc;
  ConfigSources sources;
  try {
    rc = o.config.empty() ? parse_config(R"({"schema_version": 1})") : load_config(o.config, &sources);
  } catch (const netlist::NetlistError& e) {
    err << e.render(sources.netlist_text, sources.netlist_path);
    code = kParseError;
    throw;
  }
  if (!o.netlist.empty()) {
    const auto src = read_file(o.netlist);
    try {
      use_netlist(rc, src, o.netlist);
    } catch (const netlist::NetlistError& e) {
      err << e.render(src, o.netlist);
      code = kParseError;
      throw;
    }
  }
  auto& e = rc.experiment;
  std::string overrides;
  if (o.signal_nm) {
    e.signal_wavelength_nm = *o.signal_nm;
    overrides += "|signal_wavelength_nm=" + number_text(*o.signal_nm);
  }
  if (o.pump_nm) {
    e.pump_wavelength_nm = *o.pump_nm;
    overrides += "|pump_wavelength_nm=" + number_text(*o.pump_nm);
  }
  if (o.total_counts) {
    if (!(*o.total_counts > 0.0)) throw ConfigError("--total-counts must be positive");
    e.integration_time_s = *o.total_counts / e.pair_rate_hz;
    overrides += "|total_counts=" + number_text(*o.total_counts);
  }
  if (!overrides.empty()) e.config_hash = "fnv1a64:" + hex64(fnv1a64(e.config_hash + overrides));
  if (o.seed) e.rng_seed = *o.seed;
  if (o.trials) e.n_trials = *o.trials;
  if (!o.port.empty()) rc.fringe_port = port_from_name(o.port);
  if (!o.hom_input.empty()) rc.hom_input = hom_input_from_name(o.hom_input);
  if (!o.labels.empty()) {
    rc.bell_labels.clear();
    for (const auto& l : o.labels) {
      const auto b = bell_from_name(l);
      if (!b) throw ConfigError("unknown Bell label '" + l + "'");
      rc.bell_labels.push_back(*b);
    }
  }
  if (!o.input.empty()) std::tie(rc.tomo_momentum_input, rc.tomo_polarization_input) = parse_input(o.input);
  if (o.qubits) {
    if (*o.qubits != 1 && *o.qubits != 2) throw ConfigError("--qubits must be 1 or 2");
    rc.process_qubits = *o.qubits;
  }
  if (!o.grid.empty()) rc.sweep_grid = parse_grid(o.grid);
  e.validate();
  return rc;
}

/// Density matrix from a recorded count table; 2q when the q2 column is set.
inline Report reconstruct_from_counts(const RunConfig& rc, const std::string& path) {
  const auto text = read_file(path);
  const auto rec = CountRecord::from_csv(text);
  if (rec.entries.empty()) throw ConfigError("counts: no records in '" + path + "'");
  const bool two = !rec.entries.front().q2.empty();
  const auto rho = two ? state_tomo_2q(rec) : state_tomo_1q(rec);
  Report r{"tomo-state", Json::object(), {}};
  r.payload["experiment"] = "tomo-state";
  r.payload["schema_version"] = 1;
  r.payload["source"] = "counts";
  r.payload["counts_hash"] = "fnv1a64:" + hex64(fnv1a64(text));
  r.payload["qubits"] = two ? 2 : 1;
  r.payload["estimates"]["purity"] = rho.purity();
  if (two) {
    const auto in = DensityMatrix::trusted(
        kron(setting_projector(rc.tomo_momentum_input), setting_projector(rc.tomo_polarization_input)));
    const Matrix u = rc.experiment.logical_frame == LogicalFrame::RAW ? ideal_swap_operator() : swap_gate();
    r.payload["input"] = {{"momentum", kMomentumLabels[static_cast<std::size_t>(rc.tomo_momentum_input)]},
                          {"polarization", kPolarizationLabels[static_cast<std::size_t>(rc.tomo_polarization_input)]}};
    r.payload["estimates"]["fidelity_to_ideal"] =
        uhlmann_fidelity(rho, DensityMatrix::trusted(u * in.matrix() * u.adjoint()));
  }
  r.payload["density_matrix"] = matrix_json(rho.matrix());
  r.tables.push_back(matrix_table("density_matrix", rho.matrix()));
  return r;
}

inline Report run_experiment(const std::string& cmd, const RunConfig& rc, const Options& o) {
  const auto& e = rc.experiment;
  if (cmd == "truth-table") return run_truth_table(e);
  if (cmd == "fringe") return run_fringe_scan(e, rc.fringe_phases, rc.fringe_port);
  if (cmd == "hom") return run_hom_scan(e, rc.hom_delays_ps, rc.hom_input);
  if (cmd == "bell") return run_bell_distribution(e, rc.bell_labels);
  if (cmd == "tomo-state") {
    if (!o.counts_path.empty()) return reconstruct_from_counts(rc, o.counts_path);
    return run_state_tomography(e, rc.tomo_momentum_input, rc.tomo_polarization_input);
  }
  if (cmd == "tomo-process") return rc.process_qubits == 1 ? run_process_1q(e) : run_process_2q(e);
  if (cmd == "sweep") {
    if (rc.sweep_grid.empty()) throw ConfigError("sweep: no grid (use --grid key=v1,v2,... or sweep.grid in the config)");
    return run_error_budget(e, rc.sweep_grid);
  }
  throw ConfigError("unknown experiment '" + cmd + "'");
}

inline int emit(const std::string& cmd, const Report& r, const Options& o, std::ostream& out) {
  Json run;
  run["tool"] = kToolName;
  run["version"] = kToolVersion;
  run["command"] = cmd;
  run["timestamp"] = utc_timestamp();
  const auto doc = r.document(run);
  const std::string format = !o.format.empty() ? o.format : (cmd == "sweep" ? "csv" : "json");
  if (!o.out_dir.empty()) {
    const std::filesystem::path dir(o.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + o.out_dir + "': " + ec.message());
    write_file(dir / (cmd + ".json"), doc.dump(2) + "\n");
    out << (dir / (cmd + ".json")).string() << "\n";
    for (const auto& t : r.tables) {
      write_file(dir / (t.name + ".csv"), t.to_csv());
      out << (dir / (t.name + ".csv")).string() << "\n";
    }
    return kOk;
  }
  if (format == "csv") {
    if (r.tables.empty()) throw ConfigError("report has no tables to print as CSV");
    out << r.tables.front().to_csv();
  } else {
    out << doc.dump(2) << "\n";
  }
  return kOk;
}

inline int run_fmt(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.files.empty()) throw ConfigError("fmt: no input file");
  int code = kOk;
  for (const auto& f : o.files) {
    const auto src = read_file(f);
    netlist::NetlistAst ast;
    try {
      ast = netlist::parse(src);
    } catch (const netlist::NetlistError& e) {
      err << e.render(src, f);
      code = kParseError;
      continue;
    }
    const auto formatted = netlist::format(ast);
    if (o.check_only) {
      if (formatted != src) {
        err << f << ": not in canonical format\n";
        if (code == kOk) code = kConfigError;
      }
    } else if (o.write) {
      if (formatted != src) write_file(f, formatted);
    } else {
      out << formatted;
    }
  }
  return code;
}

inline int run_check(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.files.empty()) throw ConfigError("check: no input file");
  int code = kOk;
  for (const auto& f : o.files) {
    const auto src = read_file(f);
    try {
      const auto chips = chips_from_netlist(src);
      out << "ok " << f << ": " << chips.size() << (chips.size() == 1 ? " chip" : " chips") << "\n";
    } catch (const netlist::NetlistError& e) {
      err << e.render(src, f);
      code = kParseError;
    }
  }
  return code;
}

}  // namespace detail

/// Entry point. `env_seed` is the SWAPSIM_SEED value, if set; --seed wins over it.
inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                    std::optional<std::string> env_seed = std::nullopt) {
  CLI::App app{"Photonic polarization/momentum SWAP gate simulator", kToolName};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* s) {
    s->add_option("--netlist", o.netlist, "Netlist (.pnl); replaces the configured chips")->check(CLI::ExistingFile);
    s->add_option("--config", o.config, "JSON configuration (schema_version 1)")->check(CLI::ExistingFile);
    s->add_option("--out", o.out_dir, "Write <command>.json and CSV tables into this directory");
    s->add_option("--seed", o.seed, "Master RNG seed (overrides SWAPSIM_SEED and the config)");
    s->add_option("--trials", o.trials, "Bootstrap resamples")->check(CLI::PositiveNumber);
    s->add_option("--format", o.format, "Standard output format")->check(CLI::IsMember({"json", "csv"}));
    s->add_option("--signal-nm", o.signal_nm, "Signal wavelength override");
    s->add_option("--pump-nm", o.pump_nm, "Pump wavelength override");
    s->add_option("--total-counts", o.total_counts, "Total count budget (sets the integration time)");
  };

  const std::vector<std::pair<std::string, std::string>> experiments = {
      {"truth-table", "Computational-basis truth table and its fidelity"},
      {"fringe", "Phase-coherence fringe scan"},
      {"hom", "Hong-Ou-Mandel delay scan after the chip"},
      {"bell", "Bell-state distribution between two chips"},
      {"tomo-state", "Two-qubit state tomography of a chip output"},
      {"tomo-process", "Process tomography (1 or 2 qubits)"},
      {"sweep", "Error budget over a parameter grid"}};
  for (const auto& [name, help] : experiments) {
    auto* s = app.add_subcommand(name, help);
    add_common(s);
    if (name == "fringe") s->add_option("--port", o.port, "Input port")->check(CLI::IsMember({"T", "B"}));
    if (name == "hom")
      s->add_option("--input", o.hom_input, "Input pair")->check(CLI::IsMember({"TV_BH", "TH_BV", "SOURCE_ONLY"}));
    if (name == "bell") s->add_option("--label", o.labels, "Bell state (repeatable)");
    if (name == "tomo-state") {
      s->add_option("--input", o.input, "Input '<momentum>,<polarization>', e.g. '+,H'");
      s->add_option("--counts", o.counts_path, "Reconstruct from a recorded count CSV")->check(CLI::ExistingFile);
    }
    if (name == "tomo-process") s->add_option("--qubits", o.qubits, "1 or 2");
    if (name == "sweep") s->add_option("--grid", o.grid, "key=v1,v2,... (repeatable, or ';'-separated)");
  }
  auto* fmt = app.add_subcommand("fmt", "Print a netlist in canonical form");
  fmt->add_option("files", o.files, "Netlist files")->required();
  fmt->add_flag("--write", o.write, "Rewrite files in place");
  fmt->add_flag("--check", o.check_only, "Exit 1 if any file is not canonical");
  auto* check = app.add_subcommand("check", "Parse and compile netlists");
  check->add_option("files", o.files, "Netlist files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const bool unknown = argc > 1 && argv[1][0] != '-' && app.get_subcommands().empty();
    if (unknown)
      err << "error: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
    else
      err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  int code = kConfigError;
  try {
    if (cmd == "fmt") return detail::run_fmt(o, out, err);
    if (cmd == "check") return detail::run_check(o, out, err);
    if (!o.seed && env_seed && !env_seed->empty()) {
      std::uint64_t s = 0;
      const auto r = std::from_chars(env_seed->data(), env_seed->data() + env_seed->size(), s);
      if (r.ec != std::errc{} || r.ptr != env_seed->data() + env_seed->size())
        throw ConfigError("SWAPSIM_SEED must be an unsigned integer");
      o.seed = s;
    }
    const auto rc = detail::resolve_config(o, err, code);
    return detail::emit(cmd, detail::run_experiment(cmd, rc, o), o, out);
  } catch (const netlist::NetlistError&) {
    return code;  // already rendered with its span
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace swapsim::cli
