#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "swapsim/cli.hpp"
#include "test_util.hpp"

using namespace swapsim;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args, std::optional<std::string> env_seed = std::nullopt) {
  args.insert(args.begin(), "swapsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err, env_seed);
  return {code, out.str(), err.str()};
}

std::string data(const std::string& rel) { return testutil::data_path(rel); }

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("swapsim_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

/// Error code of the first "error[XXXX]" in rendered output.
std::string rendered_code(const std::string& err) {
  const auto i = err.find("error[");
  return i == std::string::npos ? "" : err.substr(i + 6, 4);
}

}  // namespace

TEST(Cli, TruthTableReportHasFidelity) {
  const auto r = run({"truth-table", "--netlist", data("swap.pnl"), "--config", data("calibrated.json"), "--seed", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["payload"]["experiment"], "truth-table");
  EXPECT_EQ(doc["payload"]["seed"], 7);
  const double f = doc["payload"]["estimates"]["fidelity"]["value"].get<double>();
  EXPECT_GT(f, 0.95);
  EXPECT_LT(f, 0.995);
  EXPECT_EQ(doc["run"]["tool"], "swapsim");
  EXPECT_TRUE(doc["run"].contains("timestamp"));
}

TEST(Cli, PayloadIsReproducible) {
  const std::vector<std::string> args = {"fringe", "--config", data("calibrated.json"), "--seed", "3", "--trials", "20"};
  const auto a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  const auto da = nlohmann::ordered_json::parse(a.out), db = nlohmann::ordered_json::parse(b.out);
  EXPECT_EQ(da["payload"].dump(2), db["payload"].dump(2));
  EXPECT_EQ(da["payload_hash"], db["payload_hash"]);
  // The hash covers exactly the payload text.
  EXPECT_EQ(da["payload_hash"].get<std::string>(), "fnv1a64:" + hex64(fnv1a64(da["payload"].dump(2))));
}

TEST(Cli, SeedPrecedence) {
  auto seed_of = [](const Result& r) { return nlohmann::json::parse(r.out)["payload"]["seed"].get<std::uint64_t>(); };
  const std::vector<std::string> base = {"truth-table", "--config", data("calibrated.json"), "--trials", "5"};
  EXPECT_EQ(seed_of(run(base)), 2024u);
  EXPECT_EQ(seed_of(run(base, "99")), 99u);
  auto with_flag = base;
  with_flag.insert(with_flag.end(), {"--seed", "5"});
  EXPECT_EQ(seed_of(run(with_flag, "99")), 5u);
  EXPECT_EQ(run(base, "abc").code, 1);
}

TEST(Cli, SweepCsvMatchesOracle) {
  const auto r = run({"sweep", "--grid", "er=18,25,35"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv::parse(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (csv::Row{"er_db", "truth_table_fidelity", "process_fidelity"}));
  const auto oracle = error_budget(ChipParams{}, {{"er_db", {18, 25, 35}}}, LogicalFrame::RELABELED);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(std::stod(rows[i + 1][0]), oracle.points[i].values[0]);
    EXPECT_EQ(std::stod(rows[i + 1][1]), oracle.points[i].truth_table_fidelity);
    EXPECT_EQ(std::stod(rows[i + 1][2]), oracle.points[i].process_fidelity);
  }
}

TEST(Cli, SweepGridErrors) {
  EXPECT_EQ(run({"sweep", "--grid", "temperature=1,2"}).code, 1);
  EXPECT_EQ(run({"sweep", "--grid", "er=18,x"}).code, 1);
  EXPECT_EQ(run({"sweep"}).code, 1);
  const auto two = run({"sweep", "--grid", "er=20,35;imbalance=0,0.9", "--format", "csv"});
  ASSERT_EQ(two.code, 0) << two.err;
  EXPECT_EQ(csv::parse(two.out).size(), 5u);
}

TEST(Cli, FmtMalformedExitsTwoWithSpan) {
  const auto r = run({"fmt", data("netlists/malformed/E001_unclosed.pnl")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("E001_unclosed.pnl:"), std::string::npos);
  EXPECT_NE(r.err.find("error[E001]"), std::string::npos);
  EXPECT_NE(r.err.find('^'), std::string::npos);
}

TEST(Cli, FmtWriteIsIdempotent) {
  const auto dir = temp_dir("fmt");
  const auto f = dir / "a.pnl";
  write(f, "chip a { ports T,B; pcnot c (T,B) extinction=18dB; mcnot r (T); pcnot d (T,B); }");
  EXPECT_EQ(run({"fmt", "--check", f.string()}).code, 1);
  EXPECT_EQ(run({"fmt", "--write", f.string()}).code, 0);
  EXPECT_EQ(run({"fmt", "--check", f.string()}).code, 0);
  const auto printed = run({"fmt", f.string()});
  EXPECT_EQ(printed.out, testutil::read_file(f.string()));
}

TEST(Cli, CheckAgreesWithCompile) {
  // The corpus is parse-valid; a few entries are rejected only at compile time.
  int compiled = 0;
  for (const auto& f : testutil::list_files(data("netlists/corpus"), ".pnl")) {
    std::string expected;
    try {
      chips_from_netlist(testutil::read_file(f.string()));
      ++compiled;
    } catch (const netlist::NetlistError& e) {
      expected = e.code();
    }
    const auto r = run({"check", f.string()});
    EXPECT_EQ(r.code, expected.empty() ? 0 : 2) << f << r.err;
    EXPECT_EQ(rendered_code(r.err), expected) << f;
  }
  EXPECT_GE(compiled, 20);
  for (const auto& f : testutil::list_files(data("netlists/malformed"), ".pnl")) {
    std::string expected;
    try {
      chips_from_netlist(testutil::read_file(f.string()));
    } catch (const netlist::NetlistError& e) {
      expected = e.code();
    }
    ASSERT_FALSE(expected.empty()) << f;
    const auto r = run({"check", f.string()});
    EXPECT_EQ(r.code, 2) << f;
    EXPECT_EQ(rendered_code(r.err), expected) << f;
    EXPECT_EQ(f.filename().string().substr(0, 4), expected) << f;
  }
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const auto r = run({"teleport"});
  EXPECT_EQ(r.code, 64);
  EXPECT_NE(r.err.find("unknown subcommand 'teleport'"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 64);
  EXPECT_EQ(run({"truth-table", "--no-such-flag"}).code, 64);
  EXPECT_EQ(run({"fringe", "--format", "xml"}).code, 64);
}

TEST(Cli, ConfigErrorsExitOne) {
  const auto dir = temp_dir("cfg");
  const std::vector<std::pair<std::string, std::string>> bad = {
      {"unknown_key.json", R"({"schema_version": 1, "chipz": {}})"},
      {"nested_unknown.json", R"({"schema_version": 1, "chip": {"loss": 1}})"},
      {"schema.json", R"({"schema_version": 2})"},
      {"no_schema.json", R"({})"},
      {"syntax.json", R"({"schema_version": 1,)"},
      {"type.json", R"({"schema_version": 1, "counting": {"pair_rate_hz": "fast"}})"},
      {"range.json", R"({"schema_version": 1, "counting": {"pair_rate_hz": -1}})"},
      {"frame.json", R"({"schema_version": 1, "logical_frame": "SIDEWAYS"})"},
  };
  for (const auto& [name, text] : bad) {
    write(dir / name, text);
    const auto r = run({"truth-table", "--config", (dir / name).string()});
    EXPECT_EQ(r.code, 1) << name;
    EXPECT_NE(r.err.find("error:"), std::string::npos) << name;
  }
}

TEST(Cli, NetlistErrorFromConfigExitsTwo) {
  const auto dir = temp_dir("cfg_nl");
  write(dir / "bad.pnl", "chip x { ports T, B; pcnot c (T, B) extinction=0dB; }\n");
  write(dir / "c.json", R"({"schema_version": 1, "netlist": "bad.pnl"})");
  const auto r = run({"truth-table", "--config", (dir / "c.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.pnl:1:"), std::string::npos) << r.err;
}

TEST(Cli, OutDirectoryReceivesJsonAndCsv) {
  const auto dir = temp_dir("out");
  const auto r = run({"bell", "--config", data("two_chips.json"), "--out", dir.string(), "--label", "PSI_MINUS"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(testutil::read_file((dir / "bell.json").string()));
  EXPECT_EQ(doc["payload"]["chips"], (nlohmann::json{"sender", "receiver"}));
  EXPECT_TRUE(doc["payload"]["states"].contains("PSI_MINUS"));
  EXPECT_FALSE(doc["payload"]["states"].contains("PHI_PLUS"));
  EXPECT_TRUE(fs::exists(dir / "rho_PSI_MINUS.csv"));
  EXPECT_EQ(csv::parse(testutil::read_file((dir / "rho_PSI_MINUS.csv").string())).size(), 17u);
}

TEST(Cli, ConfigHashTracksNetlistContent) {
  const auto dir = temp_dir("hash");
  fs::copy_file(data("swap.pnl"), dir / "chip.pnl");
  write(dir / "c.json", R"({"schema_version": 1, "netlist": "chip.pnl"})");
  auto hash = [&] {
    const auto r = run({"truth-table", "--config", (dir / "c.json").string(), "--trials", "2"});
    return nlohmann::json::parse(r.out)["payload"]["config_hash"].get<std::string>();
  };
  const auto h1 = hash();
  write(dir / "chip.pnl", testutil::read_file(data("ideal.pnl")));
  EXPECT_NE(hash(), h1);
}

TEST(Cli, TomoStateFromCounts) {
  // Oracle: exact frequencies of a known two-qubit state, scaled to counts.
  const Vector psi = kron(setting_state(3), setting_state(1));  // |-> (x) |V>
  const auto rho = DensityMatrix::trusted(psi * psi.adjoint());
  const auto f = exact_frequencies_2q(rho);
  CountRecord rec;
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = 0; b < 6; ++b)
      rec.entries.push_back({std::string(kMomentumLabels[a]), std::string(kPolarizationLabels[b]),
                             static_cast<std::int64_t>(std::llround(1e4 * f[a][b])), 1.0, 0});
  const auto dir = temp_dir("counts");
  write(dir / "c.csv", rec.to_csv());
  // Ideal SWAP takes |V> (x) |-> to the state above: momentum <- polarization, polarization <- momentum.
  const auto r = run({"tomo-state", "--counts", (dir / "c.csv").string(), "--input", "1,A"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_NEAR(doc["payload"]["estimates"]["purity"].get<double>(), 1.0, 1e-9);
  EXPECT_NEAR(doc["payload"]["estimates"]["fidelity_to_ideal"].get<double>(), 1.0, 1e-9);
}

TEST(Cli, TomoStateSimulatedAndBadInput) {
  const auto r = run({"tomo-state", "--input", "+,H", "--trials", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(nlohmann::json::parse(r.out)["payload"]["exact"]["fidelity"].get<double>(), 1.0, 1e-10);
  EXPECT_EQ(run({"tomo-state", "--input", "H,+"}).code, 1);
  EXPECT_EQ(run({"tomo-state", "--input", "+"}).code, 1);
}

TEST(Cli, OtherExperimentsRun) {
  for (const std::vector<std::string>& args :
       {std::vector<std::string>{"hom", "--input", "SOURCE_ONLY", "--trials", "5"},
        std::vector<std::string>{"fringe", "--port", "B", "--trials", "5", "--format", "csv"},
        std::vector<std::string>{"tomo-process", "--qubits", "1", "--trials", "5"},
        std::vector<std::string>{"tomo-process", "--qubits", "2", "--trials", "2"},
        std::vector<std::string>{"truth-table", "--signal-nm", "1552.5", "--pump-nm", "775", "--total-counts", "1e4"}}) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 0) << args[0] << ": " << r.err;
  }
  EXPECT_EQ(run({"tomo-process", "--qubits", "3"}).code, 1);
  EXPECT_EQ(run({"truth-table", "--pump-nm", "1600"}).code, 1);
}

TEST(Cli, HelpAndVersion) {
  EXPECT_EQ(run({"--help"}).code, 0);
  const auto v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(cli::kToolVersion), std::string::npos);
}

TEST(Config, ParsesAllSections) {
  const auto rc = load_config(data("calibrated.json"));
  const auto& e = rc.experiment;
  EXPECT_EQ(e.chip_params.pc1_extinction_db, 18.0);
  EXPECT_EQ(e.chip_params.coherence, 0.0);
  EXPECT_EQ(e.bell_visibility, 0.96);
  EXPECT_EQ(*e.fringe_target_raw_visibility, 0.987);
  EXPECT_EQ(rc.tomo_momentum_input, 2);
  EXPECT_EQ(rc.tomo_polarization_input, 0);
  ASSERT_EQ(rc.sweep_grid.size(), 2u);
  EXPECT_EQ(rc.sweep_grid[0].key, "er_db");
  EXPECT_EQ(e.rng_seed, 2024u);
  // Chips built from the parameters equal the calibrated netlist.
  const auto from_file = netlist::compile(netlist::parse(testutil::read_file(data("swap.pnl"))));
  EXPECT_TRUE(e.chips.front().channel().kraus() == from_file.channel().kraus());
}

TEST(Config, HashIgnoresFormatting) {
  const auto a = parse_config(R"({"schema_version": 1, "n_trials": 5, "rng_seed": 3})");
  const auto b = parse_config("{\n  \"rng_seed\" : 3,\n  \"n_trials\":5,\"schema_version\":1\n}");
  const auto c = parse_config(R"({"schema_version": 1, "n_trials": 6, "rng_seed": 3})");
  EXPECT_EQ(a.experiment.config_hash, b.experiment.config_hash);
  EXPECT_NE(a.experiment.config_hash, c.experiment.config_hash);
}

TEST(Config, InfinityAndGridAliases) {
  const auto rc = parse_config(
      R"({"schema_version": 1, "chip": {"pc1_extinction_db": "inf"}, "sweep": {"grid": {"er": [20, "inf"]}}})");
  EXPECT_TRUE(std::isinf(rc.experiment.chip_params.pc1_extinction_db));
  EXPECT_EQ(rc.sweep_grid[0].key, "er_db");
  EXPECT_TRUE(std::isinf(rc.sweep_grid[0].values[1]));
}
