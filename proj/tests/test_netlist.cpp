#include <gtest/gtest.h>

#include "swapsim/netlist.hpp"
#include "test_util.hpp"

using namespace swapsim;
using namespace swapsim::netlist;

namespace {

const char* kSwapSource =
    "chip swap { ports T, B; pcnot c1 (T,B) extinction=18dB; mcnot r1 (T) extinction=20dB loss=1dB; "
    "pcnot c2 (T,B) extinction=18dB; }";

NetlistError parse_error(std::string_view src) {
  try {
    compile(parse(src));
  } catch (const NetlistError& e) {
    return e;
  }
  ADD_FAILURE() << "no error for: " << src;
  return NetlistError("none", "", {});
}

bool bit_identical(const QuantumChannel& a, const QuantumChannel& b) {
  if (a.kraus().size() != b.kraus().size()) return false;
  for (std::size_t i = 0; i < a.kraus().size(); ++i)
    if (!(a.kraus()[i].array() == b.kraus()[i].array()).all()) return false;
  return true;
}

}  // namespace

TEST(Parse, SwapCascade) {
  const auto ast = parse(kSwapSource);
  ASSERT_EQ(ast.chips.size(), 1u);
  const auto& chip = ast.chips[0];
  EXPECT_EQ(chip.name, "swap");
  ASSERT_EQ(chip.statements.size(), 3u);
  EXPECT_EQ(chip.statements[1].kind, ComponentKind::MCNOT);
  ASSERT_EQ(chip.statements[1].params.size(), 2u);
  EXPECT_EQ(chip.statements[1].params[1].name, "loss");
  EXPECT_EQ(chip.statements[1].params[1].value, 1.0);
  EXPECT_EQ(chip.statements[1].params[1].unit, Unit::dB);
}

TEST(Parse, EmptyInput) {
  const auto e = parse_error("");
  EXPECT_EQ(e.code(), "E001");
  EXPECT_NE(e.message().find("expected 'chip'"), std::string::npos);
  EXPECT_EQ(e.span().line, 1);
  EXPECT_EQ(e.span().column, 1);
}

TEST(Parse, UndeclaredPortSpan) {
  const std::string src = "chip s {\n  ports T, B;\n  pcnot c1 (T,X);\n}";
  const auto e = parse_error(src);
  EXPECT_EQ(e.code(), "E005");
  EXPECT_EQ(src.substr(e.span().start, e.span().end - e.span().start), "X");
  EXPECT_EQ(e.span().line, 3);
  EXPECT_EQ(e.span().column, 15);
  EXPECT_NE(e.render(src, "s.pnl").find("s.pnl:3:15: error[E005]"), std::string::npos);
}

TEST(Parse, DegreesConvertToRadians) {
  const auto ast = parse("chip w { ports T, B; hwp h (T) angle=90deg; }");
  const auto& p = ast.chips[0].statements[0].params[0];
  EXPECT_DOUBLE_EQ(p.value, kPi / 2);
  EXPECT_EQ(p.unit, Unit::Rad);
}

TEST(Parse, UnitMayBeSeparatedByWhitespace) {
  const auto ast = parse("chip w { ports T, B; mcnot r (T) extinction = 20 dB loss=1; }");
  const auto& ps = ast.chips[0].statements[0].params;
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_EQ(ps[0].unit, Unit::dB);
  EXPECT_EQ(ps[1].unit, Unit::None);
}

TEST(Parse, DistinctCodes) {
  EXPECT_EQ(parse_error("chip s { ports T, B; cnot c (T,B); }").code(), "E002");
  EXPECT_EQ(parse_error("chip s { ports T, B; pcnot c (T,B) extinction=3dBm; }").code(), "E003");
  EXPECT_EQ(parse_error("chip s { ports T, B; pcnot c (T,B); pcnot c (T,B); }").code(), "E004");
  EXPECT_EQ(parse_error("chip s { ports T, B; pcnot c (T,Q); }").code(), "E005");
  EXPECT_EQ(parse_error("chip s { ports T, B; hwp c (T) loss=1dB; }").code(), "E006");
  EXPECT_EQ(parse_error("chip s { ports T, B; hwp c (T) angle=1nm; }").code(), "E007");
  EXPECT_EQ(parse_error("chip s { ports T, T; }").code(), "E008");
}

TEST(Compile, Errors) {
  EXPECT_EQ(parse_error("chip s { ports A, B, C; }").code(), "C001");
  EXPECT_EQ(parse_error("chip s { ports T, B; pcnot c (T,B) extinction=-1dB; }").code(), "C002");
  EXPECT_EQ(parse_error("chip s { ports T, B; pcnot c (T); }").code(), "C003");
}

TEST(Format, Golden) {
  const std::string expect =
      "chip swap {\n"
      "  ports T, B;\n"
      "  pcnot c1 (T, B) extinction=18dB;\n"
      "  mcnot r1 (T) extinction=20dB loss=1dB;\n"
      "  pcnot c2 (T, B) extinction=18dB;\n"
      "}\n";
  EXPECT_EQ(format(parse(kSwapSource)), expect);
}

TEST(Format, IdempotentAndDropsComments) {
  const std::string src = "# c\nchip s { ports T, B; # x\n hwp h (T) angle=0.1; }";
  const std::string once = format(parse(src));
  EXPECT_EQ(once.find('#'), std::string::npos);
  EXPECT_EQ(format(parse(once)), once);
}

TEST(Corpus, RoundTripStable) {
  const auto files = testutil::list_files(testutil::data_path("netlists/corpus"), ".pnl");
  ASSERT_GE(files.size(), 20u);
  for (const auto& f : files) {
    const auto ast = parse(testutil::read_file(f.string()));
    const auto again = parse(format(ast));
    EXPECT_TRUE(structurally_equal(ast, again)) << f;
    EXPECT_EQ(format(again), format(ast)) << f;
  }
}

TEST(Corpus, MalformedFixturesProduceDocumentedCodes) {
  const auto files = testutil::list_files(testutil::data_path("netlists/malformed"), ".pnl");
  ASSERT_GE(files.size(), 12u);
  for (const auto& f : files) {
    const std::string src = testutil::read_file(f.string());
    const std::string expect = f.filename().string().substr(0, 4);
    const auto e = parse_error(src);
    EXPECT_EQ(e.code(), expect) << f;
    EXPECT_LE(e.span().start, e.span().end) << f;
    EXPECT_LE(e.span().end, src.size()) << f;
  }
}

TEST(Compile, IdealCascadeMatchesDevices) {
  const auto chip = compile(parse("chip s { ports T, B; pcnot a (T,B); mcnot b (T); pcnot c (T,B); }"));
  const Matrix u = *chip.operator_if_pure();
  EXPECT_LE((u - *ideal_swap_chip().operator_if_pure()).norm(), 1e-10);
  EXPECT_LE(phase_insensitive_distance(u, ideal_swap_operator()), 1e-10);
}

TEST(Compile, CalibratedCascadeMatchesBuildSwapChip) {
  const auto compiled = compile(parse(testutil::read_file(testutil::data_path("swap.pnl"))));
  ComponentSpec pc{ComponentKind::PCNOT, {{"extinction", 18.0}, {"coherence", 0.0}}, {}};
  ComponentSpec mc{ComponentKind::MCNOT, {{"extinction", 20.0}, {"loss", 1.0}, {"coherence", 0.0}}, {}};
  ComponentSpec fin{ComponentKind::FACET, {{"loss", 2.5}}, {}};
  ComponentSpec fout{ComponentKind::FACET, {{"loss", 2.5}, {"imbalance", 0.9}}, {}};
  const auto built = build_swap_chip(pc, mc, pc, fin, fout);
  EXPECT_TRUE(bit_identical(compiled.channel(), built.channel()));
}

TEST(Compile, Deterministic) {
  for (const auto& f : testutil::list_files(testutil::data_path("netlists/corpus"), ".pnl")) {
    const std::string src = testutil::read_file(f.string());
    const auto ast = parse(src);
    std::vector<ChipModel> a, b;
    try {
      a = compile_all(ast);
      b = compile_all(parse(src));
    } catch (const NetlistError& e) {
      EXPECT_EQ(e.code(), "C001") << f;
      continue;
    }
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(bit_identical(a[i].channel(), b[i].channel())) << f;
  }
}

TEST(Compile, ReversedMziMatchesConjugatedForward) {
  const auto fwd = compile(parse("chip m { ports T, B; mzi m (T, B) alpha=0.4 beta=1.3; }"));
  const auto rev = compile(parse("chip m { ports B, T; mzi m (T, B) alpha=0.4 beta=1.3; }"));
  const Matrix x = spatial(pauli_x());
  EXPECT_LT((x * fwd.channel().kraus()[0] * x - rev.channel().kraus()[0]).norm(), 1e-15);
}
