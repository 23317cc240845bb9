#include <gtest/gtest.h>

#include "swapsim/devices.hpp"

using namespace swapsim;

namespace {

Vector v2(cplx a, cplx b) {
  Vector v(2);
  v << a, b;
  return v / v.norm();
}

/// |<a|b>| == 1 (equal up to global phase).
bool same_ray(const Vector& a, const Vector& b, double eps = 1e-12) {
  return std::abs(std::abs(a.dot(b)) - a.norm() * b.norm()) < eps;
}

ComponentSpec spec(ComponentKind k, std::map<std::string, double> p = {}) { return {k, std::move(p), {}}; }

Vector basis4(int i) { return PureState::basis(4, i).amplitudes(); }

}  // namespace

TEST(Leakage, Examples) {
  EXPECT_NEAR(er_to_leakage(18.0), 0.015849, 1e-6);
  EXPECT_NEAR(er_to_leakage(20.0), 0.01, 1e-15);
  EXPECT_EQ(er_to_leakage(kInf), 0.0);
  EXPECT_THROW(er_to_leakage(0.0), ConfigError);
  EXPECT_THROW(er_to_leakage(-3.0), ConfigError);
}

TEST(Waveplate, Examples) {
  const Vector h = v2(1, 0), v = v2(0, 1);
  EXPECT_TRUE(same_ray(waveplate_jones(Retarder::HWP, kPi / 8) * h, v2(1, 1)));
  EXPECT_LT((waveplate_jones(Retarder::HWP, 0.0) * v + v).norm(), 1e-12);
  EXPECT_TRUE(same_ray(waveplate_jones(Retarder::QWP, kPi / 4) * h, v2(1, kI)));
  for (double th : {0.0, 0.3, 1.1, 2.5}) {
    for (auto r : {Retarder::HWP, Retarder::QWP}) {
      const Matrix j = waveplate_jones(r, th);
      EXPECT_LT((j.adjoint() * j - identity(2)).norm(), 1e-12);
    }
  }
}

TEST(PhaseV, Examples) {
  EXPECT_LT((phase_v(0.0) - identity(2)).norm(), 1e-15);
  EXPECT_TRUE(same_ray(phase_v(kPi) * v2(1, 1), v2(1, -1)));
  EXPECT_TRUE(same_ray(phase_v(kPi / 2) * v2(1, 1), v2(1, kI)));
}

TEST(Polarizer, Examples) {
  const auto h = DensityMatrix::from_pure(PureState(v2(1, 0)));
  EXPECT_NEAR(apply_channel(polarizer(0.0), h).trace(), 1.0, 1e-15);
  EXPECT_NEAR(apply_channel(polarizer(kPi / 2), h).trace(), 0.0, 1e-15);
  EXPECT_NEAR(apply_channel(polarizer(kPi / 4), h).trace(), 0.5, 1e-15);
  EXPECT_NEAR(apply_channel(polarizer(kPi / 2, 20.0), h).trace(), 0.01, 1e-15);
}

TEST(MziProjector, Examples) {
  const auto t = DensityMatrix::from_pure(PureState(v2(1, 0)));
  EXPECT_NEAR(apply_channel(mzi_projector(MomentumSetting::T), t).trace(), 1.0, 1e-12);
  EXPECT_NEAR(apply_channel(mzi_projector(MomentumSetting::PLUS), t).trace(), 0.5, 1e-12);
  const auto pi = DensityMatrix::from_pure(PureState(v2(1, kI)));
  EXPECT_NEAR(apply_channel(mzi_projector(MomentumSetting::PLUS_I), pi).trace(), 1.0, 1e-12);
  EXPECT_NEAR(apply_channel(mzi_projector(MomentumSetting::MINUS_I), pi).trace(), 0.0, 1e-12);
  EXPECT_NEAR(apply_channel(mzi_projector(MomentumSetting::MINUS_I, 20.0), pi).trace(), 0.01, 1e-12);
}

TEST(MziProjector, AllSettingsProjectOntoTheirBlochState) {
  for (auto s : {MomentumSetting::T, MomentumSetting::B, MomentumSetting::PLUS, MomentumSetting::MINUS,
                 MomentumSetting::PLUS_I, MomentumSetting::MINUS_I}) {
    const auto [th, ph] = bloch_angles(s);
    const Vector psi = v2(std::cos(th / 2), std::exp(kI * ph) * std::sin(th / 2));
    const auto p = mzi_projector(s);
    EXPECT_NEAR(apply_channel(p, DensityMatrix::from_pure(PureState(psi))).trace(), 1.0, 1e-12);
    const Vector perp = v2(-std::conj(psi(1)), std::conj(psi(0)));
    EXPECT_NEAR(apply_channel(p, DensityMatrix::from_pure(PureState(perp))).trace(), 0.0, 1e-12);
  }
}

TEST(Facet, Examples) {
  EXPECT_LT((facet_channel(0, 0).kraus()[0] - identity(4)).norm(), 1e-15);
  const Matrix k = facet_channel(0, 0.9).kraus()[0];
  EXPECT_NEAR(std::norm(k(mode::TV, mode::TV)) / std::norm(k(mode::TH, mode::TH)), 0.8128, 1e-4);
  const auto out = apply_channel(facet_channel(3, 3), DensityMatrix::from_pure(PureState::basis(4, mode::BH)));
  EXPECT_NEAR(out.trace(), 0.501187, 1e-6);
}

TEST(Facet, CrosstalkIsUnitaryWhenLossless) {
  EXPECT_TRUE(facet_channel(0, 0, 0.1).is_trace_preserving(1e-12));
}

TEST(Pcnot, IdealActions) {
  const Matrix u = pcnot_channel(spec(ComponentKind::PCNOT)).kraus()[0];
  EXPECT_LT((u * basis4(mode::TV) - kI * basis4(mode::BV)).norm(), 1e-15);
  EXPECT_LT((u * basis4(mode::TH) - basis4(mode::TH)).norm(), 1e-15);
}

TEST(Pcnot, FiniteExtinction) {
  const auto ch = pcnot_channel(spec(ComponentKind::PCNOT, {{"extinction", 18.0}}));
  const auto out = apply_channel(ch, DensityMatrix::from_pure(PureState::basis(4, mode::TV)));
  EXPECT_NEAR(out.matrix()(mode::TV, mode::TV).real(), 0.015849, 1e-6);
  ASSERT_EQ(ch.kraus().size(), 1u);
  EXPECT_LT((ch.kraus()[0].adjoint() * ch.kraus()[0] - identity(4)).norm(), 1e-12);
}

TEST(Pcnot, IncoherentLeakageSamePopulations) {
  const auto coh = pcnot_channel(spec(ComponentKind::PCNOT, {{"extinction", 18.0}}));
  const auto inc = pcnot_channel(spec(ComponentKind::PCNOT, {{"extinction", 18.0}, {"coherence", 0.0}}));
  EXPECT_TRUE(inc.is_trace_preserving(1e-12));
  for (int i = 0; i < 4; ++i) {
    const auto rho = DensityMatrix::from_pure(PureState::basis(4, i));
    EXPECT_LT((apply_channel(coh, rho).matrix().diagonal() - apply_channel(inc, rho).matrix().diagonal()).norm(),
              1e-14);
  }
}

TEST(Mcnot, IdealActions) {
  const Matrix u = mcnot_channel(spec(ComponentKind::MCNOT)).kraus()[0];
  EXPECT_TRUE(same_ray(u * basis4(mode::TH), basis4(mode::TV)));
  EXPECT_TRUE(same_ray(u * basis4(mode::BH), basis4(mode::BH)));
}

TEST(Mcnot, ResidualAndUnitarity) {
  const auto ch = mcnot_channel(spec(ComponentKind::MCNOT, {{"extinction", 20.0}}));
  const auto out = apply_channel(ch, DensityMatrix::from_pure(PureState::basis(4, mode::TH)));
  EXPECT_NEAR(out.matrix()(mode::TH, mode::TH).real(), 0.01, 1e-14);
  ASSERT_EQ(ch.kraus().size(), 1u);
  EXPECT_LT((ch.kraus()[0].adjoint() * ch.kraus()[0] - identity(4)).norm(), 1e-12);
}

TEST(Mcnot, LossOnTargetOnly) {
  const auto ch = mcnot_channel(spec(ComponentKind::MCNOT, {{"loss", 1.0}}));
  EXPECT_NEAR(apply_channel(ch, DensityMatrix::from_pure(PureState::basis(4, mode::TH))).trace(), 0.794328, 1e-6);
  EXPECT_NEAR(apply_channel(ch, DensityMatrix::from_pure(PureState::basis(4, mode::BH))).trace(), 1.0, 1e-14);
}

TEST(Components, LosslessAreUnitary) {
  std::vector<ComponentSpec> specs = {
      spec(ComponentKind::HWP, {{"angle", 0.3}}),  spec(ComponentKind::QWP, {{"angle", 1.2}}),
      spec(ComponentKind::PHASE_V, {{"phase", 0.7}}), spec(ComponentKind::BS5050),
      spec(ComponentKind::MZI, {{"alpha", 0.4}, {"beta", 1.0}}),
      spec(ComponentKind::FIBER, {{"alpha", 0.1}, {"beta", 0.2}, {"gamma", 0.3}}),
      spec(ComponentKind::FACET), spec(ComponentKind::LOSS)};
  for (const auto& s : specs) {
    const auto ch = component_channel(s);
    ASSERT_EQ(ch.kraus().size(), 1u) << kind_name(s.kind);
    EXPECT_LT((ch.kraus()[0].adjoint() * ch.kraus()[0] - identity(4)).norm(), 1e-12) << kind_name(s.kind);
  }
}

// Oracle: literal stage matrices written out by hand, multiplied directly.
TEST(Chip, IdealProductMatchesHandWrittenStages) {
  Matrix pc = Matrix::Zero(4, 4);  // H bar, V cross with i
  pc(0, 0) = 1;
  pc(2, 2) = 1;
  pc(3, 1) = kI;
  pc(1, 3) = kI;
  Matrix mc = Matrix::Zero(4, 4);  // T: -iX, B: Z
  mc(0, 1) = -kI;
  mc(1, 0) = -kI;
  mc(2, 2) = 1;
  mc(3, 3) = -1;
  const Matrix direct = pc * mc * pc;
  const Matrix u = *ideal_swap_chip().operator_if_pure();
  EXPECT_LT((u - direct).norm(), 1e-14);
  EXPECT_TRUE(same_ray(u * basis4(mode::TV), basis4(mode::TV)));
  EXPECT_TRUE(same_ray(u * basis4(mode::TH), basis4(mode::BV)));
  EXPECT_TRUE(same_ray(u * basis4(mode::BV), basis4(mode::TH)));
  EXPECT_TRUE(same_ray(u * basis4(mode::BH), basis4(mode::BH)));
}

TEST(Chip, IdealEqualsFlippedSwapUpToPhase) {
  const Matrix u = *ideal_swap_chip().operator_if_pure();
  EXPECT_LE(phase_insensitive_distance(u, ideal_swap_operator()), 1e-10);
}

TEST(Chip, TopIlluminationGivesConstantPhaseOffset) {
  const Matrix u = *ideal_swap_chip().operator_if_pure();
  double delta0 = 0.0;
  for (int k = 0; k < 8; ++k) {
    const double phi = 0.7 * k;
    const Vector in = kron(v2(1, 0), v2(1, std::exp(kI * phi)));
    const Vector out = u * in;
    // polarization is V on both paths
    EXPECT_NEAR(std::abs(out(mode::TH)) + std::abs(out(mode::BH)), 0.0, 1e-14);
    const double delta = std::arg(out(mode::TV) / out(mode::BV)) - phi;
    if (k == 0) delta0 = delta;
    EXPECT_NEAR(std::remainder(delta - delta0, 2 * kPi), 0.0, 1e-12);
  }
}

TEST(Chip, RelabeledIdealIsSwap) {
  const Matrix u = *ideal_swap_chip().operator_if_pure();
  std::vector<Vector> singles = {v2(1, 0), v2(0, 1), v2(1, 1), v2(1, kI)};
  for (const auto& a : singles)
    for (const auto& b : singles) {
      const Vector in = kron(a, b);
      const auto out = DensityMatrix::from_pure(PureState::normalized(u * in));
      const auto rel = logical_frame(out, LogicalFrame::RELABELED);
      const Vector expect = swap_gate() * in;
      EXPECT_NEAR((rel.matrix() - expect * expect.adjoint()).norm(), 0.0, 1e-12);
    }
}

TEST(Frame, Examples) {
  const auto th = DensityMatrix::from_pure(PureState::basis(4, mode::TH));
  const auto out = ideal_swap_chip().apply(th);
  EXPECT_NEAR(out.matrix()(mode::BV, mode::BV).real(), 1.0, 1e-14);
  EXPECT_NEAR(logical_frame(out, LogicalFrame::RELABELED).matrix()(mode::TH, mode::TH).real(), 1.0, 1e-14);
  const auto twice = logical_frame(logical_frame(out, LogicalFrame::RELABELED), LogicalFrame::RELABELED);
  EXPECT_LT((twice.matrix() - out.matrix()).norm(), 1e-15);
  EXPECT_LT((logical_frame(out, LogicalFrame::RAW).matrix() - out.matrix()).norm(), 1e-15);
}

TEST(Chip, FiniteErStaysUnitaryBeforeLoss) {
  const auto chip = build_swap_chip(spec(ComponentKind::PCNOT, {{"extinction", 18.0}}),
                                    spec(ComponentKind::MCNOT, {{"extinction", 20.0}}),
                                    spec(ComponentKind::PCNOT, {{"extinction", 18.0}}), spec(ComponentKind::FACET));
  ASSERT_TRUE(chip.operator_if_pure());
  EXPECT_TRUE(chip.channel().is_trace_preserving(1e-12));
}

TEST(Chip, SixDbInsertionLoss) {
  const auto chip = build_swap_chip(spec(ComponentKind::PCNOT), spec(ComponentKind::MCNOT),
                                    spec(ComponentKind::PCNOT), spec(ComponentKind::FACET, {{"loss", 3.0}}));
  const auto out = chip.apply(DensityMatrix::from_pure(PureState::basis(4, mode::TV)));
  EXPECT_NEAR(heralded_normalize(out).probability, std::pow(10.0, -0.6), 1e-12);
}

TEST(Chip, KindMismatchThrows) {
  EXPECT_THROW(build_swap_chip(spec(ComponentKind::MCNOT), spec(ComponentKind::MCNOT), spec(ComponentKind::PCNOT),
                               spec(ComponentKind::FACET)),
               ConfigError);
}
