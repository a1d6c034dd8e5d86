#include <random>

#include <gtest/gtest.h>

#include "nlrot/channels.hpp"

using namespace nlrot;

namespace {

Mat4 evolve(BellKind k, double a, double b) {
    return apply_local(bell_state(k), rotation_unitary(a), rotation_unitary(b)).matrix();
}

}  // namespace

TEST(Rotation, ExactEntries) {
    EXPECT_LT((rotation_unitary(0.0) - Mat2::Identity()).norm(), 1e-15);
    Mat2 quarter;
    quarter << 0.0, -1.0, 1.0, 0.0;
    EXPECT_LT((rotation_unitary(pi / 2) - quarter).norm(), 1e-15);
    const Vec2 h = rotation_unitary(deg(20.08)) * Ket2::H().amplitudes();
    EXPECT_NEAR(h(0).real(), std::cos(deg(20.08)), 1e-15);
    EXPECT_NEAR(h(1).real(), std::sin(deg(20.08)), 1e-15);
    EXPECT_NEAR(std::abs(rotation_unitary(0.7).determinant() - 1.0), 0.0, 1e-15);
    EXPECT_THROW(rotation_unitary(std::numeric_limits<double>::infinity()), DataError);
}

TEST(Rotation, MatchesSigmaYExponential) {
    const double t = 0.37;
    const Mat2 expected = std::cos(t) * Mat2::Identity() - I_unit * std::sin(t) * pauli(Pauli::Y);
    EXPECT_LT((rotation_unitary(t) - expected).norm(), 1e-15);
}

TEST(Rotation, GroupProperty) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-pi, pi);
    for (int i = 0; i < 100; ++i) {
        const double a = u(rng), b = u(rng);
        EXPECT_LT((rotation_unitary(b) * rotation_unitary(a) - rotation_unitary(a + b)).norm(), 1e-12);
    }
}

TEST(ApplyLocal, NonlocalCancellationOfPsiMinus) {
    for (double t : {0.1, 0.7, -1.3}) {
        EXPECT_LT((evolve(BellKind::PsiMinus, t, t) - bell_state(BellKind::PsiMinus).matrix()).norm(), 1e-12);
    }
}

TEST(ApplyLocal, StateLevelEquivalence) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-pi, pi);
    for (int i = 0; i < 50; ++i) {
        const double a = u(rng), b = u(rng);
        const Mat2 id = Mat2::Identity();
        const Mat4 plus = apply_local(bell_state(BellKind::PsiPlus), rotation_unitary(a + b), id).matrix();
        const Mat4 minus = apply_local(bell_state(BellKind::PsiMinus), rotation_unitary(a - b), id).matrix();
        EXPECT_LT((evolve(BellKind::PsiPlus, a, b) - plus).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((evolve(BellKind::PsiMinus, a, b) - minus).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(ApplyLocal, RejectsNonUnitary) {
    Mat2 m = Mat2::Identity();
    m(0, 0) = 1.0 + 1e-6;
    EXPECT_THROW(apply_local(bell_state(BellKind::PsiPlus), m, Mat2::Identity()), DataError);
    m(0, 0) = 1.0 + 1e-10;
    EXPECT_NO_THROW(apply_local(bell_state(BellKind::PsiPlus), m, Mat2::Identity()));
}

TEST(WavePlates, HalfWaveAtZeroAndQuarterOnDiagonal) {
    EXPECT_TRUE(is_unitary(half_wave_plate(0.3)));
    EXPECT_TRUE(is_unitary(quarter_wave_plate(0.3)));
    // HWP at 22.5 deg takes H to D.
    const Vec2 d = half_wave_plate(deg(22.5)) * Ket2::H().amplitudes();
    EXPECT_NEAR(std::abs(d.dot(Ket2::D().amplitudes())), 1.0, 1e-15);
    // QWP at 45 deg takes H to a circular state.
    const Vec2 c = quarter_wave_plate(deg(45.0)) * Ket2::H().amplitudes();
    const double overlap_l = std::abs(c.dot(Ket2::L().amplitudes()));
    const double overlap_r = std::abs(c.dot(Ket2::R().amplitudes()));
    EXPECT_NEAR(std::max(overlap_l, overlap_r), 1.0, 1e-15);
}

TEST(Solution, CalibratedRotation) {
    SolutionSpec s;
    EXPECT_NEAR(to_deg(solution_rotation(s)), 0.0, 1e-15);
    s.molarity = 2.877;
    EXPECT_NEAR(to_deg(solution_rotation(s)), 20.16777, 1e-9);
    s.molarity = 4.236;
    EXPECT_NEAR(to_deg(solution_rotation(s)), 29.69436, 1e-9);
    s.pbs_offset = deg(4.09);
    EXPECT_NEAR(to_deg(calibration_reading(s)), 29.69436 + 4.09, 1e-9);
    s.molarity = -0.1;
    EXPECT_THROW(solution_rotation(s), DataError);
}

TEST(Offsets, CorrectionExamples) {
    const AnalyzerOffsets o;
    EXPECT_NEAR(to_deg(o.pbs_a), -4.75, 1e-12);
    EXPECT_NEAR(to_deg(o.pbs_b), 4.09, 1e-12);
    EXPECT_NEAR(to_deg(o.hwp), 5.47, 1e-12);
    EXPECT_NEAR(offset_correct(deg(-4.75 + 4.09), Branch::Plus, o), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(offset_correct(0.4, Branch::Minus, 0.0, 0.0, 0.0), 0.4);
    EXPECT_NEAR(offset_correct(o.total(Branch::Minus), Branch::Minus, o), 0.0, 1e-15);
}

TEST(Offsets, AffineAndInvertible) {
    const AnalyzerOffsets o;
    for (Branch b : {Branch::Plus, Branch::Minus}) {
        const double c0 = offset_correct(0.0, b, o);
        for (double x : {-1.0, 0.2, 0.9}) {
            EXPECT_NEAR(offset_correct(x, b, o), x + c0, 1e-15);
            EXPECT_NEAR(offset_correct(x + o.total(b), b, o), x, 1e-15);
        }
    }
}

TEST(Noise, WernerLimitsAndPhysicality) {
    const auto rho = bell_state(BellKind::PsiPlus);
    EXPECT_LT((apply_noise(rho, {1.0, 0.0}).matrix() - rho.matrix()).norm(), 1e-15);
    EXPECT_LT((apply_noise(rho, {0.0, 0.0}).matrix() - Mat4::Identity() / 4.0).norm(), 1e-15);
    for (double p = 0.0; p <= 1.0; p += 0.125) {
        const auto w = apply_noise(separable_state(Ket2::D(), Ket2::R()), {p, 0.0});
        EXPECT_NEAR(w.matrix().trace().real(), 1.0, 1e-14);
    }
    EXPECT_THROW(apply_noise(rho, {1.2, 0.0}), DataError);
    EXPECT_THROW(apply_noise(rho, {0.5, 1.0}), DataError);
}

TEST(Noise, VisibilityForFidelity) {
    const double p = visibility_for_fidelity(0.984);
    EXPECT_NEAR(p, 0.978666666666667, 1e-12);
    const auto rho = bell_state(BellKind::PsiPlus);
    EXPECT_NEAR(fidelity(apply_noise(rho, {p, 0.0}), rho), 0.984, 1e-9);
}
