#include <random>

#include <gtest/gtest.h>

#include "nlrot/channels.hpp"
#include "nlrot/tomography.hpp"

using namespace nlrot;

namespace {

TwoQubitState random_state(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Mat4 a;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) a(r, c) = cplx(g(rng), g(rng));
    const Mat4 m = a * a.adjoint();
    return TwoQubitState(m / m.trace().real());
}

TwoQubitState werner(double p) { return apply_noise(bell_state(BellKind::PsiPlus), {p, 0.0}); }

}  // namespace

TEST(TomographySettings, SixteenInformationallyComplete) {
    const auto set = tomography_settings();
    ASSERT_EQ(set.size(), 16u);
    EXPECT_EQ(set.lu().rank(), 16);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(set.design_matrix());
    const auto sv = svd.singularValues();
    EXPECT_NEAR(sv(0) / sv(15), 9.749344179478706, 1e-6);
    EXPECT_EQ(set[0].label(), "HH");
    EXPECT_EQ(set.index_of('D', 'R'), 15);
    EXPECT_EQ(set.index_of('A', 'A'), -1);
}

TEST(PredictedCounts, PsiPlusExamples) {
    const auto set = tomography_settings();
    const auto c = predicted_counts(bell_state(BellKind::PsiPlus), set, 1000.0);
    EXPECT_NEAR(c[set.index_of('H', 'H')], 0.0, 1e-12);
    EXPECT_NEAR(c[set.index_of('H', 'V')], 500.0, 1e-12);
    EXPECT_NEAR(c[set.index_of('D', 'D')], 500.0, 1e-12);
    EXPECT_NEAR(c[set.index_of('R', 'L')], 0.0, 1e-12);
}

TEST(LinearInversion, ExactRoundTrip) {
    std::mt19937_64 rng(1);
    const auto set = tomography_settings();
    for (int i = 0; i < 20; ++i) {
        const auto rho = random_state(rng);
        const Mat4 back = linear_inversion(predicted_counts(rho, set, 5000.0), set);
        EXPECT_LT((back - rho.matrix()).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(LinearInversion, NoisyCountsCanGoNegative) {
    const auto set = tomography_settings();
    const auto rho = bell_state(BellKind::PsiPlus);
    int negative = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Mat4 m = linear_inversion(sample_tomography_counts(rho, set, 1000.0, s), set);
        Eigen::SelfAdjointEigenSolver<Mat4> es(m);
        if (es.eigenvalues().minCoeff() < 0.0) ++negative;
        EXPECT_NEAR(m.trace().real(), 1.0, 1e-12);
    }
    EXPECT_GT(negative, 0);
}

TEST(LinearInversion, RejectsBadCounts) {
    const auto set = tomography_settings();
    std::vector<double> zeros(16, 0.0);
    EXPECT_THROW(linear_inversion(zeros, set), DataError);
    std::vector<double> short_counts(15, 1.0);
    EXPECT_THROW(linear_inversion(short_counts, set), DataError);
    std::vector<double> nan(16, 1.0);
    nan[3] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(linear_inversion(nan, set), DataError);
}

TEST(Parameterization, RoundTripAndPhysical) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
        const auto rho = random_state(rng);
        const Mat4 back = rho_from_params(params_from_rho(rho.matrix()));
        EXPECT_LT((back - rho.matrix()).cwiseAbs().maxCoeff(), 1e-10);
    }
    std::normal_distribution<double> g;
    for (int i = 0; i < 20; ++i) {
        MleParams t;
        for (int k = 0; k < 16; ++k) t(k) = g(rng);
        EXPECT_NO_THROW(TwoQubitState{rho_from_params(t)});
    }
}

TEST(Likelihood, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    const auto set = tomography_settings();
    const auto counts = sample_tomography_counts(werner(0.9), set, 1e4, 17);
    const TomographyLikelihood like(counts, set);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 5; ++trial) {
        MleParams t;
        for (int k = 0; k < 16; ++k) t(k) = g(rng);
        const MleParams grad = like.gradient(t);
        for (int j = 0; j < 16; ++j) {
            const double h = 1e-6;
            MleParams tp = t, tm = t;
            tp(j) += h;
            tm(j) -= h;
            const double fd = (like.value(tp) - like.value(tm)) / (2 * h);
            EXPECT_NEAR(grad(j), fd, 1e-6) << "component " << j;
        }
    }
}

TEST(Mle, ExactCountsRecoverRandomStates) {
    std::mt19937_64 rng(6);
    const auto set = tomography_settings();
    for (int i = 0; i < 10; ++i) {
        const auto rho = random_state(rng);
        const auto r = mle_reconstruct(predicted_counts(rho, set, 1e4), set);
        EXPECT_TRUE(r.converged);
        EXPECT_GE(fidelity(r.rho, rho), 0.9999);
    }
}

TEST(Mle, PoissonCountsWerner) {
    const auto set = tomography_settings();
    const auto rho = werner(0.97867);
    // 1e4 mean counts per projector.
    const auto r = mle_reconstruct(sample_tomography_counts(rho, set, 4e4, 99), set);
    EXPECT_TRUE(r.converged);
    EXPECT_GE(fidelity(r.rho, rho), 0.98);
    const auto rep = reconstruction_report(r.rho, bell_state(BellKind::PsiPlus));
    EXPECT_NEAR(rep.fidelity, 0.984, 0.01);
    EXPECT_NEAR(rep.concurrence, 0.968, 0.03);
}

TEST(Mle, LikelihoodAtLeastProjectedLinearInversion) {
    const auto set = tomography_settings();
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto counts = sample_tomography_counts(bell_state(BellKind::PsiPlus), set, 1000.0, s);
        const TomographyLikelihood like(counts, set);
        const Mat4 start = project_to_psd(linear_inversion(counts, set), 1e-6);
        const auto r = mle_reconstruct(counts, set);
        EXPECT_GE(r.log_likelihood, like.log_likelihood(start) - 1e-9);
    }
}

TEST(Mle, ObjectiveTraceIsMonotone) {
    const auto set = tomography_settings();
    MleOptions opt;
    opt.record_trace = true;
    const auto r = mle_reconstruct(sample_tomography_counts(werner(0.8), set, 500.0, 3), set, opt);
    ASSERT_GE(r.trace.size(), 2u);
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i], r.trace[i - 1]);
}

TEST(Mle, InvariantToRowPermutationOfLabelledData) {
    // The likelihood is a sum over projectors; relabelling both counts and
    // projectors consistently leaves the estimate unchanged.
    const auto set = tomography_settings();
    const auto counts = sample_tomography_counts(werner(0.9), set, 2000.0, 8);
    std::vector<TomographyProjector> entries = set.entries();
    std::vector<double> permuted = counts;
    std::reverse(entries.begin(), entries.end());
    std::reverse(permuted.begin(), permuted.end());
    const TomographyBasisSet reversed(entries);
    const auto a = mle_reconstruct(counts, set);
    const auto b = mle_reconstruct(permuted, reversed);
    EXPECT_LT((a.rho.matrix() - b.rho.matrix()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Mle, DegenerateProductState) {
    const auto set = tomography_settings();
    const auto hh = separable_state(Ket2::H(), Ket2::H());
    const auto r = mle_reconstruct(predicted_counts(hh, set, 1e4), set);
    EXPECT_GE(fidelity(r.rho, hh), 0.9999);
    EXPECT_NEAR(r.rho.matrix().trace().real(), 1.0, 1e-12);
}

TEST(Bootstrap, ReportsSpread) {
    const auto set = tomography_settings();
    const auto rho = werner(0.97867);
    const auto counts = sample_tomography_counts(rho, set, 1e4, 1);
    double total = 0.0;
    for (double c : counts) total += c;
    const auto fit = mle_reconstruct(counts, set);
    const auto b = bootstrap_report(fit.rho, total, set, bell_state(BellKind::PsiPlus), 10, 5);
    EXPECT_EQ(b.resamples, 10);
    EXPECT_GT(b.sigma.fidelity, 0.0);
    EXPECT_LT(b.sigma.fidelity, 0.01);
    EXPECT_NEAR(b.mean.fidelity, 0.984, 0.01);
    EXPECT_THROW(bootstrap_report(fit.rho, total, set, rho, 1, 5), DataError);
}
