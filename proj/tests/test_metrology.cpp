#include <gtest/gtest.h>

#include "nlrot/metrology.hpp"

using namespace nlrot;

TEST(NoonProbe, StaysNormalized) {
    for (int n = 1; n <= 8; ++n)
        for (double t : {0.0, 0.4, -1.1}) EXPECT_NEAR((NoonProbe{n, t}.norm()), 1.0, 1e-14);
    EXPECT_THROW((NoonProbe{0, 0.1}.coefficients()), DataError);
}

TEST(NoonProbe, CircularStatesAreRotationEigenstates) {
    const auto [r, l] = NoonProbe::single_photon_amplitudes(0.3);
    EXPECT_NEAR(std::abs(r - std::polar(1.0, 0.3)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(l - std::polar(1.0, -0.3)), 0.0, 1e-15);
}

TEST(Qfi, MatchesClosedForm) {
    for (int n = 1; n <= 8; ++n) {
        EXPECT_NEAR(qfi(n), 4.0 * n * n, 1e-10);
        EXPECT_NEAR(qfi(n, -0.9), qfi_closed_form(n), 1e-10);
    }
    EXPECT_THROW(qfi(0), DataError);
}

TEST(VarianceScaling, BoundColumn) {
    const auto rows = variance_scaling({1, 2, 4}, 50, 20, 1);
    EXPECT_DOUBLE_EQ(rows[0].var_entangled_bound, 0.25);
    EXPECT_DOUBLE_EQ(rows[1].var_entangled_bound, 0.0625);
    EXPECT_DOUBLE_EQ(rows[2].var_entangled_bound, 0.015625);
}

TEST(VarianceScaling, SeparableSlopeIsMinusOne) {
    std::vector<int> ns{1, 2, 3, 4, 5, 6, 7, 8};
    const auto rows = variance_scaling(ns, 4000, 100, 7);
    std::vector<double> x, ys, ye;
    for (const auto& r : rows) {
        x.push_back(r.n);
        ys.push_back(r.var_separable_sim);
        ye.push_back(r.var_entangled_bound);
        // At n = 1 the two coincide; beyond that the separable variance is larger.
        if (r.n > 1) EXPECT_GT(r.var_separable_sim, r.var_entangled_bound);
    }
    EXPECT_NEAR(loglog_slope(x, ys), -1.0, 0.1);
    EXPECT_NEAR(loglog_slope(x, ye), -2.0, 1e-12);
}

TEST(VarianceScaling, DeterministicPerN) {
    const auto a = variance_scaling({1, 3}, 100, 10, 5);
    const auto b = variance_scaling({3}, 100, 10, 5);
    EXPECT_EQ(a[1].var_separable_sim, b[0].var_separable_sim);
}

TEST(VarianceScaling, RejectsBadInput) {
    EXPECT_THROW(variance_scaling({1}, 1, 10, 0), DataError);
    EXPECT_THROW(variance_scaling({0}, 10, 10, 0), DataError);
    EXPECT_THROW(variance_scaling({1}, 10, 0, 0), DataError);
    EXPECT_THROW(loglog_slope({1.0}, {1.0}), DataError);
    EXPECT_THROW(loglog_slope({1.0, 2.0}, {1.0, -1.0}), DataError);
}
