#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "nlrot/harness/sweep.hpp"

using namespace nlrot;

namespace {

json theta_sweep_json() {
    return json::parse(R"({
        "arm_a": {"angle_deg": 20},
        "arm_b": {"angle_deg": 0},
        "offsets": {"pbs_a_deg": 0, "pbs_b_deg": 0, "hwp_deg": 0},
        "statistics": {"pair_flux": 1e5, "duration": 1, "seed": 3},
        "sweep": {"variable": "theta_b", "values": [40, -30, -20, -10, 0, 10, 20, 30, -40]}
    })");
}

json molarity_sweep_json() {
    return json::parse(R"({
        "arm_a": {"angle_deg": 20.08, "transmission": 0.75},
        "arm_b": {"molarity": 0, "slope_deg_per_molar": 7.01, "transmission": 0.75},
        "statistics": {"pair_flux": 1e4, "duration": 10, "seed": 11},
        "sweep": {"variable": "molarity_b",
                  "values": [0.4236, 0.8472, 1.2708, 1.6944, 2.118, 2.5416, 2.9652, 3.3888, 3.8124, 4.236]}
    })");
}

std::string sweep_csv(const SweepResult& r) {
    std::ostringstream s;
    write_sweep(s, r);
    return s.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// fit_line

TEST(FitLine, ExactLine) {
    std::vector<io::XyPoint> pts;
    for (double x : {0.0, 1.0, 2.0, 3.0, 4.0}) pts.push_back({x, 7.01 * x + 4.09, 0.04});
    const auto f = fit_line(pts);
    EXPECT_NEAR(f.slope, 7.01, 1e-12);
    EXPECT_NEAR(f.intercept, 4.09, 1e-12);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-15);
    const auto [x0, sx] = f.root();
    EXPECT_NEAR(x0, -4.09 / 7.01, 1e-12);
    EXPECT_GT(sx, 0.0);
}

TEST(FitLine, ConstantData) {
    const auto f = fit_line({{0, 2, 0}, {1, 2, 0}, {2, 2, 0}});
    EXPECT_NEAR(f.slope, 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(f.r_squared, 1.0);
    EXPECT_THROW(f.root(), DataError);
}

TEST(FitLine, RejectsDegenerateInput) {
    EXPECT_THROW(fit_line({{1, 1, 0}, {2, 2, 0}}), DataError);
    EXPECT_THROW(fit_line({{1, 1, 0}, {1, 2, 0}, {1, 3, 0}}), DataError);
}

TEST(FitLine, NoisyCalibrationWithinThreeSigma) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> noise(0.0, 0.04);
    int inside = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        std::vector<io::XyPoint> pts;
        for (int k = 0; k <= 10; ++k) {
            const double c = 0.4236 * k;
            pts.push_back({c, 7.01 * c + 4.09 + noise(rng), 0.04});
        }
        const auto f = fit_line(pts);
        if (std::abs(f.slope - 7.01) <= 3.0 * f.slope_sigma) ++inside;
    }
    EXPECT_GE(inside, trials * 97 / 100);
}

TEST(FitSinusoid, RecoversPhase) {
    std::vector<double> x, y;
    for (int k = -8; k <= 8; ++k) {
        x.push_back(deg(5.0 * k));
        y.push_back(-std::cos(2 * x.back() + deg(40)));
    }
    const auto f = fit_sinusoid(x, y, 2.0);
    EXPECT_NEAR(f.amplitude, 1.0, 1e-12);
    EXPECT_NEAR(std::abs(wrap_pi(f.phase - deg(40) - pi)), 0.0, 1e-12);
}

TEST(RSquared, Conventions) {
    EXPECT_DOUBLE_EQ(r_squared({1, 2, 3}, {1, 2, 3}), 1.0);
    EXPECT_DOUBLE_EQ(r_squared({2, 2}, {2, 2}), 1.0);
    EXPECT_THROW(r_squared({1}, {1, 2}), DataError);
}

// ---------------------------------------------------------------------------
// config

TEST(Config, DefaultsCarryCalibrationConstants) {
    const auto c = parse_config(json::object());
    EXPECT_NEAR(to_deg(c.offsets.pbs_a), -4.75, 1e-12);
    EXPECT_NEAR(to_deg(c.offsets.pbs_b), 4.09, 1e-12);
    EXPECT_NEAR(to_deg(c.offsets.hwp), 5.47, 1e-12);
    const auto m = parse_config(molarity_sweep_json());
    ASSERT_TRUE(m.arm_b.solution.has_value());
    EXPECT_NEAR(to_deg(m.arm_b.solution->slope), 7.01, 1e-12);
    EXPECT_DOUBLE_EQ(m.arm_b.solution->transmission, 0.75);
    EXPECT_NEAR(m.acquisition().mean_pairs(), 1e5 * 0.5625, 1e-6);
}

TEST(Config, RejectsInvalidDocuments) {
    EXPECT_THROW(parse_config(json::parse(R"({"bogus": 1})")), DataError);
    EXPECT_THROW(parse_config(json::parse(R"({"noise": {"visibility": 2}})")), DataError);
    EXPECT_THROW(parse_config(json::parse(R"({"sweep": {"variable": "both"}})")), DataError);
    EXPECT_THROW(parse_config(json::parse(R"({"sweep": {"variable": "theta_b", "values": []}})")), DataError);
    EXPECT_THROW(parse_config(json::parse(R"({"arm_a": {"angle_deg": 1, "molarity": 2}})")), DataError);
    EXPECT_THROW(parse_config(json::parse(R"({"state": {"bell": "psi_plus", "separable": ["H", "V"]}})")), DataError);
    EXPECT_THROW(parse_config(json::parse(R"({"statistics": {"duration": "long"}})")), DataError);
    EXPECT_THROW(parse_config(json::parse(R"({"settings": [["Z"]]})")), DataError);
}

TEST(Config, SeedRequiredForSampledRuns) {
    auto j = theta_sweep_json();
    j["statistics"].erase("seed");
    const auto c = parse_config(j);
    EXPECT_THROW(c.validate(true), DataError);
    EXPECT_THROW(run_theta_sweep(c), DataError);
    j["exact"] = true;
    EXPECT_NO_THROW(parse_config(j).validate(true));
}

TEST(Config, HashTracksEveryField) {
    const auto base = parse_config(theta_sweep_json());
    const auto h = config_hash(base);
    EXPECT_EQ(h, config_hash(parse_config(theta_sweep_json())));
    EXPECT_EQ(h, config_hash(parse_config(to_json(base))));
    std::vector<json> variants;
    for (int i = 0; i < 6; ++i) variants.push_back(theta_sweep_json());
    variants[0]["statistics"]["seed"] = 4;
    variants[1]["arm_a"]["angle_deg"] = 20.5;
    variants[2]["noise"] = {{"visibility", 0.9}};
    variants[3]["outputs"] = {{"sweep", "x.csv"}};
    variants[4]["exact"] = true;
    variants[5]["sweep"]["values"] = {0, 10};
    for (const auto& v : variants) EXPECT_NE(config_hash(parse_config(v)), h);
}

TEST(Config, ExplicitSettingsAndSeparableState) {
    const auto c = parse_config(json::parse(R"J({
        "state": {"separable": ["H", "V"]},
        "settings": [["Z", "Z"], ["lin(22.5)", "X"]]
    })J"));
    EXPECT_FALSE(c.state.bell.has_value());
    ASSERT_EQ(c.joint_settings().size(), 2u);
    EXPECT_EQ(c.joint_settings()[1].a.id(), "lin(22.5)");
    EXPECT_EQ(c.state.label(), "separable_HV");
}

TEST(Config, CheckWritable) {
    EXPECT_THROW(check_writable("/nonexistent-dir/x.csv"), DataError);
    EXPECT_NO_THROW(check_writable(::testing::TempDir() + "nlrot_writable.csv"));
}

// ---------------------------------------------------------------------------
// io

TEST(Io, TableRoundTrip) {
    AcquisitionParams p;
    p.seed = 5;
    const auto t = simulate_counts(bell_state(BellKind::PsiPlus), chsh_settings(), p);
    std::stringstream s;
    io::write_table(s, t);
    EXPECT_EQ(s.str().find("# accidental_fraction="), 0u);
    EXPECT_NE(s.str().find("setting_a_id,setting_b_id,n_pp,n_pm,n_mp,n_mm\n"), std::string::npos);
    const auto back = io::read_table(s);
    ASSERT_EQ(back.rows.size(), t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        EXPECT_EQ(back.rows[i].a, t.rows[i].a);
        EXPECT_EQ(back.rows[i].counts, t.rows[i].counts);
    }
    EXPECT_EQ(back.metadata, t.metadata);
}

TEST(Io, TableRejectsMalformed) {
    std::stringstream bad_header("a,b,c\n");
    EXPECT_THROW(io::read_table(bad_header), DataError);
    std::stringstream negative("setting_a_id,setting_b_id,n_pp,n_pm,n_mp,n_mm\nZ,Z,1,-2,3,4\n");
    EXPECT_THROW(io::read_table(negative), DataError);
    std::stringstream short_row("setting_a_id,setting_b_id,n_pp,n_pm,n_mp,n_mm\nZ,Z,1,2,3\n");
    EXPECT_THROW(io::read_table(short_row), DataError);
}

TEST(Io, TomographyAnyOrderButComplete) {
    const auto set = tomography_settings();
    const auto counts = predicted_counts(bell_state(BellKind::PsiPlus), set, 100.0);
    std::stringstream s;
    io::write_tomography(s, set, counts, {});
    std::string text = s.str();
    // Reverse the data rows.
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    std::string reversed = lines[0] + "\n";
    for (std::size_t i = lines.size() - 1; i >= 1; --i) reversed += lines[i] + "\n";
    std::stringstream rs(reversed);
    EXPECT_EQ(io::read_tomography(rs, set).counts, counts);

    std::stringstream dup(lines[0] + "\n" + lines[1] + "\n" + lines[1] + "\n");
    EXPECT_THROW(io::read_tomography(dup, set), DataError);
    std::stringstream missing(lines[0] + "\n" + lines[1] + "\n");
    EXPECT_THROW(io::read_tomography(missing, set), DataError);
}

TEST(Io, DensityMatrixRoundTrip) {
    const auto rho = separable_state(Ket2::R(), Ket2::D());
    std::stringstream s;
    io::write_density_matrix(s, rho.matrix());
    EXPECT_EQ((rho.matrix() - io::read_density_matrix(s)).norm(), 0.0);
}

TEST(Io, ObservablesRoundTrip) {
    const auto o = exact_observables(bell_state(BellKind::PsiMinus));
    std::stringstream s;
    io::write_observables(s, {{"psi_minus", o}});
    const auto back = io::read_observables(s);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].label, "psi_minus");
    EXPECT_EQ(back[0].obs.m_zz, o.m_zz);
    EXPECT_EQ(*back[0].obs.m_zx, *o.m_zx);
}

TEST(Io, ReadXyGenericColumns) {
    std::stringstream s("c;theta;err\n0.5;3.5;0.04\n1.0;7.0;0.05\n");
    const auto pts = io::read_xy(s, {0, 1, 2, ';'});
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_DOUBLE_EQ(pts[1].y, 7.0);
    EXPECT_DOUBLE_EQ(pts[1].sigma, 0.05);
    std::stringstream bad("1,2\nx,y\n");
    EXPECT_THROW(io::read_xy(bad), DataError);
}

// ---------------------------------------------------------------------------
// sweeps

TEST(ThetaSweep, ExactModeFollowsClosedForms) {
    auto j = theta_sweep_json();
    j["exact"] = true;
    const auto r = run_theta_sweep(parse_config(j));
    ASSERT_EQ(r.rows.size(), 9u);
    for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_LT(r.rows[i - 1].sweep_value, r.rows[i].sweep_value);
    for (const auto& row : r.rows) {
        const double tb = row.sweep_value;
        EXPECT_NEAR(row.obs_plus.m_zz, -std::cos(2 * tb + deg(40)), 1e-12);
        EXPECT_NEAR(row.obs_minus.m_xz, -std::sin(deg(40) - 2 * tb), 1e-12);
        EXPECT_NEAR(row.theta_a.value, deg(20), 1e-9);
        EXPECT_NEAR(row.theta_b.value, tb, 1e-9);
    }
    EXPECT_NEAR(*r.summary.phase_separation, deg(40), 1e-9);
    EXPECT_NEAR(r.summary.r2_theta_plus, 1.0, 1e-12);
}

TEST(ThetaSweep, CancellationPoint) {
    auto j = theta_sweep_json();
    j["sweep"]["values"] = {-20};
    j["statistics"]["pair_flux"] = 1e5;
    const auto r = run_theta_sweep(parse_config(j));
    EXPECT_NEAR(r.rows[0].theta_plus.value, 0.0, 3.0 * r.rows[0].theta_plus.sigma);
}

TEST(ThetaSweep, SampledRSquaredAndPhase) {
    const auto r = run_theta_sweep(parse_config(theta_sweep_json()));
    EXPECT_GE(r.summary.r2_theta_plus, 0.999);
    EXPECT_GE(r.summary.r2_theta_minus, 0.999);
    EXPECT_GE(r.summary.r2_theta_b, 0.999);
    EXPECT_NEAR(*r.summary.phase_separation, deg(40), 3.0 * *r.summary.phase_separation_sigma + deg(0.2));
}

TEST(ThetaSweep, RequiresThetaVariable) {
    EXPECT_THROW(run_theta_sweep(parse_config(molarity_sweep_json())), DataError);
    EXPECT_THROW(run_sweep(parse_config(json::object())), DataError);
}

TEST(MolaritySweep, ZeroCrossingAndMonotonePlus) {
    const auto c = parse_config(molarity_sweep_json());
    const auto r = run_molarity_sweep(c);
    ASSERT_EQ(r.rows.size(), 10u);
    EXPECT_TRUE(r.summary.theta_plus_increasing);
    for (const auto& row : r.rows) EXPECT_GT(row.theta_plus.value, deg(20.08));
    const double expected = 20.08 / 7.01;
    EXPECT_NEAR(*r.summary.zero_crossing, expected, 3.0 * *r.summary.zero_crossing_sigma);
    EXPECT_LT(*r.summary.zero_crossing_sigma, 0.05);
}

TEST(MolaritySweep, ExactZeroCrossing) {
    auto j = molarity_sweep_json();
    j["exact"] = true;
    const auto r = run_molarity_sweep(parse_config(j));
    EXPECT_NEAR(*r.summary.zero_crossing, 2.8644793152639085, 1e-9);
}

TEST(MolaritySweep, ZeroMolarityNoOffsetsGivesZero) {
    const auto c = parse_config(json::parse(R"({
        "arm_a": {"molarity": 0}, "arm_b": {"molarity": 0},
        "offsets": {"pbs_a_deg": 0, "pbs_b_deg": 0, "hwp_deg": 0},
        "statistics": {"seed": 2},
        "sweep": {"variable": "molarity_b", "values": [0]}
    })"));
    const auto r = run_molarity_sweep(c);
    EXPECT_NEAR(r.rows[0].theta_plus.value, 0.0, 3.0 * r.rows[0].theta_plus.sigma);
    EXPECT_NEAR(r.rows[0].theta_minus.value, 0.0, 3.0 * r.rows[0].theta_minus.sigma);
}

TEST(MolaritySweep, OffsetsAreRemoved) {
    auto j = molarity_sweep_json();
    j["exact"] = true;
    const auto r = run_molarity_sweep(parse_config(j));
    for (const auto& row : r.rows) {
        EXPECT_NEAR(row.theta_plus.value, deg(20.08) + row.theta_b_prepared, 1e-12);
        EXPECT_NEAR(row.theta_minus.value, deg(20.08) - row.theta_b_prepared, 1e-12);
    }
}

TEST(MolaritySweep, RejectsBeforeSimulating) {
    auto j = molarity_sweep_json();
    j["arm_b"] = {{"angle_deg", 3}};
    EXPECT_THROW(run_molarity_sweep(parse_config(j)), DataError);
    j = molarity_sweep_json();
    j["sweep"]["values"] = {1.0, -0.5};
    EXPECT_THROW(parse_config(j), DataError);
}

TEST(Sweep, ByteIdenticalForSameSeed) {
    const auto c = parse_config(molarity_sweep_json());
    const auto a = sweep_csv(run_sweep(c));
    EXPECT_EQ(a, sweep_csv(run_sweep(c)));
    auto j = molarity_sweep_json();
    j["statistics"]["seed"] = 12;
    EXPECT_NE(a, sweep_csv(run_sweep(parse_config(j))));
    EXPECT_NE(a.find("# config_hash=" + config_hash(c)), std::string::npos);
    EXPECT_NE(a.find("# artifact_version=nlrot 1.0.0"), std::string::npos);
}

TEST(Sweep, SupplementaryComparison) {
    auto j = molarity_sweep_json();
    j["exact"] = true;
    const auto r = run_molarity_sweep(parse_config(j));
    std::vector<io::XyPoint> data;
    for (double c : {0.5, 1.5, 2.5, 3.5}) data.push_back({c, 20.08 - 7.01 * c, 0.0});
    EXPECT_NEAR(compare_to_supplementary(r, data, true), 1.0, 1e-9);
    EXPECT_LT(compare_to_supplementary(r, data, false), 0.0);
}
