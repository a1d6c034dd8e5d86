#pragma once

// Scripted two-arm experiments: the molarity sweep of solution B with
// solution A fixed, and the wave-plate theta_B sweep with theta_A fixed.
// Every point measures both psi+ and psi-, estimates the joint observables,
// corrects analyzer offsets and extracts theta_+-, theta_A and theta_B.

#include <algorithm>
#include <optional>

#include "nlrot/harness/config.hpp"
#include "nlrot/harness/fit.hpp"

namespace nlrot {

inline constexpr const char* kVersion = "nlrot 1.0.0";

/// Source state for one branch after noise, the two sample rotations and the
/// analyzer offsets. The offsets act as extra local rotations: pbs_a on arm A,
/// pbs_b on arm B, and the exchange plate (hwp) on arm A for psi- only.
inline TwoQubitState prepare_branch_state(const ExperimentConfig& c, Branch branch, double theta_a,
                                          double theta_b) {
    const auto bell = bell_state(branch == Branch::Plus ? BellKind::PsiPlus : BellKind::PsiMinus);
    const auto noisy = apply_noise(bell, c.noise);
    const double rot_a = theta_a + c.offsets.pbs_a + (branch == Branch::Minus ? c.offsets.hwp : 0.0);
    const double rot_b = theta_b + c.offsets.pbs_b;
    return apply_local(noisy, rotation_unitary(rot_a), rotation_unitary(rot_b));
}

/// State described by the config's `state` section with the arm rotations and
/// offsets applied (exchange-plate rotation only for psi-).
inline TwoQubitState prepare_config_state(const ExperimentConfig& c) {
    const auto noisy = apply_noise(c.state.build(), c.noise);
    const bool minus = c.state.bell && *c.state.bell == BellKind::PsiMinus;
    const double rot_a = c.arm_a.rotation() + c.offsets.pbs_a + (minus ? c.offsets.hwp : 0.0);
    const double rot_b = c.arm_b.rotation() + c.offsets.pbs_b;
    return apply_local(noisy, rotation_unitary(rot_a), rotation_unitary(rot_b));
}

/// Counts for the given settings: sampled, or expected values in exact mode.
inline CoincidenceTable acquire(const ExperimentConfig& c, const TwoQubitState& rho,
                                const std::vector<JointSetting>& settings, std::uint64_t stream_seed) {
    AcquisitionParams p = c.acquisition();
    p.seed = stream_seed;
    return c.exact ? expected_counts(rho, settings, p) : simulate_counts(rho, settings, p);
}

/// Rotates the measured (-M_zz, -M_xz) phasor by -2 * offset, i.e. applies
/// offset_correct at the level of the observables.
inline JointObservables remove_offset(const JointObservables& o, double offset) {
    const cplx z = cplx(-o.m_zz, -o.m_xz) * std::polar(1.0, -2.0 * offset);
    JointObservables out = o;
    out.m_zz = -z.real();
    out.m_xz = -z.imag();
    out.m_zx.reset();
    // sigma is only used through arg_sigma, which is rotation invariant for
    // equal entries; keep the larger one on both components.
    const double s = std::max(o.sigma_zz, o.sigma_xz);
    out.sigma_zz = s;
    out.sigma_xz = s;
    return out;
}

struct SweepRow {
    double sweep_value = 0.0;  // molarity (M) or theta_B (rad)
    double theta_a_prepared = 0.0;
    double theta_b_prepared = 0.0;
    AngleEstimate theta_plus;   // offset-corrected
    AngleEstimate theta_minus;  // offset-corrected
    AngleEstimate theta_a;      // extracted from the joint observables
    AngleEstimate theta_b;
    JointObservables obs_plus;   // raw
    JointObservables obs_minus;  // raw
};

struct SweepSummary {
    double r2_theta_plus = 0.0;
    double r2_theta_minus = 0.0;
    double r2_theta_b = 0.0;
    double theta_a_mean = 0.0;
    bool theta_plus_increasing = false;
    std::optional<LineFit> minus_line;        // theta_minus vs sweep value
    std::optional<double> zero_crossing;      // molarity sweep
    std::optional<double> zero_crossing_sigma;
    std::optional<double> phase_separation;   // theta sweep, in theta_B units
    std::optional<double> phase_separation_sigma;
    std::optional<double> supplementary_r2;
};

struct SweepResult {
    SweepVariable variable = SweepVariable::None;
    std::vector<SweepRow> rows;
    std::string config_hash;
    std::optional<std::uint64_t> seed;
    bool exact = false;
    SweepSummary summary;
};

inline SweepRow evaluate_point(const ExperimentConfig& c, double theta_a, double theta_b, std::size_t index) {
    const std::uint64_t base = c.seed.value_or(0);
    const auto settings = observable_settings();
    SweepRow row;
    row.theta_a_prepared = theta_a;
    row.theta_b_prepared = theta_b;
    const auto rho_p = prepare_branch_state(c, Branch::Plus, theta_a, theta_b);
    const auto rho_m = prepare_branch_state(c, Branch::Minus, theta_a, theta_b);
    row.obs_plus = estimate_observables(acquire(c, rho_p, settings, derive_seed(base, index, 0)));
    row.obs_minus = estimate_observables(acquire(c, rho_m, settings, derive_seed(base, index, 1)));

    const auto raw_p = branch_angle(row.obs_plus);
    const auto raw_m = branch_angle(row.obs_minus);
    row.theta_plus = {offset_correct(raw_p.value, Branch::Plus, c.offsets), raw_p.sigma};
    row.theta_minus = {offset_correct(raw_m.value, Branch::Minus, c.offsets), raw_m.sigma};

    const auto ext = extract_thetas(remove_offset(row.obs_plus, c.offsets.total(Branch::Plus)),
                                    remove_offset(row.obs_minus, c.offsets.total(Branch::Minus)));
    row.theta_a = ext.theta_a;
    row.theta_b = ext.theta_b;
    return row;
}

namespace detail {

inline void summarize(SweepResult& r) {
    std::vector<double> tp, tm, tb, pp, pm, pb;
    double mean_a = 0.0;
    for (const auto& row : r.rows) {
        tp.push_back(row.theta_plus.value);
        tm.push_back(row.theta_minus.value);
        tb.push_back(row.theta_b.value);
        pp.push_back(row.theta_a_prepared + row.theta_b_prepared);
        pm.push_back(row.theta_a_prepared - row.theta_b_prepared);
        pb.push_back(row.theta_b_prepared);
        mean_a += row.theta_a.value;
    }
    r.summary.r2_theta_plus = r_squared(tp, pp);
    r.summary.r2_theta_minus = r_squared(tm, pm);
    r.summary.r2_theta_b = r_squared(tb, pb);
    r.summary.theta_a_mean = mean_a / r.rows.size();
    r.summary.theta_plus_increasing = true;
    for (std::size_t i = 1; i < tp.size(); ++i)
        if (!(tp[i] > tp[i - 1])) r.summary.theta_plus_increasing = false;
}

inline SweepResult start_result(const ExperimentConfig& c, SweepVariable v) {
    SweepResult r;
    r.variable = v;
    r.config_hash = config_hash(c);
    r.seed = c.seed;
    r.exact = c.exact;
    return r;
}

}  // namespace detail

inline SweepResult run_molarity_sweep(const ExperimentConfig& c) {
    if (c.sweep != SweepVariable::MolarityB) throw DataError("molarity sweep: sweep.variable must be molarity_b");
    if (!c.arm_b.solution) throw DataError("molarity sweep: arm_b must be a solution (set molarity)");
    c.validate(true);
    std::vector<double> values = c.sweep_values;
    std::sort(values.begin(), values.end());

    auto r = detail::start_result(c, SweepVariable::MolarityB);
    r.rows.resize(values.size());
    const double theta_a = c.arm_a.rotation();
    parallel_for(values.size(), [&](std::size_t i) {
        SolutionSpec sol = *c.arm_b.solution;
        sol.molarity = values[i];
        r.rows[i] = evaluate_point(c, theta_a, solution_rotation(sol), i);
        r.rows[i].sweep_value = values[i];
    });
    detail::summarize(r);

    if (values.size() >= 3 && values.front() < values.back()) {
        std::vector<io::XyPoint> pts;
        for (const auto& row : r.rows) pts.push_back({row.sweep_value, row.theta_minus.value, row.theta_minus.sigma});
        const auto fit = fit_line(pts);
        r.summary.minus_line = fit;
        if (fit.slope != 0.0) {
            const auto [x0, sx] = fit.root();
            r.summary.zero_crossing = x0;
            r.summary.zero_crossing_sigma = sx;
        }
    }
    return r;
}

inline SweepResult run_theta_sweep(const ExperimentConfig& c) {
    if (c.sweep != SweepVariable::ThetaB) throw DataError("theta sweep: sweep.variable must be theta_b");
    c.validate(true);
    std::vector<double> values = c.sweep_values;
    std::sort(values.begin(), values.end());

    auto r = detail::start_result(c, SweepVariable::ThetaB);
    r.rows.resize(values.size());
    const double theta_a = c.arm_a.rotation();
    parallel_for(values.size(), [&](std::size_t i) {
        r.rows[i] = evaluate_point(c, theta_a, values[i], i);
        r.rows[i].sweep_value = values[i];
    });
    detail::summarize(r);

    if (values.size() >= 4) {
        std::vector<double> zp, zm;
        for (const auto& row : r.rows) {
            zp.push_back(row.obs_plus.m_zz);
            zm.push_back(row.obs_minus.m_zz);
        }
        const auto fp = fit_sinusoid(values, zp, 2.0);
        const auto fm = fit_sinusoid(values, zm, 2.0);
        // The + curve is shifted by -theta_A along theta_B and the - curve by
        // +theta_A, so half the phase difference is the 2 theta_A separation.
        r.summary.phase_separation = 0.5 * wrap_pi(fp.phase - fm.phase);
        r.summary.phase_separation_sigma = 0.5 * std::hypot(fp.phase_sigma, fm.phase_sigma);
    }
    return r;
}

inline SweepResult run_sweep(const ExperimentConfig& c) {
    switch (c.sweep) {
        case SweepVariable::MolarityB: return run_molarity_sweep(c);
        case SweepVariable::ThetaB: return run_theta_sweep(c);
        case SweepVariable::None: break;
    }
    throw DataError("config has no sweep section (sweep.variable is none)");
}

inline void write_sweep(std::ostream& out, const SweepResult& r) {
    io::Metadata md;
    md["artifact_version"] = kVersion;
    md["config_hash"] = r.config_hash;
    md["rng_seed"] = r.seed ? std::to_string(*r.seed) : "none";
    md["mode"] = r.exact ? "exact" : "sampled";
    md["sweep_variable"] = detail::to_string(r.variable);
    md["r2_theta_plus"] = io::exact(r.summary.r2_theta_plus);
    md["r2_theta_minus"] = io::exact(r.summary.r2_theta_minus);
    md["r2_theta_b"] = io::exact(r.summary.r2_theta_b);
    md["theta_a_mean_deg"] = io::angle_deg(r.summary.theta_a_mean);
    md["theta_plus_increasing"] = r.summary.theta_plus_increasing ? "true" : "false";
    if (r.summary.zero_crossing) {
        md["zero_crossing_molarity"] = detail::format_number(*r.summary.zero_crossing, "%.6f");
        md["zero_crossing_sigma"] = detail::format_number(*r.summary.zero_crossing_sigma, "%.6f");
    }
    if (r.summary.phase_separation) {
        md["phase_separation_deg"] = io::angle_deg(*r.summary.phase_separation);
        md["phase_separation_sigma_deg"] = io::angle_deg(*r.summary.phase_separation_sigma);
    }
    if (r.summary.supplementary_r2) md["supplementary_r2"] = io::exact(*r.summary.supplementary_r2);
    io::write_metadata(out, md);
    out << (r.variable == SweepVariable::MolarityB ? "molarity_b" : "theta_b_deg")
        << ",theta_b_deg,theta_plus_deg,sigma_plus_deg,theta_minus_deg,sigma_minus_deg,theta_a_ext_deg,"
           "sigma_a_deg,theta_b_ext_deg,sigma_b_deg,m_zz_plus,m_xz_plus,m_zz_minus,m_xz_minus\n";
    for (const auto& row : r.rows) {
        out << (r.variable == SweepVariable::MolarityB ? detail::format_number(row.sweep_value, "%.6f")
                                                       : io::angle_deg(row.sweep_value))
            << "," << io::angle_deg(row.theta_b_prepared) << "," << io::angle_deg(row.theta_plus.value) << ","
            << io::angle_deg(row.theta_plus.sigma) << "," << io::angle_deg(row.theta_minus.value) << ","
            << io::angle_deg(row.theta_minus.sigma) << "," << io::angle_deg(row.theta_a.value) << ","
            << io::angle_deg(row.theta_a.sigma) << "," << io::angle_deg(row.theta_b.value) << ","
            << io::angle_deg(row.theta_b.sigma) << "," << io::exact(row.obs_plus.m_zz) << ","
            << io::exact(row.obs_plus.m_xz) << "," << io::exact(row.obs_minus.m_zz) << ","
            << io::exact(row.obs_minus.m_xz) << "\n";
    }
}

/// R^2 of supplementary (x, y) data against the sweep's theta column,
/// linearly interpolated at each x. `minus` selects theta_minus over theta_plus.
inline double compare_to_supplementary(const SweepResult& r, const std::vector<io::XyPoint>& data, bool minus) {
    if (r.rows.size() < 2 || data.empty()) throw DataError("supplementary comparison needs data");
    std::vector<double> obs, pred;
    for (const auto& p : data) {
        auto it = std::lower_bound(r.rows.begin(), r.rows.end(), p.x,
                                   [](const SweepRow& row, double x) { return row.sweep_value < x; });
        if (it == r.rows.begin()) ++it;
        if (it == r.rows.end()) --it;
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        auto pick = [&](const SweepRow& row) { return to_deg(minus ? row.theta_minus.value : row.theta_plus.value); };
        const double t = (p.x - lo.sweep_value) / (hi.sweep_value - lo.sweep_value);
        pred.push_back(pick(lo) + t * (pick(hi) - pick(lo)));
        obs.push_back(p.y);
    }
    return r_squared(obs, pred);
}

}  // namespace nlrot
