#pragma once

// Command-line front end. Exit codes: 0 ok, 1 usage, 2 data/validation,
// 3 non-convergence.
//
// Output goes to --out, else the config's outputs entry for the command,
// else $NLROT_OUT_DIR/<default name>, else standard output.

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <CLI11.hpp>

#include "nlrot/harness/sweep.hpp"
#include "nlrot/harness/verify.hpp"
#include "nlrot/metrology.hpp"
#include "nlrot/tomography.hpp"

namespace nlrot {

inline constexpr const char* kOutDirEnv = "NLROT_OUT_DIR";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNoConvergence = 3 };

namespace cli {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool exact = false;
    std::string out;
    std::string format = "csv";
};

inline void add_common(CLI::App* sub, CommonOptions& o, bool config_required, bool with_seed, bool with_exact) {
    auto* c = sub->add_option("--config", o.config, "experiment config (JSON)");
    if (config_required) c->required();
    if (with_seed) sub->add_option("--seed", o.seed, "RNG seed (overrides the config)");
    if (with_exact) sub->add_flag("--exact", o.exact, "emit Born-rule expectations instead of samples");
    sub->add_option("--out", o.out, "output file");
    sub->add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv"}));
}

inline bool has_seed(const CommonOptions& o) { return o.seed.has_value(); }

inline ExperimentConfig load_with_overrides(const CommonOptions& o) {
    ExperimentConfig c = load_config(o.config);
    if (has_seed(o)) c.seed = *o.seed;
    if (o.exact) c.exact = true;
    return c;
}

/// Destination for one output artifact; empty path means standard output.
inline std::string resolve_output(const CommonOptions& o, const ExperimentConfig* cfg, const std::string& key,
                                  const std::string& default_name) {
    std::string path = o.out;
    if (path.empty() && cfg) {
        const auto it = cfg->outputs.find(key);
        if (it != cfg->outputs.end()) path = it->second;
    }
    if (path.empty()) {
        if (const char* dir = std::getenv(kOutDirEnv); dir && *dir)
            path = (std::filesystem::path(dir) / default_name).string();
    }
    if (!path.empty()) check_writable(path);
    return path;
}

/// Every output path a config names must be writable before any work starts.
inline void check_config_outputs(const ExperimentConfig& c) {
    for (const auto& [k, p] : c.outputs) {
        if (p.empty()) throw DataError("config: outputs." + k + " is empty");
        check_writable(p);
    }
}

inline void emit(std::ostream& out, const std::string& path, const std::string& text) {
    if (path.empty()) {
        out << text;
        out.flush();
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write '" + path + "'");
    f << text;
    if (!f) throw DataError("write failed for '" + path + "'");
}

inline std::uint64_t require_seed(const ExperimentConfig& c) {
    if (!c.seed) throw DataError("a seed is required (statistics.seed or --seed)");
    return *c.seed;
}

// ---------------------------------------------------------------------------

inline int cmd_simulate(const CommonOptions& o, const std::string& state_override, std::ostream& out) {
    ExperimentConfig c = load_with_overrides(o);
    if (!state_override.empty()) c.state.bell = bell_kind_from_string(state_override);
    c.validate(true);
    check_config_outputs(c);
    const auto path = resolve_output(o, &c, "table", "counts.csv");
    const auto rho = prepare_config_state(c);
    std::ostringstream text;
    if (c.settings_kind == SettingsKind::Tomography) {
        const auto set = tomography_settings();
        const double flux = c.acquisition().mean_pairs();
        const auto counts = c.exact ? predicted_counts(rho, set, flux)
                                    : sample_tomography_counts(rho, set, flux, require_seed(c));
        io::Metadata md;
        md["config_hash"] = config_hash(c);
        md["mode"] = c.exact ? "exact" : "sampled";
        md["rng_seed"] = c.seed ? std::to_string(*c.seed) : "none";
        md["state"] = c.state.label();
        io::write_tomography(text, set, counts, md);
    } else {
        auto table = acquire(c, rho, c.joint_settings(), c.seed.value_or(0));
        table.metadata["config_hash"] = config_hash(c);
        table.metadata["state"] = c.state.label();
        if (!c.seed) table.metadata["rng_seed"] = "none";
        io::write_table(text, table);
    }
    emit(out, path, text.str());
    return kExitOk;
}

inline int cmd_observables(const CommonOptions& o, const std::vector<std::string>& files,
                           const std::vector<std::string>& labels, std::ostream& out) {
    if (!labels.empty() && labels.size() != files.size())
        throw DataError("--label must be given once per input file");
    const auto path = resolve_output(o, nullptr, "observables", "observables.csv");
    std::vector<io::LabeledObservables> rows;
    for (std::size_t i = 0; i < files.size(); ++i) {
        CoincidenceTable t;
        io::with_input(files[i], [&](std::istream& in) { t = io::read_table(in); });
        std::string label = labels.empty() ? "" : labels[i];
        if (label.empty()) {
            const auto it = t.metadata.find("state");
            label = it != t.metadata.end() ? it->second : std::filesystem::path(files[i]).stem().string();
        }
        rows.push_back({label, estimate_observables(t)});
    }
    std::ostringstream text;
    io::write_observables(text, rows);
    emit(out, path, text.str());
    return kExitOk;
}

inline int cmd_extract(const CommonOptions& o, const std::string& file, const std::string& plus_label,
                       const std::string& minus_label, std::ostream& out) {
    AnalyzerOffsets offsets = AnalyzerOffsets::none();
    std::optional<ExperimentConfig> cfg;
    if (!o.config.empty()) {
        cfg = load_config(o.config);
        offsets = cfg->offsets;
    }
    const auto path = resolve_output(o, cfg ? &*cfg : nullptr, "extract", "extract.csv");
    std::vector<io::LabeledObservables> rows;
    io::with_input(file, [&](std::istream& in) { rows = io::read_observables(in); });
    auto find = [&](const std::string& label) {
        for (const auto& r : rows)
            if (r.label == label) return r.obs;
        throw DataError("observables file has no row labelled '" + label + "'");
    };
    const auto plus = remove_offset(find(plus_label), offsets.total(Branch::Plus));
    const auto minus = remove_offset(find(minus_label), offsets.total(Branch::Minus));
    const auto e = extract_thetas(plus, minus);
    const auto tp = branch_angle(plus), tm = branch_angle(minus);

    std::ostringstream text;
    text << "theta_a_deg,theta_b_deg,sigma_deg,theta_plus_deg,theta_minus_deg,residue_a,residue_b\n"
         << io::angle_deg(e.theta_a.value) << "," << io::angle_deg(e.theta_b.value) << ","
         << io::angle_deg(e.theta_a.sigma) << "," << io::angle_deg(tp.value) << "," << io::angle_deg(tm.value)
         << "," << io::exact(e.residue_a) << "," << io::exact(e.residue_b) << "\n";
    emit(out, path, text.str());
    return kExitOk;
}

inline int cmd_scan(const CommonOptions& o, double lo_deg, double hi_deg, double res_deg, std::ostream& out) {
    ExperimentConfig c = load_with_overrides(o);
    c.validate(true);
    check_config_outputs(c);
    const auto path = resolve_output(o, &c, "scan", "scan.csv");
    const double theta_a = c.arm_a.rotation();
    const auto base = apply_noise(bell_state(BellKind::PsiMinus), c.noise);
    const auto settings = observable_settings();
    std::uint64_t evaluation = 0;
    auto probe = [&](double theta_b) {
        const auto rho = apply_local(base, rotation_unitary(theta_a), rotation_unitary(theta_b));
        return estimate_observables(acquire(c, rho, settings, derive_seed(c.seed.value_or(0), evaluation++)));
    };
    const auto r = scan_theta_a(probe, deg(lo_deg), deg(hi_deg), deg(res_deg));

    std::ostringstream text;
    io::Metadata md;
    md["config_hash"] = config_hash(c);
    md["mode"] = c.exact ? "exact" : "sampled";
    md["rng_seed"] = c.seed ? std::to_string(*c.seed) : "none";
    io::write_metadata(text, md);
    text << "theta_a_deg,best_theta_b_deg,evaluations\n"
         << io::angle_deg(r.theta_a) << "," << io::angle_deg(r.best_theta_b) << "," << r.evaluations << "\n";
    emit(out, path, text.str());
    return kExitOk;
}

inline int cmd_tomo(const CommonOptions& o, const std::string& file, const std::string& reference, int bootstrap,
                    int max_iter, std::ostream& out, std::ostream& err) {
    const auto path = resolve_output(o, nullptr, "density", "rho.csv");
    const auto set = tomography_settings();
    io::TomographyData data;
    io::with_input(file, [&](std::istream& in) { data = io::read_tomography(in, set); });
    const auto ref = bell_state(bell_kind_from_string(reference));
    MleOptions opt;
    opt.max_iter = max_iter;
    const auto res = mle_reconstruct(data.counts, set, opt);
    const auto rep = reconstruction_report(res.rho, ref);

    io::Metadata md;
    md["converged"] = res.converged ? "true" : "false";
    md["iterations"] = std::to_string(res.iterations);
    md["log_likelihood"] = io::exact(res.log_likelihood);
    md["reference"] = reference;
    md["fidelity"] = io::exact(rep.fidelity);
    md["concurrence"] = io::exact(rep.concurrence);
    md["purity"] = io::exact(rep.purity);
    md["cosine_similarity"] = io::exact(rep.cosine_similarity);
    if (bootstrap > 0) {
        if (!has_seed(o)) throw DataError("--bootstrap needs --seed");
        double total = 0.0;
        for (double n : data.counts) total += n;
        const auto b = bootstrap_report(res.rho, total, set, ref, bootstrap, *o.seed, opt);
        md["bootstrap_resamples"] = std::to_string(b.resamples);
        md["bootstrap_non_converged"] = std::to_string(b.non_converged);
        md["rng_seed"] = std::to_string(*o.seed);
        md["sigma_fidelity"] = io::exact(b.sigma.fidelity);
        md["sigma_concurrence"] = io::exact(b.sigma.concurrence);
        md["sigma_purity"] = io::exact(b.sigma.purity);
        md["sigma_cosine_similarity"] = io::exact(b.sigma.cosine_similarity);
    }
    std::ostringstream text;
    io::write_density_matrix(text, res.rho.matrix(), md);
    emit(out, path, text.str());
    if (!res.converged) {
        err << "tomo: maximum-likelihood fit did not converge after " << res.iterations << " iterations\n";
        return kExitNoConvergence;
    }
    return kExitOk;
}

inline int cmd_chsh(const CommonOptions& o, const std::string& file, const std::vector<double>& angles_deg,
                    std::ostream& out) {
    ChshAngles ang;
    std::optional<ExperimentConfig> cfg;
    if (!o.config.empty()) {
        cfg = load_config(o.config);
        ang = cfg->chsh_angles;
    }
    if (!angles_deg.empty()) ang = {deg(angles_deg[0]), deg(angles_deg[1]), deg(angles_deg[2]), deg(angles_deg[3])};
    const auto path = resolve_output(o, cfg ? &*cfg : nullptr, "chsh", "chsh.csv");
    CoincidenceTable t;
    io::with_input(file, [&](std::istream& in) { t = io::read_table(in); });
    const auto r = chsh_from_counts(t, ang);
    std::ostringstream text;
    text << "s,sigma,significance,e_ab,e_ab2,e_a2b,e_a2b2\n"
         << io::exact(r.s) << "," << io::exact(r.sigma) << "," << io::exact(r.significance);
    for (double e : r.e) text << "," << io::exact(e);
    text << "\n";
    emit(out, path, text.str());
    return kExitOk;
}

inline int cmd_sweep(const CommonOptions& o, std::ostream& out) {
    ExperimentConfig c = load_with_overrides(o);
    c.validate(true);
    check_config_outputs(c);
    const auto path = resolve_output(o, &c, "sweep", "sweep.csv");
    std::vector<io::XyPoint> supp;
    if (c.supplementary) {
        io::with_input(c.supplementary->path,
                       [&](std::istream& in) { supp = io::read_xy(in, c.supplementary->columns); });
    }
    auto r = run_sweep(c);
    if (c.supplementary)
        r.summary.supplementary_r2 = compare_to_supplementary(r, supp, c.supplementary->branch == Branch::Minus);
    std::ostringstream text;
    write_sweep(text, r);
    emit(out, path, text.str());
    return kExitOk;
}

inline int cmd_fisher(const CommonOptions& o, int n_max, int trials, int counts, std::ostream& out) {
    std::optional<ExperimentConfig> cfg;
    std::optional<std::uint64_t> seed;
    if (!o.config.empty()) {
        cfg = load_config(o.config);
        seed = cfg->seed;
    }
    if (has_seed(o)) seed = *o.seed;
    if (!seed) throw DataError("fisher: a seed is required (--seed)");
    if (n_max < 2) throw DataError("fisher: --n-max must be >= 2");
    const auto path = resolve_output(o, cfg ? &*cfg : nullptr, "fisher", "fisher.csv");

    std::vector<int> ns;
    for (int n = 1; n <= n_max; ++n) ns.push_back(n);
    const auto rows = variance_scaling(ns, trials, counts, *seed);
    std::vector<double> x, ye, ys;
    for (const auto& r : rows) {
        x.push_back(r.n);
        ye.push_back(r.var_entangled_bound);
        ys.push_back(r.var_separable_sim);
    }
    io::Metadata md;
    md["rng_seed"] = std::to_string(*seed);
    md["trials"] = std::to_string(trials);
    md["counts_per_trial"] = std::to_string(counts);
    md["loglog_slope_entangled"] = detail::format_number(loglog_slope(x, ye), "%.6f");
    md["loglog_slope_separable"] = detail::format_number(loglog_slope(x, ys), "%.6f");
    std::ostringstream text;
    io::write_metadata(text, md);
    text << "n,qfi,qfi_closed_form,var_entangled_bound,var_separable_sim\n";
    for (const auto& r : rows)
        text << r.n << "," << detail::format_number(qfi(r.n), "%.12g") << "," << io::exact(qfi_closed_form(r.n)) << ","
             << io::exact(r.var_entangled_bound) << "," << io::exact(r.var_separable_sim) << "\n";
    emit(out, path, text.str());
    return kExitOk;
}

inline int cmd_verify(const CommonOptions& o, std::ostream& out) {
    const auto path = resolve_output(o, nullptr, "verify", "verify.txt");
    std::ostringstream text;
    bool ok = true;
    for (const auto& r : run_invariants()) {
        ok = ok && r.passed;
        text << (r.passed ? "PASS " : "FAIL ") << r.name << " (max deviation "
             << detail::format_number(r.worst, "%.3g") << ", tolerance " << detail::format_number(r.tolerance, "%.0e")
             << ")\n";
    }
    emit(out, path, text.str());
    return ok ? kExitOk : kExitData;
}

}  // namespace cli

/// Entry point behind the `nlrot` executable.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Nonlocal optical rotation simulator", "nlrot"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    cli::CommonOptions o;
    std::string state_override;
    std::vector<std::string> files;
    std::vector<std::string> labels;
    std::string file;
    std::string plus_label = "psi_plus", minus_label = "psi_minus";
    double lo = -90.0, hi = 90.0, resolution = 0.001;
    std::string reference = "psi_plus";
    int bootstrap = 0;
    int max_iter = MleOptions{}.max_iter;
    std::vector<double> chsh_angles;
    int n_max = 8, trials = 2000, counts = 100;

    auto* simulate = app.add_subcommand("simulate", "sample coincidence or tomography counts from a config");
    cli::add_common(simulate, o, true, true, true);
    simulate->add_option("--state", state_override, "override the config's Bell state (psi_plus, ...)");

    auto* observables = app.add_subcommand("observables", "estimate joint observables from coincidence tables");
    observables->add_option("tables", files, "coincidence table CSV files")->required();
    observables->add_option("--label", labels, "row label per input (default: state metadata or file stem)");
    cli::add_common(observables, o, false, false, false);

    auto* extract = app.add_subcommand("extract", "recover theta_A and theta_B from psi+/psi- observables");
    extract->add_option("observables", file, "observables CSV")->required();
    extract->add_option("--plus-label", plus_label, "label of the psi+ row");
    extract->add_option("--minus-label", minus_label, "label of the psi- row");
    cli::add_common(extract, o, false, false, false);

    auto* scan = app.add_subcommand("scan", "wide-range theta_A search by sweeping theta_B");
    cli::add_common(scan, o, true, true, true);
    scan->add_option("--lo", lo, "scan start (deg)");
    scan->add_option("--hi", hi, "scan end (deg)");
    scan->add_option("--resolution", resolution, "refinement resolution (deg)");

    auto* tomo = app.add_subcommand("tomo", "maximum-likelihood state reconstruction from 16 counts");
    tomo->add_option("counts", file, "tomography counts CSV")->required();
    tomo->add_option("--reference", reference, "Bell state for fidelity and cosine similarity");
    tomo->add_option("--bootstrap", bootstrap, "parametric bootstrap resamples")->check(CLI::NonNegativeNumber);
    tomo->add_option("--max-iter", max_iter, "optimizer iteration limit")->check(CLI::PositiveNumber);
    cli::add_common(tomo, o, false, true, false);

    auto* chsh = app.add_subcommand("chsh", "CHSH parameter from a coincidence table");
    chsh->add_option("table", file, "coincidence table CSV")->required();
    chsh->add_option("--angles", chsh_angles, "a a' b b' (deg)")->expected(4);
    cli::add_common(chsh, o, false, false, false);

    auto* sweep = app.add_subcommand("sweep", "molarity or theta_B sweep");
    cli::add_common(sweep, o, true, true, true);

    auto* fisher = app.add_subcommand("fisher", "quantum Fisher information and separable variance table");
    fisher->add_option("--n-max", n_max, "largest photon number");
    fisher->add_option("--trials", trials, "Monte Carlo trials per N");
    fisher->add_option("--counts", counts, "probe uses per trial");
    cli::add_common(fisher, o, false, true, false);

    auto* verify = app.add_subcommand("verify", "run the analytic invariant suite");
    cli::add_common(verify, o, false, false, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        err << "nlrot: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*simulate) return cli::cmd_simulate(o, state_override, out);
        if (*observables) return cli::cmd_observables(o, files, labels, out);
        if (*extract) return cli::cmd_extract(o, file, plus_label, minus_label, out);
        if (*scan) return cli::cmd_scan(o, lo, hi, resolution, out);
        if (*tomo) return cli::cmd_tomo(o, file, reference, bootstrap, max_iter, out, err);
        if (*chsh) return cli::cmd_chsh(o, file, chsh_angles, out);
        if (*sweep) return cli::cmd_sweep(o, out);
        if (*fisher) return cli::cmd_fisher(o, n_max, trials, counts, out);
        if (*verify) return cli::cmd_verify(o, out);
    } catch (const ConvergenceError& e) {
        err << "nlrot: " << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const std::exception& e) {
        err << "nlrot: " << e.what() << "\n";
        return kExitData;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace nlrot
