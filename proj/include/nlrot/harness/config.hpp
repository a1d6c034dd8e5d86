#pragma once

// Experiment configuration: a JSON document with named sections. Angles are
// degrees in the file and radians in memory. Physical constants default to
// the fructose-experiment calibration (slope 7.01 deg/M, PBS offsets -4.75
// and 4.09 deg, exchange-plate rotation 5.47 deg, solution transmission 0.75).
//
// {
//   "state":      {"bell": "psi_plus"}  or  {"separable": ["H", "V"]},
//   "noise":      {"visibility": 1.0, "accidental_fraction": 0.0},
//   "arm_a":      {"angle_deg": 20.08, "transmission": 1.0}
//            or   {"molarity": 2.877, "slope_deg_per_molar": 7.01, "transmission": 0.75},
//   "arm_b":      same as arm_a,
//   "offsets":    {"pbs_a_deg": -4.75, "pbs_b_deg": 4.09, "hwp_deg": 5.47},
//   "statistics": {"pair_flux": 1e4, "duration": 10, "seed": 1},
//   "sweep":      {"variable": "molarity_b" | "theta_b" | "none", "values": [...]},
//   "settings":   "observables" | "chsh" | "tomography" | [["Z","Z"], ...],
//   "chsh_angles_deg": [0, 45, 22.5, 67.5],
//   "exact":      false,
//   "outputs":    {"table": "...", "sweep": "...", "observables": "...", "report": "..."},
//   "supplementary": {"path": "...", "x_column": 0, "y_column": 1, "sigma_column": -1, "branch": "minus"}
// }

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "nlrot/io.hpp"
#include "nlrot/measure.hpp"

namespace nlrot {

using json = nlohmann::json;

struct StateSpec {
    std::optional<BellKind> bell = BellKind::PsiPlus;
    std::string ket_a = "H";
    std::string ket_b = "V";

    TwoQubitState build() const {
        if (bell) return bell_state(*bell);
        if (ket_a.size() != 1 || ket_b.size() != 1) throw DataError("separable kets must be single labels");
        return separable_state(Ket2::from_label(ket_a[0]), Ket2::from_label(ket_b[0]));
    }
    std::string label() const { return bell ? to_string(*bell) : "separable_" + ket_a + ket_b; }
};

/// One arm: either a fixed rotation angle or a calibrated solution.
struct ArmSpec {
    std::optional<SolutionSpec> solution;
    double angle = 0.0;  // used when solution is empty
    double transmission = 1.0;

    double rotation() const { return solution ? solution_rotation(*solution) : angle; }
    double arm_transmission() const { return solution ? solution->transmission : transmission; }
};

enum class SweepVariable { None, MolarityB, ThetaB };

enum class SettingsKind { Observables, Chsh, Tomography, Explicit };

struct SupplementarySpec {
    std::string path;
    io::XyColumns columns;
    Branch branch = Branch::Minus;  // which extracted angle the y column holds
};

struct ExperimentConfig {
    StateSpec state;
    NoiseSpec noise;
    ArmSpec arm_a;
    ArmSpec arm_b;
    AnalyzerOffsets offsets;
    double pair_flux = 1.0e4;
    double duration = 10.0;
    std::optional<std::uint64_t> seed;
    SweepVariable sweep = SweepVariable::None;
    std::vector<double> sweep_values;  // molarity (M) or theta_b (rad)
    SettingsKind settings_kind = SettingsKind::Observables;
    std::vector<JointSetting> explicit_settings;
    ChshAngles chsh_angles;
    bool exact = false;
    std::map<std::string, std::string> outputs;
    std::optional<SupplementarySpec> supplementary;

    AcquisitionParams acquisition() const {
        AcquisitionParams p;
        p.pair_flux = pair_flux;
        p.duration = duration;
        p.transmission_a = arm_a.arm_transmission();
        p.transmission_b = arm_b.arm_transmission();
        p.accidental_fraction = noise.accidental_fraction;
        p.seed = seed.value_or(0);
        return p;
    }

    std::vector<JointSetting> joint_settings() const {
        switch (settings_kind) {
            case SettingsKind::Observables: return observable_settings();
            case SettingsKind::Chsh: return chsh_settings(chsh_angles);
            case SettingsKind::Explicit: return explicit_settings;
            case SettingsKind::Tomography: break;
        }
        throw DataError("tomography settings are not joint analyzer pairs");
    }

    /// Checks value ranges and, for stochastic runs, that a seed is present.
    void validate(bool stochastic) const {
        noise.validate();
        for (const ArmSpec* arm : {&arm_a, &arm_b}) {
            if (arm->solution) arm->solution->validate();
            else if (!std::isfinite(arm->angle)) throw DataError("arm angle must be finite");
            if (!(arm->arm_transmission() >= 0.0 && arm->arm_transmission() <= 1.0))
                throw DataError("transmission must be in [0, 1]");
        }
        acquisition().validate();
        if (stochastic && !exact && !seed) throw DataError("config: statistics.seed is required for sampled runs");
        if (settings_kind == SettingsKind::Explicit && explicit_settings.empty())
            throw DataError("config: settings list is empty");
        if (sweep == SweepVariable::MolarityB) {
            for (double c : sweep_values)
                if (!(c >= 0.0)) throw DataError("config: sweep molarities must be >= 0");
        }
        if (sweep != SweepVariable::None && sweep_values.empty())
            throw DataError("config: sweep.values is empty");
    }
};

namespace detail {

inline const char* to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::MolarityB: return "molarity_b";
        case SweepVariable::ThetaB: return "theta_b";
        case SweepVariable::None: break;
    }
    return "none";
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* n : known) ok = ok || k == n;
        if (!ok) throw DataError("config: unknown key '" + k + "' in " + where);
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw DataError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

inline ArmSpec parse_arm(const json& j, double pbs_offset, const std::string& where) {
    reject_unknown(j, {"angle_deg", "molarity", "slope_deg_per_molar", "transmission"}, where);
    ArmSpec arm;
    if (j.contains("molarity")) {
        if (j.contains("angle_deg")) throw DataError("config: " + where + " sets both angle_deg and molarity");
        SolutionSpec s;
        s.molarity = get_or(j, "molarity", 0.0);
        s.slope = deg(get_or(j, "slope_deg_per_molar", 7.01));
        s.pbs_offset = pbs_offset;
        s.transmission = get_or(j, "transmission", 0.75);
        arm.solution = s;
    } else {
        arm.angle = deg(get_or(j, "angle_deg", 0.0));
        arm.transmission = get_or(j, "transmission", 1.0);
    }
    return arm;
}

inline json arm_to_json(const ArmSpec& a) {
    if (a.solution)
        return {{"molarity", a.solution->molarity},
                {"slope_deg_per_molar", to_deg(a.solution->slope)},
                {"transmission", a.solution->transmission}};
    return {{"angle_deg", to_deg(a.angle)}, {"transmission", a.transmission}};
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw DataError("config: top level must be an object");
    detail::reject_unknown(j,
                           {"state", "noise", "arm_a", "arm_b", "offsets", "statistics", "sweep", "settings",
                            "chsh_angles_deg", "exact", "outputs", "supplementary"},
                           "config");
    ExperimentConfig c;

    if (j.contains("state")) {
        const auto& s = j["state"];
        detail::reject_unknown(s, {"bell", "separable"}, "state");
        if (s.contains("bell") == s.contains("separable"))
            throw DataError("config: state needs exactly one of 'bell' or 'separable'");
        if (s.contains("bell")) {
            c.state.bell = bell_kind_from_string(detail::get_or<std::string>(s, "bell", ""));
        } else {
            const auto kets = detail::get_or<std::vector<std::string>>(s, "separable", {});
            if (kets.size() != 2) throw DataError("config: state.separable needs two kets");
            c.state.bell.reset();
            c.state.ket_a = kets[0];
            c.state.ket_b = kets[1];
            c.state.build();
        }
    }
    if (j.contains("noise")) {
        const auto& n = j["noise"];
        detail::reject_unknown(n, {"visibility", "accidental_fraction"}, "noise");
        c.noise.visibility = detail::get_or(n, "visibility", 1.0);
        c.noise.accidental_fraction = detail::get_or(n, "accidental_fraction", 0.0);
    }
    if (j.contains("offsets")) {
        const auto& o = j["offsets"];
        detail::reject_unknown(o, {"pbs_a_deg", "pbs_b_deg", "hwp_deg"}, "offsets");
        c.offsets.pbs_a = deg(detail::get_or(o, "pbs_a_deg", to_deg(c.offsets.pbs_a)));
        c.offsets.pbs_b = deg(detail::get_or(o, "pbs_b_deg", to_deg(c.offsets.pbs_b)));
        c.offsets.hwp = deg(detail::get_or(o, "hwp_deg", to_deg(c.offsets.hwp)));
    }
    c.arm_a = detail::parse_arm(j.value("arm_a", json::object()), c.offsets.pbs_a, "arm_a");
    c.arm_b = detail::parse_arm(j.value("arm_b", json::object()), c.offsets.pbs_b, "arm_b");

    if (j.contains("statistics")) {
        const auto& s = j["statistics"];
        detail::reject_unknown(s, {"pair_flux", "duration", "seed"}, "statistics");
        c.pair_flux = detail::get_or(s, "pair_flux", c.pair_flux);
        c.duration = detail::get_or(s, "duration", c.duration);
        if (s.contains("seed")) c.seed = detail::get_or<std::uint64_t>(s, "seed", 0);
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        detail::reject_unknown(s, {"variable", "values"}, "sweep");
        const auto var = detail::get_or<std::string>(s, "variable", "none");
        if (var == "molarity_b") c.sweep = SweepVariable::MolarityB;
        else if (var == "theta_b") c.sweep = SweepVariable::ThetaB;
        else if (var == "none") c.sweep = SweepVariable::None;
        else throw DataError("config: sweep.variable must be one of molarity_b, theta_b, none");
        c.sweep_values = detail::get_or<std::vector<double>>(s, "values", {});
        if (c.sweep == SweepVariable::ThetaB)
            for (double& v : c.sweep_values) v = deg(v);
    }
    if (j.contains("settings")) {
        const auto& s = j["settings"];
        if (s.is_string()) {
            const auto k = s.get<std::string>();
            if (k == "observables") c.settings_kind = SettingsKind::Observables;
            else if (k == "chsh") c.settings_kind = SettingsKind::Chsh;
            else if (k == "tomography") c.settings_kind = SettingsKind::Tomography;
            else throw DataError("config: settings must be observables, chsh, tomography or a list");
        } else if (s.is_array()) {
            c.settings_kind = SettingsKind::Explicit;
            for (const auto& pair : s) {
                if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string())
                    throw DataError("config: each explicit setting is [\"<a id>\", \"<b id>\"]");
                c.explicit_settings.push_back({AnalyzerSetting::parse(pair[0].get<std::string>()),
                                               AnalyzerSetting::parse(pair[1].get<std::string>())});
            }
        } else {
            throw DataError("config: settings has the wrong type");
        }
    }
    if (j.contains("chsh_angles_deg")) {
        const auto a = detail::get_or<std::vector<double>>(j, "chsh_angles_deg", {});
        if (a.size() != 4) throw DataError("config: chsh_angles_deg needs 4 angles");
        c.chsh_angles = {deg(a[0]), deg(a[1]), deg(a[2]), deg(a[3])};
    }
    c.exact = detail::get_or(j, "exact", false);
    if (j.contains("outputs")) c.outputs = detail::get_or<std::map<std::string, std::string>>(j, "outputs", {});
    if (j.contains("supplementary")) {
        const auto& s = j["supplementary"];
        detail::reject_unknown(s, {"path", "x_column", "y_column", "sigma_column", "branch"}, "supplementary");
        SupplementarySpec sp;
        sp.path = detail::get_or<std::string>(s, "path", "");
        sp.columns.x = detail::get_or(s, "x_column", 0);
        sp.columns.y = detail::get_or(s, "y_column", 1);
        sp.columns.sigma = detail::get_or(s, "sigma_column", -1);
        const auto br = detail::get_or<std::string>(s, "branch", "minus");
        if (br != "plus" && br != "minus") throw DataError("config: supplementary.branch must be plus or minus");
        sp.branch = br == "plus" ? Branch::Plus : Branch::Minus;
        c.supplementary = sp;
    }
    c.validate(false);
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

/// Canonical form with every default filled in.
inline json to_json(const ExperimentConfig& c) {
    json j;
    if (c.state.bell) j["state"] = {{"bell", to_string(*c.state.bell)}};
    else j["state"] = {{"separable", {c.state.ket_a, c.state.ket_b}}};
    j["noise"] = {{"visibility", c.noise.visibility}, {"accidental_fraction", c.noise.accidental_fraction}};
    j["arm_a"] = detail::arm_to_json(c.arm_a);
    j["arm_b"] = detail::arm_to_json(c.arm_b);
    j["offsets"] = {{"pbs_a_deg", to_deg(c.offsets.pbs_a)},
                    {"pbs_b_deg", to_deg(c.offsets.pbs_b)},
                    {"hwp_deg", to_deg(c.offsets.hwp)}};
    j["statistics"] = {{"pair_flux", c.pair_flux}, {"duration", c.duration}};
    if (c.seed) j["statistics"]["seed"] = *c.seed;
    std::vector<double> values = c.sweep_values;
    if (c.sweep == SweepVariable::ThetaB)
        for (double& v : values) v = to_deg(v);
    j["sweep"] = {{"variable", detail::to_string(c.sweep)}, {"values", values}};
    switch (c.settings_kind) {
        case SettingsKind::Observables: j["settings"] = "observables"; break;
        case SettingsKind::Chsh: j["settings"] = "chsh"; break;
        case SettingsKind::Tomography: j["settings"] = "tomography"; break;
        case SettingsKind::Explicit: {
            json list = json::array();
            for (const auto& s : c.explicit_settings) list.push_back({s.a.id(), s.b.id()});
            j["settings"] = list;
            break;
        }
    }
    j["chsh_angles_deg"] = {to_deg(c.chsh_angles.a), to_deg(c.chsh_angles.a_prime), to_deg(c.chsh_angles.b),
                            to_deg(c.chsh_angles.b_prime)};
    j["exact"] = c.exact;
    j["outputs"] = c.outputs;
    if (c.supplementary)
        j["supplementary"] = {{"path", c.supplementary->path},
                              {"x_column", c.supplementary->columns.x},
                              {"y_column", c.supplementary->columns.y},
                              {"sigma_column", c.supplementary->columns.sigma},
                              {"branch", to_string(c.supplementary->branch)}};
    return j;
}

/// FNV-1a 64 over the canonical JSON, hex encoded.
inline std::string config_hash(const ExperimentConfig& c) {
    const std::string text = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Throws unless `path` can be created or overwritten.
inline void check_writable(const std::string& path) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw DataError("output directory does not exist: " + dir.string());
    if (fs::exists(p, ec) ? ::access(p.c_str(), W_OK) != 0 : ::access(dir.c_str(), W_OK) != 0)
        throw DataError("output path is not writable: " + path);
}

}  // namespace nlrot
