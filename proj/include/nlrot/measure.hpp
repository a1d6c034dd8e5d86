#pragma once

// Projective polarization measurements on photon pairs: analyzer settings,
// Born-rule outcome probabilities, joint Pauli observables, seeded Monte Carlo
// coincidence sampling, estimators, angle extraction and CHSH.

#include <array>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nlrot/channels.hpp"

namespace nlrot {

// ---------------------------------------------------------------------------
// Analyzer settings

/// One local measurement: a projector pair {|+><+|, |-><-|} with outcome
/// labels +1 / -1. For the Pauli bases the labels are the Pauli eigenvalues:
///   Z: + = H, - = V     X: + = D, - = A     Y: + = L, - = R
/// A linear analyzer at angle x transmits x (+) and reflects x + 90 deg (-).
/// A wave-plate analyzer is HWP then QWP then a PBS transmitting H (+).
class AnalyzerSetting {
public:
    enum class Kind { PauliZ, PauliX, PauliY, Linear, WavePlates };

    static AnalyzerSetting Z() { return {Kind::PauliZ, 0.0, 0.0, Ket2::H()}; }
    static AnalyzerSetting X() { return {Kind::PauliX, 0.0, 0.0, Ket2::D()}; }
    static AnalyzerSetting Y() { return {Kind::PauliY, 0.0, 0.0, Ket2::L()}; }
    static AnalyzerSetting basis(Pauli p) {
        switch (p) {
            case Pauli::Z: return Z();
            case Pauli::X: return X();
            case Pauli::Y: return Y();
            default: throw DataError("identity is not a measurement basis");
        }
    }
    static AnalyzerSetting linear(double angle) {
        return {Kind::Linear, angle, 0.0, Ket2::linear(angle)};
    }
    static AnalyzerSetting wave_plates(double hwp, double qwp) {
        const Mat2 m = quarter_wave_plate(qwp) * half_wave_plate(hwp);
        return {Kind::WavePlates, hwp, qwp, Ket2(m.adjoint() * Ket2::H().amplitudes())};
    }

    /// Parses ids produced by id(): Z, X, Y, lin(<deg>), wp(<hwp deg>;<qwp deg>).
    static AnalyzerSetting parse(const std::string& id);

    Kind kind() const { return kind_; }
    /// Linear analyzer angle or HWP angle (radians).
    double angle() const { return angle_; }
    double qwp_angle() const { return qwp_; }

    const Ket2& plus() const { return plus_; }
    Ket2 minus() const { return plus_.orthogonal(); }
    Mat2 projector(int outcome) const {
        return outcome > 0 ? plus_.projector() : minus().projector();
    }

    std::string id() const;

    friend bool operator==(const AnalyzerSetting& a, const AnalyzerSetting& b) {
        return a.id() == b.id();
    }

private:
    AnalyzerSetting(Kind k, double angle, double qwp, Ket2 plus)
        : kind_(k), angle_(angle), qwp_(qwp), plus_(std::move(plus)) {}

    Kind kind_;
    double angle_;
    double qwp_;
    Ket2 plus_;
};

namespace detail {

inline std::string format_number(double v, const char* fmt = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

inline double parse_number(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw DataError("not a number: '" + s + "'");
    }
    if (used != s.size()) throw DataError("not a number: '" + s + "'");
    return v;
}

}  // namespace detail

inline std::string AnalyzerSetting::id() const {
    switch (kind_) {
        case Kind::PauliZ: return "Z";
        case Kind::PauliX: return "X";
        case Kind::PauliY: return "Y";
        case Kind::Linear: return "lin(" + detail::format_number(to_deg(angle_)) + ")";
        case Kind::WavePlates:
            return "wp(" + detail::format_number(to_deg(angle_)) + ";" +
                   detail::format_number(to_deg(qwp_)) + ")";
    }
    return "?";
}

inline AnalyzerSetting AnalyzerSetting::parse(const std::string& id) {
    if (id == "Z") return Z();
    if (id == "X") return X();
    if (id == "Y") return Y();
    auto inner = [&](const std::string& prefix) -> std::optional<std::string> {
        if (id.size() > prefix.size() + 1 && id.compare(0, prefix.size(), prefix) == 0 &&
            id.back() == ')')
            return id.substr(prefix.size(), id.size() - prefix.size() - 1);
        return std::nullopt;
    };
    if (auto a = inner("lin(")) return linear(deg(detail::parse_number(*a)));
    if (auto a = inner("wp(")) {
        const auto semi = a->find(';');
        if (semi == std::string::npos) throw DataError("malformed wave-plate setting '" + id + "'");
        return wave_plates(deg(detail::parse_number(a->substr(0, semi))),
                           deg(detail::parse_number(a->substr(semi + 1))));
    }
    throw DataError("unknown analyzer setting '" + id + "'");
}

struct JointSetting {
    AnalyzerSetting a;
    AnalyzerSetting b;
};

/// (Z,Z), (X,Z), (Z,X): the settings behind the joint observables.
inline std::vector<JointSetting> observable_settings() {
    return {{AnalyzerSetting::Z(), AnalyzerSetting::Z()},
            {AnalyzerSetting::X(), AnalyzerSetting::Z()},
            {AnalyzerSetting::Z(), AnalyzerSetting::X()}};
}

// ---------------------------------------------------------------------------
// Born rule and exact expectations

using OutcomeProbs = std::array<double, 4>;  // (++, +-, -+, --)

inline OutcomeProbs outcome_probabilities(const TwoQubitState& rho, const AnalyzerSetting& a,
                                          const AnalyzerSetting& b) {
    OutcomeProbs p{};
    const std::array<Ket2, 2> ka{a.plus(), a.minus()};
    const std::array<Ket2, 2> kb{b.plus(), b.minus()};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const Vec4 psi = kron(ka[i].amplitudes(), kb[j].amplitudes());
            p[2 * i + j] = std::max(0.0, (psi.adjoint() * rho.matrix() * psi)(0, 0).real());
        }
    return p;
}

/// Tr[rho (sigma_a (x) sigma_b)].
inline double joint_expectation(const TwoQubitState& rho, Pauli a, Pauli b) {
    return (rho.matrix() * kron(pauli(a), pauli(b))).trace().real();
}

/// Correlation P(++) - P(+-) - P(-+) + P(--).
inline double correlation(const OutcomeProbs& p) { return p[0] - p[1] - p[2] + p[3]; }

struct JointObservables {
    double m_zz = 0.0;
    double m_xz = 0.0;
    std::optional<double> m_zx;
    double sigma_zz = 0.0;
    double sigma_xz = 0.0;
    double sigma_zx = 0.0;
};

/// Exact joint observables of a state.
inline JointObservables exact_observables(const TwoQubitState& rho) {
    JointObservables o;
    o.m_zz = joint_expectation(rho, Pauli::Z, Pauli::Z);
    o.m_xz = joint_expectation(rho, Pauli::X, Pauli::Z);
    o.m_zx = joint_expectation(rho, Pauli::Z, Pauli::X);
    return o;
}

/// Observables of |H>_A|V>_B after U(theta_a) (x) U(theta_b):
///   m_zz = -cos 2a cos 2b,  m_xz = -sin 2a cos 2b,  m_zx = -cos 2a sin 2b.
inline JointObservables separable_expectations(double theta_a, double theta_b) {
    JointObservables o;
    const double za = std::cos(2.0 * theta_a), xa = std::sin(2.0 * theta_a);
    const double zb = -std::cos(2.0 * theta_b), xb = -std::sin(2.0 * theta_b);
    o.m_zz = za * zb;
    o.m_xz = xa * zb;
    o.m_zx = za * xb;
    return o;
}

// ---------------------------------------------------------------------------
// Coincidence tables and sampling

struct CoincidenceRow {
    AnalyzerSetting a;
    AnalyzerSetting b;
    std::array<double, 4> counts{};  // (n_pp, n_pm, n_mp, n_mm)

    double total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
};

struct CoincidenceTable {
    std::vector<CoincidenceRow> rows;
    /// Acquisition metadata, written as "# key=value" lines in key order.
    std::map<std::string, std::string> metadata;
};

struct AcquisitionParams {
    double pair_flux = 1.0e4;      // pairs / s at the source
    double duration = 10.0;        // s per setting
    double transmission_a = 1.0;
    double transmission_b = 1.0;
    double accidental_fraction = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(pair_flux > 0.0) || !std::isfinite(pair_flux)) throw DataError("pair_flux must be > 0");
        if (!(duration > 0.0) || !std::isfinite(duration)) throw DataError("duration must be > 0");
        for (double t : {transmission_a, transmission_b})
            if (!(t >= 0.0 && t <= 1.0)) throw DataError("transmission must be in [0, 1]");
        if (!(accidental_fraction >= 0.0 && accidental_fraction < 1.0))
            throw DataError("accidental_fraction must be in [0, 1)");
    }

    /// Mean number of true coincidences per setting.
    double mean_pairs() const { return pair_flux * duration * transmission_a * transmission_b; }
    /// Mean number of accidental coincidences per setting.
    double mean_accidentals() const {
        return accidental_fraction / (1.0 - accidental_fraction) * mean_pairs();
    }
};

namespace detail {

inline void stamp_metadata(CoincidenceTable& t, const AcquisitionParams& p, bool exact) {
    t.metadata["pair_flux"] = format_number(p.pair_flux, "%.17g");
    t.metadata["duration"] = format_number(p.duration, "%.17g");
    t.metadata["transmission_a"] = format_number(p.transmission_a, "%.17g");
    t.metadata["transmission_b"] = format_number(p.transmission_b, "%.17g");
    t.metadata["accidental_fraction"] = format_number(p.accidental_fraction, "%.17g");
    t.metadata["rng_seed"] = std::to_string(p.seed);
    t.metadata["mode"] = exact ? "exact" : "sampled";
}

// Multinomial draw by sequential conditional binomials.
inline std::array<double, 4> multinomial(std::mt19937_64& rng, std::uint64_t n, const OutcomeProbs& p) {
    std::array<double, 4> out{};
    double remaining_p = 1.0;
    std::uint64_t remaining = n;
    for (int k = 0; k < 3; ++k) {
        std::uint64_t draw = 0;
        if (remaining > 0 && remaining_p > 0.0) {
            const double q = std::clamp(p[k] / remaining_p, 0.0, 1.0);
            std::binomial_distribution<std::uint64_t> bin(remaining, q);
            draw = bin(rng);
        }
        out[k] = static_cast<double>(draw);
        remaining -= draw;
        remaining_p -= p[k];
    }
    out[3] = static_cast<double>(remaining);
    return out;
}

inline std::uint64_t poisson(std::mt19937_64& rng, double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<std::uint64_t> dist(mean);
    return dist(rng);
}

}  // namespace detail

/// Seeded Monte Carlo coincidence counts. Setting i draws from its own stream
/// derive_seed(seed, i): N ~ Poisson(flux * duration * t_a * t_b) true pairs
/// split multinomially by the Born rule, plus Poisson accidentals spread
/// uniformly over the four outcomes.
inline CoincidenceTable simulate_counts(const TwoQubitState& rho, const std::vector<JointSetting>& settings,
                                        const AcquisitionParams& params) {
    if (settings.empty()) throw DataError("simulate_counts: empty settings list");
    params.validate();
    CoincidenceTable table;
    table.rows.resize(settings.size(), CoincidenceRow{settings[0].a, settings[0].b, {}});
    parallel_for(settings.size(), [&](std::size_t i) {
        std::mt19937_64 rng(derive_seed(params.seed, i));
        const auto probs = outcome_probabilities(rho, settings[i].a, settings[i].b);
        const auto n_true = detail::poisson(rng, params.mean_pairs());
        auto counts = detail::multinomial(rng, n_true, probs);
        const auto n_acc = detail::poisson(rng, params.mean_accidentals());
        const auto acc = detail::multinomial(rng, n_acc, {0.25, 0.25, 0.25, 0.25});
        for (int k = 0; k < 4; ++k) counts[k] += acc[k];
        table.rows[i] = CoincidenceRow{settings[i].a, settings[i].b, counts};
    });
    detail::stamp_metadata(table, params, false);
    return table;
}

/// Expected (real-valued) counts: the N -> infinity limit of simulate_counts.
inline CoincidenceTable expected_counts(const TwoQubitState& rho, const std::vector<JointSetting>& settings,
                                        const AcquisitionParams& params) {
    if (settings.empty()) throw DataError("expected_counts: empty settings list");
    params.validate();
    CoincidenceTable table;
    const double n = params.mean_pairs();
    const double acc = params.mean_accidentals() / 4.0;
    for (const auto& s : settings) {
        const auto p = outcome_probabilities(rho, s.a, s.b);
        table.rows.push_back({s.a, s.b, {n * p[0] + acc, n * p[1] + acc, n * p[2] + acc, n * p[3] + acc}});
    }
    detail::stamp_metadata(table, params, true);
    return table;
}

// ---------------------------------------------------------------------------
// Estimators

struct Correlation {
    double value = 0.0;
    double sigma = 0.0;
    double total = 0.0;
};

/// (n_pp - n_pm - n_mp + n_mm) / n with binomial sigma sqrt((1 - E^2) / n).
inline Correlation correlation_from_counts(const std::array<double, 4>& n) {
    const double total = n[0] + n[1] + n[2] + n[3];
    if (!(total > 0.0)) throw DataError("setting has zero total counts");
    const double e = (n[0] - n[1] - n[2] + n[3]) / total;
    return {e, std::sqrt(std::max(0.0, 1.0 - e * e) / total), total};
}

namespace detail {

inline std::optional<std::array<double, 4>> find_counts(const CoincidenceTable& t, const AnalyzerSetting& a,
                                                        const AnalyzerSetting& b) {
    std::optional<std::array<double, 4>> sum;
    for (const auto& r : t.rows) {
        if (r.a == a && r.b == b) {
            if (!sum) sum = std::array<double, 4>{};
            for (int k = 0; k < 4; ++k) (*sum)[k] += r.counts[k];
        }
    }
    return sum;
}

inline Correlation required_correlation(const CoincidenceTable& t, const AnalyzerSetting& a,
                                        const AnalyzerSetting& b) {
    const auto n = find_counts(t, a, b);
    if (!n) throw DataError("missing basis pair (" + a.id() + ", " + b.id() + ")");
    return correlation_from_counts(*n);
}

}  // namespace detail

/// Per-setting normalized estimates of M_zz, M_xz and (if present) M_zx.
/// Rows repeating a setting pair are pooled.
inline JointObservables estimate_observables(const CoincidenceTable& table) {
    const auto z = AnalyzerSetting::Z();
    const auto x = AnalyzerSetting::X();
    JointObservables o;
    const auto zz = detail::required_correlation(table, z, z);
    const auto xz = detail::required_correlation(table, x, z);
    o.m_zz = zz.value;
    o.sigma_zz = zz.sigma;
    o.m_xz = xz.value;
    o.sigma_xz = xz.sigma;
    if (auto n = detail::find_counts(table, z, x)) {
        const auto zx = correlation_from_counts(*n);
        o.m_zx = zx.value;
        o.sigma_zx = zx.sigma;
    }
    return o;
}

// ---------------------------------------------------------------------------
// Angle extraction

struct AngleEstimate {
    double value = 0.0;
    double sigma = 0.0;
};

namespace detail {

// sigma of arg(-m_zz - i m_xz) from independent sigmas on the two entries.
inline double arg_sigma(double m_zz, double m_xz, double s_zz, double s_xz) {
    const double r2 = m_zz * m_zz + m_xz * m_xz;
    if (!(r2 > 0.0)) return std::numeric_limits<double>::infinity();
    return std::sqrt(m_zz * m_zz * s_xz * s_xz + m_xz * m_xz * s_zz * s_zz) / r2;
}

}  // namespace detail

/// Rotation seen by one Bell branch: theta = 1/2 atan2(-M_xz, -M_zz),
/// since -M_zz - i M_xz = exp(2 i theta) for the evolved psi+/psi-.
inline AngleEstimate branch_angle(const JointObservables& o) {
    return {0.5 * std::atan2(-o.m_xz, -o.m_zz),
            0.5 * detail::arg_sigma(o.m_zz, o.m_xz, o.sigma_zz, o.sigma_xz)};
}

struct ExtractedThetas {
    AngleEstimate theta_a;
    AngleEstimate theta_b;
    /// Imaginary parts of the two logarithm evaluations; zero for exact data.
    double residue_a = 0.0;
    double residue_b = 0.0;
};

/// theta_{A,B} = -(i/4) ln[(-M_zz^+ - i M_xz^+)(-M_zz^- - i eps M_xz^-)],
/// eps_A = +1, eps_B = -1, principal branch.
///
/// With the evolved Bell states the factors are exp(2i theta_+) and
/// exp(+-2i theta_-), so the products are exp(4i theta_A) and exp(4i theta_B).
/// The principal log therefore recovers angles in (-pi/4, pi/4]; anything
/// outside wraps by multiples of pi/2.
inline ExtractedThetas extract_thetas(const JointObservables& plus, const JointObservables& minus,
                                      double modulus_floor = 1e-6) {
    const cplx f_plus{-plus.m_zz, -plus.m_xz};
    const cplx f_minus_a{-minus.m_zz, -minus.m_xz};
    const cplx f_minus_b{-minus.m_zz, minus.m_xz};
    if (std::abs(f_plus) < modulus_floor || std::abs(f_minus_a) < modulus_floor)
        throw DataError("extract_thetas: observables are ill-conditioned (|-M_zz - i M_xz| below floor)");

    const cplx wa = -I_unit / 4.0 * std::log(f_plus * f_minus_a);
    const cplx wb = -I_unit / 4.0 * std::log(f_plus * f_minus_b);

    const double sp = detail::arg_sigma(plus.m_zz, plus.m_xz, plus.sigma_zz, plus.sigma_xz);
    const double sm = detail::arg_sigma(minus.m_zz, minus.m_xz, minus.sigma_zz, minus.sigma_xz);
    const double s = 0.25 * std::sqrt(sp * sp + sm * sm);

    ExtractedThetas out;
    out.theta_a = {wa.real(), s};
    out.theta_b = {wb.real(), s};
    out.residue_a = wa.imag();
    out.residue_b = wb.imag();
    return out;
}

// ---------------------------------------------------------------------------
// Wide-range scan

struct ScanOptions {
    double coarse_step = deg(2.0);
    /// Minimum spread of |M_zz^-| over the coarse grid.
    double flat_floor = 1e-3;
};

struct ScanResult {
    double theta_a = 0.0;       // in (-pi, pi]
    double best_theta_b = 0.0;  // refined optimum of -M_zz^-
    int evaluations = 0;
};

/// Finds theta_A by sweeping the local rotation theta_B on the psi- state.
///
/// probe(theta_b) returns the psi- observables, M_zz^- = -cos 2(theta_A - theta_B).
/// -M_zz^- peaks where theta_B = theta_A mod pi. The coarse-grid maximum (ties
/// prefer smaller |theta_B|) is refined by golden-section search to
/// `resolution`, and the residual M_xz^- at the optimum is folded back in.
///
/// U(theta + pi) = -U(theta), so theta_A is observable only modulo pi: if
/// the search range is wider than pi the answer is the equivalent angle
/// with the smallest |theta_B|.
inline ScanResult scan_theta_a(const std::function<JointObservables(double)>& probe, double range_lo,
                               double range_hi, double resolution, const ScanOptions& opt = {}) {
    if (!(resolution > 0.0)) throw DataError("scan resolution must be > 0");
    if (!(range_hi > range_lo)) throw DataError("scan range is empty");
    ScanResult res;
    auto objective = [&](double tb) {
        ++res.evaluations;
        return -probe(tb).m_zz;
    };

    const int steps = std::max(2, static_cast<int>(std::ceil((range_hi - range_lo) / opt.coarse_step)));
    const double step = (range_hi - range_lo) / steps;
    double best_x = range_lo, best_g = -std::numeric_limits<double>::infinity();
    double abs_min = std::numeric_limits<double>::infinity(), abs_max = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double x = range_lo + i * step;
        const double g = objective(x);
        abs_min = std::min(abs_min, std::abs(g));
        abs_max = std::max(abs_max, std::abs(g));
        const bool tie = std::abs(g - best_g) <= 1e-12;
        if ((g > best_g && !tie) || (tie && std::abs(x) < std::abs(best_x))) {
            best_x = x;
            best_g = std::max(g, best_g);
        }
    }
    if (abs_max - abs_min < opt.flat_floor)
        throw DataError("scan_theta_a: flat response, |M_zz^-| does not vary over the range");

    // Golden-section maximization on [lo, hi].
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = std::max(range_lo, best_x - step);
    double hi = std::min(range_hi, best_x + step);
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double g1 = objective(x1), g2 = objective(x2);
    while (hi - lo > resolution) {
        if (g1 >= g2) {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = objective(x2);
        }
    }
    res.best_theta_b = 0.5 * (lo + hi);
    const JointObservables at_best = probe(res.best_theta_b);
    ++res.evaluations;
    // theta_A - theta_B at the optimum, small by construction.
    res.theta_a = wrap_pi(res.best_theta_b + branch_angle(at_best).value);
    return res;
}

// ---------------------------------------------------------------------------
// CHSH

struct ChshAngles {
    double a = 0.0;
    double a_prime = deg(45.0);
    double b = deg(22.5);
    double b_prime = deg(67.5);
};

/// Joint settings in the order (a,b), (a,b'), (a',b), (a',b').
inline std::vector<JointSetting> chsh_settings(const ChshAngles& ang = {}) {
    using S = AnalyzerSetting;
    return {{S::linear(ang.a), S::linear(ang.b)},
            {S::linear(ang.a), S::linear(ang.b_prime)},
            {S::linear(ang.a_prime), S::linear(ang.b)},
            {S::linear(ang.a_prime), S::linear(ang.b_prime)}};
}

/// S = |E(a,b) - E(a,b') - E(a',b) - E(a',b')|, the CHSH combination that
/// reaches 2 sqrt2 for psi+ at a = 0, a' = 45, b = 22.5, b' = 67.5 deg.
inline double chsh_combination(const std::array<double, 4>& e) {
    return std::abs(e[0] - e[1] - e[2] - e[3]);
}

inline double chsh_s(const TwoQubitState& rho, double a, double a_prime, double b, double b_prime) {
    std::array<double, 4> e{};
    const auto settings = chsh_settings({a, a_prime, b, b_prime});
    for (std::size_t i = 0; i < 4; ++i)
        e[i] = correlation(outcome_probabilities(rho, settings[i].a, settings[i].b));
    return chsh_combination(e);
}

struct ChshResult {
    double s = 0.0;
    double sigma = 0.0;
    /// (S - 2) / sigma
    double significance = 0.0;
    std::array<double, 4> e{};
    std::array<double, 4> sigma_e{};
};

inline ChshResult chsh_from_counts(const CoincidenceTable& table, const ChshAngles& ang = {}) {
    const auto settings = chsh_settings(ang);
    ChshResult r;
    double var = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto c = detail::required_correlation(table, settings[i].a, settings[i].b);
        r.e[i] = c.value;
        r.sigma_e[i] = c.sigma;
        var += c.sigma * c.sigma;
    }
    r.s = chsh_combination(r.e);
    r.sigma = std::sqrt(var);
    r.significance = r.sigma > 0.0 ? (r.s - 2.0) / r.sigma : std::numeric_limits<double>::infinity();
    return r;
}

}  // namespace nlrot
