#pragma once

// Analytic invariant suite run by `nlrot verify`. Every check uses exact
// expectations only, so the suite is deterministic and needs no seed.

#include <string>
#include <vector>

#include "nlrot/harness/sweep.hpp"
#include "nlrot/metrology.hpp"
#include "nlrot/tomography.hpp"

namespace nlrot {

struct InvariantResult {
    std::string name;
    bool passed = false;
    double worst = 0.0;  // largest deviation seen
    double tolerance = 0.0;
};

namespace detail {

inline InvariantResult check(std::string name, double worst, double tol) {
    return {std::move(name), worst <= tol, worst, tol};
}

inline std::vector<double> grid_deg(double lo, double hi, int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = deg(lo + (hi - lo) * i / (n - 1));
    return g;
}

}  // namespace detail

inline std::vector<InvariantResult> run_invariants() {
    std::vector<InvariantResult> out;
    const auto g19 = detail::grid_deg(-45.0, 45.0, 19);

    {
        double worst = 0.0;
        for (auto k : {BellKind::PsiPlus, BellKind::PsiMinus, BellKind::PhiPlus, BellKind::PhiMinus}) {
            const auto rho = bell_state(k);
            worst = std::max(worst, std::abs(purity(rho) - 1.0));
            worst = std::max(worst, std::abs(concurrence(rho) - 1.0));
        }
        out.push_back(detail::check("bell states pure and maximally entangled", worst, 1e-9));
    }
    {
        const Mat2 x = pauli(Pauli::X), y = pauli(Pauli::Y), z = pauli(Pauli::Z);
        double worst = (x * y - I_unit * z).norm();
        worst = std::max(worst, (y * z - I_unit * x).norm());
        worst = std::max(worst, (z * x - I_unit * y).norm());
        worst = std::max(worst, (x * x - Mat2::Identity()).norm());
        out.push_back(detail::check("pauli algebra", worst, 1e-15));
    }
    {
        double worst = 0.0;
        for (double a : g19)
            for (double b : g19) {
                worst = std::max(worst, (rotation_unitary(a) * rotation_unitary(b) - rotation_unitary(a + b)).norm());
            }
        out.push_back(detail::check("rotation group law", worst, 1e-12));
    }
    {
        double worst = 0.0;
        for (double a : g19)
            for (double b : g19) {
                const auto p = exact_observables(apply_local(bell_state(BellKind::PsiPlus), rotation_unitary(a),
                                                             rotation_unitary(b)));
                const auto m = exact_observables(apply_local(bell_state(BellKind::PsiMinus), rotation_unitary(a),
                                                             rotation_unitary(b)));
                worst = std::max({worst, std::abs(p.m_zz + std::cos(2 * (a + b))),
                                  std::abs(p.m_xz + std::sin(2 * (a + b))),
                                  std::abs(m.m_zz + std::cos(2 * (a - b))),
                                  std::abs(m.m_xz + std::sin(2 * (a - b)))});
            }
        out.push_back(detail::check("joint observables closed forms (19x19 grid)", worst, 1e-12));
    }
    {
        double worst = 0.0;
        for (double a : detail::grid_deg(-44.0, 44.0, 23))
            for (double b : detail::grid_deg(-44.0, 44.0, 23)) {
                const auto p = exact_observables(apply_local(bell_state(BellKind::PsiPlus), rotation_unitary(a),
                                                             rotation_unitary(b)));
                const auto m = exact_observables(apply_local(bell_state(BellKind::PsiMinus), rotation_unitary(a),
                                                             rotation_unitary(b)));
                const auto e = extract_thetas(p, m);
                worst = std::max({worst, std::abs(e.theta_a.value - a), std::abs(e.theta_b.value - b)});
            }
        out.push_back(detail::check("theta extraction round trip", worst, 1e-9));
    }
    {
        double worst = 0.0;
        for (double a : g19)
            for (double b : g19) {
                const auto rho = apply_local(separable_state(Ket2::H(), Ket2::V()), rotation_unitary(a),
                                             rotation_unitary(b));
                const auto o = exact_observables(rho);
                const auto s = separable_expectations(a, b);
                worst = std::max({worst, std::abs(o.m_zz - s.m_zz), std::abs(o.m_xz - s.m_xz),
                                  std::abs(*o.m_zx - *s.m_zx)});
            }
        out.push_back(detail::check("separable closed forms", worst, 1e-12));
    }
    {
        const double s = chsh_s(bell_state(BellKind::PsiPlus), 0.0, deg(45.0), deg(22.5), deg(67.5));
        out.push_back(detail::check("chsh maximal violation", std::abs(s - 2.0 * std::sqrt(2.0)), 1e-9));
    }
    {
        double worst = 0.0;
        for (int n = 1; n <= 8; ++n) worst = std::max(worst, std::abs(qfi(n) - qfi_closed_form(n)));
        out.push_back(detail::check("quantum fisher information 4N^2", worst, 1e-10));
    }
    {
        const auto set = tomography_settings();
        const auto rho = apply_noise(bell_state(BellKind::PsiPlus), {0.9, 0.0});
        const auto counts = predicted_counts(rho, set, 1e4);
        const Mat4 back = linear_inversion(counts, set);
        out.push_back(detail::check("tomography linear inversion round trip", (back - rho.matrix()).norm(), 1e-10));
    }
    {
        double worst = 0.0;
        const AnalyzerOffsets o;
        for (double a : g19)
            for (double b : g19) {
                for (Branch br : {Branch::Plus, Branch::Minus}) {
                    ExperimentConfig c;
                    c.offsets = o;
                    const auto rho = prepare_branch_state(c, br, a, b);
                    const double raw = branch_angle(exact_observables(rho)).value;
                    const double want = br == Branch::Plus ? a + b : a - b;
                    worst = std::max(worst, std::abs(wrap_pi(2 * (offset_correct(raw, br, o) - want))) / 2);
                }
            }
        out.push_back(detail::check("offset correction inverts analyzer offsets", worst, 1e-12));
    }
    return out;
}

}  // namespace nlrot
