#pragma once

// Quantum Fisher information of the N-photon circular-polarization probe
// (|R>^N - |L>^N)/sqrt2 under a common rotation, and the separable-photon
// variance baseline.
//
// U(theta)|R> = e^{i theta}|R>, U(theta)|L> = e^{-i theta}|L>, so the probe
// stays in span{|R>^N, |L>^N}, which is orthonormal for every N. All N-photon
// work is done on the two coefficients in that span.

#include <random>
#include <vector>

#include "nlrot/channels.hpp"

namespace nlrot {

struct NoonProbe {
    int n = 1;
    double theta = 0.0;

    /// Coefficients on (|R>^N, |L>^N) after every photon passes U(theta).
    Vec2 coefficients() const {
        check();
        const auto [r, l] = single_photon_amplitudes(theta);
        Vec2 c;
        c << std::pow(r, n) / std::sqrt(2.0), -std::pow(l, n) / std::sqrt(2.0);
        return c;
    }

    /// d/dtheta of coefficients(), from dU/dtheta = -i sigma_y U.
    Vec2 derivative() const {
        check();
        const auto [r, l] = single_photon_amplitudes(theta);
        const Mat2 du = -I_unit * pauli(Pauli::Y) * rotation_unitary(theta);
        const cplx dr = (Ket2::R().amplitudes().adjoint() * du * Ket2::R().amplitudes())(0, 0);
        const cplx dl = (Ket2::L().amplitudes().adjoint() * du * Ket2::L().amplitudes())(0, 0);
        Vec2 d;
        d << double(n) * std::pow(r, n - 1) * dr / std::sqrt(2.0),
            -double(n) * std::pow(l, n - 1) * dl / std::sqrt(2.0);
        return d;
    }

    double norm() const { return coefficients().norm(); }

    /// <R|U|R>, <L|U|L> evaluated from the 2x2 rotation matrix.
    static std::pair<cplx, cplx> single_photon_amplitudes(double theta) {
        const Mat2 u = rotation_unitary(theta);
        const Vec2 r = Ket2::R().amplitudes();
        const Vec2 l = Ket2::L().amplitudes();
        return {(r.adjoint() * u * r)(0, 0), (l.adjoint() * u * l)(0, 0)};
    }

private:
    void check() const {
        if (n < 1) throw DataError("probe photon number must be >= 1");
    }
};

/// F_Q = 4 [<d psi|d psi> - |<psi|d psi>|^2] evaluated numerically in the
/// two-dimensional subspace. Independent of theta; equals 4 n^2.
inline double qfi(int n, double theta = 0.3) {
    if (n < 1) throw DataError("qfi: n must be >= 1");
    const NoonProbe probe{n, theta};
    const Vec2 c = probe.coefficients();
    const Vec2 d = probe.derivative();
    const double dd = d.squaredNorm();
    const cplx overlap = c.dot(d);  // conjugates c
    return 4.0 * (dd - std::norm(overlap));
}

inline double qfi_closed_form(int n) { return 4.0 * double(n) * double(n); }

struct ScalingRow {
    int n = 0;
    /// Cramer-Rao bound 1/F_Q per probe use.
    double var_entangled_bound = 0.0;
    /// Empirical variance of the separable estimator, per probe use of n photons.
    double var_separable_sim = 0.0;
};

struct ScalingOptions {
    /// Rotation seen by each separable photon.
    double true_theta = deg(10.0);
};

/// Separable baseline: each trial sends n * counts_per_trial |V> photons
/// through U(theta); half are measured in Z and half in X, and
/// theta_hat = 1/2 atan2(-<sigma_x>, -<sigma_z>). The reported variance is the
/// across-trial variance of theta_hat times counts_per_trial, i.e. normalized
/// to one use of n photons, which is what 1/F_Q bounds.
inline std::vector<ScalingRow> variance_scaling(const std::vector<int>& n_values, int trials, int counts_per_trial,
                                                std::uint64_t seed, const ScalingOptions& opt = {}) {
    if (trials < 2) throw DataError("variance_scaling: trials must be >= 2");
    if (counts_per_trial < 1) throw DataError("variance_scaling: counts_per_trial must be >= 1");
    for (int n : n_values)
        if (n < 1) throw DataError("variance_scaling: n must be >= 1");

    // |V> rotated: amplitudes (-sin t, cos t).
    const double th = opt.true_theta;
    const double p_z_plus = std::sin(th) * std::sin(th);
    const double p_x_plus = 0.5 * (1.0 - std::sin(2.0 * th));

    std::vector<ScalingRow> rows(n_values.size());
    parallel_for(n_values.size(), [&](std::size_t i) {
        const int n = n_values[i];
        const std::uint64_t photons = std::uint64_t(n) * std::uint64_t(counts_per_trial);
        if (photons < 2) throw DataError("variance_scaling: need at least two photons per trial");
        const std::uint64_t k_z = (photons + 1) / 2;
        const std::uint64_t k_x = photons - k_z;
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(n)));
        std::binomial_distribution<std::uint64_t> bz(k_z, p_z_plus);
        std::binomial_distribution<std::uint64_t> bx(k_x, p_x_plus);
        double mean = 0.0, m2 = 0.0;
        for (int t = 0; t < trials; ++t) {
            const double ez = 2.0 * double(bz(rng)) / double(k_z) - 1.0;
            const double ex = 2.0 * double(bx(rng)) / double(k_x) - 1.0;
            const double est = 0.5 * std::atan2(-ex, -ez);
            const double delta = est - mean;
            mean += delta / (t + 1);
            m2 += delta * (est - mean);
        }
        rows[i] = {n, 1.0 / qfi_closed_form(n), m2 / (trials - 1) * counts_per_trial};
    });
    return rows;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DataError("loglog_slope: need >= 2 paired points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DataError("loglog_slope: values must be positive");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= x.size();
    my /= y.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (!(sxx > 0.0)) throw DataError("loglog_slope: degenerate x");
    return sxy / sxx;
}

}  // namespace nlrot
