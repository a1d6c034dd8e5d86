#pragma once

// Two-qubit polarization state tomography over 16 product projectors:
// linear inversion and Poisson maximum-likelihood reconstruction.
//
// Canonical projector order (arm A label first):
//   HH HV HD HL  VH VV VD VL  RH RV RD RL  DH DV DD DR
// i.e. {H,V,R} x {H,V,D,L} followed by D x {H,V,D,R}.

#include <random>
#include <span>
#include <vector>

#include "nlrot/states.hpp"

namespace nlrot {

struct TomographyProjector {
    char label_a;
    char label_b;
    Vec4 ket;

    Mat4 projector() const { return ket * ket.adjoint(); }
    std::string label() const { return {label_a, label_b}; }
};

class TomographyBasisSet {
public:
    explicit TomographyBasisSet(std::vector<TomographyProjector> entries) : entries_(std::move(entries)) {
        if (entries_.size() != 16) throw DataError("tomography basis set must have 16 entries");
        design_.resize(16, 16);
        for (int k = 0; k < 16; ++k) {
            const Mat4 p = entries_[k].projector();
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) design_(k, 4 * r + c) = std::conj(p(r, c));
        }
        lu_ = Eigen::FullPivLU<Eigen::MatrixXcd>(design_);
    }

    std::size_t size() const { return entries_.size(); }
    const TomographyProjector& operator[](std::size_t k) const { return entries_[k]; }
    const std::vector<TomographyProjector>& entries() const { return entries_; }

    /// Row k is conj(vec(P_k)), so design * vec(rho) = (Tr P_k rho)_k.
    const Eigen::MatrixXcd& design_matrix() const { return design_; }
    const Eigen::FullPivLU<Eigen::MatrixXcd>& lu() const { return lu_; }

    /// Index of the projector with the given labels, or -1.
    int index_of(char a, char b) const {
        for (std::size_t k = 0; k < entries_.size(); ++k)
            if (entries_[k].label_a == a && entries_[k].label_b == b) return static_cast<int>(k);
        return -1;
    }

private:
    std::vector<TomographyProjector> entries_;
    Eigen::MatrixXcd design_;
    Eigen::FullPivLU<Eigen::MatrixXcd> lu_;
};

inline TomographyBasisSet tomography_settings() {
    std::vector<TomographyProjector> e;
    auto add = [&](char a, char b) {
        e.push_back({a, b, kron(Ket2::from_label(a).amplitudes(), Ket2::from_label(b).amplitudes())});
    };
    for (char a : {'H', 'V', 'R'})
        for (char b : {'H', 'V', 'D', 'L'}) add(a, b);
    for (char b : {'H', 'V', 'D', 'R'}) add('D', b);
    return TomographyBasisSet(std::move(e));
}

/// flux_norm * <psi_k|rho|psi_k>.
inline std::vector<double> predicted_counts(const Mat4& rho, const TomographyBasisSet& set, double flux_norm) {
    if (!(flux_norm > 0.0)) throw DataError("flux_norm must be > 0");
    std::vector<double> out(set.size());
    for (std::size_t k = 0; k < set.size(); ++k) {
        const Vec4& v = set[k].ket;
        out[k] = flux_norm * std::max(0.0, (v.adjoint() * rho * v)(0, 0).real());
    }
    return out;
}

inline std::vector<double> predicted_counts(const TwoQubitState& rho, const TomographyBasisSet& set,
                                            double flux_norm) {
    return predicted_counts(rho.matrix(), set, flux_norm);
}

/// Solves the 16x16 linear system, symmetrizes and normalizes the trace.
/// The result is Hermitian with unit trace but may have negative eigenvalues.
inline Mat4 linear_inversion(std::span<const double> counts, const TomographyBasisSet& set) {
    if (counts.size() != set.size()) throw DataError("linear_inversion: need one count per projector");
    Eigen::VectorXcd b(16);
    double total = 0.0;
    for (int k = 0; k < 16; ++k) {
        if (!std::isfinite(counts[k])) throw DataError("linear_inversion: non-finite count");
        b(k) = counts[k];
        total += counts[k];
    }
    if (!(total > 0.0)) throw DataError("linear_inversion: total counts must be > 0");
    if (set.lu().rank() < 16) throw DataError("linear_inversion: singular tomography design");
    const Eigen::VectorXcd x = set.lu().solve(b);
    Mat4 m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m(r, c) = x(4 * r + c);
    m = 0.5 * (m + m.adjoint());
    const double tr = m.trace().real();
    if (!(tr > 0.0)) throw DataError("linear_inversion: non-positive trace");
    return m / tr;
}

/// Clamps eigenvalues below `floor` to `floor` and renormalizes the trace.
inline Mat4 project_to_psd(const Mat4& m, double floor) {
    Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (m + m.adjoint()));
    const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(floor);
    const Mat4 out = es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    return out / out.trace().real();
}

// ---------------------------------------------------------------------------
// Parameterization rho(t) = T^dagger T / Tr(T^dagger T), T lower triangular.

using MleParams = Eigen::Matrix<double, 16, 1>;

namespace detail {

struct ParamSlot {
    int row;
    int col;
    bool imaginary;
};

// t[0..3]: real diagonal; t[4..15]: (re, im) pairs for (1,0) (2,0) (2,1) (3,0) (3,1) (3,2).
inline const std::array<ParamSlot, 16>& param_slots() {
    static const std::array<ParamSlot, 16> slots = [] {
        std::array<ParamSlot, 16> s{};
        for (int i = 0; i < 4; ++i) s[i] = {i, i, false};
        int k = 4;
        for (int r = 1; r < 4; ++r)
            for (int c = 0; c < r; ++c) {
                s[k++] = {r, c, false};
                s[k++] = {r, c, true};
            }
        return s;
    }();
    return slots;
}

}  // namespace detail

inline Mat4 lower_factor(const MleParams& t) {
    Mat4 T = Mat4::Zero();
    for (int j = 0; j < 16; ++j) {
        const auto& s = detail::param_slots()[j];
        T(s.row, s.col) += s.imaginary ? cplx(0.0, t(j)) : cplx(t(j), 0.0);
    }
    return T;
}

inline Mat4 rho_from_params(const MleParams& t) {
    const Mat4 T = lower_factor(t);
    const Mat4 m = T.adjoint() * T;
    const double tr = m.trace().real();
    if (!(tr > 0.0)) throw DataError("MLE parameters give a zero matrix");
    Mat4 rho = m / tr;
    return 0.5 * (rho + rho.adjoint());
}

/// Inverse of rho_from_params for a positive definite rho, via Cholesky of
/// the index-reversed matrix: J rho J = L L^dagger  =>  T = J L^dagger J.
inline MleParams params_from_rho(const Mat4& rho) {
    Mat4 j = Mat4::Zero();
    for (int i = 0; i < 4; ++i) j(i, 3 - i) = 1.0;
    Eigen::LLT<Mat4> llt(j * rho * j);
    if (llt.info() != Eigen::Success) throw DataError("params_from_rho: matrix is not positive definite");
    const Mat4 L = llt.matrixL();
    const Mat4 T = j * L.adjoint() * j;
    MleParams t;
    for (int k = 0; k < 16; ++k) {
        const auto& s = detail::param_slots()[k];
        t(k) = s.imaginary ? T(s.row, s.col).imag() : T(s.row, s.col).real();
    }
    return t;
}

/// Scaled profile log-likelihood f(t) = (1/n) [sum_k n_k ln p_k(t) - n ln sum_k p_k(t)],
/// with p_k(t) = <psi_k| T^dagger T |psi_k> unnormalized and n = sum_k n_k.
/// f is invariant under t -> c t; its maximizer is the Poisson MLE with the
/// flux normalization profiled out.
class TomographyLikelihood {
public:
    TomographyLikelihood(std::span<const double> counts, const TomographyBasisSet& set)
        : set_(&set), counts_(counts.begin(), counts.end()) {
        if (counts_.size() != set.size()) throw DataError("tomography: need one count per projector");
        for (double n : counts_) {
            if (!(n >= 0.0) || !std::isfinite(n)) throw DataError("tomography: counts must be finite and >= 0");
            total_ += n;
        }
        if (!(total_ > 0.0)) throw DataError("tomography: total counts must be > 0");
        for (std::size_t k = 0; k < set.size(); ++k) proj_.push_back(set[k].projector());
    }

    double total() const { return total_; }

    double value(const MleParams& t) const {
        const Mat4 T = lower_factor(t);
        const Mat4 m = T.adjoint() * T;
        double acc = 0.0, sum_p = 0.0;
        for (std::size_t k = 0; k < counts_.size(); ++k) {
            const double p = expectation(m, k);
            sum_p += p;
            if (counts_[k] > 0.0) {
                if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
                acc += counts_[k] * std::log(p);
            }
        }
        if (!(sum_p > 0.0)) return -std::numeric_limits<double>::infinity();
        return (acc - total_ * std::log(sum_p)) / total_;
    }

    /// Analytic gradient: df/dt_j = (2/n) Re(e_j conj((T W)[r_j, c_j])),
    /// W = sum_k (n_k / p_k - n / sum p) P_k, e_j in {1, i}.
    MleParams gradient(const MleParams& t) const {
        const Mat4 T = lower_factor(t);
        const Mat4 m = T.adjoint() * T;
        std::vector<double> p(counts_.size());
        double sum_p = 0.0;
        for (std::size_t k = 0; k < counts_.size(); ++k) {
            p[k] = expectation(m, k);
            sum_p += p[k];
        }
        Mat4 w = Mat4::Zero();
        for (std::size_t k = 0; k < counts_.size(); ++k) {
            const double wk = (counts_[k] > 0.0 ? counts_[k] / p[k] : 0.0) - total_ / sum_p;
            w += wk * proj_[k];
        }
        const Mat4 tw = T * w;
        MleParams g;
        for (int j = 0; j < 16; ++j) {
            const auto& s = detail::param_slots()[j];
            const cplx x = tw(s.row, s.col);
            g(j) = 2.0 * (s.imaginary ? x.imag() : x.real()) / total_;
        }
        return g;
    }

    /// Poisson log-likelihood sum_k [n_k ln(N p_k) - N p_k] of a normalized
    /// state with N = sum n_k / sum p_k (constant ln n_k! terms dropped).
    double log_likelihood(const Mat4& rho) const {
        double sum_p = 0.0;
        std::vector<double> p(counts_.size());
        for (std::size_t k = 0; k < counts_.size(); ++k) {
            p[k] = std::max(0.0, expectation(rho, k));
            sum_p += p[k];
        }
        const double flux = total_ / sum_p;
        double ll = 0.0;
        for (std::size_t k = 0; k < counts_.size(); ++k) {
            const double mean = flux * p[k];
            if (counts_[k] > 0.0) {
                if (!(mean > 0.0)) return -std::numeric_limits<double>::infinity();
                ll += counts_[k] * std::log(mean);
            }
            ll -= mean;
        }
        return ll;
    }

private:
    double expectation(const Mat4& m, std::size_t k) const {
        const Vec4& v = (*set_)[k].ket;
        return (v.adjoint() * m * v)(0, 0).real();
    }

    const TomographyBasisSet* set_;
    std::vector<double> counts_;
    std::vector<Mat4> proj_;
    double total_ = 0.0;
};

struct MleOptions {
    int max_iter = 5000;
    /// Convergence when max|grad f| * |t| <= grad_tol (scale-free form).
    double grad_tol = 1e-8;
    /// Eigenvalue floor for the PSD-projected linear-inversion start.
    double param_floor = 1e-6;
    bool record_trace = false;
};

struct MleResult {
    TwoQubitState rho;
    double log_likelihood = 0.0;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;
    /// Scaled objective after each accepted step (record_trace only).
    std::vector<double> trace;
};

namespace detail {

inline double scaled_grad_norm(const MleParams& g, const MleParams& t) {
    return g.cwiseAbs().maxCoeff() * t.norm();
}

}  // namespace detail

/// Poisson MLE by BFGS ascent with Armijo backtracking, started from the
/// PSD projection of the linear-inversion estimate.
inline MleResult mle_reconstruct(std::span<const double> counts, const TomographyBasisSet& set,
                                 const MleOptions& opt = {}) {
    const TomographyLikelihood like(counts, set);
    const Mat4 start = project_to_psd(linear_inversion(counts, set), opt.param_floor);
    MleParams t = params_from_rho(start);
    t /= t.norm();

    double f = like.value(t);
    MleParams g = like.gradient(t);
    Eigen::Matrix<double, 16, 16> h = Eigen::Matrix<double, 16, 16>::Identity();
    bool scaled = false;
    std::vector<double> trace;
    if (opt.record_trace) trace.push_back(f);

    int it = 0;
    bool converged = detail::scaled_grad_norm(g, t) <= opt.grad_tol;
    while (!converged && it < opt.max_iter) {
        ++it;
        MleParams d = h * g;
        if (d.dot(g) <= 0.0) {
            h.setIdentity();
            d = g;
        }
        double step = 1.0;
        MleParams t_new;
        double f_new = -std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            t_new = t + step * d;
            f_new = like.value(t_new);
            if (std::isfinite(f_new) && f_new >= f + 1e-4 * step * d.dot(g)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (h.isIdentity()) break;  // no ascent possible along the gradient
            h.setIdentity();
            continue;
        }
        const MleParams g_new = like.gradient(t_new);
        const MleParams s = t_new - t;
        const MleParams y = g - g_new;  // gradient change of -f
        const double ys = y.dot(s);
        if (ys > 1e-14 * y.norm() * s.norm()) {
            if (!scaled) {
                h *= ys / y.squaredNorm();
                scaled = true;
            }
            const double r = 1.0 / ys;
            const Eigen::Matrix<double, 16, 16> left =
                Eigen::Matrix<double, 16, 16>::Identity() - r * s * y.transpose();
            h = left * h * left.transpose() + r * s * s.transpose();
        }
        // f is scale invariant; keep |t| = 1 and rescale the curvature model to match.
        const double nrm = t_new.norm();
        t = t_new / nrm;
        g = g_new * nrm;
        h /= nrm * nrm;
        f = f_new;
        if (opt.record_trace) trace.push_back(f);
        converged = detail::scaled_grad_norm(g, t) <= opt.grad_tol;
    }

    const Mat4 rho = rho_from_params(t);
    MleResult res{TwoQubitState(rho), like.log_likelihood(rho), converged, it,
                  detail::scaled_grad_norm(g, t), std::move(trace)};
    return res;
}

// ---------------------------------------------------------------------------
// Reporting

struct ReconstructionReport {
    double fidelity = 0.0;
    double concurrence = 0.0;
    double purity = 0.0;
    double cosine_similarity = 0.0;
};

inline ReconstructionReport reconstruction_report(const TwoQubitState& rho_hat, const TwoQubitState& reference) {
    return {fidelity(rho_hat, reference), concurrence(rho_hat), purity(rho_hat),
            cosine_similarity(rho_hat, reference)};
}

/// Poisson counts with means predicted_counts(rho, set, flux_norm).
inline std::vector<double> sample_tomography_counts(const TwoQubitState& rho, const TomographyBasisSet& set,
                                                    double flux_norm, std::uint64_t seed) {
    const auto mean = predicted_counts(rho, set, flux_norm);
    std::vector<double> out(mean.size());
    for (std::size_t k = 0; k < mean.size(); ++k) {
        std::mt19937_64 rng(derive_seed(seed, k));
        if (mean[k] > 0.0) {
            std::poisson_distribution<std::uint64_t> dist(mean[k]);
            out[k] = static_cast<double>(dist(rng));
        }
    }
    return out;
}

struct BootstrapReport {
    ReconstructionReport mean;
    ReconstructionReport sigma;
    int resamples = 0;
    int non_converged = 0;
};

/// Parametric bootstrap: resample Poisson counts from rho_hat at the observed
/// total, reconstruct each, and report the mean and standard deviation of the
/// four metrics. Resample r uses stream derive_seed(seed, r).
inline BootstrapReport bootstrap_report(const TwoQubitState& rho_hat, double total_counts,
                                        const TomographyBasisSet& set, const TwoQubitState& reference,
                                        int resamples, std::uint64_t seed, const MleOptions& opt = {}) {
    if (resamples < 2) throw DataError("bootstrap needs at least 2 resamples");
    double sum_p = 0.0;
    for (double p : predicted_counts(rho_hat, set, 1.0)) sum_p += p;
    const double flux = total_counts / sum_p;
    std::vector<ReconstructionReport> reps(resamples, ReconstructionReport{});
    std::vector<char> ok(resamples, 1);
    parallel_for(static_cast<std::size_t>(resamples), [&](std::size_t r) {
        const auto counts = sample_tomography_counts(rho_hat, set, flux, derive_seed(seed, r));
        const auto res = mle_reconstruct(counts, set, opt);
        ok[r] = res.converged ? 1 : 0;
        reps[r] = reconstruction_report(res.rho, reference);
    });
    auto stats = [&](auto field) {
        double m = 0.0, v = 0.0;
        for (const auto& x : reps) m += field(x);
        m /= resamples;
        for (const auto& x : reps) v += (field(x) - m) * (field(x) - m);
        return std::pair{m, std::sqrt(v / (resamples - 1))};
    };
    BootstrapReport out;
    out.resamples = resamples;
    for (char c : ok) out.non_converged += c ? 0 : 1;
    std::tie(out.mean.fidelity, out.sigma.fidelity) = stats([](const auto& x) { return x.fidelity; });
    std::tie(out.mean.concurrence, out.sigma.concurrence) = stats([](const auto& x) { return x.concurrence; });
    std::tie(out.mean.purity, out.sigma.purity) = stats([](const auto& x) { return x.purity; });
    std::tie(out.mean.cosine_similarity, out.sigma.cosine_similarity) =
        stats([](const auto& x) { return x.cosine_similarity; });
    return out;
}

}  // namespace nlrot
