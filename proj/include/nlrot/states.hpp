#pragma once

// One- and two-qubit polarization states.
//
// Conventions:
//   single photon   |H> = (1, 0), |V> = (0, 1)
//                   |D> = (|H> + |V>)/sqrt2, |A> = (|H> - |V>)/sqrt2
//                   |R> = (|H> - i|V>)/sqrt2, |L> = (|H> + i|V>)/sqrt2
//   two photons     first tensor factor is arm A; basis order (HH, HV, VH, VV)

#include <array>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "nlrot/common.hpp"

namespace nlrot {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec2 = Eigen::Vector2cd;
using Vec4 = Eigen::Vector4cd;

inline constexpr cplx I_unit{0.0, 1.0};

namespace basis {
inline constexpr int HH = 0;
inline constexpr int HV = 1;
inline constexpr int VH = 2;
inline constexpr int VV = 3;
}  // namespace basis

// Physicality tolerances for TwoQubitState.
inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kPsdTol = 1e-9;

/// Normalized single-photon polarization ket.
class Ket2 {
public:
    Ket2(cplx h, cplx v) : amp_(h, v) { normalize(); }
    explicit Ket2(const Vec2& amps) : amp_(amps) { normalize(); }

    static Ket2 H() { return {1.0, 0.0}; }
    static Ket2 V() { return {0.0, 1.0}; }
    static Ket2 D() { return {1.0, 1.0}; }
    static Ket2 A() { return {1.0, -1.0}; }
    static Ket2 R() { return {1.0, -I_unit}; }
    static Ket2 L() { return {1.0, I_unit}; }
    /// Linear polarization at angle a from H toward V.
    static Ket2 linear(double a) { return {std::cos(a), std::sin(a)}; }

    /// Parses one of H, V, D, A, R, L.
    static Ket2 from_label(char label) {
        switch (label) {
            case 'H': return H();
            case 'V': return V();
            case 'D': return D();
            case 'A': return A();
            case 'R': return R();
            case 'L': return L();
            default: throw DataError(std::string("unknown polarization label '") + label + "'");
        }
    }

    const Vec2& amplitudes() const { return amp_; }
    cplx h() const { return amp_(0); }
    cplx v() const { return amp_(1); }

    /// Ket orthogonal to this one, (-conj(v), conj(h)).
    Ket2 orthogonal() const { return {-std::conj(amp_(1)), std::conj(amp_(0))}; }
    Mat2 projector() const { return amp_ * amp_.adjoint(); }

private:
    void normalize() {
        const double n = amp_.norm();
        if (!(n > 0.0) || !std::isfinite(n)) throw DataError("ket must be finite and nonzero");
        amp_ /= n;
    }

    Vec2 amp_;
};

/// Physical two-qubit density matrix. Construction enforces Hermiticity,
/// unit trace and positive semidefiniteness within the k*Tol constants.
class TwoQubitState {
public:
    explicit TwoQubitState(const Mat4& rho) : rho_(rho) { validate(rho_); }

    static TwoQubitState pure(const Vec4& psi) {
        const double n = psi.norm();
        if (!(n > 0.0)) throw DataError("pure state vector must be nonzero");
        const Vec4 u = psi / n;
        return TwoQubitState(u * u.adjoint());
    }

    static TwoQubitState maximally_mixed() { return TwoQubitState(Mat4::Identity() / 4.0); }

    const Mat4& matrix() const { return rho_; }
    cplx operator()(int r, int c) const { return rho_(r, c); }

    static void validate(const Mat4& rho) {
        if (!rho.allFinite()) throw DataError("density matrix has non-finite entries");
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > kHermitianTol)
            throw DataError("density matrix is not Hermitian");
        if (std::abs(rho.trace() - 1.0) > kTraceTol)
            throw DataError("density matrix does not have unit trace");
        Eigen::SelfAdjointEigenSolver<Mat4> es(rho, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -kPsdTol)
            throw DataError("density matrix is not positive semidefinite");
    }

private:
    Mat4 rho_;
};

enum class Pauli { I, X, Y, Z };

inline Mat2 pauli(Pauli p) {
    Mat2 m;
    switch (p) {
        case Pauli::I: m << 1, 0, 0, 1; break;
        case Pauli::X: m << 0, 1, 1, 0; break;
        case Pauli::Y: m << 0, -I_unit, I_unit, 0; break;
        case Pauli::Z: m << 1, 0, 0, -1; break;
    }
    return m;
}

inline Mat4 kron(const Mat2& a, const Mat2& b) {
    Mat4 out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

inline Vec4 kron(const Vec2& a, const Vec2& b) {
    Vec4 out;
    out << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
    return out;
}

enum class BellKind { PsiPlus, PsiMinus, PhiPlus, PhiMinus };

inline Vec4 bell_ket(BellKind kind) {
    const double s = 1.0 / std::sqrt(2.0);
    Vec4 v = Vec4::Zero();
    switch (kind) {
        case BellKind::PsiPlus: v(basis::HV) = s; v(basis::VH) = s; break;
        case BellKind::PsiMinus: v(basis::HV) = s; v(basis::VH) = -s; break;
        case BellKind::PhiPlus: v(basis::HH) = s; v(basis::VV) = s; break;
        case BellKind::PhiMinus: v(basis::HH) = s; v(basis::VV) = -s; break;
    }
    return v;
}

inline TwoQubitState bell_state(BellKind kind) { return TwoQubitState::pure(bell_ket(kind)); }

inline std::string to_string(BellKind kind) {
    switch (kind) {
        case BellKind::PsiPlus: return "psi_plus";
        case BellKind::PsiMinus: return "psi_minus";
        case BellKind::PhiPlus: return "phi_plus";
        case BellKind::PhiMinus: return "phi_minus";
    }
    return "?";
}

inline BellKind bell_kind_from_string(const std::string& s) {
    if (s == "psi_plus") return BellKind::PsiPlus;
    if (s == "psi_minus") return BellKind::PsiMinus;
    if (s == "phi_plus") return BellKind::PhiPlus;
    if (s == "phi_minus") return BellKind::PhiMinus;
    throw DataError("unknown Bell state '" + s + "'");
}

inline TwoQubitState separable_state(const Ket2& a, const Ket2& b) {
    return TwoQubitState::pure(kron(a.amplitudes(), b.amplitudes()));
}

namespace detail {

// Principal square root of a Hermitian PSD matrix. Eigenvalues in
// [-kPsdTol, 0) are clamped to zero; anything more negative is rejected.
inline Mat4 psd_sqrt(const Mat4& m) {
    Eigen::SelfAdjointEigenSolver<Mat4> es(m);
    Eigen::Vector4d ev = es.eigenvalues();
    for (int i = 0; i < 4; ++i) {
        if (ev(i) < -kPsdTol) throw DataError("matrix square root of a non-PSD matrix");
        ev(i) = std::sqrt(std::max(ev(i), 0.0));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

// Eigenvalues of a Hermitian matrix known to be PSD up to rounding, clamped at 0.
inline Eigen::Vector4d psd_eigenvalues(const Mat4& m) {
    const Mat4 h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat4> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseMax(0.0);
}

}  // namespace detail

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const TwoQubitState& rho, const TwoQubitState& sigma) {
    const Mat4 sr = detail::psd_sqrt(rho.matrix());
    const Eigen::Vector4d ev = detail::psd_eigenvalues(sr * sigma.matrix() * sr);
    const double t = ev.cwiseSqrt().sum();
    return std::clamp(t * t, 0.0, 1.0);
}

/// Wootters concurrence.
inline double concurrence(const TwoQubitState& rho) {
    const Mat4 yy = kron(pauli(Pauli::Y), pauli(Pauli::Y));
    const Mat4 tilde = yy * rho.matrix().conjugate() * yy;
    const Mat4 sr = detail::psd_sqrt(rho.matrix());
    // sqrt(rho) tilde sqrt(rho) shares its spectrum with rho * tilde and is Hermitian PSD.
    Eigen::Vector4d lam = detail::psd_eigenvalues(sr * tilde * sr).cwiseSqrt();
    std::sort(lam.data(), lam.data() + 4, std::greater<>());
    return std::clamp(lam(0) - lam(1) - lam(2) - lam(3), 0.0, 1.0);
}

/// Re Tr(a^dagger b) / (|a|_F |b|_F). Accepts non-physical matrices.
inline double cosine_similarity(const Mat4& a, const Mat4& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) throw DataError("cosine similarity of a zero matrix");
    return (a.adjoint() * b).trace().real() / (na * nb);
}

inline double cosine_similarity(const TwoQubitState& a, const TwoQubitState& b) {
    return cosine_similarity(a.matrix(), b.matrix());
}

inline double purity(const TwoQubitState& rho) {
    return (rho.matrix() * rho.matrix()).trace().real();
}

/// Trace distance 1/2 |a - b|_1 for Hermitian a, b.
inline double trace_distance(const Mat4& a, const Mat4& b) {
    const Mat4 d = 0.5 * ((a - b) + (a - b).adjoint());
    Eigen::SelfAdjointEigenSolver<Mat4> es(d, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

/// Row-major (HH, HV, VH, VV) entries, the on-disk layout of a density matrix.
inline std::array<cplx, 16> to_entries(const Mat4& m) {
    std::array<cplx, 16> out{};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) out[4 * r + c] = m(r, c);
    return out;
}

inline Mat4 from_entries(const std::array<cplx, 16>& e) {
    Mat4 m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m(r, c) = e[4 * r + c];
    return m;
}

}  // namespace nlrot
