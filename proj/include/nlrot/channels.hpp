#pragma once

// Local polarization transformations: optical rotation, wave plates,
// molarity-calibrated solutions, analyzer offset correction and isotropic noise.
//
// Sign convention: levorotation is theta > 0 and rotates the polarization
// plane from H toward V, U(theta) = exp(-i sigma_y theta).

#include "nlrot/states.hpp"

namespace nlrot {

/// [[cos t, -sin t], [sin t, cos t]].
inline Mat2 rotation_unitary(double theta) {
    if (!std::isfinite(theta)) throw DataError("rotation angle must be finite");
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Mat2 u;
    u << c, -s, s, c;
    return u;
}

/// Half-wave plate with fast axis at `axis` from H, up to a global phase.
inline Mat2 half_wave_plate(double axis) {
    const double c = std::cos(2.0 * axis);
    const double s = std::sin(2.0 * axis);
    Mat2 m;
    m << c, s, s, -c;
    return m;
}

/// Quarter-wave plate with fast axis at `axis` from H, up to a global phase.
inline Mat2 quarter_wave_plate(double axis) {
    const Mat2 r = rotation_unitary(axis);
    Mat2 d = Mat2::Zero();
    d(0, 0) = 1.0;
    d(1, 1) = I_unit;
    return r * d * r.adjoint();
}

inline bool is_unitary(const Mat2& u, double tol = 1e-8) {
    return u.allFinite() && (u.adjoint() * u - Mat2::Identity()).cwiseAbs().maxCoeff() <= tol;
}

/// (u_a (x) u_b) rho (u_a (x) u_b)^dagger.
inline TwoQubitState apply_local(const TwoQubitState& rho, const Mat2& u_a, const Mat2& u_b) {
    if (!is_unitary(u_a) || !is_unitary(u_b)) throw DataError("apply_local: operator is not unitary");
    const Mat4 u = kron(u_a, u_b);
    Mat4 out = u * rho.matrix() * u.adjoint();
    out = 0.5 * (out + out.adjoint());
    return TwoQubitState(out / out.trace().real());
}

/// Fructose-like solution in one arm. Angles in radians.
struct SolutionSpec {
    double molarity = 0.0;          // mol/L
    double slope = deg(7.01);       // rad per mol/L
    double pbs_offset = 0.0;        // analyzer misalignment seen by the calibration laser
    double transmission = 0.75;     // polarization-independent

    void validate() const {
        if (!(molarity >= 0.0) || !std::isfinite(molarity)) throw DataError("molarity must be >= 0");
        if (!std::isfinite(slope) || !std::isfinite(pbs_offset))
            throw DataError("calibration constants must be finite");
        if (!(transmission >= 0.0 && transmission <= 1.0))
            throw DataError("transmission must be in [0, 1]");
    }
};

/// Physical rotation slope * c. The PBS offset is not included.
inline double solution_rotation(const SolutionSpec& spec) {
    spec.validate();
    return spec.slope * spec.molarity;
}

/// What a classical polarimeter reads through the misaligned analyzer:
/// slope * c + pbs_offset.
inline double calibration_reading(const SolutionSpec& spec) {
    return solution_rotation(spec) + spec.pbs_offset;
}

enum class Branch { Plus, Minus };

inline std::string to_string(Branch b) { return b == Branch::Plus ? "plus" : "minus"; }

/// Analyzer offsets: PBS/wave-plate axis misalignment per arm plus the
/// rotation of the wave plate that exchanges psi+ and psi- (minus branch only).
struct AnalyzerOffsets {
    double pbs_a = deg(-4.75);
    double pbs_b = deg(4.09);
    double hwp = deg(5.47);

    static AnalyzerOffsets none() { return {0.0, 0.0, 0.0}; }

    /// Total apparent rotation the offsets add to theta_plus/theta_minus.
    double total(Branch b) const {
        return b == Branch::Plus ? pbs_a + pbs_b : pbs_a - pbs_b + hwp;
    }
};

/// Plus:  theta_exp - pbs_a - pbs_b
/// Minus: theta_exp - pbs_a + pbs_b - hwp
inline double offset_correct(double theta_exp, Branch which, double pbs_a, double pbs_b, double hwp) {
    return which == Branch::Plus ? theta_exp - pbs_a - pbs_b : theta_exp - pbs_a + pbs_b - hwp;
}

inline double offset_correct(double theta_exp, Branch which, const AnalyzerOffsets& o) {
    return offset_correct(theta_exp, which, o.pbs_a, o.pbs_b, o.hwp);
}

struct NoiseSpec {
    double visibility = 1.0;           // Werner weight p on the ideal state
    double accidental_fraction = 0.0;  // fraction of recorded coincidences that are accidental

    void validate() const {
        if (!(visibility >= 0.0 && visibility <= 1.0)) throw DataError("visibility must be in [0, 1]");
        if (!(accidental_fraction >= 0.0 && accidental_fraction < 1.0))
            throw DataError("accidental_fraction must be in [0, 1)");
    }
};

/// p * rho + (1 - p) * I/4.
inline TwoQubitState apply_noise(const TwoQubitState& rho, const NoiseSpec& noise) {
    noise.validate();
    const double p = noise.visibility;
    return TwoQubitState(p * rho.matrix() + (1.0 - p) * Mat4::Identity() / 4.0);
}

/// Werner weight giving fidelity f with a pure reference: f = p + (1 - p)/4.
inline double visibility_for_fidelity(double f) { return (4.0 * f - 1.0) / 3.0; }

}  // namespace nlrot
