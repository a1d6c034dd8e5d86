#pragma once

#include <vector>

#include <Eigen/Dense>

#include "nlrot/common.hpp"
#include "nlrot/io.hpp"

namespace nlrot {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_sigma = 0.0;
    double intercept_sigma = 0.0;
    double covariance = 0.0;  // cov(slope, intercept)
    double r_squared = 0.0;

    /// x where the line crosses zero, with first-order propagated sigma.
    std::pair<double, double> root() const {
        if (slope == 0.0) throw DataError("fit_line: zero slope has no root");
        const double x0 = -intercept / slope;
        const double dx_db = -1.0 / slope;
        const double dx_dm = intercept / (slope * slope);
        const double var = dx_db * dx_db * intercept_sigma * intercept_sigma +
                           dx_dm * dx_dm * slope_sigma * slope_sigma + 2.0 * dx_db * dx_dm * covariance;
        return {x0, std::sqrt(std::max(0.0, var))};
    }
};

/// Weighted least squares y = slope x + intercept.
///
/// With every sigma > 0 the weights are 1/sigma^2 and the parameter
/// uncertainties follow from those sigmas. Otherwise the fit is unweighted
/// and uncertainties are scaled by the residual variance. R^2 is
/// 1 - SS_res/SS_tot (unweighted), defined as 1 when SS_tot = 0.
inline LineFit fit_line(const std::vector<io::XyPoint>& pts) {
    if (pts.size() < 3) throw DataError("fit_line: need at least 3 points");
    bool weighted = true;
    for (const auto& p : pts) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DataError("fit_line: non-finite point");
        if (!(p.sigma > 0.0)) weighted = false;
    }
    double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : pts) {
        const double w = weighted ? 1.0 / (p.sigma * p.sigma) : 1.0;
        s += w;
        sx += w * p.x;
        sy += w * p.y;
        sxx += w * p.x * p.x;
        sxy += w * p.x * p.y;
    }
    const double delta = s * sxx - sx * sx;
    double xmin = pts[0].x, xmax = pts[0].x;
    for (const auto& p : pts) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
    }
    if (!(xmax > xmin) || !(delta > 0.0)) throw DataError("fit_line: all x values are equal");

    LineFit f;
    f.slope = (s * sxy - sx * sy) / delta;
    f.intercept = (sxx * sy - sx * sxy) / delta;

    double ybar = 0.0;
    for (const auto& p : pts) ybar += p.y;
    ybar /= pts.size();
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& p : pts) {
        const double r = p.y - (f.slope * p.x + f.intercept);
        ss_res += r * r;
        ss_tot += (p.y - ybar) * (p.y - ybar);
    }
    f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;

    const double scale = weighted ? 1.0 : ss_res / (pts.size() - 2);
    f.slope_sigma = std::sqrt(scale * s / delta);
    f.intercept_sigma = std::sqrt(scale * sxx / delta);
    f.covariance = -scale * sx / delta;
    return f;
}

/// Coefficient of determination of observed values against fixed predictions.
inline double r_squared(const std::vector<double>& observed, const std::vector<double>& predicted) {
    if (observed.size() != predicted.size() || observed.empty())
        throw DataError("r_squared: size mismatch");
    double mean = 0.0;
    for (double o : observed) mean += o;
    mean /= observed.size();
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        ss_res += (observed[i] - predicted[i]) * (observed[i] - predicted[i]);
        ss_tot += (observed[i] - mean) * (observed[i] - mean);
    }
    return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
}

struct SinusoidFit {
    double amplitude = 0.0;
    double phase = 0.0;  // y = amplitude cos(omega x + phase) + offset
    double offset = 0.0;
    double phase_sigma = 0.0;
};

/// Linear least squares on y = A cos(omega x) + B sin(omega x) + C.
inline SinusoidFit fit_sinusoid(const std::vector<double>& x, const std::vector<double>& y, double omega) {
    if (x.size() != y.size() || x.size() < 4) throw DataError("fit_sinusoid: need >= 4 paired points");
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        a(i, 0) = std::cos(omega * x[i]);
        a(i, 1) = std::sin(omega * x[i]);
        a(i, 2) = 1.0;
        b(i) = y[i];
    }
    const Eigen::MatrixXd ata = a.transpose() * a;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ata);
    if (lu.rank() < 3) throw DataError("fit_sinusoid: degenerate abscissae");
    const Eigen::Vector3d p = lu.solve(a.transpose() * b);
    const double resid = (a * p - b).squaredNorm();
    const Eigen::Matrix3d cov = lu.inverse() * (n > 3 ? resid / double(n - 3) : 0.0);

    SinusoidFit f;
    const double ca = p(0), cb = p(1);
    f.amplitude = std::hypot(ca, cb);
    f.phase = std::atan2(-cb, ca);
    f.offset = p(2);
    const double a4 = std::pow(f.amplitude, 4);
    if (a4 > 0.0) {
        const double var = (cb * cb * cov(0, 0) + ca * ca * cov(1, 1) - 2.0 * ca * cb * cov(0, 1)) / a4;
        f.phase_sigma = std::sqrt(std::max(0.0, var));
    }
    return f;
}

}  // namespace nlrot
