#include "stfmri/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace stfmri {

namespace {

// Stationary variance and lag-1 autocorrelation.
struct Ar2Moments {
    double gamma0;
    double rho1;
};

Ar2Moments moments(const Ar2Params& ar) {
    const double p1 = ar.phi1;
    const double p2 = ar.phi2;
    const double gamma0 = ar.sigma2 * (1.0 - p2) / ((1.0 + p2) * ((1.0 - p2) * (1.0 - p2) - p1 * p1));
    return {gamma0, p1 / (1.0 - p2)};
}

struct Whitened {
    VectorXd y;
    MatrixXd X;
};

Eigen::ColPivHouseholderQR<MatrixXd> solve_whitened(const MatrixXd& Xw) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Xw);
    qr.setThreshold(1e-12);
    if (qr.rank() < Xw.cols()) {
        throw std::runtime_error("GLS normal matrix is singular (rank " + std::to_string(qr.rank()) + " < " +
                                 std::to_string(Xw.cols()) + ")");
    }
    return qr;
}

}  // namespace

bool Ar2Params::stationary() const {
    return std::isfinite(phi1) && std::isfinite(phi2) && std::isfinite(sigma2) && sigma2 > 0 &&
           phi1 + phi2 < 1.0 && phi2 - phi1 < 1.0 && std::abs(phi2) < 1.0;
}

void Ar2Params::require_stationary() const {
    if (!stationary()) {
        throw NonStationaryAr("AR(2) parameters (" + std::to_string(phi1) + ", " + std::to_string(phi2) + ", " +
                              std::to_string(sigma2) + ") are outside the stationary region");
    }
}

VectorXd ar2_autocovariance(const Ar2Params& ar, int max_lag) {
    ar.require_stationary();
    if (max_lag < 0) {
        throw std::invalid_argument("ar2_autocovariance: max_lag must be nonnegative");
    }
    const Ar2Moments m = moments(ar);
    VectorXd g(max_lag + 1);
    g[0] = m.gamma0;
    if (max_lag >= 1) {
        g[1] = m.rho1 * m.gamma0;
    }
    for (int k = 2; k <= max_lag; ++k) {
        g[k] = ar.phi1 * g[k - 1] + ar.phi2 * g[k - 2];
    }
    return g;
}

MatrixXd ar2_whiten(const Ar2Params& ar, const MatrixXd& x) {
    ar.require_stationary();
    const Eigen::Index T = x.rows();
    MatrixXd out(T, x.cols());
    if (T == 0) {
        return out;
    }
    const Ar2Moments m = moments(ar);
    out.row(0) = x.row(0) / std::sqrt(m.gamma0);
    if (T >= 2) {
        out.row(1) = (x.row(1) - m.rho1 * x.row(0)) / std::sqrt(m.gamma0 * (1.0 - m.rho1 * m.rho1));
    }
    const double inv_sigma = 1.0 / std::sqrt(ar.sigma2);
    for (Eigen::Index t = 2; t < T; ++t) {
        out.row(t) = (x.row(t) - ar.phi1 * x.row(t - 1) - ar.phi2 * x.row(t - 2)) * inv_sigma;
    }
    return out;
}

double ar2_log_det(const Ar2Params& ar, int scans) {
    ar.require_stationary();
    const Ar2Moments m = moments(ar);
    double ld = 0.0;
    if (scans >= 1) {
        ld += std::log(m.gamma0);
    }
    if (scans >= 2) {
        ld += std::log(m.gamma0 * (1.0 - m.rho1 * m.rho1));
    }
    if (scans >= 3) {
        ld += (scans - 2) * std::log(ar.sigma2);
    }
    return ld;
}

VectorXd gls_beta(const Ar2Params& ar, const VectorXd& y, const MatrixXd& X) {
    if (X.rows() != y.size()) {
        throw std::invalid_argument("gls_beta: design and series lengths differ");
    }
    const MatrixXd Xw = ar2_whiten(ar, X);
    const VectorXd yw = ar2_whiten(ar, y);
    return solve_whitened(Xw).solve(yw);
}

double profile_loglik(const Ar2Params& ar, const VectorXd& y, const MatrixXd& X) {
    if (X.rows() != y.size()) {
        throw std::invalid_argument("profile_loglik: design and series lengths differ");
    }
    const MatrixXd Xw = ar2_whiten(ar, X);
    const VectorXd yw = ar2_whiten(ar, y);
    const VectorXd beta = solve_whitened(Xw).solve(yw);
    const double rss = (yw - Xw * beta).squaredNorm();
    const double T = static_cast<double>(y.size());
    return -0.5 * T * std::log(2.0 * std::numbers::pi) - 0.5 * ar2_log_det(ar, static_cast<int>(y.size())) -
           0.5 * rss;
}

Ar2Params ar2_from_unconstrained(const Eigen::Vector3d& u) {
    const double r1 = std::tanh(u[0]);
    const double r2 = std::tanh(u[1]);
    return {r1 * (1.0 - r2), r2, std::exp(u[2])};
}

Eigen::Vector3d ar2_to_unconstrained(const Ar2Params& ar) {
    ar.require_stationary();
    const double r2 = ar.phi2;
    const double r1 = ar.phi1 / (1.0 - r2);
    return {std::atanh(r1), std::atanh(r2), std::log(ar.sigma2)};
}

VoxelFit fit_voxel(const VectorXd& y, const MatrixXd& X, const SimplexConfig& simplex) {
    if (!y.allFinite()) {
        throw std::invalid_argument("fit_voxel: series contains non-finite values");
    }
    if (y.size() != X.rows() || y.size() < X.cols() + 3) {
        throw std::invalid_argument("fit_voxel: series too short for the design");
    }

    // Yule-Walker start from OLS residuals.
    const VectorXd beta_ols = solve_whitened(X).solve(y);
    const VectorXd r = y - X * beta_ols;
    const Eigen::Index T = r.size();
    const double c0 = r.squaredNorm() / T;
    if (!(c0 > 1e-20 * (1.0 + y.squaredNorm() / T))) {
        throw std::invalid_argument("fit_voxel: series has no variance left after removing the mean design");
    }
    Ar2Params start{0.0, 0.0, 1.0};
    {
        const double rho1 = r.head(T - 1).dot(r.tail(T - 1)) / T / c0;
        const double rho2 = r.head(T - 2).dot(r.tail(T - 2)) / T / c0;
        double p2 = (rho2 - rho1 * rho1) / (1.0 - rho1 * rho1);
        p2 = std::clamp(p2, -0.9, 0.9);
        double r1 = std::clamp(rho1, -0.9, 0.9);
        start.phi2 = p2;
        start.phi1 = r1 * (1.0 - p2);
        start.sigma2 = std::max(c0 * (1.0 - start.phi1 * rho1 - start.phi2 * rho2), 1e-3 * c0);
    }

    const Objective objective = [&](const VectorXd& u) {
        const Ar2Params ar = ar2_from_unconstrained(Eigen::Vector3d(u));
        if (!ar.stationary()) {
            return std::numeric_limits<double>::infinity();
        }
        return -profile_loglik(ar, y, X);
    };
    SimplexConfig cfg = simplex;
    cfg.step_absolute = std::max(cfg.step_absolute, 0.1);
    cfg.step_fraction = std::max(cfg.step_fraction, 0.1);
    const SimplexResult best = nelder_mead(objective, ar2_to_unconstrained(start), cfg);

    VoxelFit fit;
    fit.ar = ar2_from_unconstrained(Eigen::Vector3d(best.x));
    fit.beta = gls_beta(fit.ar, y, X);
    fit.loglik = -best.f;
    if (!std::isfinite(fit.loglik)) {
        throw std::runtime_error("fit_voxel: log-likelihood is not finite at the optimum");
    }
    return fit;
}

MatrixXd standardized_residuals(const MatrixXd& series, const MatrixXd& X, std::span<const VoxelFit> fits) {
    const Eigen::Index V = series.rows();
    const Eigen::Index T = series.cols();
    if (static_cast<Eigen::Index>(fits.size()) != V) {
        throw std::invalid_argument("standardized_residuals: missing fit for " +
                                    std::to_string(V - static_cast<Eigen::Index>(fits.size())) + " voxel(s)");
    }
    if (X.rows() != T || T < 3) {
        throw std::invalid_argument("standardized_residuals: design and series lengths differ");
    }
    MatrixXd e(V, T - 2);
    for (Eigen::Index v = 0; v < V; ++v) {
        const VoxelFit& f = fits[v];
        if (f.beta.size() != X.cols()) {
            throw std::invalid_argument("standardized_residuals: voxel " + std::to_string(v + 1) +
                                        " has no fitted coefficients");
        }
        const VectorXd yt = series.row(v).transpose() - X * f.beta;
        const double inv_sigma = 1.0 / std::sqrt(f.ar.sigma2);
        for (Eigen::Index t = 2; t < T; ++t) {
            e(v, t - 2) = (yt[t] - f.ar.phi1 * yt[t - 1] - f.ar.phi2 * yt[t - 2]) * inv_sigma;
        }
    }
    return e;
}

}  // namespace stfmri
