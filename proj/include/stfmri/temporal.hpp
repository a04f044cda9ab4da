#pragma once

#include <span>
#include <stdexcept>

#include "stfmri/dataset.hpp"
#include "stfmri/numerics.hpp"

namespace stfmri {

class NonStationaryAr : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// eps(t) = phi1 eps(t-1) + phi2 eps(t-2) + innovation with variance sigma2.
struct Ar2Params {
    double phi1 = 0.0;
    double phi2 = 0.0;
    double sigma2 = 1.0;

    bool stationary() const;
    void require_stationary() const;
    bool operator==(const Ar2Params&) const = default;
};

struct VoxelFit {
    VectorXd beta;  // one coefficient per design column
    Ar2Params ar;
    double loglik = 0.0;
};

/// gamma(0..max_lag) of a stationary AR(2).
VectorXd ar2_autocovariance(const Ar2Params& ar, int max_lag);

/// Applies L with L^T L = K(ar)^{-1} to every column of `x` (T rows): the
/// first two rows use the stationary law of (eps1, eps2), the rest are
/// innovations divided by sigma. The output columns are white with unit
/// variance under the AR(2) model.
MatrixXd ar2_whiten(const Ar2Params& ar, const MatrixXd& x);

/// log |K(ar)| for a series of length T.
double ar2_log_det(const Ar2Params& ar, int scans);

/// Exact Gaussian log-likelihood of y with the mean X beta profiled out by GLS.
double profile_loglik(const Ar2Params& ar, const VectorXd& y, const MatrixXd& X);

/// beta = (X^T K^-1 X)^-1 X^T K^-1 y. Throws std::runtime_error when the
/// weighted normal matrix is singular.
VectorXd gls_beta(const Ar2Params& ar, const VectorXd& y, const MatrixXd& X);

/// Maps an unconstrained (a, b, c) to (phi1, phi2, sigma2) through partial
/// autocorrelations r1 = tanh(a), r2 = tanh(b) and sigma2 = exp(c).
Ar2Params ar2_from_unconstrained(const Eigen::Vector3d& u);
Eigen::Vector3d ar2_to_unconstrained(const Ar2Params& ar);

/// Maximizes profile_loglik over (phi1, phi2, sigma2).
VoxelFit fit_voxel(const VectorXd& y, const MatrixXd& X, const SimplexConfig& simplex = {});

/// e_v(t) = (Ytilde_v(t) - phi1 Ytilde_v(t-1) - phi2 Ytilde_v(t-2)) / sigma_v
/// for t = 3..T, where Ytilde = Y - X beta_v. Returns V x (T - 2).
MatrixXd standardized_residuals(const MatrixXd& series, const MatrixXd& X, std::span<const VoxelFit> fits);

}  // namespace stfmri
