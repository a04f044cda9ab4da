#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "stfmri/dataset.hpp"
#include "stfmri/numerics.hpp"

namespace stfmri {

using Eigen::Vector3d;

/// Matérn smoothness and geometric anisotropy of one subregion. theta is kept
/// at 1; the lengths carry all distance scaling.
struct AnisoParams {
    double nu = 1.0;
    double theta = 1.0;
    std::array<double, 3> lengths{1.0, 1.0, 1.0};
    double xi1 = 0.0;  // rotation about z
    double xi2 = 0.0;  // rotation about y

    void validate() const;
    bool operator==(const AnisoParams&) const = default;
};

/// d = || D R2^T R1^T delta || with D = diag(1/l1, 1/l2, 1/l3).
double aniso_distance(const Vector3d& delta, const AnisoParams& params);

/// Matérn correlation 2^(1-nu)/Gamma(nu) d^nu K_nu(d), with value 1 at d = 0.
double matern_corr(double d, double nu);

/// Subregion membership of the voxels of one ROI. `assignment[i]` is the
/// 1-based subregion of ROI voxel i; centroids are mean grid coordinates.
struct SubregionPartition {
    std::vector<int> assignment;
    std::vector<Vector3d> centroids;

    int count() const { return static_cast<int>(centroids.size()); }
    std::vector<int> sizes() const;
    bool operator==(const SubregionPartition&) const = default;

    static SubregionPartition single(const std::vector<GridPoint>& coords);
    /// Builds centroids from an assignment with labels 1..L (all present).
    static SubregionPartition from_assignment(const std::vector<GridPoint>& coords, std::vector<int> assignment);
};

/// Inverse-distance weights normalized so each row has unit Euclidean norm.
/// A voxel sitting on a centroid gets weight 1 there and 0 elsewhere.
MatrixXd mixture_weights(const std::vector<GridPoint>& coords, const std::vector<Vector3d>& centroids);

/// Caches the distinct coordinate differences of an ROI so that the
/// correlation of each component is evaluated once per distinct lag.
class CovWorkspace {
public:
    CovWorkspace(const std::vector<GridPoint>& coords, const SubregionPartition& partition);

    MatrixXd sigma1(const std::vector<AnisoParams>& params) const;
    int size() const { return n_; }
    const MatrixXd& weights() const { return weights_; }

private:
    int n_ = 0;
    std::vector<Vector3d> lags_;       // distinct differences up to sign
    std::vector<int> pair_lag_;        // n*n, lag index of (i, j)
    MatrixXd weights_;                 // n x L
};

/// Mixture sum_l w_l(v) w_l(v') C_l(v - v'); unit diagonal.
MatrixXd nonstat_cov(const std::vector<GridPoint>& coords, const SubregionPartition& partition,
                     const std::vector<AnisoParams>& params);

/// omega^2 * sigma1 + (1 - omega)^2 * I.
MatrixXd roi_error_cov(const MatrixXd& sigma1, double omega);

/// Rescales a covariance matrix to unit diagonal.
MatrixXd to_correlation(const MatrixXd& cov);

enum class CovFamily {
    Isotropic,            // one subregion, l1 = l2 = l3, no rotation
    AnisotropicFrozen,    // angles fixed at zero
    AnisotropicFree,      // angles estimated
};

std::string to_string(CovFamily family);
CovFamily cov_family_from_string(const std::string& name);

struct RoiCovModel {
    CovFamily family = CovFamily::AnisotropicFree;
    SubregionPartition partition;
    std::vector<AnisoParams> params;
    double omega = 0.5;
    MatrixXd sigma1;  // unit-diagonal correlation
    double loglik = 0.0;
    double jitter = 0.0;

    /// Free-parameter count used by the BIC: 3 for the isotropic family,
    /// 5L + 1 with frozen angles and 7L + 1 with free angles.
    int bic_parameters() const;
    MatrixXd error_cov() const { return roi_error_cov(sigma1, omega); }
};

struct RoiFitOptions {
    CovFamily family = CovFamily::AnisotropicFree;
    SimplexConfig simplex{1e-4, 1e-6, 3000, 1, 0.1, 0.3};
    /// Starting values. A start with fewer components than the partition is
    /// replicated across subregions.
    std::optional<std::vector<AnisoParams>> start_params;
    std::optional<double> start_omega;
};

/// Maximizes sum over replicates of the N(0, omega^2 Sigma1 + (1-omega)^2 I)
/// log-density of the columns of `e_r` (n x m).
RoiCovModel fit_roi_cov(const MatrixXd& e_r, const std::vector<GridPoint>& coords,
                        const SubregionPartition& partition, const RoiFitOptions& options = {});

/// Conditional mean Sigma_to Sigma_oo^-1 z_o of a zero-mean Gaussian vector.
VectorXd krige(const MatrixXd& cov, const std::vector<int>& observed, const VectorXd& values,
               const std::vector<int>& targets);

/// Largest Euclidean distance between two voxels (at least 1).
double roi_diameter(const std::vector<GridPoint>& coords);

}  // namespace stfmri
