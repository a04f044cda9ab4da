#pragma once

#include <span>
#include <string>
#include <vector>

#include "stfmri/dataset.hpp"
#include "stfmri/temporal.hpp"

namespace stfmri {

struct ActivationConfig {
    int harmonics = 1;  // N
    double q = 0.05;

    void validate() const;
};

struct FourierBasis {
    MatrixXd B;                       // n x p
    std::vector<std::string> labels;  // e.g. "cos_x1", "sin_z1"
};

/// cos(2 pi n u_b), sin(2 pi n u_b) for b in {x, y, z} and n = 1..N, where
/// u_b = (b - min b) / d_b and d_b = range * k / (k - 1) for k distinct
/// values on the axis (so u_b lies in [0, 1)). Axes with a single value,
/// all-zero columns and repeated columns are dropped.
FourierBasis fourier_basis(const std::vector<GridPoint>& coords, int harmonics);

struct RoiActivation {
    std::vector<std::string> labels;  // basis labels followed by "rest"
    VectorXd theta;                   // basis coefficients of the task effect, then the rest effect
    MatrixXd cov;                     // GLS covariance of theta
};

/// GLS of the ROI series on {B(v) X1(t)} and X2(t) after removing the first
/// four design columns with the stage-1 coefficients. Each voxel is whitened
/// in time with its own AR(2) fit, then every scan is whitened in space with
/// `spatial_corr` (unit diagonal).
RoiActivation fit_activation(const MatrixXd& roi_series, const MatrixXd& X, std::span<const VoxelFit> fits,
                             const MatrixXd& spatial_corr, const MatrixXd& basis,
                             std::vector<std::string> labels = {});

struct VoxelTest {
    double contrast = 0.0;
    double se = 0.0;
    double z = 0.0;
    double p = 1.0;
};

/// Wald test of B(v) theta_task - theta_rest = 0 for every voxel.
std::vector<VoxelTest> voxel_tests(const RoiActivation& fit, const MatrixXd& basis);

/// Two-sided standard-normal p-value.
double normal_two_sided_p(double z);

/// Benjamini-Hochberg step-up rejections at level q.
std::vector<bool> bh_fdr(std::span<const double> pvalues, double q);

struct ActivationFit {
    std::vector<RoiActivation> rois;
    std::vector<VoxelTest> voxels;  // by voxel index
    std::vector<bool> reject;       // by voxel index
};

/// Runs fit_activation and voxel_tests for every ROI, then BH over all voxels.
ActivationFit test_activation(const FmriDataset& dataset, const MatrixXd& X, std::span<const VoxelFit> fits,
                              const std::vector<MatrixXd>& spatial_corr, const ActivationConfig& config,
                              int threads = 1);

}  // namespace stfmri
