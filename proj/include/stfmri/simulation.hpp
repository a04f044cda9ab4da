#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stfmri/dataset.hpp"
#include "stfmri/selection.hpp"
#include "stfmri/spatial.hpp"
#include "stfmri/temporal.hpp"

namespace stfmri {

/// Returns F with F F^T = cov, built from the eigen-decomposition with
/// negative eigenvalues clipped to zero. Throws when an eigenvalue is below
/// -1e-8 times the largest one.
MatrixXd psd_factor(const MatrixXd& cov);

/// Fills an n x m matrix with independent N(0, F F^T) columns.
MatrixXd sample_mvn(const MatrixXd& factor, Eigen::Index columns, std::mt19937_64& rng);

/// Axis-aligned block of voxels that forms one ROI.
struct RoiBox {
    GridPoint origin{0, 0, 0};
    GridPoint size{1, 1, 1};
};

/// Within-ROI truth: subregion grid, Matérn parameters per subregion, omega.
struct RoiTruth {
    GridConfig partition{1, 1, 1};
    std::vector<AnisoParams> params{AnisoParams{}};
    double omega = 0.9;
};

/// How the regional term enters the innovations.
enum class RegionalMode {
    Nugget,     // independent per voxel: (1 - omega)^2 I inside every ROI
    RoiCommon,  // one N(0, Sigma2) draw per ROI shared by its voxels
};

struct PhantomSpec {
    std::vector<RoiBox> rois;
    std::vector<RoiTruth> truth;  // one per ROI
    RegionalMode regional = RegionalMode::Nugget;
    MatrixXd sigma2;  // R x R correlation for RoiCommon; identity when empty
    double tr_seconds = 2.0;
    int scans_per_session = 48;
    int block_length = 8;
    Ar2Params ar{0.3, 0.1, 1.0};
    VectorXd beta;            // design coefficients shared by all voxels (6); defaults used when empty
    std::vector<double> task_effect;  // per ROI increment of the task coefficient over the rest one
    int burn_in = 200;

    void validate() const;
    /// Parcellation implied by the ROI boxes (ids ordered by ROI, then z, y, x).
    Parcellation parcellation() const;
    BlockDesign design() const;
};

struct PhantomTruth {
    std::vector<SubregionPartition> partitions;
    std::vector<MatrixXd> sigma1;     // per ROI
    std::vector<MatrixXd> error_cov;  // per ROI, literal omega^2 Sigma1 + (1-omega)^2 I
    MatrixXd beta;                    // V x 6
};

struct Phantom {
    FmriDataset dataset;
    PhantomTruth truth;
};

/// Forward simulation of the mean, AR(2) noise and spatial innovations.
Phantom gen_phantom(const PhantomSpec& spec, std::uint64_t seed);

/// Per-ROI covariance of OLS-detrended series (divisor T).
std::vector<MatrixXd> empirical_truth(const FmriDataset& dataset);

/// Desk-scale examples.
PhantomSpec smoke_phantom_spec();
/// Grid (2,1,1) truth: the lower half along x is elongated in x, the upper half in y.
RoiTruth two_regime_truth(double omega = 0.95);

// -------------------------------------------------------------------------
// Simulation studies
// -------------------------------------------------------------------------

enum class Estimator { Glm, Iso, Aniso, LAniso };
std::string to_string(Estimator e);
inline const std::vector<Estimator> kAllEstimators{Estimator::Glm, Estimator::Iso, Estimator::Aniso,
                                                    Estimator::LAniso};

struct StudyRoi {
    std::vector<GridPoint> coords;
    MatrixXd truth_cov;  // n x n covariance of the simulated field
    /// Partition used by l-aniso; chosen by a pilot BIC search when empty.
    std::optional<SubregionPartition> partition;
};

/// Study ROIs from per-ROI truth covariances of a phantom specification
/// (unit-diagonal version of the literal within-ROI covariance).
std::vector<StudyRoi> study_rois(const PhantomSpec& spec);

struct StudyConfig {
    int reps = 100;
    int subsample_cap = 1000;
    std::uint64_t seed = 1;
    int threads = 1;
    std::vector<Estimator> estimators = kAllEstimators;
    double tr_seconds = 2.0;
    int scans_per_session = 48;
    int block_length = 8;
    double level = 0.05;
    int n_removed = 50;  // kriging study
    SearchOptions search{};
    SimplexConfig simplex{1e-4, 1e-6, 3000, 1, 0.1, 0.3};
};

struct StudyRow {
    int roi = 0;  // 0 for the mean row
    Estimator estimator = Estimator::Glm;
    double value = 0.0;  // false-positive %, power % or RMSE
    int failures = 0;
};

struct StudyReport {
    std::string kind;  // "fp", "krige" or "power"
    std::vector<StudyRow> rows;
    int reps = 0;
    double runtime_seconds = 0.0;
    std::vector<SubregionPartition> partitions;  // l-aniso partition per ROI

    double mean(Estimator e) const;
};

/// Null study: common ROI mean with equal task and rest effects; reports the
/// percentage of reps in which the Wald test rejects equality at `level`.
StudyReport run_fp_study(const std::vector<StudyRoi>& rois, const StudyConfig& config, double effect = 0.0);

/// Holds out the same `n_removed` voxels in every rep, fits each model on the
/// rest, and reports the RMSE of kriging predictions against the simulated
/// values.
StudyReport run_krige_study(const std::vector<StudyRoi>& rois, const StudyConfig& config);

struct PowerPoint {
    double effect = 0.0;
    Estimator estimator = Estimator::Glm;
    double power = 0.0;  // percent
};

/// Rejection rate per effect size, pooled over ROIs; reps share seeds across
/// effects so effect 0 reproduces run_fp_study.
std::vector<PowerPoint> power_curve(const std::vector<StudyRoi>& rois, const std::vector<double>& effects,
                                    const StudyConfig& config);

}  // namespace stfmri
