#pragma once

#include <cstdint>
#include <vector>

#include "stfmri/dataset.hpp"
#include "stfmri/numerics.hpp"

namespace stfmri {

class GlassoNotConverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Row r is the mean over the voxels of ROI r+1 of the residuals `e` (V x m).
MatrixXd roi_means(const MatrixXd& e, const Parcellation& parcellation);

struct GlassoOptions {
    int max_sweeps = 500;
    double tol = 1e-12;  // on the largest change of the covariance estimate, relative to mean(diag A)
    int max_inner = 10000;
};

struct GlassoResult {
    MatrixXd W;  // precision matrix
    double lambda = 0.0;
    int nnz_offdiag = 0;  // nonzero entries above the diagonal
    double objective = 0.0;
    int sweeps = 0;
};

/// Maximizes log|W| - tr(W A) - lambda sum_{r != s} |W_rs| by block
/// coordinate descent on the covariance with an inner lasso per column.
/// The diagonal is not penalized.
GlassoResult glasso(const MatrixXd& A, double lambda, const GlassoOptions& options = {});

double glasso_objective(const MatrixXd& W, const MatrixXd& A, double lambda);

/// Largest violation of the optimality conditions of `W` for (A, lambda).
double kkt_residual(const MatrixXd& W, const MatrixXd& A, double lambda);

/// Log-spaced decreasing grid from max |A_rs| (r != s) down to ratio times it.
std::vector<double> default_lambda_grid(const MatrixXd& A, int count = 20, double ratio = 1e-3);

struct CvConfig {
    std::vector<double> lambda_grid;  // decreasing
    double train_fraction = 0.9;
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const;
};

struct CvResult {
    double lambda_hat = 0.0;
    std::vector<double> lambdas;
    std::vector<double> sse;
    std::vector<int> nnz;
    std::vector<int> test_columns;
};

/// Random train/test split of the columns of `ebar`; each grid value is
/// scored by the squared error of predicting every ROI from the others on the
/// test columns. Ties go to the larger lambda.
CvResult cv_lambda(const MatrixXd& ebar, const CvConfig& config);

struct Edge {
    int r = 0;  // 1-based, r < s
    int s = 0;
    double weight = 0.0;
};

/// Off-diagonal entries with |W_rs| > threshold, largest magnitude first.
std::vector<Edge> edges(const MatrixXd& W, double threshold = 0.0);

}  // namespace stfmri
