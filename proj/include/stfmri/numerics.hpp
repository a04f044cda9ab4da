#pragma once

#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

namespace stfmri {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class NotPositiveDefinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// -------------------------------------------------------------------------
// Nelder-Mead simplex minimization
// -------------------------------------------------------------------------

struct SimplexConfig {
    double x_tol = 1e-6;
    double f_tol = 1e-8;
    int max_iter = 2000;
    int restart_count = 2;
    // Initial simplex: each axis of x0 is perturbed by step_fraction * |x0_i|,
    // or by step_absolute when that coordinate is zero.
    double step_fraction = 0.05;
    double step_absolute = 0.05;

    void validate() const;
};

struct SimplexResult {
    VectorXd x;
    double f = 0.0;
    int evaluations = 0;
    int iterations = 0;
};

using Objective = std::function<double(const VectorXd&)>;

/// Minimizes `objective` from `x0`. Non-finite objective values are treated
/// as +inf during the search; a non-finite value at x0 throws
/// std::invalid_argument. After the first convergence the search is
/// restarted from the incumbent `restart_count` times.
SimplexResult nelder_mead(const Objective& objective, const VectorXd& x0,
                          const SimplexConfig& config = {});

/// Golden-section minimization of a unimodal function on [lo, hi].
double golden_section(const std::function<double(double)>& f, double lo, double hi,
                      double tol);

// -------------------------------------------------------------------------
// Cubic smoothing spline
// -------------------------------------------------------------------------

/// Natural cubic smoothing spline evaluated at the knots. Minimizes
///   p * sum_i (ys_i - g(xs_i))^2 + (1 - p) * integral g''(t)^2 dt,
/// so p = 1 interpolates and p = 0 returns the least-squares line.
VectorXd smoothing_spline(const VectorXd& xs, const VectorXd& ys, double p);

// -------------------------------------------------------------------------
// Gaussian log-likelihood
// -------------------------------------------------------------------------

struct CholeskyFactor {
    Eigen::LLT<MatrixXd> llt;
    double jitter = 0.0;

    double log_det() const;
};

/// Cholesky factorization that adds 1e-8 * mean(diag) to the diagonal, growing
/// tenfold, on each of up to three retries. Throws NotPositiveDefinite.
CholeskyFactor robust_cholesky(const MatrixXd& cov);

struct LogLikelihood {
    double value = 0.0;
    double jitter = 0.0;
};

/// Sum over the columns of `data` of the N(0, cov) log density.
LogLikelihood gaussian_loglik(const MatrixXd& cov, const MatrixXd& data);

/// Same quantity computed from a factor G with G G^T = sum_j d_j d_j^T over
/// `replicates` independent columns. G may have fewer columns than the data.
LogLikelihood gaussian_loglik_factor(const MatrixXd& cov, const MatrixXd& factor,
                                     long replicates);

/// Returns an n x min(n, m) matrix G with G G^T = data * data^T.
MatrixXd scatter_factor(const MatrixXd& data);

/// Sample covariance (1/m) sum_t x(t) x(t)^T over the m columns of `data`.
MatrixXd sample_covariance(const MatrixXd& data);

}  // namespace stfmri
