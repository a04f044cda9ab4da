#include "stfmri/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

namespace stfmri {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double finite_or_inf(double v) {
    return std::isfinite(v) ? v : kInf;
}

struct SimplexRun {
    VectorXd x;
    double f;
    int evaluations;
    int iterations;
};

SimplexRun run_simplex(const Objective& objective, const VectorXd& x0, double f0,
                       const SimplexConfig& cfg) {
    const Eigen::Index n = x0.size();
    std::vector<VectorXd> pts(n + 1, x0);
    std::vector<double> fv(n + 1, f0);
    int evals = 0;
    auto eval = [&](const VectorXd& x) {
        ++evals;
        return finite_or_inf(objective(x));
    };

    for (Eigen::Index i = 0; i < n; ++i) {
        const double step = x0[i] != 0.0 ? cfg.step_fraction * std::abs(x0[i]) : cfg.step_absolute;
        pts[i + 1][i] += step;
        fv[i + 1] = eval(pts[i + 1]);
    }

    std::vector<int> order(n + 1);
    int iter = 0;
    for (; iter < cfg.max_iter; ++iter) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        {
            std::vector<VectorXd> p2(n + 1);
            std::vector<double> f2(n + 1);
            for (Eigen::Index i = 0; i <= n; ++i) {
                p2[i] = std::move(pts[order[i]]);
                f2[i] = fv[order[i]];
            }
            pts = std::move(p2);
            fv = std::move(f2);
        }

        double diameter = 0.0;
        for (Eigen::Index i = 1; i <= n; ++i) {
            diameter = std::max(diameter, (pts[i] - pts[0]).lpNorm<Eigen::Infinity>());
        }
        const double spread = fv[n] - fv[0];
        if (diameter < cfg.x_tol || (std::isfinite(spread) && spread <= cfg.f_tol)) {
            break;
        }

        VectorXd centroid = VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            centroid += pts[i];
        }
        centroid /= static_cast<double>(n);

        const VectorXd& worst = pts[n];
        VectorXd xr = centroid + (centroid - worst);
        const double fr = eval(xr);

        if (fr < fv[0]) {
            VectorXd xe = centroid + 2.0 * (centroid - worst);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[n] = std::move(xe);
                fv[n] = fe;
            } else {
                pts[n] = std::move(xr);
                fv[n] = fr;
            }
            continue;
        }
        if (fr < fv[n - 1]) {
            pts[n] = std::move(xr);
            fv[n] = fr;
            continue;
        }

        bool accepted = false;
        if (fr < fv[n]) {
            VectorXd xc = centroid + 0.5 * (xr - centroid);
            const double fc = eval(xc);
            if (fc <= fr) {
                pts[n] = std::move(xc);
                fv[n] = fc;
                accepted = true;
            }
        } else {
            VectorXd xc = centroid + 0.5 * (worst - centroid);
            const double fc = eval(xc);
            if (fc < fv[n]) {
                pts[n] = std::move(xc);
                fv[n] = fc;
                accepted = true;
            }
        }
        if (!accepted) {
            for (Eigen::Index i = 1; i <= n; ++i) {
                pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
                fv[i] = eval(pts[i]);
            }
        }
    }

    const auto best = std::min_element(fv.begin(), fv.end()) - fv.begin();
    return {pts[best], fv[best], evals, iter};
}

}  // namespace

void SimplexConfig::validate() const {
    if (!(x_tol > 0) || !(f_tol > 0) || max_iter <= 0 || restart_count < 0 ||
        !(step_fraction > 0) || !(step_absolute > 0)) {
        throw std::invalid_argument("SimplexConfig: tolerances, steps and max_iter must be positive");
    }
}

SimplexResult nelder_mead(const Objective& objective, const VectorXd& x0,
                          const SimplexConfig& config) {
    config.validate();
    if (x0.size() == 0) {
        throw std::invalid_argument("nelder_mead: empty starting point");
    }
    const double f0 = objective(x0);
    if (!std::isfinite(f0)) {
        throw std::invalid_argument("nelder_mead: objective is not finite at the starting point");
    }

    SimplexResult result{x0, f0, 1, 0};
    for (int run = 0; run <= config.restart_count; ++run) {
        SimplexRun r = run_simplex(objective, result.x, result.f, config);
        result.evaluations += r.evaluations;
        result.iterations += r.iterations;
        if (r.f <= result.f) {
            result.x = std::move(r.x);
            result.f = r.f;
        }
    }
    return result;
}

double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
    if (!(hi >= lo)) {
        throw std::invalid_argument("golden_section: empty interval");
    }
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

VectorXd smoothing_spline(const VectorXd& xs, const VectorXd& ys, double p) {
    const Eigen::Index m = xs.size();
    if (ys.size() != m) {
        throw std::invalid_argument("smoothing_spline: xs and ys differ in length");
    }
    if (m < 4) {
        throw std::invalid_argument("smoothing_spline: need at least 4 points");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("smoothing_spline: p must lie in [0, 1]");
    }
    for (Eigen::Index i = 1; i < m; ++i) {
        if (!(xs[i] > xs[i - 1])) {
            throw std::invalid_argument("smoothing_spline: xs must be strictly increasing");
        }
    }

    if (p == 1.0) {
        return ys;
    }
    if (p == 0.0) {
        const double xbar = xs.mean();
        const double ybar = ys.mean();
        const VectorXd dx = xs.array() - xbar;
        const double slope = dx.dot(ys.array().matrix() - VectorXd::Constant(m, ybar)) / dx.squaredNorm();
        return (ybar + slope * dx.array()).matrix();
    }

    // Reinsch form: g = y - lambda Q gamma with (R + lambda Q^T Q) gamma = Q^T y.
    const VectorXd h = xs.tail(m - 1) - xs.head(m - 1);
    MatrixXd Q = MatrixXd::Zero(m, m - 2);
    MatrixXd R = MatrixXd::Zero(m - 2, m - 2);
    for (Eigen::Index j = 0; j < m - 2; ++j) {
        Q(j, j) = 1.0 / h[j];
        Q(j + 1, j) = -1.0 / h[j] - 1.0 / h[j + 1];
        Q(j + 2, j) = 1.0 / h[j + 1];
        R(j, j) = (h[j] + h[j + 1]) / 3.0;
        if (j + 1 < m - 2) {
            R(j, j + 1) = h[j + 1] / 6.0;
            R(j + 1, j) = h[j + 1] / 6.0;
        }
    }
    const double lambda = (1.0 - p) / p;
    const MatrixXd system = R + lambda * Q.transpose() * Q;
    const VectorXd gamma = system.ldlt().solve(Q.transpose() * ys);
    return ys - lambda * Q * gamma;
}

double CholeskyFactor::log_det() const {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

CholeskyFactor robust_cholesky(const MatrixXd& cov) {
    if (cov.rows() != cov.cols() || cov.rows() == 0) {
        throw std::invalid_argument("robust_cholesky: matrix must be square and nonempty");
    }
    CholeskyFactor f;
    f.llt.compute(cov);
    if (f.llt.info() == Eigen::Success && f.llt.matrixLLT().diagonal().minCoeff() > 0) {
        return f;
    }
    const double base = 1e-8 * std::abs(cov.diagonal().mean());
    double jitter = base > 0 ? base : 1e-8;
    for (int attempt = 0; attempt < 3; ++attempt, jitter *= 10.0) {
        MatrixXd shifted = cov;
        shifted.diagonal().array() += jitter;
        f.llt.compute(shifted);
        if (f.llt.info() == Eigen::Success && f.llt.matrixLLT().diagonal().minCoeff() > 0) {
            f.jitter = jitter;
            return f;
        }
    }
    throw NotPositiveDefinite("covariance matrix is not positive definite after jitter");
}

LogLikelihood gaussian_loglik_factor(const MatrixXd& cov, const MatrixXd& factor, long replicates) {
    if (cov.rows() != cov.cols() || factor.rows() != cov.rows()) {
        throw std::invalid_argument("gaussian_loglik: dimension mismatch");
    }
    const CholeskyFactor chol = robust_cholesky(cov);
    const MatrixXd whitened = chol.llt.matrixL().solve(factor);
    const double n = static_cast<double>(cov.rows());
    const double m = static_cast<double>(replicates);
    const double value = -0.5 * n * m * std::log(2.0 * std::numbers::pi) - 0.5 * m * chol.log_det() -
                         0.5 * whitened.squaredNorm();
    return {value, chol.jitter};
}

LogLikelihood gaussian_loglik(const MatrixXd& cov, const MatrixXd& data) {
    return gaussian_loglik_factor(cov, data, data.cols());
}

MatrixXd scatter_factor(const MatrixXd& data) {
    if (data.cols() <= data.rows()) {
        return data;
    }
    // data^T = Q R  =>  data data^T = R^T R.
    Eigen::HouseholderQR<MatrixXd> qr(data.transpose());
    const Eigen::Index n = data.rows();
    MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    return r.transpose();
}

MatrixXd sample_covariance(const MatrixXd& data) {
    if (data.cols() == 0) {
        throw std::invalid_argument("sample_covariance: no replicates");
    }
    MatrixXd s = data * data.transpose() / static_cast<double>(data.cols());
    return 0.5 * (s + s.transpose());
}

}  // namespace stfmri
