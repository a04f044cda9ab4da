#include "stfmri/glasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "stfmri/parallel.hpp"
#include "stfmri/rng.hpp"

namespace stfmri {

MatrixXd roi_means(const MatrixXd& e, const Parcellation& parcellation) {
    if (e.rows() != parcellation.voxel_count()) {
        throw std::invalid_argument("roi_means: residual rows differ from the voxel count");
    }
    const int R = parcellation.roi_count();
    MatrixXd out(R, e.cols());
    for (int r = 1; r <= R; ++r) {
        const auto& members = parcellation.members(r);
        if (members.empty()) {
            throw std::invalid_argument("roi_means: ROI " + std::to_string(r) + " is empty");
        }
        VectorXd acc = VectorXd::Zero(e.cols());
        for (int v : members) {
            acc += e.row(v).transpose();
        }
        out.row(r - 1) = acc.transpose() / static_cast<double>(members.size());
    }
    return out;
}

namespace {

double soft(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

}  // namespace

GlassoResult glasso(const MatrixXd& A_in, double lambda, const GlassoOptions& options) {
    const Eigen::Index R = A_in.rows();
    if (R == 0 || A_in.cols() != R) {
        throw std::invalid_argument("glasso: A must be square and nonempty");
    }
    if (!(lambda >= 0.0)) {
        throw std::invalid_argument("glasso: lambda must be nonnegative");
    }
    if (!A_in.allFinite() || (A_in - A_in.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + A_in.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("glasso: A must be finite and symmetric");
    }
    MatrixXd A = 0.5 * (A_in + A_in.transpose());
    const double scale = std::max(A.diagonal().mean(), std::numeric_limits<double>::min());
    if (A.diagonal().minCoeff() <= 0.0) {
        A.diagonal().array() += 1e-8 * scale;
    }

    GlassoResult res;
    res.lambda = lambda;
    if (R == 1) {
        res.W = A.inverse();
        res.objective = glasso_objective(res.W, A, lambda);
        return res;
    }

    MatrixXd S = A;  // covariance estimate
    MatrixXd B = MatrixXd::Zero(R - 1, R);  // lasso coefficients per column
    std::vector<Eigen::Index> others(R - 1);

    bool converged = false;
    int sweep = 0;
    for (; sweep < options.max_sweeps; ++sweep) {
        double change = 0.0;
        for (Eigen::Index j = 0; j < R; ++j) {
            for (Eigen::Index k = 0, c = 0; k < R; ++k) {
                if (k != j) others[c++] = k;
            }
            MatrixXd S11(R - 1, R - 1);
            VectorXd s12(R - 1);
            for (Eigen::Index a = 0; a < R - 1; ++a) {
                s12[a] = A(others[a], j);
                for (Eigen::Index b = 0; b < R - 1; ++b) {
                    S11(a, b) = S(others[a], others[b]);
                }
            }
            VectorXd beta = B.col(j);
            VectorXd grad = S11 * beta;  // S11 beta, maintained incrementally
            for (int inner = 0; inner < options.max_inner; ++inner) {
                double delta = 0.0;
                for (Eigen::Index k = 0; k < R - 1; ++k) {
                    const double partial = s12[k] - (grad[k] - S11(k, k) * beta[k]);
                    const double nb = soft(partial, lambda) / S11(k, k);
                    const double d = nb - beta[k];
                    if (d != 0.0) {
                        grad += d * S11.col(k);
                        beta[k] = nb;
                        delta = std::max(delta, std::abs(d) * S11(k, k));
                    }
                }
                if (delta < 1e-14 * scale) {
                    break;
                }
            }
            B.col(j) = beta;
            for (Eigen::Index a = 0; a < R - 1; ++a) {
                const double v = grad[a];
                change = std::max(change, std::abs(v - S(others[a], j)));
                S(others[a], j) = v;
                S(j, others[a]) = v;
            }
        }
        if (change < options.tol * scale) {
            converged = true;
            ++sweep;
            break;
        }
    }
    if (!converged) {
        throw GlassoNotConverged("glasso did not converge within " + std::to_string(options.max_sweeps) +
                                 " sweeps (lambda=" + std::to_string(lambda) + ")");
    }
    res.sweeps = sweep;

    MatrixXd W = MatrixXd::Zero(R, R);
    for (Eigen::Index j = 0; j < R; ++j) {
        double s12b = 0.0;
        for (Eigen::Index k = 0, c = 0; k < R; ++k) {
            if (k == j) continue;
            s12b += S(k, j) * B(c, j);
            ++c;
        }
        const double wjj = 1.0 / (S(j, j) - s12b);
        W(j, j) = wjj;
        for (Eigen::Index k = 0, c = 0; k < R; ++k) {
            if (k == j) continue;
            W(k, j) = -B(c, j) * wjj;
            ++c;
        }
    }
    for (Eigen::Index r = 0; r < R; ++r) {
        for (Eigen::Index s = r + 1; s < R; ++s) {
            double v = 0.5 * (W(r, s) + W(s, r));
            if (W(r, s) == 0.0 || W(s, r) == 0.0) {
                v = 0.0;
            }
            W(r, s) = v;
            W(s, r) = v;
            if (v != 0.0) {
                ++res.nnz_offdiag;
            }
        }
    }
    res.W = W;
    res.objective = glasso_objective(W, A, lambda);
    return res;
}

double glasso_objective(const MatrixXd& W, const MatrixXd& A, double lambda) {
    Eigen::LLT<MatrixXd> llt(W);
    if (llt.info() != Eigen::Success) {
        return -std::numeric_limits<double>::infinity();
    }
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double penalty = W.cwiseAbs().sum() - W.diagonal().cwiseAbs().sum();
    return logdet - (W.cwiseProduct(A)).sum() - lambda * penalty;
}

double kkt_residual(const MatrixXd& W, const MatrixXd& A, double lambda) {
    const MatrixXd S = W.inverse();
    const Eigen::Index R = W.rows();
    double worst = 0.0;
    for (Eigen::Index r = 0; r < R; ++r) {
        worst = std::max(worst, std::abs(S(r, r) - A(r, r)));
        for (Eigen::Index s = 0; s < R; ++s) {
            if (s == r) continue;
            const double g = S(r, s) - A(r, s);
            if (W(r, s) != 0.0) {
                worst = std::max(worst, std::abs(g - lambda * (W(r, s) > 0 ? 1.0 : -1.0)));
            } else {
                worst = std::max(worst, std::abs(g) - lambda);
            }
        }
    }
    return std::max(worst, 0.0);
}

std::vector<double> default_lambda_grid(const MatrixXd& A, int count, double ratio) {
    if (count < 1 || !(ratio > 0 && ratio < 1)) {
        throw std::invalid_argument("default_lambda_grid: need count >= 1 and ratio in (0, 1)");
    }
    double top = 0.0;
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
        for (Eigen::Index s = r + 1; s < A.cols(); ++s) {
            top = std::max(top, std::abs(A(r, s)));
        }
    }
    if (!(top > 0)) {
        top = 1.0;
    }
    std::vector<double> grid(count);
    for (int i = 0; i < count; ++i) {
        const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        grid[i] = top * std::pow(ratio, f);
    }
    return grid;
}

void CvConfig::validate() const {
    if (lambda_grid.empty()) {
        throw std::invalid_argument("CvConfig: empty lambda grid");
    }
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] >= 0) || (i > 0 && !(lambda_grid[i] < lambda_grid[i - 1]))) {
            throw std::invalid_argument("CvConfig: lambda grid must be nonnegative and strictly decreasing");
        }
    }
    if (!(train_fraction > 0 && train_fraction < 1)) {
        throw std::invalid_argument("CvConfig: train_fraction must lie in (0, 1)");
    }
}

CvResult cv_lambda(const MatrixXd& ebar, const CvConfig& config) {
    config.validate();
    const int m = static_cast<int>(ebar.cols());
    const int n_test = std::max(1, static_cast<int>(std::lround((1.0 - config.train_fraction) * m)));
    if (m - n_test < 2) {
        throw std::invalid_argument("cv_lambda: too few time points for a train/test split");
    }
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng = make_stream(config.seed, "cv-split", 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> test(perm.begin(), perm.begin() + n_test);
    std::vector<int> train(perm.begin() + n_test, perm.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());

    MatrixXd etrain(ebar.rows(), train.size());
    for (std::size_t c = 0; c < train.size(); ++c) {
        etrain.col(static_cast<Eigen::Index>(c)) = ebar.col(train[c]);
    }
    MatrixXd etest(ebar.rows(), test.size());
    for (std::size_t c = 0; c < test.size(); ++c) {
        etest.col(static_cast<Eigen::Index>(c)) = ebar.col(test[c]);
    }
    const MatrixXd A = sample_covariance(etrain);

    CvResult res;
    res.lambdas = config.lambda_grid;
    res.sse.assign(res.lambdas.size(), std::numeric_limits<double>::infinity());
    res.nnz.assign(res.lambdas.size(), -1);
    res.test_columns = test;
    parallel_for(res.lambdas.size(), config.threads, [&](std::size_t i) {
        try {
            const GlassoResult g = glasso(A, res.lambdas[i]);
            // e_r - pred_r = (W e)_r / W_rr.
            const MatrixXd resid = (g.W.diagonal().cwiseInverse()).asDiagonal() * (g.W * etest);
            res.sse[i] = resid.squaredNorm();
            res.nnz[i] = g.nnz_offdiag;
        } catch (const std::exception&) {
            res.sse[i] = std::numeric_limits<double>::infinity();
        }
    });

    int best = -1;
    for (std::size_t i = 0; i < res.sse.size(); ++i) {
        if (!std::isfinite(res.sse[i])) continue;
        if (best < 0) {
            best = static_cast<int>(i);
            continue;
        }
        const double b = res.sse[best];
        const bool tie = std::abs(res.sse[i] - b) <= 1e-12 * (1.0 + std::abs(b));
        if (res.sse[i] < b && !tie) {
            best = static_cast<int>(i);
        } else if (tie && res.lambdas[i] > res.lambdas[best]) {
            best = static_cast<int>(i);
        }
    }
    if (best < 0) {
        throw std::runtime_error("cv_lambda: glasso failed for every lambda in the grid");
    }
    res.lambda_hat = res.lambdas[best];
    return res;
}

std::vector<Edge> edges(const MatrixXd& W, double threshold) {
    if (!(threshold >= 0)) {
        throw std::invalid_argument("edges: threshold must be nonnegative");
    }
    std::vector<Edge> out;
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
        for (Eigen::Index s = r + 1; s < W.cols(); ++s) {
            if (std::abs(W(r, s)) > threshold) {
                out.push_back({static_cast<int>(r) + 1, static_cast<int>(s) + 1, W(r, s)});
            }
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Edge& a, const Edge& b) { return std::abs(a.weight) > std::abs(b.weight); });
    return out;
}

}  // namespace stfmri
