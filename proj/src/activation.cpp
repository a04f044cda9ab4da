#include "stfmri/activation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

#include "stfmri/design.hpp"
#include "stfmri/numerics.hpp"
#include "stfmri/parallel.hpp"

namespace stfmri {

void ActivationConfig::validate() const {
    if (harmonics < 1) {
        throw std::invalid_argument("ActivationConfig: at least one harmonic is required");
    }
    if (!(q > 0 && q < 1)) {
        throw std::invalid_argument("ActivationConfig: q must lie in (0, 1)");
    }
}

FourierBasis fourier_basis(const std::vector<GridPoint>& coords, int harmonics) {
    if (harmonics < 1) {
        throw std::invalid_argument("fourier_basis: at least one harmonic is required");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(coords.size());
    const char axis_name[3] = {'x', 'y', 'z'};
    std::vector<VectorXd> cols;
    std::vector<std::string> labels;
    for (int a = 0; a < 3; ++a) {
        std::set<int> distinct;
        for (const GridPoint& c : coords) {
            distinct.insert(c[a]);
        }
        if (distinct.size() < 2) {
            continue;
        }
        const double k = static_cast<double>(distinct.size());
        const double lo = *distinct.begin();
        const double range = *distinct.rbegin() - lo;
        const double d = range * k / (k - 1.0);
        for (int h = 1; h <= harmonics; ++h) {
            VectorXd cs(n);
            VectorXd sn(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double u = (coords[i][a] - lo) / d;
                cs[i] = std::cos(2.0 * std::numbers::pi * h * u);
                sn[i] = std::sin(2.0 * std::numbers::pi * h * u);
            }
            cols.push_back(cs);
            labels.push_back(std::string("cos_") + axis_name[a] + std::to_string(h));
            cols.push_back(sn);
            labels.push_back(std::string("sin_") + axis_name[a] + std::to_string(h));
        }
    }
    FourierBasis out;
    std::vector<VectorXd> kept;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c].cwiseAbs().maxCoeff() < 1e-12) {
            continue;
        }
        bool duplicate = false;
        for (const VectorXd& k : kept) {
            if ((k - cols[c]).cwiseAbs().maxCoeff() < 1e-12) {
                duplicate = true;
                break;
            }
        }
        if (duplicate) {
            continue;
        }
        kept.push_back(cols[c]);
        out.labels.push_back(labels[c]);
    }
    out.B.resize(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) {
        out.B.col(static_cast<Eigen::Index>(c)) = kept[c];
    }
    return out;
}

RoiActivation fit_activation(const MatrixXd& roi_series, const MatrixXd& X, std::span<const VoxelFit> fits,
                             const MatrixXd& spatial_corr, const MatrixXd& basis, std::vector<std::string> labels) {
    const Eigen::Index n = roi_series.rows();
    const Eigen::Index T = roi_series.cols();
    const Eigen::Index p = basis.cols();
    const Eigen::Index q = p + 1;
    if (static_cast<Eigen::Index>(fits.size()) != n || basis.rows() != n || spatial_corr.rows() != n ||
        spatial_corr.cols() != n || X.rows() != T || X.cols() != 6) {
        throw std::invalid_argument("fit_activation: inconsistent ROI inputs");
    }

    // Temporal whitening voxel by voxel.
    MatrixXd z(n, T);                        // whitened response
    std::vector<MatrixXd> d(n);              // whitened T x q design per voxel
    const VectorXd x1 = X.col(design_col::task_bold);
    const VectorXd x2 = X.col(design_col::rest_bold);
    for (Eigen::Index v = 0; v < n; ++v) {
        const VoxelFit& f = fits[v];
        VectorXd fixed = X.leftCols(4) * f.beta.head(4);
        MatrixXd dv(T, q);
        for (Eigen::Index j = 0; j < p; ++j) {
            dv.col(j) = basis(v, j) * x1;
        }
        dv.col(p) = x2;
        z.row(v) = ar2_whiten(f.ar, roi_series.row(v).transpose() - fixed).transpose();
        d[v] = ar2_whiten(f.ar, dv);
    }

    // Spatial whitening scan by scan: L^-1 with L L^T = spatial_corr.
    const CholeskyFactor chol = robust_cholesky(spatial_corr);
    const auto L = chol.llt.matrixL();
    const MatrixXd zw = L.solve(z);  // n x T
    MatrixXd gram = MatrixXd::Zero(q, q);
    VectorXd rhs = VectorXd::Zero(q);
    MatrixXd slab(n, q);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index v = 0; v < n; ++v) {
            slab.row(v) = d[v].row(t);
        }
        const MatrixXd sw = L.solve(slab);
        gram.noalias() += sw.transpose() * sw;
        rhs.noalias() += sw.transpose() * zw.col(t);
    }
    Eigen::LDLT<MatrixXd> ldlt(gram);
    Eigen::FullPivLU<MatrixXd> lu(gram);
    if (lu.rank() < q || ldlt.info() != Eigen::Success) {
        throw std::runtime_error("fit_activation: stacked activation design is rank deficient");
    }
    RoiActivation out;
    out.theta = ldlt.solve(rhs);
    out.cov = ldlt.solve(MatrixXd::Identity(q, q));
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    if (labels.empty()) {
        for (Eigen::Index j = 0; j < p; ++j) {
            labels.push_back("b" + std::to_string(j + 1));
        }
    }
    labels.push_back("rest");
    out.labels = std::move(labels);
    return out;
}

double normal_two_sided_p(double z) {
    return std::clamp(std::erfc(std::abs(z) / std::numbers::sqrt2), 0.0, 1.0);
}

std::vector<VoxelTest> voxel_tests(const RoiActivation& fit, const MatrixXd& basis) {
    const Eigen::Index p = basis.cols();
    if (fit.theta.size() != p + 1) {
        throw std::invalid_argument("voxel_tests: basis does not match the fitted coefficients");
    }
    std::vector<VoxelTest> out(basis.rows());
    VectorXd c(p + 1);
    for (Eigen::Index v = 0; v < basis.rows(); ++v) {
        c.head(p) = basis.row(v).transpose();
        c[p] = -1.0;
        const double var = c.dot(fit.cov * c);
        if (!(var > 0)) {
            throw std::runtime_error("voxel_tests: nonpositive contrast variance at ROI voxel " + std::to_string(v + 1));
        }
        VoxelTest& r = out[v];
        r.contrast = c.dot(fit.theta);
        r.se = std::sqrt(var);
        r.z = r.contrast / r.se;
        r.p = normal_two_sided_p(r.z);
    }
    return out;
}

std::vector<bool> bh_fdr(std::span<const double> pvalues, double q) {
    const std::size_t m = pvalues.size();
    std::vector<bool> reject(m, false);
    if (m == 0) {
        return reject;
    }
    for (double p : pvalues) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("bh_fdr: p-values must lie in [0, 1]");
        }
    }
    std::vector<double> sorted(pvalues.begin(), pvalues.end());
    std::sort(sorted.begin(), sorted.end());
    double cutoff = -1.0;
    for (std::size_t k = m; k >= 1; --k) {
        if (sorted[k - 1] <= q * static_cast<double>(k) / static_cast<double>(m)) {
            cutoff = sorted[k - 1];
            break;
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        reject[i] = pvalues[i] <= cutoff;
    }
    return reject;
}

ActivationFit test_activation(const FmriDataset& dataset, const MatrixXd& X, std::span<const VoxelFit> fits,
                              const std::vector<MatrixXd>& spatial_corr, const ActivationConfig& config,
                              int threads) {
    config.validate();
    const Parcellation& parc = dataset.parcellation;
    const int R = parc.roi_count();
    if (static_cast<int>(spatial_corr.size()) != R || static_cast<int>(fits.size()) != parc.voxel_count()) {
        throw std::invalid_argument("test_activation: missing stage-1 or stage-2 results");
    }
    ActivationFit out;
    out.rois.resize(R);
    out.voxels.resize(parc.voxel_count());
    parallel_for(static_cast<std::size_t>(R), threads, [&](std::size_t ri) {
        const int roi = static_cast<int>(ri) + 1;
        const auto& members = parc.members(roi);
        try {
            MatrixXd series(members.size(), dataset.scans());
            std::vector<VoxelFit> roi_fits;
            for (std::size_t k = 0; k < members.size(); ++k) {
                series.row(static_cast<Eigen::Index>(k)) = dataset.series.row(members[k]);
                roi_fits.push_back(fits[members[k]]);
            }
            const FourierBasis basis = fourier_basis(parc.coordinates(roi), config.harmonics);
            out.rois[ri] = fit_activation(series, X, roi_fits, spatial_corr[ri], basis.B, basis.labels);
            const auto tests = voxel_tests(out.rois[ri], basis.B);
            for (std::size_t k = 0; k < members.size(); ++k) {
                out.voxels[members[k]] = tests[k];
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("ROI " + std::to_string(roi) + ": " + e.what());
        }
    });
    std::vector<double> p(out.voxels.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = out.voxels[i].p;
    }
    out.reject = bh_fdr(p, config.q);
    return out;
}

}  // namespace stfmri
