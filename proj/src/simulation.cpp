#include "stfmri/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "stfmri/activation.hpp"
#include "stfmri/design.hpp"
#include "stfmri/parallel.hpp"
#include "stfmri/rng.hpp"

namespace stfmri {

MatrixXd psd_factor(const MatrixXd& cov) {
    if (cov.rows() != cov.cols() || cov.rows() == 0) {
        throw std::invalid_argument("psd_factor: matrix must be square and nonempty");
    }
    const MatrixXd sym = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) {
        throw NotPositiveDefinite("psd_factor: eigen-decomposition failed");
    }
    const VectorXd& lam = eig.eigenvalues();
    const double top = std::max(lam.maxCoeff(), 0.0);
    if (lam.minCoeff() < -1e-8 * std::max(top, 1.0)) {
        throw NotPositiveDefinite("truth covariance is not positive semidefinite (min eigenvalue " +
                                  std::to_string(lam.minCoeff()) + ")");
    }
    return eig.eigenvectors() * lam.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

MatrixXd sample_mvn(const MatrixXd& factor, Eigen::Index columns, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    MatrixXd z(factor.cols(), columns);
    for (Eigen::Index c = 0; c < columns; ++c) {
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            z(r, c) = normal(rng);
        }
    }
    return factor * z;
}

// -------------------------------------------------------------------------
// Phantoms
// -------------------------------------------------------------------------

namespace {

std::vector<GridPoint> box_coords(const RoiBox& b) {
    std::vector<GridPoint> out;
    for (int z = 0; z < b.size[2]; ++z) {
        for (int y = 0; y < b.size[1]; ++y) {
            for (int x = 0; x < b.size[0]; ++x) {
                out.push_back({b.origin[0] + x, b.origin[1] + y, b.origin[2] + z});
            }
        }
    }
    return out;
}

VectorXd default_beta() {
    VectorXd b(6);
    b << 100.0, 1.0, -0.5, 0.8, 2.0, 2.0;
    return b;
}

std::vector<AnisoParams> expand_params(const RoiTruth& truth, int L, int roi) {
    if (static_cast<int>(truth.params.size()) == L) {
        return truth.params;
    }
    if (truth.params.size() == 1) {
        return std::vector<AnisoParams>(L, truth.params.front());
    }
    throw std::invalid_argument("phantom ROI " + std::to_string(roi) + ": partition has " + std::to_string(L) +
                                " subregions but " + std::to_string(truth.params.size()) + " parameter sets");
}

}  // namespace

void PhantomSpec::validate() const {
    if (rois.empty()) {
        throw std::invalid_argument("PhantomSpec: no ROIs");
    }
    if (truth.size() != rois.size()) {
        throw std::invalid_argument("PhantomSpec: need one truth record per ROI");
    }
    for (std::size_t r = 0; r < rois.size(); ++r) {
        const auto& s = rois[r].size;
        if (s[0] < 1 || s[1] < 1 || s[2] < 1) {
            throw std::invalid_argument("PhantomSpec: ROI box with empty extent");
        }
        if (s[0] * s[1] * s[2] < kMinSubregionVoxels) {
            throw std::invalid_argument("PhantomSpec: ROI " + std::to_string(r + 1) + " has fewer than 36 voxels");
        }
        if (!(truth[r].omega >= 0 && truth[r].omega <= 1)) {
            throw std::invalid_argument("PhantomSpec: omega outside [0, 1]");
        }
        for (const auto& p : truth[r].params) {
            p.validate();
        }
    }
    if (sigma2.size() != 0 && (sigma2.rows() != static_cast<Eigen::Index>(rois.size()) || sigma2.cols() != sigma2.rows())) {
        throw std::invalid_argument("PhantomSpec: sigma2 must be R x R");
    }
    if (!task_effect.empty() && task_effect.size() != rois.size()) {
        throw std::invalid_argument("PhantomSpec: task_effect needs one entry per ROI");
    }
    if (beta.size() != 0 && beta.size() != 6) {
        throw std::invalid_argument("PhantomSpec: beta must have 6 entries");
    }
    ar.require_stationary();
    if (burn_in < 0) {
        throw std::invalid_argument("PhantomSpec: negative burn-in");
    }
    std::set<GridPoint> seen;
    for (const RoiBox& box : rois) {
        for (const GridPoint& c : box_coords(box)) {
            if (!seen.insert(c).second) {
                throw std::invalid_argument("PhantomSpec: ROI boxes overlap");
            }
        }
    }
}

Parcellation PhantomSpec::parcellation() const {
    std::vector<Voxel> voxels;
    int id = 1;
    for (std::size_t r = 0; r < rois.size(); ++r) {
        for (const GridPoint& c : box_coords(rois[r])) {
            voxels.push_back({id++, c, static_cast<int>(r) + 1});
        }
    }
    return Parcellation(std::move(voxels));
}

BlockDesign PhantomSpec::design() const {
    return BlockDesign::alternating(tr_seconds, 3, scans_per_session, block_length);
}

Phantom gen_phantom(const PhantomSpec& spec, std::uint64_t seed) {
    spec.validate();
    Phantom ph;
    FmriDataset& ds = ph.dataset;
    ds.parcellation = spec.parcellation();
    ds.design = spec.design();
    const MatrixXd X = design_matrix(ds.design, canonical_hrf(ds.design.tr_seconds()));
    const int R = ds.parcellation.roi_count();
    const int V = ds.parcellation.voxel_count();
    const int T = ds.design.scans();

    std::vector<MatrixXd> factors(R);
    for (int r = 1; r <= R; ++r) {
        const auto coords = ds.parcellation.coordinates(r);
        const RoiTruth& truth = spec.truth[r - 1];
        SubregionPartition part = partition_roi(coords, truth.partition);
        const auto params = expand_params(truth, part.count(), r);
        MatrixXd s1 = nonstat_cov(coords, part, params);
        factors[r - 1] = psd_factor(s1);
        ph.truth.error_cov.push_back(roi_error_cov(s1, truth.omega));
        ph.truth.sigma1.push_back(std::move(s1));
        ph.truth.partitions.push_back(std::move(part));
    }
    MatrixXd sigma2_factor;
    if (spec.regional == RegionalMode::RoiCommon) {
        sigma2_factor = psd_factor(spec.sigma2.size() ? spec.sigma2 : MatrixXd::Identity(R, R));
    }

    std::mt19937_64 rng = make_stream(seed, "phantom", 0);
    std::normal_distribution<double> normal;
    const int total = T + spec.burn_in;
    MatrixXd eps = MatrixXd::Zero(V, total);
    const double sigma = std::sqrt(spec.ar.sigma2);
    for (int t = 0; t < total; ++t) {
        VectorXd common;
        if (spec.regional == RegionalMode::RoiCommon) {
            VectorXd z(R);
            for (int r = 0; r < R; ++r) z[r] = normal(rng);
            common = sigma2_factor * z;
        }
        VectorXd eta(V);
        for (int r = 1; r <= R; ++r) {
            const auto& members = ds.parcellation.members(r);
            const double omega = spec.truth[r - 1].omega;
            VectorXd z(factors[r - 1].cols());
            for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
            const VectorXd h1 = factors[r - 1] * z;
            for (std::size_t k = 0; k < members.size(); ++k) {
                const double h2 = spec.regional == RegionalMode::RoiCommon ? common[r - 1] : normal(rng);
                eta[members[k]] = omega * h1[static_cast<Eigen::Index>(k)] + (1.0 - omega) * h2;
            }
        }
        eps.col(t) = sigma * eta;
        if (t >= 1) eps.col(t) += spec.ar.phi1 * eps.col(t - 1);
        if (t >= 2) eps.col(t) += spec.ar.phi2 * eps.col(t - 2);
    }

    const VectorXd base = spec.beta.size() ? spec.beta : default_beta();
    ph.truth.beta.resize(V, 6);
    ds.series.resize(V, T);
    for (int v = 0; v < V; ++v) {
        VectorXd b = base;
        if (!spec.task_effect.empty()) {
            b[design_col::task_bold] += spec.task_effect[ds.parcellation.voxel(v).roi - 1];
        }
        ph.truth.beta.row(v) = b.transpose();
        ds.series.row(v) = (X * b).transpose() + eps.row(v).tail(T);
    }
    ds.validate();
    return ph;
}

std::vector<MatrixXd> empirical_truth(const FmriDataset& dataset) {
    dataset.validate();
    const MatrixXd X = design_matrix(dataset.design, canonical_hrf(dataset.design.tr_seconds()));
    const Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
    const MatrixXd beta = qr.solve(dataset.series.transpose());  // 6 x V
    const MatrixXd resid = dataset.series - (X * beta).transpose();
    std::vector<MatrixXd> out;
    for (int r = 1; r <= dataset.parcellation.roi_count(); ++r) {
        const auto& members = dataset.parcellation.members(r);
        MatrixXd rr(members.size(), resid.cols());
        for (std::size_t k = 0; k < members.size(); ++k) {
            rr.row(static_cast<Eigen::Index>(k)) = resid.row(members[k]);
        }
        out.push_back(sample_covariance(rr));
    }
    return out;
}

RoiTruth two_regime_truth(double omega) {
    RoiTruth t;
    t.partition = {2, 1, 1};
    AnisoParams a;
    a.nu = 1.0;
    a.lengths = {5.0, 1.2, 1.2};
    AnisoParams b;
    b.nu = 1.0;
    b.lengths = {1.2, 5.0, 1.2};
    t.params = {a, b};
    t.omega = omega;
    return t;
}

PhantomSpec smoke_phantom_spec() {
    PhantomSpec s;
    s.rois = {RoiBox{{0, 0, 0}, {8, 6, 2}}, RoiBox{{0, 0, 2}, {8, 6, 2}}};
    RoiTruth second;
    second.params.front().lengths = {2.0, 2.0, 2.0};
    second.omega = 0.85;
    s.truth = {two_regime_truth(), second};
    s.scans_per_session = 16;
    s.block_length = 4;
    return s;
}

// -------------------------------------------------------------------------
// Studies
// -------------------------------------------------------------------------

std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::Glm: return "glm";
        case Estimator::Iso: return "iso";
        case Estimator::Aniso: return "aniso";
        case Estimator::LAniso: return "l-aniso";
    }
    return "?";
}

double StudyReport::mean(Estimator e) const {
    for (const StudyRow& r : rows) {
        if (r.roi == 0 && r.estimator == e) {
            return r.value;
        }
    }
    throw std::out_of_range("StudyReport: no mean row for " + to_string(e));
}

std::vector<StudyRoi> study_rois(const PhantomSpec& spec) {
    spec.validate();
    const Parcellation parc = spec.parcellation();
    std::vector<StudyRoi> out;
    for (int r = 1; r <= parc.roi_count(); ++r) {
        StudyRoi s;
        s.coords = parc.coordinates(r);
        const RoiTruth& truth = spec.truth[r - 1];
        const SubregionPartition part = partition_roi(s.coords, truth.partition);
        const MatrixXd s1 = nonstat_cov(s.coords, part, expand_params(truth, part.count(), r));
        s.truth_cov = to_correlation(roi_error_cov(s1, truth.omega));
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

struct PreparedRoi {
    std::vector<GridPoint> coords;
    MatrixXd factor;
    SubregionPartition partition;
    RoiCovModel iso;
    RoiCovModel aniso;
    RoiCovModel laniso;
    std::vector<int> held_out;  // kriging study only, ascending
    std::vector<int> observed;
};

MatrixXd study_design(const StudyConfig& c) {
    const BlockDesign d = BlockDesign::alternating(c.tr_seconds, 3, c.scans_per_session, c.block_length);
    return design_matrix(d, canonical_hrf(c.tr_seconds));
}

struct Standardized {
    MatrixXd z;   // n x T standardized OLS residuals
    VectorXd sd;  // residual SD per voxel
};

Standardized standardize(const MatrixXd& Y, const MatrixXd& X) {
    const Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
    const MatrixXd beta = qr.solve(Y.transpose());
    MatrixXd resid = Y - (X * beta).transpose();
    const double dof = static_cast<double>(X.rows() - X.cols());
    Standardized s;
    s.sd = (resid.rowwise().squaredNorm() / dof).cwiseSqrt();
    if (!(s.sd.minCoeff() > 0)) {
        throw std::runtime_error("voxel with zero residual variance");
    }
    s.z = s.sd.cwiseInverse().asDiagonal() * resid;
    return s;
}

RoiFitOptions warm(CovFamily family, const RoiCovModel* start, const SimplexConfig& simplex) {
    RoiFitOptions o;
    o.family = family;
    o.simplex = simplex;
    if (start) {
        o.start_params = start->params;
        o.start_omega = start->omega;
    }
    return o;
}

std::vector<int> subset_indices(int n, int cap, std::uint64_t seed, int roi) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (n > cap) {
        std::mt19937_64 rng = make_stream(seed, "study-subsample", static_cast<std::uint64_t>(roi));
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(cap);
        std::sort(idx.begin(), idx.end());
    }
    return idx;
}

PreparedRoi prepare_roi(const StudyRoi& roi, int index, const StudyConfig& cfg, const MatrixXd& X,
                        const char* stage, bool kriging) {
    PreparedRoi p;
    const std::vector<int> keep = subset_indices(static_cast<int>(roi.coords.size()), cfg.subsample_cap, cfg.seed, index);
    MatrixXd cov(keep.size(), keep.size());
    for (std::size_t a = 0; a < keep.size(); ++a) {
        p.coords.push_back(roi.coords[keep[a]]);
        for (std::size_t b = 0; b < keep.size(); ++b) {
            cov(a, b) = roi.truth_cov(keep[a], keep[b]);
        }
    }
    p.factor = psd_factor(cov);
    const int n = static_cast<int>(p.coords.size());

    if (kriging) {
        if (n <= cfg.n_removed) {
            throw std::invalid_argument("kriging study: ROI " + std::to_string(index + 1) + " has no more than " +
                                        std::to_string(cfg.n_removed) + " voxels");
        }
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng = make_stream(cfg.seed, "krige-holdout", static_cast<std::uint64_t>(index));
        std::shuffle(order.begin(), order.end(), rng);
        p.held_out.assign(order.begin(), order.begin() + cfg.n_removed);
        p.observed.assign(order.begin() + cfg.n_removed, order.end());
        std::sort(p.held_out.begin(), p.held_out.end());
        std::sort(p.observed.begin(), p.observed.end());
    }

    // Pilot data set: used for the l-aniso partition and as warm starts.
    std::mt19937_64 rng = make_stream(cfg.seed, stage, static_cast<std::uint64_t>(index));
    const MatrixXd E = sample_mvn(p.factor, X.rows(), rng);
    const Standardized st = standardize(E, X);
    std::vector<GridPoint> fit_coords = p.coords;
    MatrixXd fit_z = st.z;
    if (kriging) {
        fit_coords.clear();
        fit_z.resize(static_cast<Eigen::Index>(p.observed.size()), st.z.cols());
        for (std::size_t k = 0; k < p.observed.size(); ++k) {
            fit_coords.push_back(p.coords[p.observed[k]]);
            fit_z.row(static_cast<Eigen::Index>(k)) = st.z.row(p.observed[k]);
        }
    }
    const SubregionPartition single = SubregionPartition::single(fit_coords);
    p.iso = fit_roi_cov(fit_z, fit_coords, single, warm(CovFamily::Isotropic, nullptr, cfg.simplex));
    p.aniso = fit_roi_cov(fit_z, fit_coords, single, warm(CovFamily::AnisotropicFree, &p.iso, cfg.simplex));

    if (roi.partition) {
        if (roi.partition->assignment.size() != roi.coords.size()) {
            throw std::invalid_argument("study ROI partition does not cover the ROI");
        }
        std::vector<int> assignment;
        for (int k : keep) assignment.push_back(roi.partition->assignment[k]);
        p.partition = SubregionPartition{assignment, roi.partition->centroids};
    } else {
        // Select on the full (subsampled) ROI so the partition covers every voxel.
        SearchOptions so = cfg.search;
        so.refit_free_angles = false;
        so.simplex = cfg.simplex;
        const SelectionResult sel =
            bic_search(st.z, p.coords, stream_seed(cfg.seed, "study-search", static_cast<std::uint64_t>(index)), so);
        p.partition = sel.partition;
    }
    SubregionPartition fit_part = p.partition;
    if (kriging) {
        fit_part.assignment.clear();
        for (int k : p.observed) fit_part.assignment.push_back(p.partition.assignment[k]);
    }
    RoiFitOptions lo = warm(CovFamily::AnisotropicFree, &p.aniso, cfg.simplex);
    p.laniso = fit_roi_cov(fit_z, fit_coords, fit_part, lo);
    return p;
}

const RoiCovModel* start_for(const PreparedRoi& p, Estimator e) {
    switch (e) {
        case Estimator::Iso: return &p.iso;
        case Estimator::Aniso: return &p.aniso;
        case Estimator::LAniso: return &p.laniso;
        default: return nullptr;
    }
}

CovFamily family_for(Estimator e) {
    return e == Estimator::Iso ? CovFamily::Isotropic : CovFamily::AnisotropicFree;
}

/// Fitted model of one estimator on standardized residuals `z` at `coords`.
RoiCovModel fit_estimator(Estimator e, const PreparedRoi& p, const MatrixXd& z, const std::vector<GridPoint>& coords,
                          const SubregionPartition& partition, const StudyConfig& cfg) {
    const SubregionPartition single{std::vector<int>(coords.size(), 1), {p.aniso.partition.centroids.front()}};
    const SubregionPartition& part = e == Estimator::LAniso ? partition : single;
    return fit_roi_cov(z, coords, part, warm(family_for(e), start_for(p, e), cfg.simplex));
}

/// z statistic of (task - rest) under the common-mean GLS with covariance D C D.
double wald_z(const MatrixXd& Y, const MatrixXd& X, const VectorXd& sd, const MatrixXd& corr) {
    const MatrixXd cov = sd.asDiagonal() * corr * sd.asDiagonal();
    const CholeskyFactor chol = robust_cholesky(cov);
    const VectorXd w = chol.llt.solve(VectorXd::Ones(Y.rows()));
    const double total = w.sum();
    const VectorXd ybar = Y.transpose() * w / total;  // T
    const MatrixXd xtx_inv = (X.transpose() * X).inverse();
    const VectorXd gamma = xtx_inv * X.transpose() * ybar;
    VectorXd c = VectorXd::Zero(X.cols());
    c[design_col::task_bold] = 1.0;
    c[design_col::rest_bold] = -1.0;
    const double var = c.dot(xtx_inv * c) / total;
    return c.dot(gamma) / std::sqrt(var);
}

struct FpOutcome {
    // [estimator][effect] : 1 reject, 0 accept, -1 failure
    std::vector<std::vector<int>> reject;
};

/// Shared engine of run_fp_study and power_curve: per (ROI, rep) fits do not
/// depend on the effect because OLS residuals remove the mean exactly.
std::vector<std::vector<FpOutcome>> fp_engine(const std::vector<StudyRoi>& rois, const std::vector<double>& effects,
                                              const StudyConfig& cfg, std::vector<SubregionPartition>& partitions) {
    if (rois.empty()) {
        throw std::invalid_argument("study: no ROIs");
    }
    if (cfg.reps < 1) {
        throw std::invalid_argument("study: reps must be positive");
    }
    const MatrixXd X = study_design(cfg);
    const bool need_fits = std::any_of(cfg.estimators.begin(), cfg.estimators.end(),
                                       [](Estimator e) { return e != Estimator::Glm; });
    std::vector<PreparedRoi> prepared(rois.size());
    parallel_for(rois.size(), cfg.threads, [&](std::size_t r) {
        if (need_fits) {
            prepared[r] = prepare_roi(rois[r], static_cast<int>(r), cfg, X, "fp-pilot", false);
        } else {
            const std::vector<int> keep =
                subset_indices(static_cast<int>(rois[r].coords.size()), cfg.subsample_cap, cfg.seed, static_cast<int>(r));
            MatrixXd cov(keep.size(), keep.size());
            for (std::size_t a = 0; a < keep.size(); ++a) {
                prepared[r].coords.push_back(rois[r].coords[keep[a]]);
                for (std::size_t b = 0; b < keep.size(); ++b) cov(a, b) = rois[r].truth_cov(keep[a], keep[b]);
            }
            prepared[r].factor = psd_factor(cov);
        }
    });
    partitions.clear();
    for (const auto& p : prepared) partitions.push_back(p.partition);

    const std::size_t units = rois.size() * static_cast<std::size_t>(cfg.reps);
    std::vector<FpOutcome> flat(units);
    const double crit = [&] {
        // two-sided normal critical value by bisection on the p-value
        double lo = 0.0, hi = 10.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (normal_two_sided_p(mid) > cfg.level ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }();
    parallel_for(units, cfg.threads, [&](std::size_t u) {
        const std::size_t r = u / static_cast<std::size_t>(cfg.reps);
        const std::size_t rep = u % static_cast<std::size_t>(cfg.reps);
        const PreparedRoi& p = prepared[r];
        std::mt19937_64 rng = make_stream(cfg.seed, "fp-rep", (static_cast<std::uint64_t>(r) << 32) | rep);
        const MatrixXd E = sample_mvn(p.factor, X.rows(), rng);
        const Standardized st = standardize(E, X);
        FpOutcome& out = flat[u];
        out.reject.assign(cfg.estimators.size(), std::vector<int>(effects.size(), -1));
        for (std::size_t k = 0; k < cfg.estimators.size(); ++k) {
            const Estimator e = cfg.estimators[k];
            MatrixXd corr;
            try {
                if (e == Estimator::Glm) {
                    corr = MatrixXd::Identity(E.rows(), E.rows());
                } else {
                    corr = to_correlation(fit_estimator(e, p, st.z, p.coords, p.partition, cfg).error_cov());
                }
            } catch (const std::exception&) {
                continue;
            }
            for (std::size_t j = 0; j < effects.size(); ++j) {
                VectorXd gamma = VectorXd::Zero(X.cols());
                gamma[design_col::intercept] = 100.0;
                gamma[design_col::task_bold] = 1.0 + effects[j];
                gamma[design_col::rest_bold] = 1.0;
                const MatrixXd Y = VectorXd::Ones(E.rows()) * (X * gamma).transpose() + E;
                try {
                    out.reject[k][j] = std::abs(wald_z(Y, X, st.sd, corr)) > crit ? 1 : 0;
                } catch (const std::exception&) {
                    out.reject[k][j] = -1;
                }
            }
        }
    });

    std::vector<std::vector<FpOutcome>> by_roi(rois.size());
    for (std::size_t u = 0; u < units; ++u) {
        by_roi[u / static_cast<std::size_t>(cfg.reps)].push_back(std::move(flat[u]));
    }
    return by_roi;
}

struct RateAccumulator {
    int reject = 0;
    int ok = 0;
    int failed = 0;

    void add(int outcome) {
        if (outcome < 0) {
            ++failed;
        } else {
            ++ok;
            reject += outcome;
        }
    }
    double percent() const { return ok ? 100.0 * reject / ok : std::numeric_limits<double>::quiet_NaN(); }
};

}  // namespace

StudyReport run_fp_study(const std::vector<StudyRoi>& rois, const StudyConfig& config, double effect) {
    const auto start = std::chrono::steady_clock::now();
    StudyReport rep;
    rep.kind = "fp";
    rep.reps = config.reps;
    const auto outcomes = fp_engine(rois, {effect}, config, rep.partitions);
    for (std::size_t k = 0; k < config.estimators.size(); ++k) {
        RateAccumulator pooled;
        double mean = 0.0;
        int counted = 0;
        for (std::size_t r = 0; r < rois.size(); ++r) {
            RateAccumulator acc;
            for (const FpOutcome& o : outcomes[r]) {
                acc.add(o.reject[k][0]);
                pooled.add(o.reject[k][0]);
            }
            rep.rows.push_back({static_cast<int>(r) + 1, config.estimators[k], acc.percent(), acc.failed});
            if (acc.ok) {
                mean += acc.percent();
                ++counted;
            }
        }
        rep.rows.push_back({0, config.estimators[k],
                            counted ? mean / counted : std::numeric_limits<double>::quiet_NaN(), pooled.failed});
    }
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

std::vector<PowerPoint> power_curve(const std::vector<StudyRoi>& rois, const std::vector<double>& effects,
                                    const StudyConfig& config) {
    if (effects.empty()) {
        throw std::invalid_argument("power_curve: empty effect grid");
    }
    std::vector<SubregionPartition> partitions;
    const auto outcomes = fp_engine(rois, effects, config, partitions);
    std::vector<PowerPoint> out;
    for (std::size_t j = 0; j < effects.size(); ++j) {
        for (std::size_t k = 0; k < config.estimators.size(); ++k) {
            RateAccumulator acc;
            for (const auto& roi : outcomes) {
                for (const FpOutcome& o : roi) acc.add(o.reject[k][j]);
            }
            out.push_back({effects[j], config.estimators[k], acc.percent()});
        }
    }
    return out;
}

StudyReport run_krige_study(const std::vector<StudyRoi>& rois, const StudyConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    if (rois.empty() || config.reps < 1) {
        throw std::invalid_argument("kriging study: need ROIs and a positive rep count");
    }
    const MatrixXd X = study_design(config);
    std::vector<PreparedRoi> prepared(rois.size());
    parallel_for(rois.size(), config.threads, [&](std::size_t r) {
        prepared[r] = prepare_roi(rois[r], static_cast<int>(r), config, X, "krige-pilot", true);
    });

    StudyReport rep;
    rep.kind = "krige";
    rep.reps = config.reps;
    for (const auto& p : prepared) rep.partitions.push_back(p.partition);

    const std::size_t units = rois.size() * static_cast<std::size_t>(config.reps);
    const std::size_t K = config.estimators.size();
    // squared error sums and counts per unit and estimator (NaN marks a failure)
    std::vector<std::vector<double>> sse(units, std::vector<double>(K, 0.0));
    std::vector<double> count(units, 0.0);
    parallel_for(units, config.threads, [&](std::size_t u) {
        const std::size_t r = u / static_cast<std::size_t>(config.reps);
        const std::size_t rp = u % static_cast<std::size_t>(config.reps);
        const PreparedRoi& p = prepared[r];
        std::mt19937_64 rng = make_stream(config.seed, "krige-rep", (static_cast<std::uint64_t>(r) << 32) | rp);
        const MatrixXd E = sample_mvn(p.factor, X.rows(), rng);
        const Eigen::Index no = static_cast<Eigen::Index>(p.observed.size());
        const Eigen::Index nt = static_cast<Eigen::Index>(p.held_out.size());
        MatrixXd obs(no, E.cols());
        MatrixXd truth(nt, E.cols());
        std::vector<GridPoint> obs_coords;
        for (Eigen::Index k = 0; k < no; ++k) {
            obs.row(k) = E.row(p.observed[k]);
            obs_coords.push_back(p.coords[p.observed[k]]);
        }
        for (Eigen::Index k = 0; k < nt; ++k) truth.row(k) = E.row(p.held_out[k]);
        // One pooled scale so every voxel keeps its relative amplitude.
        const double scale = std::sqrt(obs.squaredNorm() / static_cast<double>(obs.size()));
        const MatrixXd z = obs / scale;
        SubregionPartition obs_part = p.partition;
        obs_part.assignment.clear();
        for (int k : p.observed) obs_part.assignment.push_back(p.partition.assignment[k]);
        count[u] = static_cast<double>(truth.size());

        std::vector<int> obs_idx(no);
        std::iota(obs_idx.begin(), obs_idx.end(), 0);
        for (std::size_t k = 0; k < K; ++k) {
            const Estimator e = config.estimators[k];
            if (e == Estimator::Glm) {
                sse[u][k] = truth.squaredNorm();
                continue;
            }
            try {
                const RoiCovModel m = fit_estimator(e, p, z, obs_coords, obs_part, config);
                const SubregionPartition full = e == Estimator::LAniso
                                                    ? p.partition
                                                    : SubregionPartition{std::vector<int>(p.coords.size(), 1),
                                                                         m.partition.centroids};
                const MatrixXd cov = roi_error_cov(CovWorkspace(p.coords, full).sigma1(m.params), m.omega);
                MatrixXd soo(no, no);
                MatrixXd sto(nt, no);
                for (Eigen::Index a = 0; a < no; ++a) {
                    for (Eigen::Index b = 0; b < no; ++b) soo(a, b) = cov(p.observed[a], p.observed[b]);
                    for (Eigen::Index t = 0; t < nt; ++t) sto(t, a) = cov(p.held_out[t], p.observed[a]);
                }
                const CholeskyFactor chol = robust_cholesky(soo);
                const MatrixXd pred = scale * (sto * chol.llt.solve(z));
                sse[u][k] = (pred - truth).squaredNorm();
            } catch (const std::exception&) {
                sse[u][k] = std::numeric_limits<double>::quiet_NaN();
            }
        }
    });

    for (std::size_t k = 0; k < K; ++k) {
        double mean = 0.0;
        int counted = 0;
        int failed_total = 0;
        for (std::size_t r = 0; r < rois.size(); ++r) {
            double s = 0.0;
            double c = 0.0;
            int failed = 0;
            for (int rp = 0; rp < config.reps; ++rp) {
                const std::size_t u = r * static_cast<std::size_t>(config.reps) + static_cast<std::size_t>(rp);
                if (std::isnan(sse[u][k])) {
                    ++failed;
                    continue;
                }
                s += sse[u][k];
                c += count[u];
            }
            const double rmse = c > 0 ? std::sqrt(s / c) : std::numeric_limits<double>::quiet_NaN();
            rep.rows.push_back({static_cast<int>(r) + 1, config.estimators[k], rmse, failed});
            failed_total += failed;
            if (c > 0) {
                mean += rmse;
                ++counted;
            }
        }
        rep.rows.push_back({0, config.estimators[k], counted ? mean / counted : std::numeric_limits<double>::quiet_NaN(),
                            failed_total});
    }
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

}  // namespace stfmri
