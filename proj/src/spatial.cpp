#include "stfmri/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>

namespace stfmri {

namespace {

constexpr double kNuMin = 0.05;
constexpr double kNuMax = 5.0;
constexpr double kLengthMin = 0.1;

double sigmoid(double s) {
    return 1.0 / (1.0 + std::exp(-s));
}

double logit(double p) {
    p = std::clamp(p, 1e-9, 1.0 - 1e-9);
    return std::log(p / (1.0 - p));
}

double wrap_angle(double a) {
    double r = std::fmod(a, std::numbers::pi);
    if (r < 0) {
        r += std::numbers::pi;
    }
    return r >= std::numbers::pi ? 0.0 : r;
}

Vector3d to_vec(const GridPoint& p) {
    return {static_cast<double>(p[0]), static_cast<double>(p[1]), static_cast<double>(p[2])};
}

// Maps the unconstrained optimizer vector onto (params, omega).
class ParamCodec {
public:
    ParamCodec(CovFamily family, int components, double diameter)
        : family_(family), L_(components), log_lmin_(std::log(kLengthMin)),
          log_lmax_(std::log(10.0 * std::max(diameter, 1.0))) {}

    int per_component() const {
        switch (family_) {
            case CovFamily::Isotropic: return 2;
            case CovFamily::AnisotropicFrozen: return 4;
            case CovFamily::AnisotropicFree: return 6;
        }
        return 0;
    }
    int dim() const { return per_component() * L_ + 1; }

    double decode_length(double s) const { return std::exp(log_lmin_ + (log_lmax_ - log_lmin_) * sigmoid(s)); }
    double encode_length(double l) const {
        return logit((std::log(std::clamp(l, kLengthMin, std::exp(log_lmax_))) - log_lmin_) / (log_lmax_ - log_lmin_));
    }

    void decode(const VectorXd& u, std::vector<AnisoParams>& params, double& omega) const {
        params.assign(L_, AnisoParams{});
        const int k = per_component();
        for (int l = 0; l < L_; ++l) {
            const double* x = u.data() + l * k;
            AnisoParams& p = params[l];
            p.nu = kNuMin + (kNuMax - kNuMin) * sigmoid(x[0]);
            if (family_ == CovFamily::Isotropic) {
                const double len = decode_length(x[1]);
                p.lengths = {len, len, len};
            } else {
                p.lengths = {decode_length(x[1]), decode_length(x[2]), decode_length(x[3])};
            }
            if (family_ == CovFamily::AnisotropicFree) {
                p.xi1 = wrap_angle(x[4]);
                p.xi2 = wrap_angle(x[5]);
            }
        }
        omega = sigmoid(u[dim() - 1]);
    }

    VectorXd encode(const std::vector<AnisoParams>& params, double omega) const {
        VectorXd u(dim());
        const int k = per_component();
        for (int l = 0; l < L_; ++l) {
            const AnisoParams& p = params[static_cast<std::size_t>(l) % params.size()];
            double* x = u.data() + l * k;
            x[0] = logit((std::clamp(p.nu, kNuMin, kNuMax) - kNuMin) / (kNuMax - kNuMin));
            if (family_ == CovFamily::Isotropic) {
                const double g = std::cbrt(p.lengths[0] * p.lengths[1] * p.lengths[2]);
                x[1] = encode_length(g);
            } else {
                x[1] = encode_length(p.lengths[0]);
                x[2] = encode_length(p.lengths[1]);
                x[3] = encode_length(p.lengths[2]);
            }
            if (family_ == CovFamily::AnisotropicFree) {
                x[4] = p.xi1;
                x[5] = p.xi2;
            }
        }
        u[dim() - 1] = logit(omega);
        return u;
    }

private:
    CovFamily family_;
    int L_;
    double log_lmin_;
    double log_lmax_;
};

}  // namespace

void AnisoParams::validate() const {
    if (!(nu > 0) || !(theta > 0) || !(lengths[0] > 0) || !(lengths[1] > 0) || !(lengths[2] > 0)) {
        throw std::invalid_argument("AnisoParams: smoothness, scale and lengths must be positive");
    }
    if (!(xi1 >= 0 && xi1 < std::numbers::pi && xi2 >= 0 && xi2 < std::numbers::pi)) {
        throw std::invalid_argument("AnisoParams: angles must lie in [0, pi)");
    }
}

double aniso_distance(const Vector3d& delta, const AnisoParams& p) {
    const double c1 = std::cos(p.xi1);
    const double s1 = std::sin(p.xi1);
    const double c2 = std::cos(p.xi2);
    const double s2 = std::sin(p.xi2);
    // R1^T delta (R1 rotates about z).
    const double ax = c1 * delta[0] + s1 * delta[1];
    const double ay = -s1 * delta[0] + c1 * delta[1];
    const double az = delta[2];
    // R2^T a (R2 rotates about y).
    const double bx = c2 * ax - s2 * az;
    const double by = ay;
    const double bz = s2 * ax + c2 * az;
    const double ux = bx / (p.lengths[0] * p.theta);
    const double uy = by / (p.lengths[1] * p.theta);
    const double uz = bz / (p.lengths[2] * p.theta);
    return std::sqrt(ux * ux + uy * uy + uz * uz);
}

double matern_corr(double d, double nu) {
    if (!(nu > 0)) {
        throw std::invalid_argument("matern_corr: smoothness must be positive");
    }
    if (!(d >= 0)) {
        throw std::invalid_argument("matern_corr: distance must be nonnegative");
    }
    if (d < 1e-8) {
        return 1.0;
    }
    if (d > 700.0) {
        return 0.0;
    }
    const double k = std::cyl_bessel_k(nu, d);
    if (!(k > 0)) {
        return 0.0;
    }
    const double logc = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) + nu * std::log(d) + std::log(k);
    return std::clamp(std::exp(logc), 0.0, 1.0);
}

std::vector<int> SubregionPartition::sizes() const {
    std::vector<int> out(centroids.size(), 0);
    for (int a : assignment) {
        ++out.at(a - 1);
    }
    return out;
}

SubregionPartition SubregionPartition::single(const std::vector<GridPoint>& coords) {
    return from_assignment(coords, std::vector<int>(coords.size(), 1));
}

SubregionPartition SubregionPartition::from_assignment(const std::vector<GridPoint>& coords,
                                                       std::vector<int> assignment) {
    if (assignment.size() != coords.size() || coords.empty()) {
        throw std::invalid_argument("partition: assignment size differs from voxel count");
    }
    const int L = *std::max_element(assignment.begin(), assignment.end());
    std::vector<Vector3d> sums(L, Vector3d::Zero());
    std::vector<int> counts(L, 0);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const int a = assignment[i];
        if (a < 1) {
            throw std::invalid_argument("partition: labels must be >= 1");
        }
        sums[a - 1] += to_vec(coords[i]);
        ++counts[a - 1];
    }
    SubregionPartition p;
    p.assignment = std::move(assignment);
    for (int l = 0; l < L; ++l) {
        if (counts[l] == 0) {
            throw std::invalid_argument("partition: subregion " + std::to_string(l + 1) + " is empty");
        }
        p.centroids.push_back(sums[l] / counts[l]);
    }
    return p;
}

MatrixXd mixture_weights(const std::vector<GridPoint>& coords, const std::vector<Vector3d>& centroids) {
    const Eigen::Index n = static_cast<Eigen::Index>(coords.size());
    const Eigen::Index L = static_cast<Eigen::Index>(centroids.size());
    if (L < 1) {
        throw std::invalid_argument("mixture_weights: need at least one centroid");
    }
    MatrixXd w(n, L);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector3d v = to_vec(coords[i]);
        Eigen::Index on_centroid = -1;
        for (Eigen::Index l = 0; l < L; ++l) {
            const double d = (v - centroids[l]).norm();
            if (d < 1e-12) {
                on_centroid = l;
                break;
            }
            w(i, l) = 1.0 / d;
        }
        if (on_centroid >= 0) {
            w.row(i).setZero();
            w(i, on_centroid) = 1.0;
        } else {
            w.row(i) /= w.row(i).norm();
        }
    }
    return w;
}

CovWorkspace::CovWorkspace(const std::vector<GridPoint>& coords, const SubregionPartition& partition)
    : n_(static_cast<int>(coords.size())) {
    if (partition.assignment.size() != coords.size()) {
        throw std::invalid_argument("CovWorkspace: partition does not cover the ROI voxels");
    }
    weights_ = mixture_weights(coords, partition.centroids);
    pair_lag_.assign(static_cast<std::size_t>(n_) * n_, 0);
    std::map<GridPoint, int> index;
    lags_.push_back(Vector3d::Zero());
    index[{0, 0, 0}] = 0;
    for (int i = 0; i < n_; ++i) {
        for (int j = i + 1; j < n_; ++j) {
            GridPoint d{coords[j][0] - coords[i][0], coords[j][1] - coords[i][1], coords[j][2] - coords[i][2]};
            const int lead = d[0] != 0 ? d[0] : (d[1] != 0 ? d[1] : d[2]);
            if (lead < 0) {
                d = {-d[0], -d[1], -d[2]};
            }
            auto [it, inserted] = index.try_emplace(d, static_cast<int>(lags_.size()));
            if (inserted) {
                lags_.push_back(to_vec(d));
            }
            pair_lag_[static_cast<std::size_t>(i) * n_ + j] = it->second;
            pair_lag_[static_cast<std::size_t>(j) * n_ + i] = it->second;
        }
    }
}

MatrixXd CovWorkspace::sigma1(const std::vector<AnisoParams>& params) const {
    const Eigen::Index L = weights_.cols();
    if (static_cast<Eigen::Index>(params.size()) != L) {
        throw std::invalid_argument("nonstat_cov: expected " + std::to_string(L) + " parameter sets, got " +
                                    std::to_string(params.size()));
    }
    std::vector<std::vector<double>> corr(L, std::vector<double>(lags_.size()));
    for (Eigen::Index l = 0; l < L; ++l) {
        for (std::size_t k = 0; k < lags_.size(); ++k) {
            corr[l][k] = matern_corr(aniso_distance(lags_[k], params[l]), params[l].nu);
        }
    }
    MatrixXd s(n_, n_);
    for (int i = 0; i < n_; ++i) {
        s(i, i) = 1.0;
        for (int j = i + 1; j < n_; ++j) {
            const int k = pair_lag_[static_cast<std::size_t>(i) * n_ + j];
            double acc = 0.0;
            for (Eigen::Index l = 0; l < L; ++l) {
                acc += weights_(i, l) * weights_(j, l) * corr[l][k];
            }
            s(i, j) = acc;
            s(j, i) = acc;
        }
    }
    return s;
}

MatrixXd nonstat_cov(const std::vector<GridPoint>& coords, const SubregionPartition& partition,
                     const std::vector<AnisoParams>& params) {
    return CovWorkspace(coords, partition).sigma1(params);
}

MatrixXd roi_error_cov(const MatrixXd& sigma1, double omega) {
    if (!(omega >= 0.0 && omega <= 1.0)) {
        throw std::invalid_argument("roi_error_cov: omega must lie in [0, 1]");
    }
    MatrixXd c = omega * omega * sigma1;
    c.diagonal().array() += (1.0 - omega) * (1.0 - omega);
    return c;
}

MatrixXd to_correlation(const MatrixXd& cov) {
    const VectorXd d = cov.diagonal().array().sqrt().inverse();
    if (!d.allFinite()) {
        throw std::invalid_argument("to_correlation: nonpositive variance on the diagonal");
    }
    MatrixXd c = d.asDiagonal() * cov * d.asDiagonal();
    c.diagonal().setOnes();
    return c;
}

std::string to_string(CovFamily family) {
    switch (family) {
        case CovFamily::Isotropic: return "iso";
        case CovFamily::AnisotropicFrozen: return "aniso-frozen";
        case CovFamily::AnisotropicFree: return "aniso";
    }
    return "?";
}

CovFamily cov_family_from_string(const std::string& name) {
    if (name == "iso") return CovFamily::Isotropic;
    if (name == "aniso-frozen") return CovFamily::AnisotropicFrozen;
    if (name == "aniso") return CovFamily::AnisotropicFree;
    throw std::invalid_argument("unknown covariance family '" + name + "'");
}

int RoiCovModel::bic_parameters() const {
    const int L = partition.count();
    switch (family) {
        case CovFamily::Isotropic: return 3;
        case CovFamily::AnisotropicFrozen: return 5 * L + 1;
        case CovFamily::AnisotropicFree: return 7 * L + 1;
    }
    return 0;
}

double roi_diameter(const std::vector<GridPoint>& coords) {
    double best = 0.0;
    for (std::size_t i = 0; i < coords.size(); ++i) {
        for (std::size_t j = i + 1; j < coords.size(); ++j) {
            best = std::max(best, (to_vec(coords[i]) - to_vec(coords[j])).squaredNorm());
        }
    }
    return std::max(1.0, std::sqrt(best));
}

RoiCovModel fit_roi_cov(const MatrixXd& e_r, const std::vector<GridPoint>& coords,
                        const SubregionPartition& partition, const RoiFitOptions& options) {
    const Eigen::Index n = e_r.rows();
    if (n < 3 || e_r.cols() < 2) {
        throw std::invalid_argument("fit_roi_cov: need at least 3 voxels and 2 replicates");
    }
    if (static_cast<Eigen::Index>(coords.size()) != n || partition.assignment.size() != coords.size()) {
        throw std::invalid_argument("fit_roi_cov: residuals, coordinates and partition disagree in size");
    }
    if (partition.count() < 1) {
        throw std::invalid_argument("fit_roi_cov: degenerate partition");
    }
    if (options.family == CovFamily::Isotropic && partition.count() != 1) {
        throw std::invalid_argument("fit_roi_cov: the isotropic family uses a single region");
    }
    if (!e_r.allFinite()) {
        throw std::invalid_argument("fit_roi_cov: residuals contain non-finite values");
    }

    const CovWorkspace ws(coords, partition);
    const MatrixXd G = scatter_factor(e_r);
    const long m = static_cast<long>(e_r.cols());
    const ParamCodec codec(options.family, partition.count(), roi_diameter(coords));

    std::vector<AnisoParams> params;
    double omega = 0.0;
    const Objective objective = [&](const VectorXd& u) {
        std::vector<AnisoParams> p;
        double w = 0.0;
        codec.decode(u, p, w);
        try {
            return -gaussian_loglik_factor(roi_error_cov(ws.sigma1(p), w), G, m).value;
        } catch (const NotPositiveDefinite&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    VectorXd x0;
    if (options.start_params && !options.start_params->empty()) {
        x0 = codec.encode(*options.start_params, options.start_omega.value_or(0.7));
    } else {
        // Coarse isotropic grid for a starting point.
        double best = std::numeric_limits<double>::infinity();
        for (const double len : {0.7, 1.5, 3.0, 6.0}) {
            for (const double w : {0.3, 0.6, 0.85, 0.95}) {
                AnisoParams p;
                p.lengths = {len, len, len};
                const VectorXd u = codec.encode({p}, options.start_omega.value_or(w));
                const double f = objective(u);
                if (f < best || x0.size() == 0) {
                    best = f;
                    x0 = u;
                }
            }
        }
    }
    if (!std::isfinite(objective(x0))) {
        throw std::runtime_error("fit_roi_cov: likelihood is not finite at the starting values");
    }
    const SimplexResult res = nelder_mead(objective, x0, options.simplex);

    RoiCovModel model;
    model.family = options.family;
    model.partition = partition;
    codec.decode(res.x, params, omega);
    model.params = params;
    model.omega = omega;
    model.sigma1 = ws.sigma1(params);
    const LogLikelihood ll = gaussian_loglik_factor(model.error_cov(), G, m);
    model.loglik = ll.value;
    model.jitter = ll.jitter;
    return model;
}

VectorXd krige(const MatrixXd& cov, const std::vector<int>& observed, const VectorXd& values,
               const std::vector<int>& targets) {
    if (observed.empty()) {
        throw std::invalid_argument("krige: no observed locations");
    }
    if (static_cast<Eigen::Index>(observed.size()) != values.size()) {
        throw std::invalid_argument("krige: observed indices and values differ in length");
    }
    const Eigen::Index no = static_cast<Eigen::Index>(observed.size());
    const Eigen::Index nt = static_cast<Eigen::Index>(targets.size());
    MatrixXd soo(no, no);
    MatrixXd sto(nt, no);
    for (Eigen::Index a = 0; a < no; ++a) {
        for (Eigen::Index b = 0; b < no; ++b) {
            soo(a, b) = cov(observed[a], observed[b]);
        }
        for (Eigen::Index t = 0; t < nt; ++t) {
            sto(t, a) = cov(targets[t], observed[a]);
        }
    }
    const CholeskyFactor chol = robust_cholesky(soo);
    return sto * chol.llt.solve(values);
}

}  // namespace stfmri
