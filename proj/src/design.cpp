#include "stfmri/design.hpp"

#include <cmath>

namespace stfmri {

namespace {

double gamma_density(double t, double shape, double scale) {
    if (t <= 0.0) {
        return 0.0;
    }
    return std::exp((shape - 1.0) * std::log(t) - t / scale - std::lgamma(shape) - shape * std::log(scale));
}

}  // namespace

void HrfSpec::validate() const {
    if (!(peak_shape > 0 && undershoot_shape > 0 && peak_scale > 0 && undershoot_scale > 0 &&
          undershoot_ratio > 0 && support_seconds > 0)) {
        throw std::invalid_argument("HrfSpec: all parameters must be positive");
    }
    if (!(peak_shape < undershoot_shape)) {
        throw std::invalid_argument("HrfSpec: peak shape must be smaller than undershoot shape");
    }
}

VectorXd canonical_hrf(double tr_seconds, const HrfSpec& spec) {
    if (!(tr_seconds > 0)) {
        throw std::invalid_argument("canonical_hrf: tr_seconds must be positive");
    }
    spec.validate();
    const int samples = static_cast<int>(std::floor(spec.support_seconds / tr_seconds + 1e-9)) + 1;
    VectorXd h(samples);
    for (int k = 0; k < samples; ++k) {
        const double t = k * tr_seconds;
        h[k] = gamma_density(t, spec.peak_shape, spec.peak_scale) -
               spec.undershoot_ratio * gamma_density(t, spec.undershoot_shape, spec.undershoot_scale);
    }
    const double peak = h.maxCoeff();
    if (!(peak > 0)) {
        throw std::invalid_argument("canonical_hrf: sampled response has no positive peak");
    }
    return h / peak;
}

VectorXd bold_regressor(const VectorXd& h, const VectorXd& stimulus) {
    const Eigen::Index n = stimulus.size();
    VectorXd x = VectorXd::Zero(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const Eigen::Index kmax = std::min<Eigen::Index>(t, h.size() - 1);
        double acc = 0.0;
        for (Eigen::Index k = 0; k <= kmax; ++k) {
            acc += h[k] * stimulus[t - k];
        }
        x[t] = acc;
    }
    return x;
}

MatrixXd design_matrix(const BlockDesign& design, const VectorXd& hrf) {
    const auto& sessions = design.sessions();
    if (sessions.size() != 3) {
        throw RankDeficientDesign("design_matrix: expected exactly three sessions, found " +
                                  std::to_string(sessions.size()));
    }
    const int T = design.scans();
    MatrixXd X(T, 6);
    X.col(design_col::intercept).setOnes();
    X.col(design_col::session1).setZero();
    X.col(design_col::session2).setZero();
    for (int t = 1; t <= T; ++t) {
        for (std::size_t s = 0; s < sessions.size(); ++s) {
            if (sessions[s].contains(t)) {
                if (s < 2) {
                    X(t - 1, design_col::session1 + static_cast<int>(s)) = 1.0;
                }
                X(t - 1, design_col::session_time) =
                    static_cast<double>(t - sessions[s].start) / sessions[s].length();
            }
        }
    }
    X.col(design_col::task_bold) = bold_regressor(hrf, design.task_indicator());
    X.col(design_col::rest_bold) = bold_regressor(hrf, design.rest_indicator());

    Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < 6) {
        throw RankDeficientDesign("design_matrix: design has rank " + std::to_string(qr.rank()) + " < 6");
    }
    return X;
}

}  // namespace stfmri
