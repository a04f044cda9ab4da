#include "stfmri/shrinkage.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace stfmri {

void ShrinkageConfig::validate() const {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("ShrinkageConfig: p must lie in [0, 1]");
    }
    if (!(delta_tol > 0.0)) {
        throw std::invalid_argument("ShrinkageConfig: delta_tol must be positive");
    }
}

Contrasts directional_contrasts(const MatrixXd& cov, const std::vector<GridPoint>& coords) {
    const Eigen::Index n = static_cast<Eigen::Index>(coords.size());
    if (cov.rows() != n || cov.cols() != n) {
        throw std::invalid_argument("directional_contrasts: matrix size differs from voxel count");
    }
    std::map<GridPoint, int> index;
    for (Eigen::Index i = 0; i < n; ++i) {
        index[coords[i]] = static_cast<int>(i);
    }
    Contrasts out;
    for (int axis = 0; axis < 3; ++axis) {
        std::map<int, std::pair<double, int>> slices;
        for (Eigen::Index i = 0; i < n; ++i) {
            GridPoint nb = coords[i];
            ++nb[axis];
            const auto it = index.find(nb);
            if (it == index.end()) {
                continue;
            }
            const int j = it->second;
            auto& acc = slices[coords[i][axis]];
            acc.first += cov(i, i) + cov(j, j) - 2.0 * cov(i, j);
            ++acc.second;
        }
        ContrastCurve& c = out[axis];
        c.position.resize(static_cast<Eigen::Index>(slices.size()));
        c.value.resize(static_cast<Eigen::Index>(slices.size()));
        Eigen::Index k = 0;
        for (const auto& [pos, acc] : slices) {
            c.position[k] = pos;
            c.value[k] = acc.first / acc.second;
            ++k;
        }
    }
    return out;
}

ShrinkageResult select_delta(const MatrixXd& emp, const MatrixXd& mle, const std::vector<GridPoint>& coords,
                             const ShrinkageConfig& config) {
    config.validate();
    if (emp.rows() != mle.rows() || emp.cols() != mle.cols()) {
        throw std::invalid_argument("select_delta: empirical and model matrices differ in size");
    }
    ShrinkageResult res;
    res.raw = directional_contrasts(emp, coords);
    res.model = directional_contrasts(mle, coords);
    res.smoothed = res.raw;

    // objective(delta) = || r - delta a ||^2 with r = smooth - emp, a = mle - emp.
    double aa = 0.0;
    double ar = 0.0;
    double rr = 0.0;
    bool any = false;
    for (int b = 0; b < 3; ++b) {
        if (res.raw[b].value.size() < 4) {
            continue;
        }
        res.used[b] = true;
        any = true;
        res.smoothed[b].value = smoothing_spline(res.raw[b].position, res.raw[b].value, config.p);
        const VectorXd r = res.smoothed[b].value - res.raw[b].value;
        const VectorXd a = res.model[b].value - res.raw[b].value;
        aa += a.squaredNorm();
        ar += a.dot(r);
        rr += r.squaredNorm();
    }
    if (!any) {
        throw std::invalid_argument("select_delta: no direction has enough adjacent slices for a contrast curve");
    }
    const auto objective = [&](double d) { return rr - 2.0 * d * ar + d * d * aa; };

    const double golden = golden_section(objective, 0.0, 1.0, config.delta_tol);
    res.delta_closed_form = aa > 0.0 ? std::clamp(ar / aa, 0.0, 1.0) : 0.0;

    // Smallest objective wins; near-ties go to the smaller delta.
    double best_delta = 0.0;
    double best = objective(0.0);
    for (const double d : {res.delta_closed_form, golden, 1.0}) {
        const double f = objective(d);
        const double slack = 1e-12 * (1.0 + std::abs(best));
        if (f < best - slack || (std::abs(f - best) <= slack && d < best_delta)) {
            best = f;
            best_delta = d;
        }
    }
    res.delta = best_delta;
    res.objective = best;
    res.shrunk = (1.0 - res.delta) * emp + res.delta * mle;
    res.shrunk = 0.5 * (res.shrunk + res.shrunk.transpose()).eval();
    res.at_delta = directional_contrasts(res.shrunk, coords);
    return res;
}

}  // namespace stfmri
