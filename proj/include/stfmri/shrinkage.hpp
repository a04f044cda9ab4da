#pragma once

#include <array>
#include <vector>

#include "stfmri/dataset.hpp"
#include "stfmri/numerics.hpp"

namespace stfmri {

struct ShrinkageConfig {
    double p = 0.3;  // spline penalty, p = 1 interpolates
    double delta_tol = 1e-3;

    void validate() const;
};

/// Mean second difference Sigma(v) + Sigma(w) - 2 Sigma(v, w) over adjacent
/// voxel pairs (v, w = v + e_axis), grouped by the slice coordinate of v.
struct ContrastCurve {
    VectorXd position;  // slice coordinates with at least one pair
    VectorXd value;

    bool empty() const { return value.size() == 0; }
};

using Contrasts = std::array<ContrastCurve, 3>;

Contrasts directional_contrasts(const MatrixXd& cov, const std::vector<GridPoint>& coords);

struct ShrinkageResult {
    double delta = 0.0;
    double delta_closed_form = 0.0;
    double objective = 0.0;
    MatrixXd shrunk;  // (1 - delta) emp + delta mle
    Contrasts raw;       // empirical contrasts
    Contrasts smoothed;  // spline-smoothed empirical contrasts
    Contrasts model;     // model contrasts
    Contrasts at_delta;  // contrasts of the shrunk matrix
    std::array<bool, 3> used{false, false, false};
};

/// Chooses delta in [0, 1] so that the contrasts of (1 - delta) emp + delta mle
/// best match the smoothed empirical contrasts. Directions with fewer than
/// four slices cannot be smoothed and are left out of the criterion.
ShrinkageResult select_delta(const MatrixXd& emp, const MatrixXd& mle, const std::vector<GridPoint>& coords,
                             const ShrinkageConfig& config = {});

}  // namespace stfmri
