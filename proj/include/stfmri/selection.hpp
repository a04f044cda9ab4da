#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "stfmri/spatial.hpp"

namespace stfmri {

struct GridConfig {
    int lx = 1;
    int ly = 1;
    int lz = 1;

    void validate() const;
    auto operator<=>(const GridConfig&) const = default;
};

inline constexpr int kMinSubregionVoxels = 36;

/// Splits the ROI bounding box into lx*ly*lz cells of equal extent, drops
/// empty cells, then repeatedly merges the smallest cell holding fewer than
/// `min_voxels` voxels into its largest face-adjacent cell (nearest centroid
/// when it has no face neighbour) until every cell is large enough or one
/// cell is left.
SubregionPartition partition_roi(const std::vector<GridPoint>& coords, const GridConfig& config,
                                 int min_voxels = kMinSubregionVoxels);

/// -2 loglik + k log(n_obs).
double bic_score(double loglik, int k, long long n_obs);

struct SearchOptions {
    int random_configs = 25;
    int max_steps = 20;
    int threads = 1;
    bool refit_free_angles = true;
    SimplexConfig simplex{1e-4, 1e-6, 3000, 1, 0.1, 0.3};
};

struct SelectionResult {
    GridConfig config;
    SubregionPartition partition;
    double bic = 0.0;  // frozen-angle BIC of the chosen configuration
    std::vector<std::pair<GridConfig, double>> visited;
    RoiCovModel frozen_model;
    RoiCovModel model;  // chosen partition refit with free angles (when enabled)
    double model_bic = 0.0;
};

/// Largest per-axis cell count sampled by the random proposals.
int search_axis_limit(const std::vector<GridPoint>& coords, int min_voxels = kMinSubregionVoxels);

/// Greedy BIC search over grid configurations starting at (1,1,1).
SelectionResult bic_search(const MatrixXd& e_r, const std::vector<GridPoint>& coords, std::uint64_t seed,
                           const SearchOptions& options = {});

}  // namespace stfmri
