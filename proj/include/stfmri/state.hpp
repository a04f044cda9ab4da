#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stfmri/activation.hpp"
#include "stfmri/glasso.hpp"
#include "stfmri/selection.hpp"
#include "stfmri/shrinkage.hpp"
#include "stfmri/spatial.hpp"
#include "stfmri/temporal.hpp"

namespace stfmri {

class StateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kStateFormatVersion = 1;

struct TemporalStage {
    std::vector<VoxelFit> fits;  // by voxel index
    MatrixXd residuals;          // V x (T - 2)

    bool operator==(const TemporalStage& o) const;
};

struct RoiLocalFit {
    GridConfig config;
    double bic = 0.0;        // frozen-angle BIC of the chosen grid
    double model_bic = 0.0;  // BIC of the final model
    int visited = 0;
    RoiCovModel model;
    double delta = 0.0;
    double delta_closed_form = 0.0;
    MatrixXd shrunk;

    bool operator==(const RoiLocalFit& o) const;
};

struct LocalStage {
    std::vector<RoiLocalFit> rois;  // by ROI index
    bool operator==(const LocalStage& o) const { return rois == o.rois; }
};

struct RegionalStage {
    MatrixXd A;
    GlassoResult glasso;
    CvResult cv;

    bool operator==(const RegionalStage& o) const;
};

struct ActivationStage {
    ActivationFit fit;
    bool operator==(const ActivationStage& o) const;
};

struct Provenance {
    std::uint64_t seed = 0;
    std::string config_hash;

    bool operator==(const Provenance&) const = default;
};

/// Outputs of the pipeline stages. A stage record may be present only when
/// its prerequisites are: temporal, then local, then regional / activation.
struct FitState {
    Provenance provenance;
    std::optional<TemporalStage> temporal;
    std::optional<LocalStage> local;
    std::optional<RegionalStage> regional;
    std::optional<ActivationStage> activation;

    /// Throws StateError when a stage is present without its prerequisites.
    void validate() const;
    bool operator==(const FitState& o) const;
};

/// Writes one subdirectory per stage. Each stage is written to a temporary
/// directory and renamed into place.
void save_state(const FitState& state, const std::filesystem::path& dir);
FitState load_state(const std::filesystem::path& dir);

}  // namespace stfmri
