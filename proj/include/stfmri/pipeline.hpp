#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stfmri/parallel.hpp"
#include "stfmri/state.hpp"

namespace stfmri {

class StageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Stage { Temporal = 1, Local = 2, Regional = 3, Activation = 4 };
std::string to_string(Stage s);

struct PipelineConfig {
    std::filesystem::path dataset;
    std::filesystem::path output;
    int threads = default_threads();
    std::uint64_t seed = 1;
    bool resume = false;
    /// Last stage to run; later stages are left untouched.
    Stage stop_after = Stage::Activation;
    /// Drops this stage and the ones after it from a resumed state so they are recomputed.
    std::optional<Stage> rerun_from;

    double spline_p = 0.3;
    double fdr_q = 0.05;
    int harmonics = 1;
    std::vector<double> lambda_grid;  // empty: log-spaced grid from the data
    int lambda_count = 20;
    bool correlation_A = false;  // rescale A to unit diagonal before glasso
    int random_configs = 25;
    int max_search_steps = 20;
    double roi_x_tol = 1e-4;
    int roi_restarts = 1;

    void validate() const;
    /// Hash of the settings that influence results (not paths or threads).
    std::string hash() const;
    std::filesystem::path state_dir() const { return output / "state"; }
    std::filesystem::path report_dir() const { return output / "reports"; }
};

/// Reads a JSON object whose keys are the field names above.
PipelineConfig load_pipeline_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Runs fit-temporal, fit-local, fit-regional and test-activation in order,
/// saving the state after each stage and writing the reports at the end.
/// With `resume`, stages already present in the saved state are skipped.
FitState run_pipeline(const PipelineConfig& config);

}  // namespace stfmri
