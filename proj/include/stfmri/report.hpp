#pragma once

#include <filesystem>
#include <vector>

#include "stfmri/dataset.hpp"
#include "stfmri/simulation.hpp"
#include "stfmri/state.hpp"

namespace stfmri {

namespace fs = std::filesystem;

void write_temporal_report(const fs::path& path, const FmriDataset& ds, const TemporalStage& stage);
void write_local_report(const fs::path& path, const LocalStage& stage);
void write_cv_report(const fs::path& path, const CvResult& cv);
void write_edges_report(const fs::path& path, const std::vector<Edge>& edges);
/// Nonzero off-diagonal support of the precision matrix for every lambda.
void write_glasso_path(const fs::path& path, const MatrixXd& A, const std::vector<double>& lambdas);
void write_activation_report(const fs::path& path, const FmriDataset& ds, const ActivationFit& fit);
void write_study_report(const fs::path& path, const StudyReport& report);
void write_power_report(const fs::path& path, const std::vector<PowerPoint>& points);

/// Writes every report that the stages present in `state` support.
void write_all_reports(const fs::path& dir, const FmriDataset& ds, const FitState& state);

}  // namespace stfmri
