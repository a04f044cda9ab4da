#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace stfmri {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Integer voxel-grid coordinates (x, y, z).
using GridPoint = std::array<int, 3>;

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Voxel {
    int id = 0;  // 1-based
    GridPoint xyz{};
    int roi = 0;  // 1-based

    bool operator==(const Voxel&) const = default;
};

/// Voxel-to-ROI assignment. Voxels are kept sorted by id, so voxel index i
/// (0-based) always has id i + 1 and row i of the series matrix.
class Parcellation {
public:
    Parcellation() = default;
    explicit Parcellation(std::vector<Voxel> voxels);

    int voxel_count() const { return static_cast<int>(voxels_.size()); }
    int roi_count() const { return roi_count_; }
    const std::vector<Voxel>& voxels() const { return voxels_; }
    const Voxel& voxel(int index) const { return voxels_.at(index); }

    /// 0-based voxel indices belonging to ROI `roi` (1-based), ascending.
    const std::vector<int>& members(int roi) const { return members_.at(roi - 1); }
    std::vector<GridPoint> coordinates(int roi) const;

    bool operator==(const Parcellation& o) const { return voxels_ == o.voxels_; }

private:
    std::vector<Voxel> voxels_;
    std::vector<std::vector<int>> members_;
    int roi_count_ = 0;
};

struct Interval {
    int start = 0;  // 1-based, inclusive
    int end = 0;    // 1-based, inclusive

    int length() const { return end - start + 1; }
    bool contains(int t) const { return t >= start && t <= end; }
    bool operator==(const Interval&) const = default;
};

/// Block design: sessions partition 1..T; task_indicator is S_1(t).
class BlockDesign {
public:
    BlockDesign() = default;
    BlockDesign(double tr_seconds, int scans, std::vector<Interval> sessions, VectorXd task_indicator);

    /// Equal-length sessions, each alternating rest/task blocks of
    /// `block_length` scans starting with rest.
    static BlockDesign alternating(double tr_seconds, int sessions, int scans_per_session,
                                   int block_length);

    double tr_seconds() const { return tr_; }
    int scans() const { return scans_; }
    const std::vector<Interval>& sessions() const { return sessions_; }
    const VectorXd& task_indicator() const { return task_; }
    VectorXd rest_indicator() const { return VectorXd::Ones(scans_) - task_; }
    /// Task blocks as maximal runs of ones in the task indicator.
    std::vector<Interval> task_blocks() const;

    bool operator==(const BlockDesign& o) const;

private:
    double tr_ = 2.0;
    int scans_ = 0;
    std::vector<Interval> sessions_;
    VectorXd task_;
};

struct FmriDataset {
    Parcellation parcellation;
    MatrixXd series;  // V x T
    BlockDesign design;

    int voxel_count() const { return parcellation.voxel_count(); }
    int scans() const { return design.scans(); }
    /// Checks the cross-object invariants; throws DatasetError.
    void validate() const;
};

/// Reads parcellation.csv, series.f64 and meta.json from `root`.
FmriDataset load_dataset(const std::filesystem::path& root);
void save_dataset(const FmriDataset& dataset, const std::filesystem::path& root);

}  // namespace stfmri
