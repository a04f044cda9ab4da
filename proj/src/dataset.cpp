#include "stfmri/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "stfmri/design.hpp"
#include "stfmri/io.hpp"

namespace stfmri {

namespace fs = std::filesystem;

// -------------------------------------------------------------------------
// Parcellation
// -------------------------------------------------------------------------

Parcellation::Parcellation(std::vector<Voxel> voxels) : voxels_(std::move(voxels)) {
    std::sort(voxels_.begin(), voxels_.end(), [](const Voxel& a, const Voxel& b) { return a.id < b.id; });
    if (voxels_.empty()) {
        throw DatasetError("parcellation has no voxels");
    }
    std::set<GridPoint> seen;
    int max_roi = 0;
    for (std::size_t i = 0; i < voxels_.size(); ++i) {
        const Voxel& v = voxels_[i];
        if (v.id != static_cast<int>(i) + 1) {
            throw DatasetError("voxel ids must be unique and contiguous 1..V (problem at id " +
                               std::to_string(v.id) + ")");
        }
        if (v.roi < 1) {
            throw DatasetError("voxel " + std::to_string(v.id) + " has ROI label < 1");
        }
        if (!seen.insert(v.xyz).second) {
            throw DatasetError("voxel " + std::to_string(v.id) + " duplicates the coordinates of another voxel");
        }
        max_roi = std::max(max_roi, v.roi);
    }
    roi_count_ = max_roi;
    members_.assign(roi_count_, {});
    for (std::size_t i = 0; i < voxels_.size(); ++i) {
        members_[voxels_[i].roi - 1].push_back(static_cast<int>(i));
    }
    for (int r = 0; r < roi_count_; ++r) {
        if (members_[r].empty()) {
            throw DatasetError("ROI " + std::to_string(r + 1) + " has no voxels");
        }
    }
}

std::vector<GridPoint> Parcellation::coordinates(int roi) const {
    std::vector<GridPoint> out;
    for (int idx : members(roi)) {
        out.push_back(voxels_[idx].xyz);
    }
    return out;
}

// -------------------------------------------------------------------------
// BlockDesign
// -------------------------------------------------------------------------

BlockDesign::BlockDesign(double tr_seconds, int scans, std::vector<Interval> sessions, VectorXd task_indicator)
    : tr_(tr_seconds), scans_(scans), sessions_(std::move(sessions)), task_(std::move(task_indicator)) {
    if (!(tr_ > 0)) {
        throw DatasetError("tr_seconds must be positive");
    }
    if (scans_ < 1) {
        throw DatasetError("design must have at least one scan");
    }
    if (task_.size() != scans_) {
        throw DatasetError("task indicator length differs from T");
    }
    for (Eigen::Index t = 0; t < task_.size(); ++t) {
        if (task_[t] != 0.0 && task_[t] != 1.0) {
            throw DatasetError("task indicator entries must be 0 or 1");
        }
    }
    std::sort(sessions_.begin(), sessions_.end(), [](const Interval& a, const Interval& b) { return a.start < b.start; });
    int next = 1;
    for (const Interval& s : sessions_) {
        if (s.start > s.end) {
            throw DatasetError("session interval with start after end");
        }
        if (s.start < next) {
            throw DatasetError("overlapping sessions");
        }
        if (s.start > next) {
            throw DatasetError("sessions leave scan " + std::to_string(next) + " uncovered");
        }
        next = s.end + 1;
    }
    if (next != scans_ + 1) {
        throw DatasetError("sessions do not cover 1..T exactly");
    }
}

BlockDesign BlockDesign::alternating(double tr_seconds, int sessions, int scans_per_session, int block_length) {
    if (sessions < 1 || scans_per_session < 1 || block_length < 1) {
        throw DatasetError("alternating design needs positive session count, length and block length");
    }
    const int scans = sessions * scans_per_session;
    std::vector<Interval> iv;
    VectorXd task = VectorXd::Zero(scans);
    for (int s = 0; s < sessions; ++s) {
        const int start = s * scans_per_session + 1;
        iv.push_back({start, start + scans_per_session - 1});
        for (int k = 0; k < scans_per_session; ++k) {
            // rest first, then task, alternating
            if ((k / block_length) % 2 == 1) {
                task[start - 1 + k] = 1.0;
            }
        }
    }
    return BlockDesign(tr_seconds, scans, std::move(iv), std::move(task));
}

std::vector<Interval> BlockDesign::task_blocks() const {
    std::vector<Interval> out;
    for (int t = 0; t < scans_; ++t) {
        if (task_[t] == 1.0 && (t == 0 || task_[t - 1] == 0.0)) {
            out.push_back({t + 1, t + 1});
        }
        if (task_[t] == 1.0) {
            out.back().end = t + 1;
        }
    }
    return out;
}

bool BlockDesign::operator==(const BlockDesign& o) const {
    return tr_ == o.tr_ && scans_ == o.scans_ && sessions_ == o.sessions_ && task_.size() == o.task_.size() &&
           task_ == o.task_;
}

// -------------------------------------------------------------------------
// FmriDataset
// -------------------------------------------------------------------------

void FmriDataset::validate() const {
    const int v = parcellation.voxel_count();
    const int t = design.scans();
    if (series.rows() != v || series.cols() != t) {
        throw DatasetError("series is " + std::to_string(series.rows()) + "x" + std::to_string(series.cols()) +
                           " but the parcellation/design declare " + std::to_string(v) + "x" + std::to_string(t));
    }
    if (!series.allFinite()) {
        throw DatasetError("series contains non-finite values");
    }
    if (t < 10) {
        throw DatasetError("at least 10 scans are required");
    }
    // Throws RankDeficientDesign when the mean design cannot be built.
    design_matrix(design, canonical_hrf(design.tr_seconds()));
}

namespace {

int parse_int_field(const std::string& tok, const fs::path& path, int lineno) {
    int v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": '" + tok + "' is not an integer");
    }
    return v;
}

std::vector<Voxel> read_parcellation_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DatasetError("missing file " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "voxel_id,x,y,z,roi") {
        throw DatasetError(path.string() + ": header must be 'voxel_id,x,y,z,roi'");
    }
    std::vector<Voxel> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> tok;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            tok.push_back(cell);
        }
        if (tok.size() != 5) {
            throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
        }
        Voxel v;
        v.id = parse_int_field(tok[0], path, lineno);
        v.xyz = {parse_int_field(tok[1], path, lineno), parse_int_field(tok[2], path, lineno),
                 parse_int_field(tok[3], path, lineno)};
        v.roi = parse_int_field(tok[4], path, lineno);
        out.push_back(v);
    }
    return out;
}

std::vector<Interval> read_intervals(const nlohmann::json& arr, const char* key) {
    if (!arr.is_array()) {
        throw DatasetError(std::string("meta.json: '") + key + "' must be a list of [start,end]");
    }
    std::vector<Interval> out;
    for (const auto& item : arr) {
        if (!item.is_array() || item.size() != 2) {
            throw DatasetError(std::string("meta.json: '") + key + "' entries must be [start,end]");
        }
        out.push_back({item[0].get<int>(), item[1].get<int>()});
    }
    return out;
}

}  // namespace

FmriDataset load_dataset(const fs::path& root) {
    const fs::path meta_path = root / "meta.json";
    std::ifstream meta_in(meta_path);
    if (!meta_in) {
        throw DatasetError("missing file " + meta_path.string());
    }
    nlohmann::json meta;
    try {
        meta_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError("meta.json: " + std::string(e.what()));
    }
    for (const char* key : {"V", "T", "tr_seconds", "sessions", "task_blocks"}) {
        if (!meta.contains(key)) {
            throw DatasetError(std::string("meta.json: missing key '") + key + "'");
        }
    }
    const int v = meta["V"].get<int>();
    const int t = meta["T"].get<int>();
    if (v < 1 || t < 1) {
        throw DatasetError("meta.json: V and T must be positive");
    }
    const auto sessions = read_intervals(meta["sessions"], "sessions");
    const auto blocks = read_intervals(meta["task_blocks"], "task_blocks");
    VectorXd task = VectorXd::Zero(t);
    for (const Interval& b : blocks) {
        if (b.start < 1 || b.end > t || b.start > b.end) {
            throw DatasetError("meta.json: task block outside 1..T");
        }
        task.segment(b.start - 1, b.length()).setOnes();
    }

    FmriDataset ds;
    ds.design = BlockDesign(meta["tr_seconds"].get<double>(), t, sessions, task);
    ds.parcellation = Parcellation(read_parcellation_csv(root / "parcellation.csv"));
    if (ds.parcellation.voxel_count() != v) {
        throw DatasetError("parcellation.csv lists " + std::to_string(ds.parcellation.voxel_count()) +
                           " voxels but meta.json declares V=" + std::to_string(v));
    }
    try {
        ds.series = io::read_f64(root / "series.f64", v, t);
    } catch (const std::runtime_error& e) {
        throw DatasetError(e.what());
    }
    ds.validate();
    return ds;
}

void save_dataset(const FmriDataset& ds, const fs::path& root) {
    fs::create_directories(root);
    {
        std::ofstream out(root / "parcellation.csv", std::ios::binary | std::ios::trunc);
        out << "voxel_id,x,y,z,roi\n";
        for (const Voxel& v : ds.parcellation.voxels()) {
            out << v.id << ',' << v.xyz[0] << ',' << v.xyz[1] << ',' << v.xyz[2] << ',' << v.roi << '\n';
        }
        if (!out) {
            throw DatasetError("write failed for parcellation.csv");
        }
    }
    io::write_f64(root / "series.f64", ds.series);

    nlohmann::json meta;
    meta["V"] = ds.voxel_count();
    meta["T"] = ds.scans();
    meta["tr_seconds"] = ds.design.tr_seconds();
    meta["sessions"] = nlohmann::json::array();
    for (const Interval& s : ds.design.sessions()) {
        meta["sessions"].push_back({s.start, s.end});
    }
    meta["task_blocks"] = nlohmann::json::array();
    for (const Interval& b : ds.design.task_blocks()) {
        meta["task_blocks"].push_back({b.start, b.end});
    }
    std::ofstream out(root / "meta.json", std::ios::trunc);
    out << meta.dump(2) << '\n';
    if (!out) {
        throw DatasetError("write failed for meta.json");
    }
}

}  // namespace stfmri
