#include "stfmri/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

#include "stfmri/parallel.hpp"
#include "stfmri/rng.hpp"

namespace stfmri {

void GridConfig::validate() const {
    if (lx < 1 || ly < 1 || lz < 1) {
        throw std::invalid_argument("GridConfig: every axis needs at least one cell");
    }
}

namespace {

struct Box {
    GridPoint lo;
    GridPoint extent;
};

Box bounding_box(const std::vector<GridPoint>& coords) {
    GridPoint lo = coords.front();
    GridPoint hi = coords.front();
    for (const GridPoint& c : coords) {
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
        }
    }
    return {lo, {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}};
}

}  // namespace

SubregionPartition partition_roi(const std::vector<GridPoint>& coords, const GridConfig& config, int min_voxels) {
    config.validate();
    if (coords.empty()) {
        throw std::invalid_argument("partition_roi: empty ROI");
    }
    const Box box = bounding_box(coords);
    const std::array<int, 3> cells{config.lx, config.ly, config.lz};

    // Lattice cell of each voxel.
    std::vector<GridPoint> cell_of(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            const double width = static_cast<double>(box.extent[a]) / cells[a];
            const int k = static_cast<int>(std::floor((coords[i][a] - box.lo[a]) / width));
            cell_of[i][a] = std::clamp(k, 0, cells[a] - 1);
        }
    }
    // Nonempty lattice cells become groups, numbered in lattice order.
    std::map<GridPoint, int> group_of_cell;
    for (const GridPoint& c : cell_of) {
        group_of_cell.emplace(c, 0);
    }
    int next = 0;
    for (auto& [cell, g] : group_of_cell) {
        g = next++;
    }
    std::vector<int> group(coords.size());
    std::vector<int> size(next, 0);
    std::vector<Vector3d> sum(next, Vector3d::Zero());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        group[i] = group_of_cell[cell_of[i]];
        ++size[group[i]];
        sum[group[i]] += Vector3d(coords[i][0], coords[i][1], coords[i][2]);
    }
    std::vector<bool> alive(next, true);
    int alive_count = next;

    while (alive_count > 1) {
        int victim = -1;
        for (int g = 0; g < next; ++g) {
            if (alive[g] && size[g] < min_voxels && (victim < 0 || size[g] < size[victim])) {
                victim = g;
            }
        }
        if (victim < 0) {
            break;
        }
        // Face-adjacent groups through the lattice.
        int target = -1;
        for (const auto& [cell, g] : group_of_cell) {
            if (g != victim) {
                continue;
            }
            for (int a = 0; a < 3; ++a) {
                for (const int step : {-1, 1}) {
                    GridPoint nb = cell;
                    nb[a] += step;
                    const auto it = group_of_cell.find(nb);
                    if (it == group_of_cell.end() || it->second == victim) {
                        continue;
                    }
                    const int h = it->second;
                    if (target < 0 || size[h] > size[target] || (size[h] == size[target] && h < target)) {
                        target = h;
                    }
                }
            }
        }
        if (target < 0) {
            const Vector3d cv = sum[victim] / size[victim];
            double best = std::numeric_limits<double>::infinity();
            for (int h = 0; h < next; ++h) {
                if (!alive[h] || h == victim) {
                    continue;
                }
                const double d = (sum[h] / size[h] - cv).squaredNorm();
                if (d < best) {
                    best = d;
                    target = h;
                }
            }
        }
        for (auto& [cell, g] : group_of_cell) {
            if (g == victim) {
                g = target;
            }
        }
        for (int& g : group) {
            if (g == victim) {
                g = target;
            }
        }
        size[target] += size[victim];
        sum[target] += sum[victim];
        size[victim] = 0;
        alive[victim] = false;
        --alive_count;
    }

    // Relabel surviving groups 1..L by first appearance in lattice order.
    std::vector<int> label(next, 0);
    int L = 0;
    for (const auto& [cell, g] : group_of_cell) {
        if (label[g] == 0) {
            label[g] = ++L;
        }
    }
    std::vector<int> assignment(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        assignment[i] = label[group[i]];
    }
    return SubregionPartition::from_assignment(coords, std::move(assignment));
}

double bic_score(double loglik, int k, long long n_obs) {
    if (n_obs < 1) {
        throw std::invalid_argument("bic_score: n_obs must be positive");
    }
    return -2.0 * loglik + k * std::log(static_cast<double>(n_obs));
}

int search_axis_limit(const std::vector<GridPoint>& coords, int min_voxels) {
    const Box box = bounding_box(coords);
    const int max_extent = std::max({box.extent[0], box.extent[1], box.extent[2]});
    const int by_size = static_cast<int>(coords.size()) / min_voxels;
    return std::max(1, std::min(max_extent, by_size));
}

SelectionResult bic_search(const MatrixXd& e_r, const std::vector<GridPoint>& coords, std::uint64_t seed,
                           const SearchOptions& options) {
    const long long n_obs = static_cast<long long>(e_r.rows()) * e_r.cols();
    const int lmax = search_axis_limit(coords);

    RoiFitOptions frozen;
    frozen.family = CovFamily::AnisotropicFrozen;
    frozen.simplex = options.simplex;

    const GridConfig origin{1, 1, 1};
    const SubregionPartition single = SubregionPartition::single(coords);
    const RoiCovModel base = fit_roi_cov(e_r, coords, single, frozen);
    RoiFitOptions warm = frozen;
    warm.start_params = base.params;
    warm.start_omega = base.omega;

    struct Entry {
        double bic = std::numeric_limits<double>::infinity();
        RoiCovModel model;
    };
    std::map<std::vector<int>, Entry> by_partition;
    by_partition[single.assignment] = {bic_score(base.loglik, base.bic_parameters(), n_obs), base};

    SelectionResult result;
    result.visited.emplace_back(origin, by_partition[single.assignment].bic);
    GridConfig current = origin;
    std::vector<int> current_key = single.assignment;
    std::map<GridConfig, std::vector<int>> key_of_config{{origin, single.assignment}};

    for (int step = 0; step < options.max_steps; ++step) {
        std::vector<GridConfig> candidates;
        for (int a = 0; a < 3; ++a) {
            for (const int d : {-1, 1}) {
                GridConfig c = current;
                int& v = a == 0 ? c.lx : (a == 1 ? c.ly : c.lz);
                v += d;
                if (v >= 1) {
                    candidates.push_back(c);
                }
            }
        }
        std::mt19937_64 rng = make_stream(seed, "bic-search", static_cast<std::uint64_t>(step));
        std::uniform_int_distribution<int> draw(1, lmax);
        for (int r = 0; r < options.random_configs; ++r) {
            const int x = draw(rng);
            const int y = draw(rng);
            const int z = draw(rng);
            candidates.push_back({x, y, z});
        }

        // Partition every candidate, then fit each new partition once.
        std::vector<std::vector<int>> keys(candidates.size());
        std::vector<SubregionPartition> fresh;
        std::map<std::vector<int>, std::size_t> fresh_index;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            const auto known = key_of_config.find(candidates[c]);
            if (known != key_of_config.end()) {
                keys[c] = known->second;
                continue;
            }
            SubregionPartition p = partition_roi(coords, candidates[c]);
            keys[c] = p.assignment;
            key_of_config[candidates[c]] = p.assignment;
            if (!by_partition.count(p.assignment) && !fresh_index.count(p.assignment)) {
                fresh_index[p.assignment] = fresh.size();
                fresh.push_back(std::move(p));
            }
        }
        std::vector<Entry> fitted(fresh.size());
        parallel_for(fresh.size(), options.threads, [&](std::size_t i) {
            try {
                RoiCovModel m = fit_roi_cov(e_r, coords, fresh[i], warm);
                fitted[i] = {bic_score(m.loglik, m.bic_parameters(), n_obs), std::move(m)};
            } catch (const std::exception&) {
                fitted[i].bic = std::numeric_limits<double>::infinity();
            }
        });
        for (std::size_t i = 0; i < fresh.size(); ++i) {
            by_partition[fresh[i].assignment] = std::move(fitted[i]);
        }

        GridConfig best_config = current;
        std::vector<int> best_key = current_key;
        double best_bic = by_partition[current_key].bic;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            const double b = by_partition[keys[c]].bic;
            result.visited.emplace_back(candidates[c], b);
            if (b < best_bic) {
                best_bic = b;
                best_config = candidates[c];
                best_key = keys[c];
            }
        }
        if (best_key == current_key) {
            break;
        }
        current = best_config;
        current_key = best_key;
    }

    const Entry& chosen = by_partition[current_key];
    result.config = current;
    result.partition = chosen.model.partition;
    result.bic = chosen.bic;
    result.frozen_model = chosen.model;
    if (options.refit_free_angles) {
        RoiFitOptions free = warm;
        free.family = CovFamily::AnisotropicFree;
        free.start_params = chosen.model.params;
        free.start_omega = chosen.model.omega;
        result.model = fit_roi_cov(e_r, coords, chosen.model.partition, free);
    } else {
        result.model = chosen.model;
    }
    result.model_bic = bic_score(result.model.loglik, result.model.bic_parameters(), n_obs);
    return result;
}

}  // namespace stfmri
