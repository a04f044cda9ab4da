#include <doctest.h>

#include <random>
#include <set>

#include "stfmri/selection.hpp"
#include "stfmri/simulation.hpp"

using namespace stfmri;

namespace {

std::vector<GridPoint> box(int nx, int ny, int nz) {
    std::vector<GridPoint> c;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) c.push_back({x, y, z});
    return c;
}

bool respects_floor(const SubregionPartition& p) {
    if (p.count() == 1) return true;
    for (int s : p.sizes())
        if (s < kMinSubregionVoxels) return false;
    return true;
}

}  // namespace

TEST_CASE("partition_roi splits a box into equal cells") {
    const auto c = box(12, 6, 2);  // 144 voxels
    const auto p = partition_roi(c, {2, 1, 1});
    CHECK(p.count() == 2);
    CHECK(p.sizes() == std::vector<int>{72, 72});
    CHECK(p.assignment.front() == 1);
    CHECK(p.assignment[11] == 2);
    CHECK(p.centroids[0].x() == doctest::Approx(2.5));
    const auto four = partition_roi(c, {2, 2, 1});
    CHECK(four.count() == 4);
    CHECK(respects_floor(four));
}

TEST_CASE("partition_roi merges small cells") {
    const auto c = box(12, 6, 2);
    // 6 x 2 cells of 12 voxels each: everything merges until all groups reach 36
    for (GridConfig g : {GridConfig{6, 2, 1}, GridConfig{12, 6, 2}, GridConfig{3, 3, 2}, GridConfig{5, 1, 1}}) {
        const auto p = partition_roi(c, g);
        CHECK(respects_floor(p));
        int total = 0;
        for (int s : p.sizes()) total += s;
        CHECK(total == 144);
    }
    const auto tiny = box(4, 4, 1);
    CHECK(partition_roi(tiny, {2, 2, 1}).count() == 1);
    CHECK(partition_roi(c, {1, 1, 1}) == SubregionPartition::single(c));
}

TEST_CASE("partition_roi is deterministic and covers every voxel") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> U(0, 9);
    std::vector<GridPoint> c;
    std::set<GridPoint> seen;
    while (c.size() < 300) {
        GridPoint g{U(rng), U(rng), U(rng) % 4};
        if (seen.insert(g).second) c.push_back(g);
    }
    for (int lx = 1; lx <= 4; ++lx)
        for (int ly = 1; ly <= 3; ++ly) {
            const auto p = partition_roi(c, {lx, ly, 2});
            CHECK(p == partition_roi(c, {lx, ly, 2}));
            CHECK(respects_floor(p));
            CHECK(p.assignment.size() == c.size());
        }
}

TEST_CASE("bic_score and search limits") {
    CHECK(bic_score(-100.0, 3, 1000) == doctest::Approx(200 + 3 * std::log(1000.0)));
    CHECK(search_axis_limit(box(12, 6, 2)) == 4);
    CHECK(search_axis_limit(box(4, 4, 1)) == 1);
}

TEST_CASE("bic_search prefers a split on a two-regime field") {
    const auto coords = box(12, 6, 2);
    const RoiTruth t = two_regime_truth();
    const auto part = partition_roi(coords, t.partition);
    const MatrixXd cov = roi_error_cov(nonstat_cov(coords, part, t.params), t.omega);
    std::mt19937_64 rng(4);
    const MatrixXd e = sample_mvn(psd_factor(to_correlation(cov)), 142, rng);
    SearchOptions opt;
    opt.random_configs = 3;
    const SelectionResult r = bic_search(e, coords, 99, opt);
    CHECK(r.partition.count() >= 2);
    CHECK(respects_floor(r.partition));
    CHECK(r.bic <= r.visited.front().second);
    for (const auto& [cfg, bic] : r.visited) CHECK(bic >= r.bic);
    CHECK(r.model.family == CovFamily::AnisotropicFree);
    CHECK(r.model.partition == r.partition);
    SUBCASE("thread count does not change the outcome") {
        SearchOptions four = opt;
        four.threads = 4;
        const SelectionResult r4 = bic_search(e, coords, 99, four);
        CHECK(r4.config == r.config);
        CHECK(r4.bic == r.bic);
        CHECK(r4.model.loglik == r.model.loglik);
    }
}
