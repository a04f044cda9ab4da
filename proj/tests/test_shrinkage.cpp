#include <doctest.h>

#include <map>
#include <random>

#include "oracles.hpp"
#include "stfmri/shrinkage.hpp"
#include "stfmri/spatial.hpp"

using namespace stfmri;

namespace {

std::vector<GridPoint> box(int nx, int ny, int nz) {
    std::vector<GridPoint> c;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) c.push_back({x, y, z});
    return c;
}

// Contrast along x by direct enumeration of voxel pairs.
std::map<int, double> contrast_x(const MatrixXd& cov, const std::vector<GridPoint>& c) {
    std::map<int, std::pair<double, int>> acc;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = 0; j < c.size(); ++j)
            if (c[j][0] == c[i][0] + 1 && c[j][1] == c[i][1] && c[j][2] == c[i][2]) {
                acc[c[i][0]].first += cov(i, i) + cov(j, j) - 2 * cov(i, j);
                acc[c[i][0]].second += 1;
            }
    std::map<int, double> out;
    for (auto& [k, v] : acc) out[k] = v.first / v.second;
    return out;
}

double objective_at(const ShrinkageResult& r, const MatrixXd& emp, const MatrixXd& mle,
                    const std::vector<GridPoint>& c, double d) {
    const Contrasts cd = directional_contrasts((1 - d) * emp + d * mle, c);
    double s = 0;
    for (int b = 0; b < 3; ++b)
        if (r.used[b]) s += (r.smoothed[b].value - cd[b].value).squaredNorm();
    return s;
}

}  // namespace

TEST_CASE("directional contrasts on simple matrices") {
    const auto c = box(4, 3, 2);
    const Contrasts eq = directional_contrasts(MatrixXd::Constant(24, 24, 0.7), c);
    for (int b = 0; b < 3; ++b) CHECK(eq[b].value.cwiseAbs().maxCoeff() < 1e-15);
    const Contrasts id = directional_contrasts(MatrixXd::Identity(24, 24), c);
    CHECK(id[0].value.size() == 3);
    CHECK(id[1].value.size() == 2);
    CHECK(id[2].value.size() == 1);
    for (int b = 0; b < 3; ++b) CHECK((id[b].value.array() == 2.0).all());
    MatrixXd pair(2, 2);
    pair << 1, 0.3, 0.3, 1;
    CHECK(directional_contrasts(pair, {{0, 0, 0}, {1, 0, 0}})[0].value[0] == doctest::Approx(1.4));
    CHECK(directional_contrasts(pair, {{0, 0, 0}, {1, 0, 0}})[1].empty());
}

TEST_CASE("contrasts match pairwise enumeration and are linear") {
    std::mt19937_64 rng(6);
    const auto c = box(6, 4, 3);
    const MatrixXd A = oracle::random_spd(72, rng), B = oracle::random_spd(72, rng);
    const Contrasts ca = directional_contrasts(A, c);
    const auto ref = contrast_x(A, c);
    for (Eigen::Index k = 0; k < ca[0].value.size(); ++k) {
        CHECK(ca[0].value[k] == doctest::Approx(ref.at(static_cast<int>(ca[0].position[k]))).epsilon(1e-12));
    }
    const Contrasts cb = directional_contrasts(B, c);
    const Contrasts mix = directional_contrasts(0.3 * A + 0.7 * B, c);
    for (int b = 0; b < 3; ++b)
        CHECK((mix[b].value - (0.3 * ca[b].value + 0.7 * cb[b].value)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("select_delta minimizes the contrast mismatch") {
    const auto c = box(8, 6, 2);
    std::mt19937_64 rng(12);
    AnisoParams p;
    p.lengths = {2.5, 1.2, 1.0};
    const MatrixXd mle = roi_error_cov(nonstat_cov(c, SubregionPartition::single(c), {p}), 0.9);
    std::normal_distribution<double> N(0, 1);
    MatrixXd d(96, 60);
    for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = N(rng);
    const MatrixXd emp = sample_covariance(Eigen::LLT<MatrixXd>(mle).matrixL() * d);
    const ShrinkageResult r = select_delta(emp, mle, c);
    CHECK(r.delta >= 0.0);
    CHECK(r.delta <= 1.0);
    CHECK(r.used == std::array<bool, 3>{true, true, false});
    // exhaustive grid oracle
    double best = 1e300, arg = -1;
    for (int k = 0; k <= 10000; ++k) {
        const double dd = k / 10000.0;
        const double f = objective_at(r, emp, mle, c, dd);
        if (f < best) {
            best = f;
            arg = dd;
        }
    }
    CHECK(std::abs(r.delta - arg) <= 1e-3);
    CHECK(r.objective <= best + 1e-12 * (1 + best));
    CHECK(r.objective == doctest::Approx(objective_at(r, emp, mle, c, r.delta)).epsilon(1e-10));
    CHECK(r.objective <= objective_at(r, emp, mle, c, 0.0));
    CHECK(r.objective <= objective_at(r, emp, mle, c, 1.0));
    CHECK((r.shrunk - ((1 - r.delta) * emp + r.delta * mle)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(r.shrunk).eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("select_delta edge cases") {
    const auto c = box(6, 5, 1);
    std::mt19937_64 rng(1);
    const MatrixXd A = oracle::random_spd(30, rng);
    SUBCASE("identical operands give delta 0") {
        CHECK(select_delta(A, A, c).delta == 0.0);
    }
    SUBCASE("p = 1 leaves nothing to fix") {
        const MatrixXd B = oracle::random_spd(30, rng);
        ShrinkageConfig cfg;
        cfg.p = 1.0;
        CHECK(select_delta(A, B, c, cfg).delta == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("a target placed at 0.4 between the curves is found") {
        // With p = 0 the smooth is the least-squares line. The empirical x
        // contrast is a line plus a wiggle w orthogonal to lines; the model
        // contrast carries -1.5 w, so the line sits at the 0.4 mixture.
        const double w[5] = {1, -2, 0, 2, -1};
        auto with_x_corr = [&](double scale) {
            MatrixXd m = MatrixXd::Identity(30, 30);
            for (int i = 0; i < 30; ++i)
                for (int j = 0; j < 30; ++j)
                    if (c[j][0] == c[i][0] + 1 && c[j][1] == c[i][1]) {
                        const double contrast = 1.6 + scale * w[c[i][0]];
                        m(i, j) = m(j, i) = (2.0 - contrast) / 2.0;
                    }
            return m;
        };
        ShrinkageConfig cfg;
        cfg.p = 0.0;
        const ShrinkageResult r = select_delta(with_x_corr(0.05), with_x_corr(-0.075), c, cfg);
        CHECK(r.delta == doctest::Approx(0.4).epsilon(1e-3 / 0.4));
        CHECK(r.delta_closed_form == doctest::Approx(0.4).epsilon(1e-12));
    }
    SUBCASE("degenerate geometry throws") {
        const std::vector<GridPoint> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
        CHECK_THROWS(select_delta(MatrixXd::Identity(3, 3), MatrixXd::Identity(3, 3), line));
    }
}
