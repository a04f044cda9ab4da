#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "stfmri/glasso.hpp"

using namespace stfmri;

TEST_CASE("glasso matches the ADMM oracle on random inputs") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        const MatrixXd S = oracle::random_spd(5, rng);
        for (double lambda : {0.02, 0.1, 0.25}) {
            const GlassoResult g = glasso(S, lambda);
            const MatrixXd ref = oracle::glasso_admm(S, lambda);
            CHECK(kkt_residual(g.W, S, lambda) <= 1e-5);
            CHECK(g.objective == doctest::Approx(glasso_objective(ref, S, lambda)).epsilon(1e-5));
            CHECK((g.W - ref).cwiseAbs().maxCoeff() < 1e-5);
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j) CHECK((g.W(i, j) == 0.0) == (std::abs(ref(i, j)) < 1e-9));
            CHECK(g.W == g.W.transpose());
        }
    }
}

TEST_CASE("glasso limits") {
    std::mt19937_64 rng(2);
    const MatrixXd S = oracle::random_spd(6, rng);
    SUBCASE("lambda = 0 gives the inverse") {
        const GlassoResult g = glasso(S, 0.0);
        CHECK((g.W - S.inverse()).cwiseAbs().maxCoeff() < 1e-6);
    }
    SUBCASE("large lambda gives an exactly diagonal precision") {
        const double big = 10 * S.cwiseAbs().maxCoeff();
        const GlassoResult g = glasso(S, big);
        CHECK(g.nnz_offdiag == 0);
        for (int i = 0; i < 6; ++i) {
            CHECK(g.W(i, i) == doctest::Approx(1.0 / S(i, i)));
            for (int j = 0; j < 6; ++j)
                if (i != j) CHECK(g.W(i, j) == 0.0);
        }
    }
    SUBCASE("default grid spans empty to dense supports") {
        const auto grid = default_lambda_grid(S, 10);
        CHECK(glasso(S, grid.front()).nnz_offdiag == 0);
        CHECK(glasso(S, grid.back()).nnz_offdiag > 0);
        CHECK(grid.front() > grid.back());
        CHECK(grid.back() == doctest::Approx(1e-3 * grid.front()));
    }
}

TEST_CASE("roi means, edges and cross-validation") {
    const Parcellation p({{1, {0, 0, 0}, 1}, {2, {1, 0, 0}, 1}, {3, {2, 0, 0}, 2}});
    MatrixXd e(3, 2);
    e << 1, 2, 3, 4, 5, 6;
    const MatrixXd m = roi_means(e, p);
    CHECK(m(0, 0) == 2.0);
    CHECK(m(0, 1) == 3.0);
    CHECK(m(1, 1) == 6.0);

    MatrixXd W = MatrixXd::Identity(3, 3);
    W(0, 2) = W(2, 0) = -0.5;
    W(1, 2) = W(2, 1) = 0.2;
    const auto E = edges(W);
    REQUIRE(E.size() == 2);
    CHECK(E[0].r == 1);
    CHECK(E[0].s == 3);
    CHECK(E[1].weight == 0.2);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> N(0, 1);
    MatrixXd ebar(6, 80);
    for (Eigen::Index i = 0; i < ebar.size(); ++i) ebar.data()[i] = N(rng);
    ebar.row(1) += 0.8 * ebar.row(0);
    CvConfig cfg;
    cfg.lambda_grid = default_lambda_grid(sample_covariance(ebar), 8);
    cfg.seed = 77;
    const CvResult a = cv_lambda(ebar, cfg);
    cfg.threads = 3;
    const CvResult b = cv_lambda(ebar, cfg);
    CHECK(a.lambda_hat == b.lambda_hat);
    CHECK(a.sse == b.sse);
    CHECK(a.test_columns.size() == 8u);
    const auto it = std::min_element(a.sse.begin(), a.sse.end());
    CHECK(a.lambda_hat == a.lambdas[it - a.sse.begin()]);
}
