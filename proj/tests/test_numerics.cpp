#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "stfmri/numerics.hpp"
#include "stfmri/parallel.hpp"
#include "stfmri/rng.hpp"

using namespace stfmri;

TEST_CASE("nelder_mead finds the Rosenbrock minimum") {
    auto f = [](const VectorXd& x) { return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2); };
    SimplexConfig cfg;
    cfg.x_tol = 1e-10;
    cfg.f_tol = 1e-14;
    cfg.max_iter = 20000;
    const auto r = nelder_mead(f, VectorXd::Constant(2, -1.2), cfg);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("nelder_mead rejects a non-finite start") {
    auto f = [](const VectorXd&) { return std::numeric_limits<double>::infinity(); };
    CHECK_THROWS_AS(nelder_mead(f, VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("golden_section on a parabola") {
    const double x = golden_section([](double t) { return (t - 0.3) * (t - 0.3); }, 0.0, 1.0, 1e-10);
    CHECK(x == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("smoothing spline limits") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> N(0, 1);
    VectorXd xs(9), ys(9);
    for (int i = 0; i < 9; ++i) {
        xs[i] = i + 0.3 * (i % 2);
        ys[i] = std::sin(xs[i]) + 0.2 * N(rng);
    }
    SUBCASE("p = 1 interpolates") {
        CHECK((smoothing_spline(xs, ys, 1.0) - ys).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("p = 0 is the least-squares line") {
        MatrixXd A(9, 2);
        A.col(0).setOnes();
        A.col(1) = xs;
        const VectorXd line = A * A.colPivHouseholderQr().solve(ys);
        CHECK((smoothing_spline(xs, ys, 0.0) - line).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("linear data is reproduced for every p") {
        const VectorXd lin = 2.0 * xs.array() - 1.0;
        for (double p : {0.0, 0.1, 0.5, 0.9}) {
            CHECK((smoothing_spline(xs, lin, p) - lin).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
    SUBCASE("roughness decreases as p decreases") {
        auto rough = [&](const VectorXd& g) {
            double s = 0;
            for (int i = 1; i + 1 < 9; ++i) s += std::pow(g[i + 1] - 2 * g[i] + g[i - 1], 2);
            return s;
        };
        CHECK(rough(smoothing_spline(xs, ys, 0.1)) < rough(smoothing_spline(xs, ys, 0.9)));
    }
}

TEST_CASE("gaussian log-likelihood agrees with the dense formula") {
    std::mt19937_64 rng(11);
    const MatrixXd cov = oracle::random_spd(6, rng);
    std::normal_distribution<double> N(0, 1);
    MatrixXd data(6, 9);
    for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = N(rng);
    const double ref = oracle::gaussian_logdensity_dense(cov, data);
    CHECK(gaussian_loglik(cov, data).value == doctest::Approx(ref).epsilon(1e-12));
    const MatrixXd G = scatter_factor(data);
    CHECK((G * G.transpose() - data * data.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(gaussian_loglik_factor(cov, G, 9).value == doctest::Approx(ref).epsilon(1e-12));
    // more replicates than dimensions exercises the reduced factor
    MatrixXd wide(6, 40);
    for (Eigen::Index i = 0; i < wide.size(); ++i) wide.data()[i] = N(rng);
    CHECK(gaussian_loglik_factor(cov, scatter_factor(wide), 40).value ==
          doctest::Approx(oracle::gaussian_logdensity_dense(cov, wide)).epsilon(1e-12));
}

TEST_CASE("robust_cholesky adds jitter only when needed") {
    MatrixXd spd = MatrixXd::Identity(3, 3);
    CHECK(robust_cholesky(spd).jitter == 0.0);
    MatrixXd singular = MatrixXd::Ones(3, 3);
    const auto f = robust_cholesky(singular);
    CHECK(f.jitter > 0.0);
    MatrixXd neg = -MatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(robust_cholesky(neg), NotPositiveDefinite);
}

TEST_CASE("sample_covariance divides by the replicate count") {
    MatrixXd d(2, 2);
    d << 1, -1, 2, 0;
    const MatrixXd S = sample_covariance(d);
    CHECK(S(0, 0) == doctest::Approx(1.0));
    CHECK(S(0, 1) == doctest::Approx(1.0));
    CHECK(S(1, 1) == doctest::Approx(2.0));
}

TEST_CASE("stream seeds depend only on their inputs") {
    CHECK(stream_seed(1, "a", 0) == stream_seed(1, "a", 0));
    CHECK(stream_seed(1, "a", 0) != stream_seed(1, "a", 1));
    CHECK(stream_seed(1, "a", 0) != stream_seed(1, "b", 0));
    CHECK(stream_seed(1, "a", 0) != stream_seed(2, "a", 0));
    auto g1 = make_stream(5, "x", 3), g2 = make_stream(5, "x", 3);
    CHECK(g1() == g2());
}

TEST_CASE("parallel_for is schedule independent and reports the lowest failing unit") {
    std::vector<double> a(100), b(100);
    parallel_for(100, 1, [&](std::size_t i) { a[i] = std::sqrt(static_cast<double>(i)); });
    parallel_for(100, 4, [&](std::size_t i) { b[i] = std::sqrt(static_cast<double>(i)); });
    CHECK(a == b);
    try {
        parallel_for(50, 1, [&](std::size_t i) {
            if (i == 7 || i == 30) throw std::runtime_error(std::to_string(i));
        });
        FAIL("expected a throw");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "7");
    }
}
