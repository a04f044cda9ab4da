#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "stfmri/design.hpp"
#include "stfmri/temporal.hpp"

using namespace stfmri;

namespace {

VectorXd simulate_ar2(const Ar2Params& ar, int T, std::mt19937_64& rng, int burn = 500) {
    std::normal_distribution<double> N(0, std::sqrt(ar.sigma2));
    VectorXd e(T + burn);
    double a = 0, b = 0;
    for (int t = 0; t < T + burn; ++t) {
        const double x = ar.phi1 * a + ar.phi2 * b + N(rng);
        b = a;
        a = x;
        e[t] = x;
    }
    return e.tail(T);
}

MatrixXd test_design(int per_session = 16) {
    return design_matrix(BlockDesign::alternating(2.0, 3, per_session, 4), canonical_hrf(2.0));
}

}  // namespace

TEST_CASE("stationarity region") {
    CHECK(Ar2Params{0.5, 0.3, 1}.stationary());
    CHECK_FALSE(Ar2Params{0.8, 0.3, 1}.stationary());
    CHECK_FALSE(Ar2Params{0.1, -1.0, 1}.stationary());
    CHECK_FALSE(Ar2Params{0.1, 0.1, 0.0}.stationary());
    CHECK_THROWS_AS(ar2_autocovariance({1.2, 0.0, 1.0}, 3), NonStationaryAr);
}

TEST_CASE("autocovariance matches the MA weights oracle") {
    for (auto ar : {Ar2Params{0.5, 0.3, 1.0}, Ar2Params{-0.4, 0.2, 2.5}, Ar2Params{1.2, -0.5, 0.7},
                    Ar2Params{0.0, 0.0, 1.3}}) {
        const VectorXd g = ar2_autocovariance(ar, 8);
        const VectorXd ref = oracle::ar2_autocov_psi(ar.phi1, ar.phi2, ar.sigma2, 8);
        CHECK((g - ref).cwiseAbs().maxCoeff() < 1e-10 * ref.cwiseAbs().maxCoeff());
    }
    const VectorXd white = ar2_autocovariance({0, 0, 2.0}, 2);
    CHECK(white[0] == doctest::Approx(2.0));
    CHECK(white[1] == 0.0);
}

TEST_CASE("whitening inverts the AR(2) covariance") {
    const Ar2Params ar{0.6, -0.2, 1.7};
    const int T = 20;
    const MatrixXd K = oracle::toeplitz(oracle::ar2_autocov_psi(ar.phi1, ar.phi2, ar.sigma2, T), T);
    // L K L^T = I
    const MatrixXd L = ar2_whiten(ar, MatrixXd::Identity(T, T));
    CHECK((L * K * L.transpose() - MatrixXd::Identity(T, T)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(ar2_log_det(ar, T) == doctest::Approx(std::log(K.determinant())).epsilon(1e-10));
}

TEST_CASE("profile likelihood and GLS against dense oracles") {
    std::mt19937_64 rng(3);
    const MatrixXd X = test_design();
    const Ar2Params truth{0.4, 0.2, 1.5};
    VectorXd beta(6);
    beta << 100, 1, -0.5, 0.8, 2, 1;
    const VectorXd y = X * beta + simulate_ar2(truth, 48, rng);
    for (auto ar : {truth, Ar2Params{-0.3, 0.1, 0.8}}) {
        const MatrixXd K = oracle::toeplitz(oracle::ar2_autocov_psi(ar.phi1, ar.phi2, ar.sigma2, 48), 48);
        CHECK(profile_loglik(ar, y, X) == doctest::Approx(oracle::profile_loglik_dense(K, y, X)).epsilon(1e-10));
        const MatrixXd Ki = K.inverse();
        const VectorXd b_ref = (X.transpose() * Ki * X).ldlt().solve(X.transpose() * Ki * y);
        CHECK((gls_beta(ar, y, X) - b_ref).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("white noise GLS equals OLS") {
        const VectorXd ols = X.colPivHouseholderQr().solve(y);
        CHECK((gls_beta({0, 0, 3.0}, y, X) - ols).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("unconstrained map covers the stationary region") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(-4, 4);
    for (int i = 0; i < 200; ++i) {
        const Eigen::Vector3d u(U(rng), U(rng), U(rng));
        const Ar2Params ar = ar2_from_unconstrained(u);
        CHECK(ar.stationary());
        const Ar2Params back = ar2_from_unconstrained(ar2_to_unconstrained(ar));
        CHECK(back.phi1 == doctest::Approx(ar.phi1).epsilon(1e-9));
        CHECK(back.phi2 == doctest::Approx(ar.phi2).epsilon(1e-9));
    }
}

TEST_CASE("fit_voxel recovers AR(2) parameters on a long series") {
    std::mt19937_64 rng(21);
    const MatrixXd X = test_design(400);
    const Ar2Params truth{0.45, 0.25, 1.0};
    VectorXd beta(6);
    beta << 50, 0, 0, 1, 3, 1;
    const VectorXd y = X * beta + simulate_ar2(truth, 1200, rng);
    const VoxelFit fit = fit_voxel(y, X);
    CHECK(fit.ar.phi1 == doctest::Approx(0.45).epsilon(0.15));
    CHECK(fit.ar.phi2 == doctest::Approx(0.25).epsilon(0.25));
    CHECK(fit.ar.sigma2 == doctest::Approx(1.0).epsilon(0.1));
    CHECK(fit.beta[design_col::task_bold] == doctest::Approx(3.0).epsilon(0.2));
    // the optimum beats the truth and nearby points
    CHECK(fit.loglik >= profile_loglik(truth, y, X) - 1e-9);
    CHECK(fit.loglik >= profile_loglik({fit.ar.phi1 + 0.02, fit.ar.phi2, fit.ar.sigma2}, y, X));
    CHECK(fit.loglik == doctest::Approx(profile_loglik(fit.ar, y, X)));
}

TEST_CASE("standardized residuals") {
    std::mt19937_64 rng(5);
    const MatrixXd X = test_design();
    MatrixXd series(3, 48);
    std::vector<VoxelFit> fits;
    for (int v = 0; v < 3; ++v) {
        series.row(v) = (X * VectorXd::Constant(6, 1.0) + simulate_ar2({0.3, 0.1, 2.0}, 48, rng)).transpose();
        fits.push_back(fit_voxel(series.row(v).transpose(), X));
    }
    const MatrixXd e = standardized_residuals(series, X, fits);
    CHECK(e.rows() == 3);
    CHECK(e.cols() == 46);
    const VoxelFit& f = fits[1];
    const VectorXd r = series.row(1).transpose() - X * f.beta;
    const double e5 = (r[6] - f.ar.phi1 * r[5] - f.ar.phi2 * r[4]) / std::sqrt(f.ar.sigma2);
    CHECK(e(1, 4) == doctest::Approx(e5).epsilon(1e-12));
}
