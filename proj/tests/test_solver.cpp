#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "selinf/error.hpp"
#include "selinf/solver.hpp"
#include "support.hpp"

using namespace selinf;

namespace {

double null_threshold(const RegressionData& d) {
    return (d.X().transpose() * d.y()).lpNorm<Eigen::Infinity>() / d.y().norm();
}

}  // namespace

TEST_CASE("lambda rule on a single unit column lies in (0, 1)") {
    Matrix X = Matrix::Zero(30, 1);
    X(0, 0) = 1.0;
    const double lam = choose_lambda(X, TuningSpec{1.0, 500, 3});
    CHECK(lam > 0.0);
    CHECK(lam < 1.0);
}

TEST_CASE("lambda rule rejects bad tuning") {
    const Matrix X = testsupport::random_design(20, 5, 0.0, 1);
    CHECK_THROWS_AS(choose_lambda(X, TuningSpec{0.0, 1000, 1}), Error);
    CHECK_THROWS_AS(choose_lambda(X, TuningSpec{1.6, 1000, 1}), Error);
    CHECK_THROWS_AS(choose_lambda(X, TuningSpec{0.8, 99, 1}), Error);
    CHECK_THROWS_AS(choose_lambda(Matrix::Zero(20, 5), TuningSpec{}), Error);
}

TEST_CASE("lambda rule matches a large independent Monte Carlo") {
    const Matrix X = testsupport::random_design(100, 200, 0.3, 2);
    const TuningSpec spec{0.8, 1000, 11};
    const double lam = choose_lambda(X, spec);

    std::mt19937_64 gen(987654321);
    std::normal_distribution<double> nd;
    const int M = 100000;
    double sum = 0.0, sumsq = 0.0;
    Vector e(100);
    for (int m = 0; m < M; ++m) {
        for (Index i = 0; i < 100; ++i) e[i] = nd(gen);
        const double v = (X.transpose() * e).lpNorm<Eigen::Infinity>() / e.norm();
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / M;
    const double var = sumsq / M - mean * mean;
    const double se = 0.8 * std::sqrt(var / 1000.0 + var / M);
    CHECK(std::abs(lam - 0.8 * mean) <= 2.0 * se);
}

TEST_CASE("lambda rule is reproducible and thread independent") {
    const Matrix X = testsupport::random_design(60, 80, 0.3, 3);
    const double a = expected_noise_score(X, 1000, 5, 1);
    CHECK(a == expected_noise_score(X, 1000, 5, 1));
    CHECK(a == expected_noise_score(X, 1000, 5, 3));
    CHECK(a != expected_noise_score(X, 1000, 6, 1));
}

TEST_CASE("null solution above the threshold") {
    const Matrix X = testsupport::random_design(40, 10, 0.3, 4);
    const RegressionData d(testsupport::sparse_response(X, 2, 1.0, 1.0, 5), X);
    const double lam = 1.01 * null_threshold(d);
    const SqrtLassoFit fit = fit_sqrt_lasso(d, lam);
    CHECK(fit.model.empty());
    CHECK(fit.beta.isZero(0.0));
    const Vector z = X.transpose() * d.y() / (lam * d.y().norm());
    CHECK((fit.subgrad - z).lpNorm<Eigen::Infinity>() < 1e-14);
    CHECK(fit.residual_norm == doctest::Approx(d.y().norm()));
}

TEST_CASE("orthogonal design with one strong column has the closed form") {
    const Index n = 40, p = 5;
    const Matrix X = testsupport::orthogonal_design(n, p, 6);
    selinf::Rng rng(7);
    const Vector y = 12.0 * X.col(2) + rng.normal_vector(n);
    const RegressionData d(y, X);
    // Between the second largest and the largest |x_j^T y| / ||y||.
    Vector score = (X.transpose() * y).cwiseAbs() / y.norm();
    const double top = score.maxCoeff();
    score[2] = 0.0;
    const double lam = 0.5 * (top + score.maxCoeff());
    const SqrtLassoFit fit = fit_sqrt_lasso(d, lam);
    REQUIRE(fit.model.active == std::vector<Index>{2});
    CHECK(fit.model.signs[0] == 1);
    const ProjectionPair proj = build_projection(d, fit.model);
    const double sigma_e = std::sqrt(ols_sigma2(d, proj));
    const double c_e = sigma_e * std::sqrt((n - 1.0) / (1.0 - lam * lam));
    CHECK(fit.residual_norm == doctest::Approx(c_e).epsilon(1e-10));
    CHECK(fit.beta[2] == doctest::Approx(X.col(2).dot(y) - lam * c_e).epsilon(1e-10));
}

TEST_CASE("objective is no worse than a proximal-gradient oracle") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix X = testsupport::random_design(50, 10, 0.3, 100 + seed);
        const RegressionData d(testsupport::sparse_response(X, 3, 4.0, 1.0, 200 + seed), X);
        const double lam = choose_lambda(X, TuningSpec{0.8, 1000, seed});
        const SqrtLassoFit fit = fit_sqrt_lasso(d, lam);
        const Vector ob = oracle::sqrt_lasso_prox(X, d.y(), lam, 20000);
        const double mine = sqrt_lasso_objective(X, d.y(), fit.beta, lam);
        const double ref = oracle::sqrt_lasso_objective(X, d.y(), ob, lam);
        CHECK(mine <= ref * (1.0 + 1e-6));
        CHECK((fit.beta - ob).lpNorm<Eigen::Infinity>() < 1e-4);
    }
}

TEST_CASE("fit invariants and the residual identity") {
    const Matrix X = testsupport::random_design(80, 120, 0.3, 8);
    const RegressionData d(testsupport::sparse_response(X, 5, 5.0, 1.0, 9), X);
    const double lam = choose_lambda(X, TuningSpec{0.8, 1000, 1});
    const SqrtLassoFit fit = fit_sqrt_lasso(d, lam);
    REQUIRE(!fit.model.empty());
    CHECK(fit.kkt_residual <= 1e-8);
    CHECK(check_kkt(fit, d) <= 1e-8);
    CHECK(fit.subgrad.lpNorm<Eigen::Infinity>() <= 1.0 + 1e-6);
    for (std::size_t i = 0; i < fit.model.size(); ++i) {
        const Index j = fit.model.active[i];
        CHECK((fit.beta[j] > 0 ? 1 : -1) == fit.model.signs[i]);
        CHECK(fit.subgrad[j] == fit.model.signs[i]);
    }
    for (Index j = 0; j < X.cols(); ++j)
        if (!std::binary_search(fit.model.active.begin(), fit.model.active.end(), j)) CHECK(fit.beta[j] == 0.0);

    const ProjectionPair proj = build_projection(d, fit.model);
    Vector z(static_cast<Index>(fit.model.size()));
    for (std::size_t i = 0; i < fit.model.size(); ++i) z[static_cast<Index>(i)] = fit.model.signs[i];
    const Vector lhs = d.y() - X * fit.beta;
    const Vector rhs = proj.residual(d.y()) + lam * fit.residual_norm * (proj.pinv.transpose() * z);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("lasso_equivalent_gamma") {
    SUBCASE("empty model reduces to lam ||y||") {
        const Matrix X = testsupport::random_design(30, 6, 0.0, 10);
        const RegressionData d(testsupport::sparse_response(X, 1, 1.0, 1.0, 11), X);
        const double lam = 1.5 * null_threshold(d);
        const SqrtLassoFit fit = fit_sqrt_lasso(d, lam);
        REQUIRE(fit.model.empty());
        const ProjectionPair proj = build_projection(d, fit.model);
        CHECK(lasso_equivalent_gamma(fit, proj, ols_sigma2(d, proj)) == doctest::Approx(lam * d.y().norm()));
    }
    SUBCASE("orthogonal design") {
        const Index n = 60, p = 8;
        const Matrix X = testsupport::orthogonal_design(n, p, 12);
        selinf::Rng rng(13);
        const Vector y = X * (Vector(p) << 10, -9, 8, 0, 0, 0, 0, 0).finished() + rng.normal_vector(n);
        const RegressionData d(y, X);
        const double lam = 0.3;
        const SqrtLassoFit fit = fit_sqrt_lasso(d, lam);
        const double k = static_cast<double>(fit.model.size());
        REQUIRE(k >= 1);
        const ProjectionPair proj = build_projection(d, fit.model);
        const double s2 = ols_sigma2(d, proj);
        const double expected = lam * std::sqrt(s2) * std::sqrt((n - k) / (1.0 - lam * lam * k));
        CHECK(lasso_equivalent_gamma(fit, proj, s2) == doctest::Approx(expected).epsilon(1e-10));
        CHECK(dual_norm_sq(proj, fit.model.signs) == doctest::Approx(k).epsilon(1e-10));
    }
    SUBCASE("plain LASSO at the equivalent gamma reproduces the fit") {
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            const Matrix X = testsupport::random_design(70, 40, 0.3, 20 + seed);
            const RegressionData d(testsupport::sparse_response(X, 4, 5.0, 1.0, 30 + seed), X);
            const double lam = choose_lambda(X, TuningSpec{0.8, 1000, seed});
            const SqrtLassoFit fit = fit_sqrt_lasso(d, lam);
            const ProjectionPair proj = build_projection(d, fit.model);
            const double gamma = lasso_equivalent_gamma(fit, proj, ols_sigma2(d, proj));
            CHECK(gamma == doctest::Approx(lam * fit.residual_norm).epsilon(1e-9));
            const Vector b = oracle::lasso_cd(X, d.y(), gamma, 1e-14, 200000);
            CHECK((b - fit.beta).lpNorm<Eigen::Infinity>() <= 1e-6);
        }
    }
}

TEST_CASE("check_kkt detects a perturbed solution and agrees with the oracle") {
    const Matrix X = testsupport::random_design(50, 10, 0.3, 40);
    const RegressionData d(testsupport::sparse_response(X, 3, 4.0, 1.0, 41), X);
    const double lam = choose_lambda(X, TuningSpec{0.8, 1000, 2});
    const SqrtLassoFit fit = fit_sqrt_lasso(d, lam);
    REQUIRE(!fit.model.empty());
    CHECK(check_kkt(fit, d) <= 1e-8);

    SqrtLassoFit bad = fit;
    bad.beta[fit.model.active[0]] += 0.1;
    CHECK(check_kkt(bad, d) > 1e-8);

    // KKT residual of the oracle's solution, with the subgradient implied by its residual.
    SqrtLassoFit other = fit;
    other.beta = oracle::sqrt_lasso_prox(X, d.y(), lam, 40000);
    const Vector r = d.y() - X * other.beta;
    other.subgrad = X.transpose() * r / (r.norm() * lam);
    for (Index j = 0; j < X.cols(); ++j)
        if (other.beta[j] != 0.0) other.subgrad[j] = other.beta[j] > 0 ? 1.0 : -1.0;
    CHECK(std::abs(check_kkt(other, d) - check_kkt(fit, d)) <= 1e-6);
}

TEST_CASE("fit is scale equivariant") {
    const Matrix X = testsupport::random_design(60, 90, 0.3, 50);
    const RegressionData d(testsupport::sparse_response(X, 5, 5.0, 1.0, 51), X);
    const double lam = choose_lambda(X, TuningSpec{0.8, 1000, 3});
    const SqrtLassoFit base = fit_sqrt_lasso(d, lam);
    for (double c : {0.1, 10.0}) {
        const SqrtLassoFit scaled = fit_sqrt_lasso(d.with_response(c * d.y()), lam);
        CHECK(scaled.model == base.model);
        CHECK((scaled.beta - c * base.beta).lpNorm<Eigen::Infinity>() <=
              1e-8 * c * base.beta.lpNorm<Eigen::Infinity>());
    }
}

TEST_CASE("solver error conditions") {
    const Matrix X = testsupport::random_design(10, 50, 0.0, 60);
    const RegressionData d(testsupport::sparse_response(X, 3, 3.0, 1.0, 61), X);
    CHECK_THROWS_AS(fit_sqrt_lasso(d, 0.0), Error);
    try {
        fit_sqrt_lasso(d, 1e-3);
        FAIL("expected interpolation to be detected");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InterpolationDegenerate);
    }
    const Matrix X2 = testsupport::random_design(80, 150, 0.6, 62);
    const RegressionData d2(testsupport::sparse_response(X2, 8, 4.0, 1.0, 63), X2);
    try {
        fit_sqrt_lasso(d2, choose_lambda(X2, TuningSpec{}), SolverOptions{1e-8, 2});
        FAIL("expected the sweep budget to run out");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonConvergence);
    }
}
