#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "selinf/error.hpp"
#include "selinf/json_io.hpp"
#include "selinf/selection_event.hpp"
#include "support.hpp"

using namespace selinf;

namespace {

struct Fitted {
    RegressionData data;
    SqrtLassoFit fit;
    ProjectionPair proj;
    SelectionEvent sel;
};

Fitted fitted(const Matrix& X, const Vector& y, double lam) {
    RegressionData d(y, X);
    SqrtLassoFit f = fit_sqrt_lasso(d, lam);
    ProjectionPair p = build_projection(d, f.model);
    SelectionEvent s = build_event(f, d, p);
    return {std::move(d), std::move(f), std::move(p), std::move(s)};
}

}  // namespace

TEST_CASE("orthogonal design: active constraints are T-statistic thresholds") {
    const Index n = 50, p = 6;
    const Matrix X = testsupport::orthogonal_design(n, p, 1);
    selinf::Rng rng(2);
    const Vector y = X * (Vector(p) << 9, -8, 7, 0, 0, 0).finished() + rng.normal_vector(n);
    const double lam = 0.3;
    const Fitted f = fitted(X, y, lam);
    const double k = static_cast<double>(f.fit.model.size());
    REQUIRE(k >= 1);
    const double thr = lam * std::sqrt((n - k) / (1.0 - lam * lam * k));
    for (Index i = 0; i < f.sel.active.alpha.size(); ++i) CHECK(f.sel.active.alpha[i] == doctest::Approx(thr).epsilon(1e-10));

    // The quasi-affine form and the T-statistic thresholds classify perturbed responses identically.
    for (int r = 0; r < 500; ++r) {
        const Vector yr = y + 2.0 * rng.normal_vector(n);
        const double sig = std::sqrt(ols_sigma2(yr, f.proj));
        bool t_rule = true;
        for (std::size_t i = 0; i < f.fit.model.size(); ++i) {
            const double t = f.fit.model.signs[i] * X.col(f.fit.model.active[i]).dot(yr) / sig;
            t_rule = t_rule && t >= thr;
        }
        CHECK(t_rule == f.sel.event.contains(yr));
    }
}

TEST_CASE("single active variable gives a single row") {
    const Index n = 30, p = 4;
    const Matrix X = testsupport::orthogonal_design(n, p, 3);
    selinf::Rng rng(4);
    const Vector y = 15.0 * X.col(1) + rng.normal_vector(n);
    Vector score = (X.transpose() * y).cwiseAbs() / y.norm();
    const double top = score.maxCoeff();
    score[1] = 0;
    const Fitted f = fitted(X, y, 0.5 * (top + score.maxCoeff()));
    REQUIRE(f.fit.model.active == std::vector<Index>{1});
    REQUIRE(f.sel.event.C.rows() == 1);
    CHECK((f.sel.event.C.row(0).transpose() + X.col(1)).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(f.sel.event.contains(y));
}

TEST_CASE("event structure on a correlated design") {
    const Matrix X = testsupport::random_design(60, 30, 0.3, 5);
    const Vector y = testsupport::sparse_response(X, 4, 5.0, 1.0, 6);
    const Fitted f = fitted(X, y, choose_lambda(X, TuningSpec{0.8, 1000, 1}));
    const QuasiAffineEvent& ev = f.sel.event;
    REQUIRE(!f.fit.model.empty());
    CHECK((ev.C * f.proj.P - ev.C).lpNorm<Eigen::Infinity>() < 1e-10);
    for (Index i = 0; i < f.sel.active.eta_rows.rows(); ++i) CHECK(f.sel.active.eta_rows.row(i).norm() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(ev.slack(y).minCoeff() >= -1e-8);
    CHECK(f.sel.contains(y));
    CHECK(f.sel.inactive.lhs_scale > 0.0);
    // Inactive rows only see the residual space; active rows only the model space.
    CHECK((f.sel.inactive.rows * f.proj.P).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((ev.C * (Matrix::Identity(60, 60) - f.proj.P)).lpNorm<Eigen::Infinity>() < 1e-10);
    for (double c : {0.01, 0.5, 3.0, 1e4}) CHECK(f.sel.contains(c * y));
    CHECK(ev.df == 60 - static_cast<Index>(f.fit.model.size()));
}

TEST_CASE("event agrees with refitting on perturbed responses") {
    const Matrix X = testsupport::random_design(50, 8, 0.3, 7);
    const Vector y = testsupport::sparse_response(X, 3, 3.0, 1.0, 8);
    const double lam = choose_lambda(X, TuningSpec{0.8, 1000, 2});
    const Fitted f = fitted(X, y, lam);
    REQUIRE(!f.fit.model.empty());
    selinf::Rng rng(9);
    int agree = 0, inside = 0;
    const int trials = 2000;
    for (int r = 0; r < trials; ++r) {
        const Vector yr = y + 0.6 * rng.normal_vector(50);
        const SqrtLassoFit g = fit_sqrt_lasso(f.data.with_response(yr), lam);
        const bool same = g.model == f.fit.model;
        const bool in = f.sel.contains(yr);
        inside += in;
        agree += same == in;
    }
    CHECK(inside > trials / 10);
    CHECK(inside < trials - trials / 10);
    CHECK(agree >= 0.995 * trials);
}

TEST_CASE("ancillary direction") {
    const Matrix X = testsupport::random_design(20, 5, 0.0, 10);
    const ProjectionPair proj = build_projection(X, {0, 3});
    selinf::Rng rng(11);
    Vector y = proj.residual(rng.normal_vector(20));
    y /= y.norm();
    CHECK((ancillary_direction(y, proj) - y).lpNorm<Eigen::Infinity>() < 1e-12);
    try {
        ancillary_direction(Vector(X.col(0) + X.col(3)), proj);
        FAIL("expected ZeroResidual");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ZeroResidual);
    }
    const Vector u = ancillary_direction(rng.normal_vector(20), proj);
    CHECK(u.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((proj.P * u).lpNorm<Eigen::Infinity>() < 1e-10);
    // Independent projector from the normal equations.
    const Matrix R = oracle::residual_projector(oracle::columns(X, {0, 3}));
    CHECK(((R * u) - u).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("empty active set has no event") {
    const Matrix X = testsupport::random_design(20, 5, 0.0, 12);
    const RegressionData d(testsupport::sparse_response(X, 1, 0.1, 1.0, 13), X);
    const SqrtLassoFit fit = fit_sqrt_lasso(d, 0.99);
    REQUIRE(fit.model.empty());
    CHECK_THROWS_AS(build_event(fit, d, build_projection(d, fit.model)), Error);
}

TEST_CASE("event export carries the archive fields") {
    const Matrix X = testsupport::random_design(40, 10, 0.3, 14);
    const Vector y = testsupport::sparse_response(X, 3, 5.0, 1.0, 15);
    const Fitted f = fitted(X, y, choose_lambda(X, TuningSpec{}));
    const nlohmann::json j = event_to_json(f.sel, f.data);
    CHECK(j["schema"] == "selinf/v1");
    for (const char* key : {"C", "b", "df", "alpha", "E", "z_E"}) CHECK(j.contains(key));
    CHECK(j["C"].size() == f.fit.model.size());
    CHECK(j["C"][0].size() == 40);
    CHECK(j["df"] == f.sel.event.df);
}
