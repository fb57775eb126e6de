#include <doctest.h>

#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>

#include "oracles.hpp"
#include "selinf/diagnostics.hpp"
#include "selinf/error.hpp"
#include "selinf/json_io.hpp"
#include "support.hpp"

using namespace selinf;

namespace {

AncillarySampler free_sampler(const RegressionData& d, const ProjectionPair& proj, std::uint64_t seed) {
    AncillarySampler s;
    s.null_basis = null_space_basis(proj);
    s.start = ancillary_direction(d, proj);
    s.seed = seed;
    return s;
}

struct Case {
    RegressionData data;
    SqrtLassoFit fit;
    ProjectionPair proj;
    SelectionEvent sel;
};

// n = 30, p = 6 design whose fit selects two variables.
Case two_variable_case() {
    for (std::uint64_t seed = 0;; ++seed) {
        const Matrix X = testsupport::random_design(30, 6, 0.3, 500 + seed);
        const Vector y = testsupport::sparse_response(X, 2, 4.0, 1.0, 600 + seed);
        RegressionData d(y, X);
        const double lam = choose_lambda(X, TuningSpec{0.8, 1000, seed});
        SqrtLassoFit fit = fit_sqrt_lasso(d, lam);
        if (fit.model.size() != 2) continue;
        ProjectionPair proj = build_projection(d, fit.model);
        SelectionEvent sel = build_event(fit, d, proj);
        return {std::move(d), std::move(fit), std::move(proj), std::move(sel)};
    }
}

}  // namespace

TEST_CASE("unconstrained draws are uniform on the null-space sphere") {
    const Matrix X = testsupport::random_design(12, 3, 0.3, 1);
    const RegressionData d(testsupport::sparse_response(X, 2, 2.0, 1.0, 2), X);
    const ProjectionPair proj = build_projection(X, {0, 1, 2});
    const AncillaryDraws dr = sample_ancillary(free_sampler(d, proj, 3), 20000);
    CHECK(dr.method == SamplerMethod::Rejection);
    CHECK(dr.acceptance_rate() == 1.0);
    const Vector mean = dr.draws.rowwise().mean();
    // Coordinates of a uniform unit vector in a 9-dim subspace have variance P_ii / 9.
    const Matrix R = Matrix::Identity(12, 12) - proj.P;
    for (Index i = 0; i < 12; ++i) CHECK(std::abs(mean[i]) <= 3.0 * std::sqrt(R(i, i) / 9.0 / 20000.0) + 1e-12);
    for (Index k = 0; k < dr.draws.cols(); ++k) {
        CHECK(dr.draws.col(k).norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((proj.P * dr.draws.col(k)).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
}

TEST_CASE("constrained draws satisfy the inactive constraints") {
    const Case c = two_variable_case();
    for (SamplerMethod m : {SamplerMethod::Rejection, SamplerMethod::HitAndRun}) {
        const AncillaryDraws dr = sample_ancillary(make_sampler(c.sel, c.data, 7, m), 2000);
        CHECK(dr.method == m);
        for (Index k = 0; k < dr.draws.cols(); ++k) {
            const Vector u = dr.draws.col(k);
            CHECK(c.sel.inactive.satisfied(u));
            CHECK((c.proj.P * u).lpNorm<Eigen::Infinity>() <= 1e-10);
            CHECK(u.norm() == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("rejection acceptance matches a brute-force spherical measure") {
    const Case c = two_variable_case();
    const Matrix& X = c.data.X();
    const double lam = c.fit.lam;
    const Matrix XE = oracle::columns(X, c.fit.model.active);
    Vector z(2);
    z << c.fit.model.signs[0], c.fit.model.signs[1];
    const Vector dual = XE * Eigen::LLT<Matrix>(XE.transpose() * XE).solve(z);
    const double shrink = std::sqrt(1.0 - lam * lam * dual.squaredNorm());
    const Matrix R = oracle::residual_projector(XE);

    std::mt19937_64 gen(31337);
    std::normal_distribution<double> nd;
    const long M = 1'000'000;
    long hits = 0;
    Vector g(30);
    for (long m = 0; m < M; ++m) {
        for (Index i = 0; i < 30; ++i) g[i] = nd(gen);
        Vector u = R * g;
        u /= u.norm();
        const Vector r = shrink * u + lam * dual;
        bool ok = true;
        for (Index j = 0; j < X.cols() && ok; ++j) {
            if (std::find(c.fit.model.active.begin(), c.fit.model.active.end(), j) != c.fit.model.active.end()) continue;
            ok = std::abs(X.col(j).dot(r)) < lam;
        }
        hits += ok;
    }
    const double oracle_rate = double(hits) / double(M);
    const AncillaryDraws dr = sample_ancillary(make_sampler(c.sel, c.data, 8, SamplerMethod::Rejection), 20000);
    const double rate = dr.acceptance_rate();
    const double se = std::sqrt(oracle_rate * (1 - oracle_rate) / double(M) + rate * (1 - rate) / double(dr.proposals));
    MESSAGE("oracle measure " << oracle_rate << ", sampler " << rate);
    CHECK(std::abs(rate - oracle_rate) <= 3.0 * se);
}

TEST_CASE("F statistic from y equals F from the residual direction") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix X = testsupport::random_design(40, 9, 0.3, 40 + seed);
        const RegressionData d(testsupport::sparse_response(X, 3, 2.0, 1.0, 50 + seed), X);
        const SelectedModel model{{0, 4}, {1, 1}};
        const std::vector<Index> group{2, 6, 7};
        const ProjectionPair proj = build_projection(d, model);
        const double a = f_statistic_response(d, model, group);
        const double b = f_statistic_direction(group_residual_basis(d, proj, group), ancillary_direction(d, proj), 3,
                                               40 - 5);
        CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, a));
    }
}

TEST_CASE("degenerate and invalid groups") {
    Matrix X = testsupport::random_design(20, 5, 0.0, 60);
    X.col(4) = X.col(0);
    const RegressionData d(testsupport::sparse_response(X, 2, 3.0, 1.0, 61), X);
    const SelectedModel model{{0, 1}, {1, -1}};
    const ProjectionPair proj = build_projection(d, model);
    const AncillarySampler s = free_sampler(d, proj, 1);
    try {
        selective_f_test(d, proj, model, {4}, s, 100);
        FAIL("expected DegenerateGroup");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateGroup);
    }
    CHECK_THROWS_AS(selective_f_test(d, proj, model, {2}, s, 0), Error);
    CHECK_THROWS_AS(selective_f_test(d, proj, model, {1}, s, 10), Error);
    CHECK_THROWS_AS(selective_f_test(d, proj, model, {}, s, 10), Error);
}

TEST_CASE("unconstrained F test agrees with the exact F law") {
    const Index n = 20;
    const Matrix X = testsupport::random_design(n, 4, 0.3, 70);
    const SelectedModel model{{0, 1}, {1, 1}};
    const std::vector<Index> group{2, 3};
    const boost::math::fisher_f law(2.0, double(n - 4));
    selinf::Rng rng(71);
    std::vector<double> pvals;
    const int m = 400;
    for (int r = 0; r < 200; ++r) {
        const RegressionData d(rng.normal_vector(n), X);
        const ProjectionPair proj = build_projection(d, model);
        const GroupFTest t = selective_f_test(d, proj, model, group, free_sampler(d, proj, 100 + r), m);
        const double exact = boost::math::cdf(boost::math::complement(law, t.f_observed));
        const double se = std::sqrt(exact * (1 - exact) / m);
        CHECK(std::abs(t.p_value - exact) <= 4.0 * se + 2.0 / m);
        pvals.push_back(t.p_value);
    }
    const double ks = oracle::ks_pvalue(oracle::ks_uniform_statistic(pvals), pvals.size());
    CHECK(ks > 0.01);
}

TEST_CASE("hit-and-run and rejection give the same F test") {
    const Case c = two_variable_case();
    std::vector<Index> group;
    for (Index j = 0; j < c.data.p() && group.size() < 2; ++j)
        if (std::find(c.fit.model.active.begin(), c.fit.model.active.end(), j) == c.fit.model.active.end()) group.push_back(j);
    const GroupFTest a = selective_f_test(c.data, c.proj, c.fit.model, group,
                                          make_sampler(c.sel, c.data, 5, SamplerMethod::Rejection), 4000);
    const GroupFTest b = selective_f_test(c.data, c.proj, c.fit.model, group,
                                          make_sampler(c.sel, c.data, 6, SamplerMethod::HitAndRun), 4000);
    CHECK(a.f_observed == b.f_observed);
    CHECK(std::abs(a.p_value - b.p_value) < 0.05);
    const nlohmann::json j = ftest_to_json(a, {"g1", "g2"});
    CHECK(j["schema"] == "selinf/v1");
    CHECK(j["sampler"] == "rejection");
}
