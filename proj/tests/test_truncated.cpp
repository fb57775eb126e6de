#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "selinf/error.hpp"
#include "selinf/truncated.hpp"

using namespace selinf;

namespace {

// Student-T density integrated with composite Simpson on [a, b].
double t_prob(double df, double a, double b, int steps = 20000) {
    auto dens = [df](double x) {
        return std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * M_PI) -
                        (df + 1) / 2 * std::log1p(x * x / df));
    };
    const double h = (b - a) / steps;
    double s = dens(a) + dens(b);
    for (int i = 1; i < steps; ++i) s += (i % 2 ? 4.0 : 2.0) * dens(a + i * h);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("IntervalUnion merges, intersects and measures") {
    const IntervalUnion u({{3, 4}, {0, 1}, {0.5, 2}, {5, 4.5}});
    REQUIRE(u.size() == 2);
    CHECK(u.intervals()[0].lo == 0.0);
    CHECK(u.intervals()[0].hi == 2.0);
    CHECK(u.length() == doctest::Approx(3.0));
    CHECK(u.contains(3.5));
    CHECK_FALSE(u.contains(2.5));
    const IntervalUnion v({{1.5, 3.5}});
    const IntervalUnion w = u.intersect(v);
    REQUIRE(w.size() == 2);
    CHECK(w.intervals()[0].lo == 1.5);
    CHECK(w.intervals()[1].hi == 3.5);
    CHECK(IntervalUnion::real_line().contains(1e300));
    CHECK(u.intersect(IntervalUnion({{10, 11}})).empty());
}

TEST_CASE("slice solver special cases") {
    SUBCASE("vacuous constraints") {
        const Vector nu = Vector::Zero(3);
        const Vector xi = -Vector::Ones(3);
        const Vector b = Vector::Ones(3);
        const IntervalUnion o = solve_slice(nu, xi, b, 2.0, 10.0);
        REQUIRE(o.size() == 1);
        CHECK(o.inf() == -kInf);
        CHECK(o.sup() == kInf);
    }
    SUBCASE("linear case") {
        const IntervalUnion o = solve_slice_row(1.0, 0.0, 1.0, 1.0, 5.0);
        REQUIRE(o.size() == 1);
        CHECK(o.inf() == -kInf);
        CHECK(o.sup() == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("rounding-level xi keeps its single root") {
        const IntervalUnion o = solve_slice_row(-1.0, 8.9e-16, -0.0409, 72.0, 54.0);
        REQUIRE(o.size() == 1);
        CHECK(o.inf() == doctest::Approx(0.0409).epsilon(1e-9));
        CHECK(o.sup() == kInf);
    }
    SUBCASE("infeasible rows") {
        CHECK(solve_slice_row(0.0, 1.0, -1.0, 1.0, 4.0).empty());
        CHECK_THROWS_AS(solve_slice(Vector::Zero(1), Vector::Ones(1), -Vector::Ones(1), 1.0, 4.0), Error);
    }
}

TEST_CASE("slice solver agrees with a grid oracle") {
    std::mt19937_64 gen(2024);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(-50.0, 50.0);
    long disagreements = 0;
    for (int rep = 0; rep < 40; ++rep) {
        const int d = 5;
        Vector nu(d), xi(d), b(d);
        for (int i = 0; i < d; ++i) {
            nu[i] = nd(gen);
            xi[i] = nd(gen);
            b[i] = nd(gen) + 1.0;
        }
        const double w = 1.0 + 5.0 * std::abs(nd(gen));
        const double df = 1.0 + std::floor(20.0 * std::abs(nd(gen)));
        IntervalUnion omega;
        try {
            omega = solve_slice(nu, xi, b, w, df);
        } catch (const Error&) {
            omega = IntervalUnion();
        }
        for (int g = 0; g < 10000; ++g) {
            const double t = ud(gen);
            bool inside = true;
            for (int i = 0; i < d; ++i) inside = inside && oracle::slice_lhs_minus_rhs(t, nu[i], xi[i], b[i], w, df) <= 0.0;
            if (inside != omega.contains(t)) ++disagreements;
        }
    }
    CHECK(disagreements == 0);
}

TEST_CASE("truncated T cdf basics") {
    const TruncatedT full{7, IntervalUnion::real_line()};
    CHECK(trunc_t_cdf(full, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(trunc_t_cdf(full, 1.3) == doctest::Approx(0.5 + t_prob(7, 0.0, 1.3)).epsilon(1e-10));
    CHECK(trunc_t_cdf(full, -2.0) + trunc_t_cdf(full, 2.0) == doctest::Approx(1.0).epsilon(1e-14));

    const TruncatedT half{4, IntervalUnion({{0.0, kInf}})};
    CHECK(trunc_t_cdf(half, 0.0) == 0.0);
    CHECK(trunc_t_cdf(half, -3.0) == 0.0);
    CHECK(trunc_t_cdf(half, 1e8) == doctest::Approx(1.0));

    const TruncatedT two{6, IntervalUnion({{-3.0, -1.0}, {0.5, 2.0}})};
    const double total = t_prob(6, -3, -1) + t_prob(6, 0.5, 2);
    CHECK(trunc_t_cdf(two, 0.0) == doctest::Approx(t_prob(6, -3, -1) / total).epsilon(1e-9));
    CHECK(trunc_t_cdf(two, 1.0) == doctest::Approx((t_prob(6, -3, -1) + t_prob(6, 0.5, 1)) / total).epsilon(1e-9));
    CHECK(trunc_t_sf(two, 1.0) == doctest::Approx(t_prob(6, 1, 2) / total).epsilon(1e-9));
    double prev = 0.0;
    for (double t = -4.0; t <= 3.0; t += 0.05) {
        const double c = trunc_t_cdf(two, t);
        CHECK(c >= prev);
        prev = c;
    }
    CHECK(trunc_t_cdf(two, 2.0) == doctest::Approx(1.0));
}

TEST_CASE("truncated T cdf matches rejection Monte Carlo") {
    std::mt19937_64 gen(77);
    std::student_t_distribution<double> td(5.0);
    long accepted = 0, below = 0;
    for (long i = 0; i < 10'000'000; ++i) {
        const double x = td(gen);
        if (x >= 1.0 && x <= 3.0) {
            ++accepted;
            if (x <= 2.0) ++below;
        }
    }
    const double phat = double(below) / double(accepted);
    const double se = std::sqrt(phat * (1 - phat) / double(accepted));
    const double c = trunc_t_cdf(TruncatedT{5, IntervalUnion({{1.0, 3.0}})}, 2.0);
    CHECK(std::abs(c - phat) <= 3.0 * se);
}

TEST_CASE("truncated T quantile") {
    CHECK(trunc_t_quantile(TruncatedT{9, IntervalUnion::real_line()}, 0.5) == doctest::Approx(0.0).epsilon(1e-10));
    const TruncatedT d{5, IntervalUnion({{1.0, 3.0}})};
    CHECK(trunc_t_quantile(d, 1e-12) == doctest::Approx(1.0).epsilon(1e-6));
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> ud(0.001, 0.999);
    const TruncatedT two{3, IntervalUnion({{-kInf, -2.0}, {1.0, 4.0}})};
    for (int i = 0; i < 50; ++i) {
        const double q = ud(gen);
        CHECK(trunc_t_cdf(two, trunc_t_quantile(two, q)) == doctest::Approx(q).epsilon(1e-8));
    }
}

TEST_CASE("far tails stay finite and ordered") {
    const TruncatedLaw n(ReferenceLaw::normal(0.0, 1.0), IntervalUnion({{40.0, kInf}}));
    CHECK(std::isfinite(n.log_mass()));
    CHECK(n.log_mass() < -700.0);
    CHECK(n.cdf(40.0) == 0.0);
    const double c = n.cdf(40.02);
    CHECK(c > 0.5);
    CHECK(c < 1.0);
    CHECK(n.sf(40.02) == doctest::Approx(1.0 - c).epsilon(1e-8));
    CHECK(n.quantile(0.5) > 40.0);
    CHECK(n.quantile(0.5) < 40.1);

    const TruncatedLaw t(ReferenceLaw::student_t(3.0), IntervalUnion({{1e6, 2e6}}));
    CHECK(std::isfinite(t.log_mass()));
    const double mid = t.cdf(1.5e6);
    CHECK(mid > 0.0);
    CHECK(mid < 1.0);

    CHECK_THROWS_AS(TruncatedLaw(ReferenceLaw::normal(0.0, 1.0), IntervalUnion()), Error);
}

TEST_CASE("truncated chi-square mean") {
    CHECK(trunc_chi2_mean(10, 2.5, 0.0, kInf) == 2.5);
    CHECK(trunc_chi2_mean(1, 0.3, 0.0, kInf) == 0.3);

    // df = 100 with sum-scale truncation [0, 4000].
    const double s2 = 40.0;
    const double h = trunc_chi2_mean(100, s2, 0.0, 4000.0);
    CHECK(h < s2);
    const oracle::Chi2Bank bank(100, 1'000'000, 99);
    double sum = 0, sumsq = 0;
    long kept = 0;
    for (double d : bank.draws) {
        const double v = s2 * d;
        if (v <= 4000.0) {
            sum += v / 100.0;
            sumsq += (v / 100.0) * (v / 100.0);
            ++kept;
        }
    }
    const double mean = sum / kept;
    const double se = std::sqrt((sumsq / kept - mean * mean) / kept);
    CHECK(std::abs(h - mean) <= 3.0 * se);

    CHECK(trunc_chi2_mean(12, 1.0, 11.0, 11.0 + 1e-9) == doctest::Approx(11.0 / 12.0).epsilon(1e-8));

    double prev = 0.0;
    for (double v = 0.2; v < 20.0; v *= 1.3) {
        const double m = trunc_chi2_mean(20, v, 15.0, 60.0);
        CHECK(m > prev);
        CHECK(m >= 15.0 / 20.0);
        CHECK(m <= 60.0 / 20.0);
        prev = m;
    }
    // Far-tail masses still give an answer inside the bounds.
    const double far = trunc_chi2_mean(30, 1.0, 400.0, 500.0);
    CHECK(far >= 400.0 / 30.0);
    CHECK(far <= 500.0 / 30.0);
    CHECK_THROWS_AS(trunc_chi2_mean(5, 1.0, 3.0, 2.0), Error);
}
