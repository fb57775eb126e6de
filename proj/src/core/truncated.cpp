#include "selinf/truncated.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "selinf/error.hpp"

namespace selinf {

namespace {

constexpr double kNegInf = -kInf;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

// log(exp(a) - exp(b)) for a >= b
double log_sub(double a, double b) {
    if (b == kNegInf) return a;
    if (b >= a) return kNegInf;
    return a + std::log1p(-std::exp(b - a));
}

double normal_log_sf(double z) {
    if (z == kInf) return kNegInf;
    if (z < 25.0) return std::log(0.5 * std::erfc(z / std::sqrt(2.0)));
    const double iz2 = 1.0 / (z * z);
    const double series = 1.0 - iz2 * (1.0 - 3.0 * iz2 * (1.0 - 5.0 * iz2 * (1.0 - 7.0 * iz2 * (1.0 - 9.0 * iz2))));
    return -0.5 * z * z - std::log(z) - kHalfLog2Pi + std::log(series);
}

// log P(T_df >= t) for t > 0 via the incomplete-beta series
//   I_x(a, b) = x^a (1-x)^b / (a B(a,b)) * sum_k (a+b)_k / (a+1)_k x^k,  x = df / (df + t^2).
double student_log_sf_series(double df, double t) {
    const double a = 0.5 * df;
    const double b = 0.5;
    const double log1p_ratio = std::log1p(df / (t * t));
    const double logx = std::log(df) - 2.0 * std::log(t) - log1p_ratio;
    const double log1mx = -log1p_ratio;
    const double x = std::exp(logx);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 0; k < 100000; ++k) {
        term *= (a + b + k) / (a + 1.0 + k) * x;
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    return std::log(0.5) + a * logx + b * log1mx - std::log(a) - lbeta + std::log(sum);
}

double student_log_sf(double df, double t) {
    if (t == kInf) return kNegInf;
    if (t == kNegInf) return 0.0;
    const boost::math::students_t_distribution<double> dist(df);
    const double s = boost::math::cdf(boost::math::complement(dist, t));
    if (t <= 0.0 || s > 1e-280) return std::log(s);
    return student_log_sf_series(df, t);
}

}  // namespace

IntervalUnion::IntervalUnion(std::vector<Interval> pieces) {
    std::erase_if(pieces, [](const Interval& iv) { return !(iv.lo <= iv.hi) || iv.lo == kInf || iv.hi == kNegInf; });
    std::sort(pieces.begin(), pieces.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    for (const auto& iv : pieces) {
        if (!pieces_.empty() && iv.lo <= pieces_.back().hi) {
            pieces_.back().hi = std::max(pieces_.back().hi, iv.hi);
        } else {
            pieces_.push_back(iv);
        }
    }
}

double IntervalUnion::inf() const { return pieces_.empty() ? kInf : pieces_.front().lo; }
double IntervalUnion::sup() const { return pieces_.empty() ? kNegInf : pieces_.back().hi; }

bool IntervalUnion::contains(double t) const {
    return std::any_of(pieces_.begin(), pieces_.end(),
                       [t](const Interval& iv) { return iv.lo <= t && t <= iv.hi; });
}

double IntervalUnion::length() const {
    double total = 0.0;
    for (const auto& iv : pieces_) total += iv.hi - iv.lo;
    return total;
}

IntervalUnion IntervalUnion::intersect(const IntervalUnion& other) const {
    std::vector<Interval> out;
    std::size_t i = 0, j = 0;
    while (i < pieces_.size() && j < other.pieces_.size()) {
        const double lo = std::max(pieces_[i].lo, other.pieces_[j].lo);
        const double hi = std::min(pieces_[i].hi, other.pieces_[j].hi);
        if (lo <= hi) out.push_back({lo, hi});
        if (pieces_[i].hi < other.pieces_[j].hi) ++i;
        else ++j;
    }
    return IntervalUnion(std::move(out));
}

IntervalUnion solve_slice_row(double nu, double xi, double b, double w, double df) {
    require(w > 0.0 && std::isfinite(w), "slice weight w must be positive");
    require(df > 0.0, "slice degrees of freedom must be positive");
    const double sw = std::sqrt(w);
    const double a = sw * nu;
    const double c = sw * b;
    const double s = xi;
    auto f = [&](double t) { return a * t + s * std::sqrt(df + t * t) - c; };
    auto magnitude = [&](double t) { return std::abs(a * t) + std::abs(s) * std::sqrt(df + t * t) + std::abs(c); };

    // Candidate roots of f from squaring s^2 (df + t^2) = (c - a t)^2, then validated
    // by substitution since squaring introduces extraneous branches.
    std::vector<double> candidates;
    const double qa = s * s - a * a;
    const double qb = 2.0 * a * c;
    const double qc = s * s * df - c * c;
    if (std::abs(qa) <= 1e-14 * (s * s + a * a)) {
        if (qb != 0.0) candidates.push_back(-qc / qb);
    } else {
        double disc = qb * qb - 4.0 * qa * qc;
        // A double root (xi ~ 0 makes the row linear) can round to a slightly negative value.
        if (disc < 0.0 && -disc <= 1e-12 * (qb * qb + std::abs(4.0 * qa * qc))) disc = 0.0;
        if (disc >= 0.0) {
            const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
            if (q != 0.0) {
                candidates.push_back(q / qa);
                candidates.push_back(qc / q);
            } else {
                candidates.push_back(0.0);
            }
        }
    }
    // Near a double root of the squared equation the candidates carry sqrt(eps) error;
    // f itself has a simple root there, so a few Newton steps restore full precision.
    auto df_dt = [&](double t) { return a + s * t / std::sqrt(df + t * t); };
    for (double& t : candidates) {
        for (int it = 0; it < 4 && std::isfinite(t); ++it) {
            const double slope = df_dt(t);
            if (slope == 0.0) break;
            const double next = t - f(t) / slope;
            if (!std::isfinite(next) || std::abs(next - t) > 1e-6 * (1.0 + std::abs(t))) break;
            t = next;
        }
    }
    std::vector<double> roots;
    for (double t : candidates) {
        if (std::isfinite(t) && std::abs(f(t)) <= 1e-9 * (magnitude(t) + 1e-300)) roots.push_back(t);
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end()), roots.end());

    if (roots.empty()) {
        return f(0.0) <= 0.0 ? IntervalUnion::real_line() : IntervalUnion();
    }
    std::vector<Interval> pieces;
    const double first = roots.front();
    if (f(first - std::max(1.0, std::abs(first))) <= 0.0) pieces.push_back({kNegInf, first});
    for (std::size_t k = 0; k + 1 < roots.size(); ++k) {
        if (f(0.5 * (roots[k] + roots[k + 1])) <= 0.0) pieces.push_back({roots[k], roots[k + 1]});
    }
    const double last = roots.back();
    if (f(last + std::max(1.0, std::abs(last))) <= 0.0) pieces.push_back({last, kInf});
    return IntervalUnion(std::move(pieces));
}

IntervalUnion solve_slice(const Vector& nu, const Vector& xi, const Vector& b, double w, double df) {
    require(nu.size() == xi.size() && nu.size() == b.size(), "slice vectors differ in length");
    IntervalUnion out = IntervalUnion::real_line();
    for (Index i = 0; i < nu.size(); ++i) {
        out = out.intersect(solve_slice_row(nu[i], xi[i], b[i], w, df));
        if (out.empty()) fail(ErrorCode::EmptyTruncation, "slice constraints have empty intersection");
    }
    return out;
}

ReferenceLaw ReferenceLaw::student_t(double df) {
    require(df > 0.0, "Student-T degrees of freedom must be positive");
    return ReferenceLaw(Kind::StudentT, df, 0.0, 1.0);
}

ReferenceLaw ReferenceLaw::normal(double mean, double sd) {
    require(sd > 0.0 && std::isfinite(sd) && std::isfinite(mean), "normal law needs finite mean and sd > 0");
    return ReferenceLaw(Kind::Normal, 0.0, mean, sd);
}

double ReferenceLaw::log_sf(double x) const {
    const double z = (x - center_) / scale_;
    if (kind_ == Kind::Normal) return normal_log_sf(z);
    return student_log_sf(df_, z);
}

double ReferenceLaw::log_mass(double lo, double hi) const {
    if (!(lo < hi)) return kNegInf;
    if (lo >= center_) return log_sub(log_sf(lo), log_sf(hi));
    if (hi <= center_) return log_sub(log_cdf(hi), log_cdf(lo));
    const double outside = std::exp(log_cdf(lo)) + std::exp(log_sf(hi));
    return std::log1p(-outside);
}

TruncatedLaw::TruncatedLaw(ReferenceLaw ref, IntervalUnion omega)
    : ref_(ref), omega_(std::move(omega)), log_total_(kNegInf) {
    for (const auto& iv : omega_.intervals()) log_total_ = log_add(log_total_, ref_.log_mass(iv.lo, iv.hi));
    if (log_total_ == kNegInf) fail(ErrorCode::EmptyTruncation, "truncation set has zero probability");
}

double TruncatedLaw::cdf(double t) const {
    double lower = kNegInf, upper = kNegInf;
    for (const auto& iv : omega_.intervals()) {
        if (iv.lo < t) lower = log_add(lower, ref_.log_mass(iv.lo, std::min(iv.hi, t)));
        if (iv.hi > t) upper = log_add(upper, ref_.log_mass(std::max(iv.lo, t), iv.hi));
    }
    if (lower == kNegInf) return 0.0;
    if (upper == kNegInf) return 1.0;
    return std::exp(lower - log_add(lower, upper));
}

double TruncatedLaw::sf(double t) const {
    double lower = kNegInf, upper = kNegInf;
    for (const auto& iv : omega_.intervals()) {
        if (iv.lo < t) lower = log_add(lower, ref_.log_mass(iv.lo, std::min(iv.hi, t)));
        if (iv.hi > t) upper = log_add(upper, ref_.log_mass(std::max(iv.lo, t), iv.hi));
    }
    if (upper == kNegInf) return 0.0;
    if (lower == kNegInf) return 1.0;
    return std::exp(upper - log_add(lower, upper));
}

double TruncatedLaw::quantile(double q) const {
    require(q > 0.0 && q < 1.0, "quantile level must lie in (0, 1)");
    double lo = omega_.inf();
    double hi = omega_.sup();
    if (lo == kNegInf) {
        lo = std::min(-1.0, hi) + ref_.center();
        while (cdf(lo) > q && lo > -1e300) lo *= 2.0;
    }
    if (hi == kInf) {
        hi = std::max(1.0, lo) + ref_.center();
        while (cdf(hi) < q && hi < 1e300) hi *= 2.0;
    }
    for (int iter = 0; iter < 4000 && hi - lo > 1e-10; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (cdf(mid) < q) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

double trunc_t_cdf(const TruncatedT& dist, double t) {
    return TruncatedLaw(ReferenceLaw::student_t(dist.df), dist.omega).cdf(t);
}

double trunc_t_sf(const TruncatedT& dist, double t) {
    return TruncatedLaw(ReferenceLaw::student_t(dist.df), dist.omega).sf(t);
}

double trunc_t_quantile(const TruncatedT& dist, double q) {
    return TruncatedLaw(ReferenceLaw::student_t(dist.df), dist.omega).quantile(q);
}

namespace {

// P(a <= chi2_nu <= b) with the complementary function used in the upper tail.
double chi2_mass(double nu, double a, double b) {
    const double s = 0.5 * nu;
    if (a >= nu) {
        const double qb = b == kInf ? 0.0 : boost::math::gamma_q(s, 0.5 * b);
        return boost::math::gamma_q(s, 0.5 * a) - qb;
    }
    if (b <= nu) {
        const double pa = a == 0.0 ? 0.0 : boost::math::gamma_p(s, 0.5 * a);
        return boost::math::gamma_p(s, 0.5 * b) - pa;
    }
    const double pa = a == 0.0 ? 0.0 : boost::math::gamma_p(s, 0.5 * a);
    const double qb = b == kInf ? 0.0 : boost::math::gamma_q(s, 0.5 * b);
    return 1.0 - pa - qb;
}

// (x/2)^{nu/2} e^{-x/2} / Gamma(nu/2 + 1), i.e. F_nu(x) - F_{nu+2}(x).
double chi2_cdf_step(double nu, double x) {
    if (x == 0.0 || x == kInf) return 0.0;
    const double s = 0.5 * nu;
    return std::exp(s * std::log(0.5 * x) - 0.5 * x - std::lgamma(s + 1.0));
}

// E[chi2_nu | a <= chi2_nu <= b] by quadrature of the log-density rescaled at its
// largest value; used when the mass is too small for the identity. Finite ranges
// are mapped to u = x / b in [a / b, 1] so tiny scales do not underflow.
double chi2_truncated_mean_quadrature(double nu, double a, double b) {
    const double s = 0.5 * nu;
    if (std::isfinite(b)) {
        const double u0 = a / b;
        const double peak = std::clamp((nu - 2.0) / b, u0, 1.0);
        const double log_peak = (s - 1.0) * std::log(peak) - 0.5 * b * peak;
        auto density = [&](double u) {
            if (u <= 0.0) return 0.0;
            return std::exp((s - 1.0) * std::log(u) - 0.5 * b * u - log_peak);
        };
        boost::math::quadrature::tanh_sinh<double> integrator;
        const double mass = integrator.integrate(density, u0, 1.0);
        const double first = integrator.integrate([&](double u) { return u * density(u); }, u0, 1.0);
        if (!(mass > 0.0)) fail(ErrorCode::EmptyTruncation, "truncated chi-square has zero mass");
        return b * first / mass;
    }
    const double anchor = std::max({nu - 2.0, a, 1.0});
    const double log_anchor = (s - 1.0) * std::log(anchor) - 0.5 * anchor;
    auto density = [&](double x) {
        if (x <= 0.0) return 0.0;
        return std::exp((s - 1.0) * std::log(x) - 0.5 * x - log_anchor);
    };
    boost::math::quadrature::exp_sinh<double> integrator;
    const double mass = integrator.integrate(density, a, kInf);
    const double first = integrator.integrate([&](double x) { return x * density(x); }, a, kInf);
    if (!(mass > 0.0)) fail(ErrorCode::EmptyTruncation, "truncated chi-square has zero mass");
    return first / mass;
}

}  // namespace

double trunc_chi2_mean(int nu, double sigma2, double lower, double upper) {
    require(nu >= 1, "degrees of freedom must be positive");
    require(sigma2 > 0.0 && std::isfinite(sigma2), "sigma2 must be positive");
    require(lower >= 0.0 && lower < upper, "need 0 <= L < U");
    if (lower == 0.0 && upper == kInf) return sigma2;
    const double df = nu;
    const double a = lower / sigma2;
    const double b = upper / sigma2;
    double h = 0.0;
    const double mass = chi2_mass(df, a, b);
    if (mass >= 1e-8) {
        // E[chi2_nu 1{a <= chi2_nu <= b}] = nu (F_{nu+2}(b) - F_{nu+2}(a))
        h = sigma2 * (1.0 + (chi2_cdf_step(df, a) - chi2_cdf_step(df, b)) / mass);
    } else {
        if (!(b > a)) fail(ErrorCode::EmptyTruncation, "truncation interval is empty at this scale");
        h = sigma2 * chi2_truncated_mean_quadrature(df, a, b) / df;
    }
    return std::clamp(h, lower / df, upper / df);
}

}  // namespace selinf
