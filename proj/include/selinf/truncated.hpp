#pragma once

#include <limits>
#include <vector>

#include "selinf/model.hpp"

namespace selinf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
    double lo = -kInf;
    double hi = kInf;
};

/// Sorted, pairwise-disjoint union of closed intervals (ends may be infinite).
class IntervalUnion {
public:
    IntervalUnion() = default;
    /// Sorts and merges overlapping pieces; drops empty ones.
    explicit IntervalUnion(std::vector<Interval> pieces);

    static IntervalUnion real_line() { return IntervalUnion({Interval{}}); }

    const std::vector<Interval>& intervals() const { return pieces_; }
    bool empty() const { return pieces_.empty(); }
    std::size_t size() const { return pieces_.size(); }
    double inf() const;
    double sup() const;
    bool contains(double t) const;
    double length() const;

    IntervalUnion intersect(const IntervalUnion& other) const;

private:
    std::vector<Interval> pieces_;
};

/// {t : t sqrt(w) nu + xi sqrt(df + t^2) <= sqrt(w) b} for a single row.
IntervalUnion solve_slice_row(double nu, double xi, double b, double w, double df);

/// Intersection over rows of solve_slice_row. Throws EmptyTruncation when empty.
IntervalUnion solve_slice(const Vector& nu, const Vector& xi, const Vector& b, double w, double df);

/// Symmetric reference law for truncation: Student-T(df) or Normal(mean, sd).
class ReferenceLaw {
public:
    static ReferenceLaw student_t(double df);
    static ReferenceLaw normal(double mean, double sd);

    double log_cdf(double x) const { return log_sf(2.0 * center_ - x); }
    double log_sf(double x) const;
    double center() const { return center_; }
    /// log P(lo <= X <= hi), accurate in both tails.
    double log_mass(double lo, double hi) const;

private:
    enum class Kind { StudentT, Normal };
    ReferenceLaw(Kind kind, double df, double center, double scale)
        : kind_(kind), df_(df), center_(center), scale_(scale) {}

    Kind kind_;
    double df_;
    double center_;
    double scale_;
};

/// A reference law conditioned to lie in `omega`.
class TruncatedLaw {
public:
    TruncatedLaw(ReferenceLaw ref, IntervalUnion omega);

    const ReferenceLaw& reference() const { return ref_; }
    const IntervalUnion& omega() const { return omega_; }
    double log_mass() const { return log_total_; }

    /// P(X <= t | X in omega)
    double cdf(double t) const;
    /// P(X >= t | X in omega); computed separately so upper tails keep precision.
    double sf(double t) const;
    /// Inverse of cdf by bisection to 1e-10 in t.
    double quantile(double q) const;

private:
    ReferenceLaw ref_;
    IntervalUnion omega_;
    double log_total_;
};

struct TruncatedT {
    int df = 1;
    IntervalUnion omega;
};

double trunc_t_cdf(const TruncatedT& dist, double t);
double trunc_t_sf(const TruncatedT& dist, double t);
double trunc_t_quantile(const TruncatedT& dist, double q);

/// sigma2 * chi2_df truncated to [L, U].
struct TruncatedChi2Scaled {
    int df = 1;
    double sigma2 = 1.0;
    double lower = 0.0;
    double upper = kInf;
};

/// H_nu(L, U, sigma2) = E[sigma2 chi2_nu | sigma2 chi2_nu in [L, U]] / nu.
double trunc_chi2_mean(int nu, double sigma2, double lower, double upper);

}  // namespace selinf
