#include "selinf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

#include "selinf/error.hpp"

namespace selinf {

namespace {

double two_sided(double lower_tail, double upper_tail) {
    return std::min(1.0, 2.0 * std::min(lower_tail, upper_tail));
}

// Root of eval(theta) = target for eval non-increasing in theta. The bracket grows
// geometrically from `center` +/- 4 scale units up to max_units.
std::optional<double> invert_decreasing(const std::function<double(double)>& eval, double center, double scale,
                                        double target, double max_units) {
    const double at_center = eval(center);
    if (at_center == target) return center;
    const double direction = at_center > target ? 1.0 : -1.0;
    double near = center;
    double far = center;
    bool crossed = false;
    for (double units = 4.0;; units = std::min(2.0 * units, max_units)) {
        far = center + direction * units * scale;
        const double value = eval(far);
        if ((direction > 0 && value <= target) || (direction < 0 && value >= target)) {
            crossed = true;
            break;
        }
        near = far;
        if (units >= max_units) break;
    }
    if (!crossed) return std::nullopt;
    double lo = std::min(near, far), hi = std::max(near, far);
    for (int iter = 0; iter < 300 && hi - lo > 1e-10 * scale; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (eval(mid) > target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

constexpr double kInwardCapSds = 1e6;

ConfidenceInterval invert_test(const std::function<double(double)>& cdf_at_theta, double center, double scale,
                               const IntervalOptions& opts) {
    require(opts.level > 0.5 && opts.level < 1.0, "confidence level must lie in (0.5, 1)");
    require(scale > 0.0 && std::isfinite(scale), "plug-in standard deviation must be positive");
    const double alpha = 1.0 - opts.level;
    ConfidenceInterval ci;

    auto endpoint = [&](double target, bool lower_end) {
        const double at_center = cdf_at_theta(center);
        auto root = invert_decreasing(cdf_at_theta, center, scale, target, opts.max_bracket_sds);
        if (root) return *root;
        // Searching left for the lower end (or right for the upper end) and hitting the
        // cap means the endpoint lies further out. An inward endpoint must exist, so the
        // search continues well past the cap before giving up.
        const bool outward = lower_end ? at_center < target : at_center > target;
        if (!outward) {
            root = invert_decreasing(cdf_at_theta, center, scale, target, kInwardCapSds);
            if (root) return *root;
        }
        if (opts.allow_unbounded && outward) {
            (lower_end ? ci.lo_unbounded : ci.hi_unbounded) = true;
            return lower_end ? -kInf : kInf;
        }
        fail(ErrorCode::BracketFailure, "no sign change within " + std::to_string(opts.max_bracket_sds) +
                                            " plug-in standard deviations");
    };
    ci.lo = endpoint(1.0 - 0.5 * alpha, true);
    ci.hi = endpoint(0.5 * alpha, false);
    return ci;
}

Vector eta_of(const SelectionEvent& sel, Index position) {
    require(position >= 0 && position < static_cast<Index>(sel.model.size()), "test position outside the active set");
    return sel.active.eta_rows.row(position).transpose();
}

}  // namespace

PivotSlice selective_pivot(const SelectionEvent& sel, const Vector& y, Index position, double theta) {
    const Vector eta = eta_of(sel, position);
    const QuasiAffineEvent& ev = sel.event;
    const double u = eta.dot(y) - theta;
    const double rss = ev.proj.residual(y).squaredNorm();
    if (!(rss > 0.0)) fail(ErrorCode::ZeroResidual, "zero residual sum of squares");
    const double df = static_cast<double>(ev.df);
    PivotSlice out;
    out.df = df;
    out.tau = u / std::sqrt(rss / df);
    const Vector nu = ev.C * eta;
    // xi = C(theta eta + (P - eta eta^T) y) = C y - u nu, using C (I - P) = 0.
    const Vector xi = ev.C * y - u * nu;
    out.omega = solve_slice(nu, xi, ev.b, rss + u * u, df);
    return out;
}

double selective_pvalue(const SelectionEvent& sel, const Vector& y, const TestSpec& spec) {
    const PivotSlice slice = selective_pivot(sel, y, spec.position, spec.theta0);
    const TruncatedLaw law(ReferenceLaw::student_t(slice.df), slice.omega);
    switch (spec.alternative) {
        case Alternative::Greater: return law.sf(slice.tau);
        case Alternative::Less: return law.cdf(slice.tau);
        case Alternative::TwoSided: break;
    }
    return two_sided(law.cdf(slice.tau), law.sf(slice.tau));
}

GaussianSlice gaussian_slice(const SelectionEvent& sel, const Vector& y, Index position) {
    const Vector eta = eta_of(sel, position);
    const QuasiAffineEvent& ev = sel.event;
    GaussianSlice out;
    out.observed = eta.dot(y);
    const Vector nu = ev.C * eta;
    const Vector rhs = ev.sigma_hat(y) * ev.b - (ev.C * y - out.observed * nu);
    for (Index i = 0; i < nu.size(); ++i) {
        if (nu[i] > 1e-12) out.truncation.hi = std::min(out.truncation.hi, rhs[i] / nu[i]);
        else if (nu[i] < -1e-12) out.truncation.lo = std::max(out.truncation.lo, rhs[i] / nu[i]);
    }
    out.truncation.lo = std::min(out.truncation.lo, out.observed);
    out.truncation.hi = std::max(out.truncation.hi, out.observed);
    return out;
}

double truncated_gaussian_pvalue(double observed, const Interval& truncation, double sd, double theta) {
    const TruncatedLaw law(ReferenceLaw::normal(theta, sd), IntervalUnion({truncation}));
    return two_sided(law.cdf(observed), law.sf(observed));
}

ConfidenceInterval truncated_gaussian_interval(double observed, const Interval& truncation, double sd,
                                               const IntervalOptions& opts) {
    const IntervalUnion omega({truncation});
    auto cdf_at = [&](double theta) {
        return TruncatedLaw(ReferenceLaw::normal(theta, sd), omega).cdf(observed);
    };
    return invert_test(cdf_at, observed, sd, opts);
}

ConfidenceInterval gaussian_approx_interval(const SelectionEvent& sel, const Vector& y, Index position,
                                            double sigma2_plugin, const IntervalOptions& opts) {
    require(sigma2_plugin > 0.0 && std::isfinite(sigma2_plugin), "plug-in variance must be positive");
    const GaussianSlice slice = gaussian_slice(sel, y, position);
    return truncated_gaussian_interval(slice.observed, slice.truncation, std::sqrt(sigma2_plugin), opts);
}

ConfidenceInterval exact_t_interval(const SelectionEvent& sel, const Vector& y, Index position,
                                    const IntervalOptions& opts) {
    const double observed = eta_of(sel, position).dot(y);
    auto cdf_at = [&](double theta) {
        const PivotSlice slice = selective_pivot(sel, y, position, theta);
        return TruncatedLaw(ReferenceLaw::student_t(slice.df), slice.omega).cdf(slice.tau);
    };
    return invert_test(cdf_at, observed, sel.event.sigma_hat(y), opts);
}

ResidualTruncation residual_truncation(const QuasiAffineEvent& event, const Vector& y) {
    const Vector cy = event.C * y;
    double lo = 0.0, hi = kInf;
    for (Index i = 0; i < cy.size(); ++i) {
        const double bi = event.b[i];
        if (bi > 0.0) lo = std::max(lo, cy[i] / bi);
        else if (bi < 0.0) hi = std::min(hi, cy[i] / bi);
    }
    const double df = static_cast<double>(event.df);
    return {df * lo * lo, hi == kInf ? kInf : df * hi * hi};
}

double solve_pseudolik(double observed_sigma2, int df, const ResidualTruncation& trunc, double reg) {
    require(df >= 1, "degrees of freedom must be positive");
    require(observed_sigma2 > 0.0 && std::isfinite(observed_sigma2), "observed sigma2 must be positive");
    if (trunc.lower == 0.0 && trunc.upper == kInf) return observed_sigma2;
    if (!(trunc.lower < trunc.upper)) fail(ErrorCode::EmptyTruncation, "residual truncation interval is empty");
    const double nu = df;
    if (observed_sigma2 < trunc.lower / nu || observed_sigma2 > trunc.upper / nu) {
        fail(ErrorCode::NoRoot, "observed residual mean square lies outside its truncation interval");
    }
    if (reg == 0.0 && trunc.upper < kInf) {
        // As s2 grows the truncated law tends to the density x^{nu/2 - 1} on [L, U].
        const double h = 0.5 * nu, r = trunc.lower / trunc.upper;
        const double limit = trunc.upper * h / (h + 1.0) * (1.0 - std::pow(r, h + 1.0)) / (1.0 - std::pow(r, h)) / nu;
        if (observed_sigma2 >= limit) fail(ErrorCode::NoRoot, "pseudo-likelihood estimate is unbounded");
    }
    auto g = [&](double s2) {
        return trunc_chi2_mean(df, s2, trunc.lower, trunc.upper) + reg * s2 - (1.0 + reg) * observed_sigma2;
    };
    double lo = observed_sigma2, hi = observed_sigma2;
    int steps = 0;
    if (g(observed_sigma2) > 0.0) {
        do {
            lo *= 0.5;
            if (++steps > 1000 || !(lo > 0.0)) fail(ErrorCode::NoRoot, "pseudo-likelihood root not bracketed");
        } while (g(lo) > 0.0);
    } else {
        do {
            hi *= 2.0;
            if (++steps > 1000 || !std::isfinite(hi)) fail(ErrorCode::NoRoot, "pseudo-likelihood root not bracketed");
        } while (g(hi) < 0.0);
    }
    for (int iter = 0; iter < 400 && hi / lo - 1.0 > 1e-12; ++iter) {
        const double mid = std::sqrt(lo * hi);
        if (g(mid) < 0.0) lo = mid;
        else hi = mid;
    }
    return std::sqrt(lo * hi);
}

double sigma2_pseudolik(const QuasiAffineEvent& event, const Vector& y) {
    const double s2 = event.proj.residual(y).squaredNorm() / static_cast<double>(event.df);
    return solve_pseudolik(s2, static_cast<int>(event.df), residual_truncation(event, y), 0.0);
}

double sigma2_pseudolik_regularized(const QuasiAffineEvent& event, const Vector& y) {
    const double s2 = event.proj.residual(y).squaredNorm() / static_cast<double>(event.df);
    const double reg = 1.0 / std::sqrt(static_cast<double>(event.df));
    return solve_pseudolik(s2, static_cast<int>(event.df), residual_truncation(event, y), reg);
}

SelectiveReport build_report(const RegressionData& data, const SqrtLassoFit& fit, const InferenceOptions& opts,
                             double kappa) {
    require(opts.level > 0.5 && opts.level < 1.0, "confidence level must lie in (0.5, 1)");
    SelectiveReport report;
    report.model = fit.model;
    report.lambda = fit.lam;
    report.kappa = kappa;
    report.ci_level = opts.level;

    const ProjectionPair proj = build_projection(data, fit.model);
    report.df = proj.df();
    report.sigma2_ols = ols_sigma2(data, proj);
    std::optional<SelectionEvent> sel;
    std::optional<Error> pl_error, plr_error;
    if (fit.model.empty()) {
        report.sigma2_pl = report.sigma2_plr = report.sigma2_ols;
    } else {
        sel.emplace(build_event(fit, data, proj));
        report.truncation = residual_truncation(sel->event, data.y());
        // An estimator that is not used as the plug-in may fail without sinking the report.
        try {
            report.sigma2_pl = sigma2_pseudolik(sel->event, data.y());
        } catch (const Error& e) {
            report.sigma2_pl = std::numeric_limits<double>::quiet_NaN();
            pl_error = e;
        }
        try {
            report.sigma2_plr = sigma2_pseudolik_regularized(sel->event, data.y());
        } catch (const Error& e) {
            report.sigma2_plr = std::numeric_limits<double>::quiet_NaN();
            plr_error = e;
        }
    }
    switch (opts.sigma) {
        case SigmaChoice::RegularizedPseudolik:
            if (plr_error) throw *plr_error;
            report.sigma2_plugin = report.sigma2_plr;
            report.sigma_source = "plr";
            break;
        case SigmaChoice::Pseudolik:
            if (pl_error) throw *pl_error;
            report.sigma2_plugin = report.sigma2_pl;
            report.sigma_source = "pl";
            break;
        case SigmaChoice::Ols:
            report.sigma2_plugin = report.sigma2_ols;
            report.sigma_source = "ols";
            break;
        case SigmaChoice::Fixed:
            require(opts.sigma2_value > 0.0, "fixed sigma2 must be positive");
            report.sigma2_plugin = opts.sigma2_value;
            report.sigma_source = "fixed";
            break;
    }
    if (fit.model.empty()) return report;

    const Vector estimates = proj.pinv * data.y();
    IntervalOptions iopts;
    iopts.level = opts.level;
    iopts.max_bracket_sds = opts.max_bracket_sds;
    iopts.allow_unbounded = true;
    for (std::size_t i = 0; i < fit.model.size(); ++i) {
        const Index pos = static_cast<Index>(i);
        VariableInference v;
        v.column = fit.model.active[i];
        v.name = data.column_names()[static_cast<std::size_t>(v.column)];
        v.sign = fit.model.signs[i];
        v.estimate = estimates[pos];
        v.p_value = selective_pvalue(*sel, data.y(), TestSpec{pos, 0.0, opts.alternative});
        const double scale = sel->active.eta_norms[pos];
        try {
            const ConfidenceInterval ci = gaussian_approx_interval(*sel, data.y(), pos, report.sigma2_plugin, iopts);
            v.ci_lo = scale * ci.lo;
            v.ci_hi = scale * ci.hi;
            v.ci_lo_unbounded = ci.lo_unbounded;
            v.ci_hi_unbounded = ci.hi_unbounded;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::BracketFailure) throw;
            v.ci_lo = -kInf;
            v.ci_hi = kInf;
            v.ci_lo_unbounded = v.ci_hi_unbounded = true;
        }
        if (opts.exact_ci) {
            try {
                const ConfidenceInterval ci = exact_t_interval(*sel, data.y(), pos, iopts);
                v.exact_ci_lo = scale * ci.lo;
                v.exact_ci_hi = scale * ci.hi;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::BracketFailure) throw;
            }
        }
        report.variables.push_back(std::move(v));
    }
    return report;
}

}  // namespace selinf
