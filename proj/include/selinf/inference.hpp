#pragma once

#include <limits>
#include <string>
#include <vector>

#include "selinf/selection_event.hpp"
#include "selinf/truncated.hpp"

namespace selinf {

enum class Alternative { TwoSided, Greater, Less };

/// Hypothesis eta^T mu = theta0 for the `position`-th member of E.
struct TestSpec {
    Index position = 0;
    double theta0 = 0.0;
    Alternative alternative = Alternative::TwoSided;
};

/// The studentized pivot and its truncation set for one direction.
struct PivotSlice {
    double tau = 0.0;
    double df = 0.0;
    IntervalUnion omega;
};

PivotSlice selective_pivot(const SelectionEvent& sel, const Vector& y, Index position, double theta);

/// Exact truncated-T p-value.
double selective_pvalue(const SelectionEvent& sel, const Vector& y, const TestSpec& spec);

/// Gaussian-approximation ingredients: observed eta^T y and the affine truncation
/// interval for eta^T z given (P - eta eta^T) z = (P - eta eta^T) y.
struct GaussianSlice {
    double observed = 0.0;
    Interval truncation;
};

GaussianSlice gaussian_slice(const SelectionEvent& sel, const Vector& y, Index position);

struct ConfidenceInterval {
    double lo = -kInf;
    double hi = kInf;
    bool lo_unbounded = false;  // bracket search hit its cap on this side
    bool hi_unbounded = false;
};

struct IntervalOptions {
    double level = 0.95;
    double max_bracket_sds = 20.0;
    /// Report a failed bracket as an infinite endpoint instead of throwing BracketFailure.
    bool allow_unbounded = false;
};

/// Two-sided truncated-Gaussian p-value of H0: mean = theta.
double truncated_gaussian_pvalue(double observed, const Interval& truncation, double sd, double theta);

/// {theta : a/2 <= F_theta(observed) <= 1 - a/2} for N(theta, sd^2) truncated to `truncation`.
ConfidenceInterval truncated_gaussian_interval(double observed, const Interval& truncation, double sd,
                                               const IntervalOptions& opts);

/// Interval for eta^T mu, eta the unit direction of the `position`-th active variable.
ConfidenceInterval gaussian_approx_interval(const SelectionEvent& sel, const Vector& y, Index position,
                                            double sigma2_plugin, const IntervalOptions& opts);

/// Inverts the exact truncated-T test over theta (Omega moves with theta). Slow path.
ConfidenceInterval exact_t_interval(const SelectionEvent& sel, const Vector& y, Index position,
                                    const IntervalOptions& opts);

/// Truncation of ||(I-P)y||^2 given Py: [df L(Py)^2, df U(Py)^2].
struct ResidualTruncation {
    double lower = 0.0;
    double upper = kInf;
};

ResidualTruncation residual_truncation(const QuasiAffineEvent& event, const Vector& y);

/// Root of H_df(L, U, s2) = sigma_P(y)^2.
double sigma2_pseudolik(const QuasiAffineEvent& event, const Vector& y);
/// Root of H_df(L, U, s2) + t s2 - (1 + t) sigma_P(y)^2 with t = df^{-1/2}.
double sigma2_pseudolik_regularized(const QuasiAffineEvent& event, const Vector& y);

/// Same estimators given the residual mean square, its degrees of freedom and the truncation.
double solve_pseudolik(double observed_sigma2, int df, const ResidualTruncation& trunc, double reg);

enum class SigmaChoice { RegularizedPseudolik, Pseudolik, Ols, Fixed };

struct InferenceOptions {
    double level = 0.95;
    SigmaChoice sigma = SigmaChoice::RegularizedPseudolik;
    double sigma2_value = 0.0;  // used with SigmaChoice::Fixed
    bool exact_ci = false;
    Alternative alternative = Alternative::TwoSided;
    double max_bracket_sds = 20.0;
};

struct VariableInference {
    Index column = 0;
    std::string name;
    int sign = 1;
    double estimate = 0.0;  // e_j^T X_E^+ y
    double p_value = 1.0;
    double ci_lo = -kInf;
    double ci_hi = kInf;
    bool ci_lo_unbounded = false;
    bool ci_hi_unbounded = false;
    double exact_ci_lo = std::numeric_limits<double>::quiet_NaN();
    double exact_ci_hi = std::numeric_limits<double>::quiet_NaN();
};

struct SelectiveReport {
    SelectedModel model;
    double lambda = 0.0;
    double kappa = std::numeric_limits<double>::quiet_NaN();
    Index df = 0;
    double ci_level = 0.95;
    double sigma2_ols = 0.0;
    double sigma2_pl = 0.0;
    double sigma2_plr = 0.0;
    double sigma2_plugin = 0.0;
    std::string sigma_source;
    ResidualTruncation truncation;
    std::vector<VariableInference> variables;
};

SelectiveReport build_report(const RegressionData& data, const SqrtLassoFit& fit, const InferenceOptions& opts,
                             double kappa = std::numeric_limits<double>::quiet_NaN());

}  // namespace selinf
