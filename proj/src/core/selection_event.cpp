#include "selinf/selection_event.hpp"

#include <cmath>

#include "selinf/error.hpp"

namespace selinf {

namespace {
constexpr double kFeasibilitySlack = 1e-8;
}

double QuasiAffineEvent::sigma_hat(const Vector& y) const {
    return std::sqrt(proj.residual(y).squaredNorm() / static_cast<double>(df));
}

Vector QuasiAffineEvent::slack(const Vector& y) const { return sigma_hat(y) * b - C * y; }

bool QuasiAffineEvent::contains(const Vector& y, double tol) const {
    const Vector cy = C * y;
    const Vector bound = sigma_hat(y) * b;
    for (Index i = 0; i < cy.size(); ++i)
        if (cy[i] > bound[i] + tol * (1.0 + std::abs(cy[i]))) return false;
    return true;
}

bool InactiveGeometry::satisfied(const Vector& u) const {
    if (rows.rows() == 0) return true;
    const Vector lhs = lhs_scale * (rows * u);
    for (Index i = 0; i < lhs.size(); ++i)
        if (!(lhs[i] < upper[i] && lhs[i] > lower[i])) return false;
    return true;
}

bool SelectionEvent::contains(const Vector& y) const {
    const Vector cy = event.C * y;
    const Vector bound = event.sigma_hat(y) * event.b;
    for (Index i = 0; i < cy.size(); ++i)
        if (!(cy[i] < bound[i])) return false;
    const Vector r = event.proj.residual(y);
    const double rn = r.norm();
    if (!(rn > 0.0)) return false;
    return inactive.satisfied(r / rn);
}

SelectionEvent build_event(const SqrtLassoFit& fit, const RegressionData& data, const ProjectionPair& proj) {
    const SelectedModel& model = fit.model;
    require(!model.empty(), "selection event needs a non-empty active set");
    require(proj.rank() == static_cast<Index>(model.size()), "projection does not match the active set");
    const Index k = static_cast<Index>(model.size());
    const Index n = data.n();
    const Index df = n - k;
    if (df < 1) fail(ErrorCode::ZeroResidualDf, "no residual degrees of freedom");

    const double lam = fit.lam;
    const double dual = dual_norm_sq(proj, model.signs);
    const double denom = 1.0 - lam * lam * dual;
    if (!(denom > 0.0)) fail(ErrorCode::DegenerateScaling, "1 - lam^2 ||(X_E^T)^+ z_E||^2 is not positive");

    Vector z(k);
    for (Index i = 0; i < k; ++i) z[i] = model.signs[static_cast<std::size_t>(i)];
    const Vector gz = proj.gram_inv * z;

    SelectionEvent out;
    out.model = model;
    out.lam = lam;

    ActiveGeometry& active = out.active;
    active.eta_norms = proj.pinv.rowwise().norm();
    active.eta_rows = active.eta_norms.cwiseInverse().asDiagonal() * proj.pinv;
    // sign(beta_i) = z_i  <=>  z_i U_{E,i}(y) >= sigma_E(y) alpha_i with
    // alpha_i = lam z_i sqrt(df / denom) ((X_E^T X_E)^{-1} z)_i / ||e_i^T X_E^+||.
    active.alpha.resize(k);
    const double scale = lam * std::sqrt(static_cast<double>(df) / denom);
    for (Index i = 0; i < k; ++i) active.alpha[i] = scale * z[i] * gz[i] / active.eta_norms[i];

    QuasiAffineEvent& event = out.event;
    event.C = -(z.asDiagonal() * active.eta_rows);
    event.b = -active.alpha;
    event.proj = proj;
    event.df = df;

    InactiveGeometry& inactive = out.inactive;
    inactive.lhs_scale = std::sqrt(denom / (lam * lam));
    std::vector<bool> in_model(static_cast<std::size_t>(data.p()), false);
    for (Index j : model.active) in_model[static_cast<std::size_t>(j)] = true;
    for (Index j = 0; j < data.p(); ++j)
        if (!in_model[static_cast<std::size_t>(j)]) inactive.columns.push_back(j);
    const Index m = static_cast<Index>(inactive.columns.size());
    const Vector dual_vec = proj.pinv.transpose() * z;  // (X_E^T)^+ z_E
    inactive.rows.resize(m, n);
    inactive.upper.resize(m);
    inactive.lower.resize(m);
    for (Index r = 0; r < m; ++r) {
        const auto col = data.X().col(inactive.columns[static_cast<std::size_t>(r)]);
        inactive.rows.row(r) = proj.residual(col).transpose();
        const double shift = col.dot(dual_vec);
        inactive.upper[r] = 1.0 - shift;
        inactive.lower[r] = -1.0 - shift;
    }

    if (!event.contains(data.y(), kFeasibilitySlack)) {
        fail(ErrorCode::InfeasibleObserved, "observed response violates its own selection event");
    }
    return out;
}

Vector ancillary_direction(const Vector& y, const ProjectionPair& proj) {
    const Vector r = proj.residual(y);
    const double rn = r.norm();
    if (!(rn > 1e-12 * std::max(1.0, y.norm()))) fail(ErrorCode::ZeroResidual, "response lies in the model space");
    return r / rn;
}

Vector ancillary_direction(const RegressionData& data, const ProjectionPair& proj) {
    return ancillary_direction(data.y(), proj);
}

}  // namespace selinf
