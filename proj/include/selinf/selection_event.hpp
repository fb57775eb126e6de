#pragma once

#include <vector>

#include "selinf/model.hpp"
#include "selinf/solver.hpp"

namespace selinf {

/// {y : C y <= sigma_P(y) b}, sigma_P(y)^2 = ||(I-P)y||^2 / df.
struct QuasiAffineEvent {
    Matrix C;
    Vector b;
    ProjectionPair proj;
    Index df = 0;

    double sigma_hat(const Vector& y) const;
    /// sigma_P(y) b - C y; non-negative entries mean the constraint holds.
    Vector slack(const Vector& y) const;
    bool contains(const Vector& y, double tol = 0.0) const;
};

/// Unit directions U_{E,i} and the offsets alpha_{i,E} of the active constraints.
struct ActiveGeometry {
    Matrix eta_rows;   // |E| x n
    Vector eta_norms;  // ||e_i^T X_E^+||
    Vector alpha;
};

/// lower < lhs_scale * rows * U_{-E}(y) < upper, one row per inactive column.
struct InactiveGeometry {
    double lhs_scale = 0.0;
    std::vector<Index> columns;
    Matrix rows;  // (p - |E|) x n, X_{-E}^T (I - P_E)
    Vector upper;
    Vector lower;

    /// Checks the constraints at a unit vector in null(P_E).
    bool satisfied(const Vector& u) const;
};

struct SelectionEvent {
    SelectedModel model;
    double lam = 0.0;
    QuasiAffineEvent event;
    ActiveGeometry active;
    InactiveGeometry inactive;

    /// Full membership test: both active and inactive inequalities (strict).
    bool contains(const Vector& y) const;
};

SelectionEvent build_event(const SqrtLassoFit& fit, const RegressionData& data, const ProjectionPair& proj);

/// U_{-E}(y) = (I-P)y / ||(I-P)y||
Vector ancillary_direction(const Vector& y, const ProjectionPair& proj);
Vector ancillary_direction(const RegressionData& data, const ProjectionPair& proj);

}  // namespace selinf
