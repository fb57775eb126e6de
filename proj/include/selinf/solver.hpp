#pragma once

#include <cstdint>

#include "selinf/model.hpp"

namespace selinf {

/// Monte-Carlo tuning rule: lambda = kappa * E(||X^T e||_inf / ||e||_2), e ~ N(0, I).
struct TuningSpec {
    double kappa = 0.8;
    int mc_draws = 1000;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct SolverOptions {
    double tol = 1e-8;
    int max_sweeps = 50000;  // coordinate sweeps, summed over all inner LASSO solves
};

struct SqrtLassoFit {
    Vector beta;
    SelectedModel model;
    Vector subgrad;
    double lam = 0.0;
    double residual_norm = 0.0;
    double kkt_residual = 0.0;
    int outer_iterations = 0;
    int sweeps = 0;
};

/// E(||X^T e||_inf / ||e||_2) estimated from `draws` seeded Gaussian vectors.
/// Draw m uses substream m of `seed`, so the value does not depend on `threads`.
double expected_noise_score(const Matrix& X, int draws, std::uint64_t seed, int threads = 1);

double choose_lambda(const Matrix& X, const TuningSpec& spec);

/// ||y - X beta||_2 + lam ||beta||_1
double sqrt_lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, double lam);

struct LassoSolve {
    Vector beta;
    int sweeps = 0;
    bool converged = false;
};

/// Cyclic coordinate descent for 0.5||y - X beta||^2 + gamma ||beta||_1, warm-started
/// at `start`. Stops once no coordinate moves by more than tol * ||y|| (column-scaled).
LassoSolve solve_lasso(const Matrix& X, const Vector& y, double gamma, const Vector& start,
                       double tol, int max_sweeps);

/// Square-root LASSO by alternating gamma_t = lam ||y - X beta_t|| and a warm-started
/// LASSO solve at gamma_t.
SqrtLassoFit fit_sqrt_lasso(const RegressionData& data, double lam, const SolverOptions& opts = {});

/// gamma = lam * sigma_E * sqrt((n - |E|) / (1 - lam^2 ||(X_E^T)^+ z_E||^2)).
double lasso_equivalent_gamma(const SqrtLassoFit& fit, const ProjectionPair& proj, double sigma2_ols);

/// ||(X_E^T)^+ z_E||^2
double dual_norm_sq(const ProjectionPair& proj, const std::vector<int>& signs);

/// ||X^T r / ||r|| - lam z||_inf for the fit's stored subgradient, with any
/// |z_j| > 1 off the active set counted as a violation.
double check_kkt(const SqrtLassoFit& fit, const RegressionData& data);

}  // namespace selinf
