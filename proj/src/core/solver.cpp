#include "selinf/solver.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "selinf/error.hpp"
#include "selinf/rng.hpp"

namespace selinf {

namespace {

constexpr double kActiveThreshold = 1e-10;
constexpr double kInterpolationTol = 1e-10;
constexpr int kDrawBlock = 64;

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

SelectedModel extract_model(const Vector& beta) {
    SelectedModel m;
    for (Index j = 0; j < beta.size(); ++j) {
        if (std::abs(beta[j]) > kActiveThreshold) {
            m.active.push_back(j);
            m.signs.push_back(beta[j] > 0 ? 1 : -1);
        }
    }
    return m;
}

void score_block(const Matrix& X, std::uint64_t seed, int first, int last, std::vector<double>& out) {
    const Index n = X.rows();
    for (int start = first; start < last; start += kDrawBlock) {
        const int count = std::min(kDrawBlock, last - start);
        Matrix eps(n, count);
        for (int c = 0; c < count; ++c) {
            Rng rng(seed, static_cast<std::uint64_t>(start + c));
            eps.col(c) = rng.normal_vector(n);
        }
        const Matrix scores = X.transpose() * eps;
        for (int c = 0; c < count; ++c) {
            out[static_cast<std::size_t>(start + c)] =
                scores.col(c).cwiseAbs().maxCoeff() / eps.col(c).norm();
        }
    }
}

// Attempts the closed-form solution on a fixed (E, z_E):
//   beta_E = X_E^+ y - lam * c * (X_E^T X_E)^{-1} z_E,  c = ||(I-P)y|| / sqrt(1 - lam^2 ||(X_E^T)^+ z||^2)
// and accepts it only if signs and KKT conditions hold.
bool polish(const RegressionData& data, double lam, const SelectedModel& model, double tol,
            SqrtLassoFit& out) {
    ProjectionPair proj;
    try {
        proj = build_projection(data.X(), model.active);
    } catch (const Error&) {
        return false;
    }
    if (proj.df() < 1) return false;
    const double denom = 1.0 - lam * lam * dual_norm_sq(proj, model.signs);
    if (!(denom > 0.0)) return false;
    const double c = proj.residual(data.y()).norm() / std::sqrt(denom);
    Vector z(static_cast<Index>(model.size()));
    for (std::size_t i = 0; i < model.size(); ++i) z[static_cast<Index>(i)] = model.signs[i];
    const Vector beta_e = proj.pinv * data.y() - lam * c * (proj.gram_inv * z);
    Vector beta = Vector::Zero(data.p());
    for (std::size_t i = 0; i < model.size(); ++i) {
        const double b = beta_e[static_cast<Index>(i)];
        if (std::abs(b) <= kActiveThreshold || (b > 0 ? 1 : -1) != model.signs[i]) return false;
        beta[model.active[i]] = b;
    }
    const Vector r = data.y() - data.X() * beta;
    const double rn = r.norm();
    if (rn < kInterpolationTol * data.y().norm()) return false;

    SqrtLassoFit candidate;
    candidate.beta = std::move(beta);
    candidate.model = model;
    candidate.lam = lam;
    candidate.residual_norm = rn;
    candidate.subgrad = data.X().transpose() * r / (lam * rn);
    for (std::size_t i = 0; i < model.size(); ++i) candidate.subgrad[model.active[i]] = model.signs[i];
    candidate.kkt_residual = check_kkt(candidate, data);
    if (candidate.kkt_residual > tol) return false;
    candidate.outer_iterations = out.outer_iterations;
    candidate.sweeps = out.sweeps;
    out = std::move(candidate);
    return true;
}

}  // namespace

double expected_noise_score(const Matrix& X, int draws, std::uint64_t seed, int threads) {
    require(draws >= 1, "mc_draws must be positive");
    require(X.size() > 0 && X.cwiseAbs().maxCoeff() > 0.0, "design must be nonzero");
    std::vector<double> scores(static_cast<std::size_t>(draws));
    const int workers = std::clamp(threads, 1, std::max(1, draws / kDrawBlock));
    if (workers == 1) {
        score_block(X, seed, 0, draws, scores);
    } else {
        std::vector<std::thread> pool;
        const int per = (draws + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int first = w * per;
            const int last = std::min(draws, first + per);
            if (first >= last) break;
            pool.emplace_back([&, first, last] { score_block(X, seed, first, last, scores); });
        }
        for (auto& t : pool) t.join();
    }
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / draws;
}

double choose_lambda(const Matrix& X, const TuningSpec& spec) {
    require(spec.kappa > 0.0 && spec.kappa <= 1.5, "kappa must lie in (0, 1.5]");
    require(spec.mc_draws >= 100, "mc_draws must be at least 100");
    return spec.kappa * expected_noise_score(X, spec.mc_draws, spec.seed, spec.threads);
}

double sqrt_lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, double lam) {
    return (y - X * beta).norm() + lam * beta.lpNorm<1>();
}

LassoSolve solve_lasso(const Matrix& X, const Vector& y, double gamma, const Vector& start,
                       double tol, int max_sweeps) {
    const Index p = X.cols();
    LassoSolve out;
    out.beta = start.size() == p ? start : Vector::Zero(p);
    const Vector colsq = X.colwise().squaredNorm();
    Vector r = y - X * out.beta;
    const double scale = tol * std::max(y.norm(), 1e-300);

    auto update = [&](Index j) {
        if (colsq[j] <= 0.0) {
            out.beta[j] = 0.0;
            return 0.0;
        }
        const double old = out.beta[j];
        const double rho = X.col(j).dot(r) + colsq[j] * old;
        const double next = soft_threshold(rho, gamma) / colsq[j];
        if (next != old) {
            r.noalias() -= (next - old) * X.col(j);
            out.beta[j] = next;
        }
        return std::abs(next - old) * std::sqrt(colsq[j]);
    };

    std::vector<Index> active;
    while (out.sweeps < max_sweeps) {
        double change = 0.0;
        for (Index j = 0; j < p; ++j) change = std::max(change, update(j));
        ++out.sweeps;
        if (change <= scale) {
            out.converged = true;
            return out;
        }
        active.clear();
        for (Index j = 0; j < p; ++j)
            if (out.beta[j] != 0.0) active.push_back(j);
        while (out.sweeps < max_sweeps) {
            double inner = 0.0;
            for (Index j : active) inner = std::max(inner, update(j));
            ++out.sweeps;
            if (inner <= scale) break;
        }
    }
    return out;
}

double dual_norm_sq(const ProjectionPair& proj, const std::vector<int>& signs) {
    if (signs.empty()) return 0.0;
    Vector z(static_cast<Index>(signs.size()));
    for (std::size_t i = 0; i < signs.size(); ++i) z[static_cast<Index>(i)] = signs[i];
    return (proj.pinv.transpose() * z).squaredNorm();
}

SqrtLassoFit fit_sqrt_lasso(const RegressionData& data, double lam, const SolverOptions& opts) {
    require(lam > 0.0 && std::isfinite(lam), "lambda must be positive");
    require(opts.tol > 0.0, "tolerance must be positive");
    require(opts.max_sweeps >= 1, "max_sweeps must be positive");
    const Matrix& X = data.X();
    const Vector& y = data.y();
    const double ynorm = y.norm();
    if (!(ynorm > 0.0)) fail(ErrorCode::InterpolationDegenerate, "response is identically zero");

    SqrtLassoFit fit;
    fit.lam = lam;
    const Vector xty = X.transpose() * y;
    if (xty.cwiseAbs().maxCoeff() / ynorm <= lam) {
        fit.beta = Vector::Zero(data.p());
        fit.subgrad = xty / (lam * ynorm);
        fit.residual_norm = ynorm;
        fit.kkt_residual = check_kkt(fit, data);
        return fit;
    }

    const double inner_tol = std::min(opts.tol, 1e-8) * 1e-2;
    Vector beta = Vector::Zero(data.p());
    double gamma = lam * ynorm;
    SelectedModel previous;
    bool have_previous = false;
    while (true) {
        ++fit.outer_iterations;
        const int budget = opts.max_sweeps - fit.sweeps;
        if (budget <= 0) fail(ErrorCode::NonConvergence, "coordinate sweep budget exhausted");
        LassoSolve step = solve_lasso(X, y, gamma, beta, inner_tol, budget);
        fit.sweeps += step.sweeps;
        beta = std::move(step.beta);

        const Vector r = y - X * beta;
        const double rn = r.norm();
        if (rn < kInterpolationTol * ynorm) {
            fail(ErrorCode::InterpolationDegenerate,
                 "residual vanished; lambda is too small for this design");
        }
        const double next_gamma = lam * rn;
        SelectedModel model = extract_model(beta);

        if (have_previous && model == previous && !model.empty() && polish(data, lam, model, opts.tol, fit)) {
            return fit;
        }
        if (std::abs(next_gamma - gamma) <= opts.tol * gamma) {
            fit.beta = beta;
            fit.model = model;
            fit.residual_norm = rn;
            fit.subgrad = X.transpose() * r / (lam * rn);
            for (std::size_t i = 0; i < model.size(); ++i) fit.subgrad[model.active[i]] = model.signs[i];
            fit.kkt_residual = check_kkt(fit, data);
            if (fit.kkt_residual <= opts.tol) return fit;
        }
        gamma = next_gamma;
        previous = std::move(model);
        have_previous = true;
    }
}

double lasso_equivalent_gamma(const SqrtLassoFit& fit, const ProjectionPair& proj, double sigma2_ols) {
    require(sigma2_ols >= 0.0, "sigma2 must be non-negative");
    const double denom = 1.0 - fit.lam * fit.lam * dual_norm_sq(proj, fit.model.signs);
    if (!(denom > 0.0)) {
        fail(ErrorCode::DegenerateScaling, "1 - lam^2 ||(X_E^T)^+ z_E||^2 is not positive");
    }
    return fit.lam * std::sqrt(sigma2_ols * static_cast<double>(proj.df()) / denom);
}

double check_kkt(const SqrtLassoFit& fit, const RegressionData& data) {
    const Vector r = data.y() - data.X() * fit.beta;
    const double rn = r.norm();
    require(rn > 0.0, "KKT check needs a nonzero residual");
    const Vector score = data.X().transpose() * r / rn;
    double worst = (score - fit.lam * fit.subgrad).cwiseAbs().maxCoeff();
    std::vector<bool> is_active(static_cast<std::size_t>(data.p()), false);
    for (Index j : fit.model.active) is_active[static_cast<std::size_t>(j)] = true;
    for (Index j = 0; j < data.p(); ++j) {
        if (!is_active[static_cast<std::size_t>(j)])
            worst = std::max(worst, fit.lam * (std::abs(fit.subgrad[j]) - 1.0));
    }
    return worst;
}

}  // namespace selinf
