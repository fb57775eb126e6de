#include "selinf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "selinf/error.hpp"
#include "selinf/rng.hpp"
#include "selinf/truncated.hpp"

namespace selinf {

namespace {

constexpr long kProbeProposals = 10'000;
constexpr double kProbeRate = 1e-3;

struct SphereConstraints {
    Matrix A;  // rows act on null-space coordinates
    Vector lower;
    Vector upper;

    bool satisfied(const Vector& v) const {
        if (A.rows() == 0) return true;
        const Vector lhs = A * v;
        for (Index i = 0; i < lhs.size(); ++i)
            if (!(lhs[i] > lower[i] && lhs[i] < upper[i])) return false;
        return true;
    }
};

Vector random_unit(Rng& rng, Index dim) {
    Vector g = rng.normal_vector(dim);
    double norm = g.norm();
    while (!(norm > 0.0)) {
        g = rng.normal_vector(dim);
        norm = g.norm();
    }
    return g / norm;
}

// Shifts [s, e] (a subset of [-pi - 2pi, pi + 2pi]) back into [-pi, pi], splitting on wrap.
void push_wrapped(std::vector<Interval>& out, double s, double e) {
    constexpr double pi = std::numbers::pi;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (double shift : {-two_pi, 0.0, two_pi}) {
        const double lo = std::max(s + shift, -pi);
        const double hi = std::min(e + shift, pi);
        if (lo < hi) out.push_back({lo, hi});
    }
}

// Angles psi in [-pi, pi] with lower < R cos(psi - phase) < upper.
IntervalUnion arc_set(double radius, double phase, double lower, double upper) {
    constexpr double pi = std::numbers::pi;
    if (radius <= 0.0) {
        return (lower < 0.0 && 0.0 < upper) ? IntervalUnion({{-pi, pi}}) : IntervalUnion();
    }
    std::vector<Interval> up;
    if (upper >= radius) {
        up.push_back({-pi, pi});
    } else if (upper > -radius) {
        const double beta = std::acos(upper / radius);
        up.push_back({-pi, -beta});
        up.push_back({beta, pi});
    }
    std::vector<Interval> low;
    if (lower <= -radius) {
        low.push_back({-pi, pi});
    } else if (lower < radius) {
        const double gamma = std::acos(lower / radius);
        low.push_back({-gamma, gamma});
    }
    const IntervalUnion rel = IntervalUnion(up).intersect(IntervalUnion(low));
    std::vector<Interval> shifted;
    for (const auto& iv : rel.intervals()) push_wrapped(shifted, iv.lo + phase, iv.hi + phase);
    return IntervalUnion(std::move(shifted));
}

// One hit-and-run move along a uniformly random great circle through v.
void great_circle_step(const SphereConstraints& cons, Vector& v, Rng& rng) {
    const Index dim = v.size();
    if (dim < 2) return;
    Vector d = rng.normal_vector(dim);
    d -= d.dot(v) * v;
    const double dn = d.norm();
    if (!(dn > 0.0)) return;
    d /= dn;
    constexpr double pi = std::numbers::pi;
    IntervalUnion feasible({{-pi, pi}});
    if (cons.A.rows() > 0) {
        const Vector pv = cons.A * v;
        const Vector qd = cons.A * d;
        for (Index i = 0; i < pv.size() && !feasible.empty(); ++i) {
            const double radius = std::hypot(pv[i], qd[i]);
            const double phase = std::atan2(qd[i], pv[i]);
            feasible = feasible.intersect(arc_set(radius, phase, cons.lower[i], cons.upper[i]));
        }
    }
    const double total = feasible.length();
    if (!(total > 0.0)) return;
    double target = rng.uniform() * total;
    double phi = 0.0;
    for (const auto& iv : feasible.intervals()) {
        const double len = iv.hi - iv.lo;
        if (target <= len) {
            phi = iv.lo + target;
            break;
        }
        target -= len;
        phi = iv.hi;
    }
    Vector next = std::cos(phi) * v + std::sin(phi) * d;
    next.normalize();
    if (cons.satisfied(next)) v = std::move(next);
}

}  // namespace

const char* to_string(SamplerMethod method) noexcept {
    switch (method) {
        case SamplerMethod::Auto: return "auto";
        case SamplerMethod::Rejection: return "rejection";
        case SamplerMethod::HitAndRun: return "hit-and-run";
    }
    return "unknown";
}

Matrix null_space_basis(const ProjectionPair& proj) {
    const Index n = proj.n();
    const Index k = proj.rank();
    if (k == 0) return Matrix::Identity(n, n);
    Eigen::HouseholderQR<Matrix> qr(proj.basis);
    const Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
    return Q.rightCols(n - k);
}

AncillarySampler make_sampler(const SelectionEvent& sel, const RegressionData& data, std::uint64_t seed,
                              SamplerMethod method) {
    AncillarySampler s;
    s.inactive = sel.inactive;
    s.null_basis = null_space_basis(sel.event.proj);
    s.start = ancillary_direction(data, sel.event.proj);
    s.seed = seed;
    s.method = method;
    return s;
}

AncillaryDraws sample_ancillary(const AncillarySampler& sampler, int m) {
    require(m >= 1, "number of draws must be positive");
    const Matrix& N = sampler.null_basis;
    const Index n = N.rows();
    const Index dim = N.cols();
    require(dim >= 1, "null space is empty");

    SphereConstraints cons;
    if (sampler.inactive.rows.rows() > 0) {
        cons.A = sampler.inactive.lhs_scale * (sampler.inactive.rows * N);
        cons.lower = sampler.inactive.lower;
        cons.upper = sampler.inactive.upper;
    }

    AncillaryDraws out;
    out.draws.resize(n, m);
    Rng rng(sampler.seed, 0);

    if (sampler.method != SamplerMethod::HitAndRun) {
        out.method = SamplerMethod::Rejection;
        int filled = 0;
        while (filled < m && out.proposals < sampler.max_proposals) {
            const Vector v = random_unit(rng, dim);
            ++out.proposals;
            if (cons.satisfied(v)) {
                out.draws.col(filled++) = N * v;
                ++out.accepted;
            }
            if (sampler.method == SamplerMethod::Auto && out.proposals == kProbeProposals &&
                out.acceptance_rate() < kProbeRate) {
                break;
            }
        }
        if (filled == m) return out;
        if (sampler.method == SamplerMethod::Rejection) {
            fail(ErrorCode::AcceptanceTooLow, "rejection sampler exhausted its proposal budget");
        }
    }

    // Hit-and-run on the constrained sphere, started at the observed direction.
    out.method = SamplerMethod::HitAndRun;
    require(sampler.start.size() == n, "hit-and-run needs the observed direction");
    Vector v = N.transpose() * sampler.start;
    v.normalize();
    if (!cons.satisfied(v)) fail(ErrorCode::AcceptanceTooLow, "observed direction violates the inactive constraints");
    Rng chain(sampler.seed, 1);
    const int thin = std::max(1, sampler.thinning);
    for (int step = 0; step < 10 * thin; ++step) great_circle_step(cons, v, chain);
    for (int i = 0; i < m; ++i) {
        for (int step = 0; step < thin; ++step) great_circle_step(cons, v, chain);
        out.draws.col(i) = N * v;
    }
    out.accepted = m;
    return out;
}

Matrix group_residual_basis(const RegressionData& data, const ProjectionPair& proj, const std::vector<Index>& group) {
    require(!group.empty(), "group must be non-empty");
    Matrix M(data.n(), static_cast<Index>(group.size()));
    for (std::size_t g = 0; g < group.size(); ++g) {
        require(group[g] >= 0 && group[g] < data.p(), "group index out of range");
        M.col(static_cast<Index>(g)) = proj.residual(data.X().col(group[g]));
    }
    const double scale = select_columns(data.X(), group).norm();
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    if (!(s[0] > 1e-10 * scale) || s[s.size() - 1] <= 1e-10 * s[0]) {
        fail(ErrorCode::DegenerateGroup, "group columns add no residual directions beyond the model");
    }
    return svd.matrixU();
}

double f_statistic_direction(const Matrix& group_basis, const Vector& u, Index group_size, Index resid_df) {
    const double explained = (group_basis.transpose() * u).squaredNorm();
    const double rest = u.squaredNorm() - explained;
    if (!(rest > 0.0)) fail(ErrorCode::DegenerateGroup, "F statistic undefined: residual fully explained by group");
    return (explained / double(group_size)) / (rest / double(resid_df));
}

double f_statistic_response(const RegressionData& data, const SelectedModel& model, const std::vector<Index>& group) {
    std::vector<Index> joint = model.active;
    joint.insert(joint.end(), group.begin(), group.end());
    std::sort(joint.begin(), joint.end());
    const ProjectionPair small = build_projection(data.X(), model.active);
    const ProjectionPair big = build_projection(data.X(), joint);
    const Index resid_df = data.n() - static_cast<Index>(joint.size());
    const double num = (big.project(data.y()) - small.project(data.y())).squaredNorm();
    const double den = big.residual(data.y()).squaredNorm();
    if (!(den > 0.0)) fail(ErrorCode::DegenerateGroup, "F statistic undefined");
    return (num / double(group.size())) / (den / double(resid_df));
}

GroupFTest selective_f_test(const RegressionData& data, const ProjectionPair& proj, const SelectedModel& model,
                            const std::vector<Index>& group, const AncillarySampler& sampler, int m) {
    require(m >= 1, "number of draws must be positive");
    require(!group.empty(), "group must be non-empty");
    for (Index g : group)
        require(std::find(model.active.begin(), model.active.end(), g) == model.active.end(),
                "group must be disjoint from the active set");
    std::vector<Index> sorted = group;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "group has repeated columns");
    const Index gsize = static_cast<Index>(group.size());
    const Index resid_df = data.n() - gsize - static_cast<Index>(model.size());
    require(resid_df >= 1, "n - |G u E| must be at least 1");

    const Matrix W = group_residual_basis(data, proj, group);
    const Vector u_obs = ancillary_direction(data, proj);
    GroupFTest out;
    out.f_observed = f_statistic_direction(W, u_obs, gsize, resid_df);
    out.max_abs_residual = u_obs.cwiseAbs().maxCoeff();

    const AncillaryDraws draws = sample_ancillary(sampler, m);
    out.method = draws.method;
    out.draws = m;
    for (Index i = 0; i < draws.draws.cols(); ++i) {
        const Vector u = draws.draws.col(i);
        const double explained = (W.transpose() * u).squaredNorm();
        const double rest = 1.0 - explained;
        const double f = rest > 0.0 ? (explained / double(gsize)) / (rest / double(resid_df)) : kInf;
        if (f >= out.f_observed) ++out.exceed;
    }
    out.p_value = double(out.exceed + 1) / double(m + 1);
    return out;
}

}  // namespace selinf
