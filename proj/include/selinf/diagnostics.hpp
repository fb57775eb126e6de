#pragma once

#include <cstdint>
#include <vector>

#include "selinf/selection_event.hpp"

namespace selinf {

enum class SamplerMethod { Auto, Rejection, HitAndRun };

const char* to_string(SamplerMethod method) noexcept;

/// Draws U_{-E} from the uniform law on the unit sphere of null(P_E), restricted to
/// the inactive constraints of a selection event.
struct AncillarySampler {
    InactiveGeometry inactive;
    Matrix null_basis;  // n x df, orthonormal basis of null(P_E)
    Vector start;       // observed U_{-E}; seeds hit-and-run
    std::uint64_t seed = 0;
    SamplerMethod method = SamplerMethod::Auto;
    long max_proposals = 2'000'000;
    int thinning = 50;
};

AncillarySampler make_sampler(const SelectionEvent& sel, const RegressionData& data, std::uint64_t seed,
                              SamplerMethod method = SamplerMethod::Auto);

/// Orthonormal basis of the orthogonal complement of col(proj).
Matrix null_space_basis(const ProjectionPair& proj);

struct AncillaryDraws {
    Matrix draws;  // n x m, one unit vector per column
    SamplerMethod method = SamplerMethod::Rejection;
    long proposals = 0;
    long accepted = 0;

    double acceptance_rate() const { return proposals > 0 ? double(accepted) / double(proposals) : 0.0; }
};

AncillaryDraws sample_ancillary(const AncillarySampler& sampler, int m);

/// Orthonormal basis of (I - P_E) X_G. Throws DegenerateGroup when G adds nothing.
Matrix group_residual_basis(const RegressionData& data, const ProjectionPair& proj, const std::vector<Index>& group);

/// F statistic for adding G, evaluated on a unit vector u in null(P_E).
double f_statistic_direction(const Matrix& group_basis, const Vector& u, Index group_size, Index resid_df);

/// The usual F_{G|G u E}(y), computed through the projection onto G u E.
double f_statistic_response(const RegressionData& data, const SelectedModel& model, const std::vector<Index>& group);

struct GroupFTest {
    double f_observed = 0.0;
    double p_value = 1.0;
    int draws = 0;
    int exceed = 0;
    SamplerMethod method = SamplerMethod::Rejection;
    double max_abs_residual = 0.0;  // ||U_{-E}(y)||_inf, summary only
};

GroupFTest selective_f_test(const RegressionData& data, const ProjectionPair& proj, const SelectedModel& model,
                            const std::vector<Index>& group, const AncillarySampler& sampler, int m);

}  // namespace selinf
