#include "selinf/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace selinf {

using nlohmann::json;

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

namespace {

json vec(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(finite_or_null(v[i]));
    return out;
}

json mat(const Matrix& m) {
    json out = json::array();
    for (Index i = 0; i < m.rows(); ++i) out.push_back(vec(m.row(i).transpose()));
    return out;
}

json names_of(const std::vector<Index>& cols, const RegressionData& data) {
    json out = json::array();
    for (Index j : cols) out.push_back(data.column_names()[static_cast<std::size_t>(j)]);
    return out;
}

}  // namespace

json fit_to_json(const SqrtLassoFit& fit, const RegressionData& data) {
    return json{{"schema", kSchema},
                {"lambda", fit.lam},
                {"active", fit.model.active},
                {"active_names", names_of(fit.model.active, data)},
                {"signs", fit.model.signs},
                {"beta", vec(fit.beta)},
                {"kkt_residual", fit.kkt_residual},
                {"residual_norm", fit.residual_norm},
                {"outer_iterations", fit.outer_iterations},
                {"sweeps", fit.sweeps}};
}

json report_to_json(const SelectiveReport& r) {
    json vars = json::array();
    for (const auto& v : r.variables) {
        json item{{"column", v.column},
                  {"name", v.name},
                  {"sign", v.sign},
                  {"estimate", v.estimate},
                  {"p_value", v.p_value},
                  {"ci_lo", finite_or_null(v.ci_lo)},
                  {"ci_hi", finite_or_null(v.ci_hi)},
                  {"ci_lo_unbounded", v.ci_lo_unbounded},
                  {"ci_hi_unbounded", v.ci_hi_unbounded}};
        if (!std::isnan(v.exact_ci_lo) || !std::isnan(v.exact_ci_hi)) {
            item["exact_ci_lo"] = finite_or_null(v.exact_ci_lo);
            item["exact_ci_hi"] = finite_or_null(v.exact_ci_hi);
        }
        vars.push_back(item);
    }
    return json{{"schema", kSchema},
                {"lambda", r.lambda},
                {"kappa", finite_or_null(r.kappa)},
                {"active", r.model.active},
                {"signs", r.model.signs},
                {"df", r.df},
                {"ci_level", r.ci_level},
                {"sigma2", json{{"ols", r.sigma2_ols},
                                {"pl", finite_or_null(r.sigma2_pl)},
                                {"plr", finite_or_null(r.sigma2_plr)},
                                {"plugin", r.sigma2_plugin},
                                {"source", r.sigma_source}}},
                {"residual_truncation", json{{"lower", r.truncation.lower},
                                             {"upper", finite_or_null(r.truncation.upper)}}},
                {"variables", vars}};
}

json event_to_json(const SelectionEvent& sel, const RegressionData& data) {
    return json{{"schema", kSchema},
                {"lambda", sel.lam},
                {"E", sel.model.active},
                {"E_names", names_of(sel.model.active, data)},
                {"z_E", sel.model.signs},
                {"df", sel.event.df},
                {"alpha", vec(sel.active.alpha)},
                {"C", mat(sel.event.C)},
                {"b", vec(sel.event.b)},
                {"inactive", json{{"columns", sel.inactive.columns},
                                  {"lhs_scale", sel.inactive.lhs_scale},
                                  {"lower", vec(sel.inactive.lower)},
                                  {"upper", vec(sel.inactive.upper)}}}};
}

json ftest_to_json(const GroupFTest& t, const std::vector<std::string>& group_names) {
    return json{{"schema", kSchema},
                {"group", group_names},
                {"f_observed", t.f_observed},
                {"p_value", t.p_value},
                {"draws", t.draws},
                {"exceed", t.exceed},
                {"sampler", to_string(t.method)},
                {"max_abs_residual", t.max_abs_residual}};
}

std::string report_table(const SelectiveReport& r) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "lambda = %.6g   df = %ld   sigma^2 = %.6g (%s)   level = %.3g\n", r.lambda,
                  static_cast<long>(r.df), r.sigma2_plugin, r.sigma_source.c_str(), r.ci_level);
    os << line;
    std::snprintf(line, sizeof line, "%-16s %5s %12s %12s %12s %12s\n", "variable", "sign", "estimate", "p-value",
                  "ci_lo", "ci_hi");
    os << line;
    for (const auto& v : r.variables) {
        std::snprintf(line, sizeof line, "%-16s %5d %12.5g %12.4g %12.5g %12.5g\n", v.name.c_str(), v.sign,
                      v.estimate, v.p_value, v.ci_lo, v.ci_hi);
        os << line;
    }
    return os.str();
}

}  // namespace selinf
