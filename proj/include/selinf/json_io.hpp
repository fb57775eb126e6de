#pragma once

#include <string>

#include <json.hpp>

#include "selinf/diagnostics.hpp"
#include "selinf/inference.hpp"
#include "selinf/selection_event.hpp"
#include "selinf/solver.hpp"

namespace selinf {

inline constexpr const char* kSchema = "selinf/v1";

/// Non-finite doubles become null (JSON has no infinities).
nlohmann::json finite_or_null(double v);

nlohmann::json fit_to_json(const SqrtLassoFit& fit, const RegressionData& data);
nlohmann::json report_to_json(const SelectiveReport& report);
/// Reproducibility archive of the quasi-affine event: C, b, df, alpha, E, z_E.
nlohmann::json event_to_json(const SelectionEvent& sel, const RegressionData& data);
nlohmann::json ftest_to_json(const GroupFTest& test, const std::vector<std::string>& group_names);

/// Fixed-width table of a report, one line per selected variable.
std::string report_table(const SelectiveReport& report);

}  // namespace selinf
