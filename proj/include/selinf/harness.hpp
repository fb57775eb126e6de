#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "selinf/model.hpp"
#include "selinf/rng.hpp"

namespace selinf {

/// Benjamini-Hochberg step-up. Returns rejected indices in increasing order.
std::vector<Index> bhq(const std::vector<double>& pvalues, double q);

enum class ScenarioKind { Coverage, SigmaCompare, Fdr };

const char* to_string(ScenarioKind kind) noexcept;

struct SimScenario {
    std::string name = "custom";
    ScenarioKind kind = ScenarioKind::Coverage;
    Index n = 150;
    Index p = 200;
    Index sparsity = 10;
    double rho = 0.3;
    double amplitude = 6.0;  // coefficient magnitude in units of sigma_true (unit-norm columns)
    double sigma_true = 1.0;
    double kappa = 0.8;
    int replicates = 100;
    std::uint64_t seed = 1;
    bool random_signs = false;
    int lambda_draws = 1000;
    int threads = 1;
    // coverage
    std::vector<double> levels{0.85, 0.90, 0.95, 0.97};
    long min_intervals = 0;  // stop once this many intervals per level are formed (0 = use all replicates)
    // fdr
    double q = 0.2;
    std::vector<double> rho_grid;
    std::vector<double> kappa_grid;

    void validate() const;
};

/// Parses `key = value` lines (# comments). Unknown keys are rejected.
SimScenario parse_scenario(const std::string& text, SimScenario base = {});
/// Named configurations: coverage-desk, coverage-full, sigma-desk, sigma-full, fdr-desk, fdr-full.
SimScenario named_scenario(const std::string& name);
std::vector<std::string> scenario_names();

/// FNV-1a over a canonical rendering of every field.
std::uint64_t scenario_hash(const SimScenario& s);
std::string scenario_hash_hex(const SimScenario& s);
nlohmann::json scenario_to_json(const SimScenario& s);

/// Rows drawn i.i.d. from an equicorrelated Gaussian (pairwise correlation rho),
/// columns scaled to unit norm.
Matrix equicorrelated_design(Index n, Index p, double rho, Rng& rng);

struct SimInstance {
    Matrix X;
    Vector beta;
    std::vector<Index> support;
    Vector y;
};

SimInstance generate_instance(const SimScenario& s, double rho, Rng& rng);

using RecordSink = std::function<void(const nlohmann::json&)>;

struct CoverageRow {
    double level = 0.0;
    long intervals = 0;
    long covered = 0;
    long unbounded = 0;
    long failures = 0;
    double coverage() const { return intervals > 0 ? double(covered) / double(intervals) : 0.0; }
};

struct CoverageResult {
    std::vector<CoverageRow> rows;
    int replicates_used = 0;
    int empty_selections = 0;
    int failed_replicates = 0;
};

struct SigmaSummary {
    long count = 0;
    double median_plr = 0.0;
    double median_pl = 0.0;
    double median_ols = 0.0;
};

struct SigmaResult {
    int replicates_used = 0;
    int empty_selections = 0;
    int failed_replicates = 0;
    double screening_fraction = 0.0;
    SigmaSummary screened;
    SigmaSummary not_screened;
    SigmaSummary all;
};

struct FdrRow {
    double rho = 0.0;
    double kappa = 0.0;
    int replicates = 0;
    int failed = 0;
    double mean_fdp = 0.0;
    double mean_power = 0.0;  // NaN when sparsity is 0
    double mean_selected = 0.0;
    double mean_rejected = 0.0;
};

struct FdrResult {
    std::vector<FdrRow> rows;
};

CoverageResult run_coverage_sim(const SimScenario& s, const RecordSink& sink = {});
SigmaResult run_sigma_sim(const SimScenario& s, const RecordSink& sink = {});
FdrResult run_fdr_sim(const SimScenario& s, const RecordSink& sink = {});

/// Runs the scenario's kind; returns a summary JSON carrying the scenario hash.
nlohmann::json run_simulation(const SimScenario& s, const RecordSink& sink = {});
/// CSV rendering of a summary produced by run_simulation.
std::string summary_to_csv(const nlohmann::json& summary);

}  // namespace selinf
