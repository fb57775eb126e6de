#include "selinf/selinf.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>

#include "selinf/diagnostics.hpp"
#include "selinf/error.hpp"
#include "selinf/harness.hpp"
#include "selinf/inference.hpp"
#include "selinf/json_io.hpp"
#include "selinf/solver.hpp"

struct selinf_dataset {
    selinf::RegressionData data;
};

struct selinf_fit {
    selinf::SqrtLassoFit fit;
    double kappa;
    selinf::Index n, p;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_kind;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <class Body>
selinf_status guarded(Body&& body) {
    last_error.clear();
    last_kind.clear();
    try {
        body();
        return SELINF_OK;
    } catch (const selinf::Error& e) {
        last_error = e.what();
        last_kind = selinf::to_string(e.code());
        return selinf::is_validation_error(e.code()) ? SELINF_E_VALIDATION : SELINF_E_NUMERICAL;
    } catch (const nlohmann::json::exception& e) {
        last_error = e.what();
        last_kind = "InvalidArgument";
        return SELINF_E_VALIDATION;
    } catch (const std::exception& e) {
        last_error = e.what();
        last_kind = "Internal";
        return SELINF_E_INTERNAL;
    } catch (...) {
        last_error = "unknown exception";
        last_kind = "Internal";
        return SELINF_E_INTERNAL;
    }
}

void need(const void* ptr, const char* what) {
    if (!ptr) selinf::fail(selinf::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

void check_pair(const selinf_dataset* ds, const selinf_fit* fit) {
    need(ds, "dataset");
    need(fit, "fit");
    selinf::require(ds->data.n() == fit->n && ds->data.p() == fit->p, "fit does not belong to this dataset");
}

std::vector<selinf::Index> parse_group(const selinf::RegressionData& data, const std::string& text) {
    std::vector<selinf::Index> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
        out.push_back(data.column_index(item));
    }
    selinf::require(!out.empty(), "group is empty");
    return out;
}

}  // namespace

extern "C" {

const char* selinf_version(void) { return "0.1.0"; }
const char* selinf_last_error(void) { return last_error.c_str(); }
const char* selinf_last_error_kind(void) { return last_kind.c_str(); }
void selinf_string_free(char* s) { std::free(s); }

selinf_status selinf_dataset_from_arrays(const double* y, const double* X, int64_t n, int64_t p,
                                         const char* const* names, int normalize, selinf_dataset** out) {
    return guarded([&] {
        need(y, "y");
        need(X, "X");
        need(out, "out");
        selinf::require(n > 0 && p > 0, "dimensions must be positive");
        selinf::Vector yv = Eigen::Map<const selinf::Vector>(y, n);
        selinf::Matrix Xm = Eigen::Map<const selinf::Matrix>(X, n, p);
        std::vector<std::string> cols;
        if (names)
            for (int64_t j = 0; j < p; ++j) cols.emplace_back(names[j] ? names[j] : "");
        *out = new selinf_dataset{selinf::RegressionData(std::move(yv), std::move(Xm), std::move(cols), normalize != 0)};
    });
}

selinf_status selinf_dataset_from_csv(const char* path, const char* response, int normalize, selinf_dataset** out) {
    return guarded([&] {
        need(path, "path");
        need(response, "response");
        need(out, "out");
        *out = new selinf_dataset{selinf::read_csv(path, response, normalize != 0)};
    });
}

void selinf_dataset_free(selinf_dataset* ds) { delete ds; }
int64_t selinf_dataset_n(const selinf_dataset* ds) { return ds ? ds->data.n() : 0; }
int64_t selinf_dataset_p(const selinf_dataset* ds) { return ds ? ds->data.p() : 0; }

selinf_status selinf_choose_lambda(const selinf_dataset* ds, double kappa, int draws, uint64_t seed, int threads,
                                   double* lambda_out, char** json_out) {
    return guarded([&] {
        need(ds, "dataset");
        const selinf::TuningSpec spec{kappa, draws, seed, threads};
        const double score = selinf::expected_noise_score(ds->data.X(), draws, seed, threads);
        const double lam = selinf::choose_lambda(ds->data.X(), spec);
        if (lambda_out) *lambda_out = lam;
        if (json_out) {
            const nlohmann::json j{{"schema", selinf::kSchema}, {"lambda", lam},     {"kappa", kappa},
                                   {"noise_score", score},      {"mc_draws", draws}, {"seed", seed}};
            *json_out = dup_string(j.dump(2));
        }
    });
}

void selinf_fit_options_default(selinf_fit_options* opts) {
    if (!opts) return;
    const selinf::TuningSpec spec;
    const selinf::SolverOptions solver;
    *opts = selinf_fit_options{0.0, spec.kappa, spec.mc_draws, spec.seed, spec.threads, solver.tol, solver.max_sweeps};
}

selinf_status selinf_fit_create(const selinf_dataset* ds, const selinf_fit_options* opts, selinf_fit** out) {
    return guarded([&] {
        need(ds, "dataset");
        need(out, "out");
        selinf_fit_options o;
        selinf_fit_options_default(&o);
        if (opts) o = *opts;
        double lam = o.lambda;
        double kappa = std::numeric_limits<double>::quiet_NaN();
        if (!(lam > 0.0)) {
            lam = selinf::choose_lambda(ds->data.X(), selinf::TuningSpec{o.kappa, o.mc_draws, o.seed, o.threads});
            kappa = o.kappa;
        }
        selinf::require(o.tol > 0.0, "tol must be positive");
        selinf::require(o.max_sweeps > 0, "max_sweeps must be positive");
        const selinf::SolverOptions sopts{o.tol, o.max_sweeps};
        *out = new selinf_fit{selinf::fit_sqrt_lasso(ds->data, lam, sopts), kappa, ds->data.n(), ds->data.p()};
    });
}

void selinf_fit_free(selinf_fit* fit) { delete fit; }
double selinf_fit_lambda(const selinf_fit* fit) { return fit ? fit->fit.lam : 0.0; }
size_t selinf_fit_active_size(const selinf_fit* fit) { return fit ? fit->fit.model.size() : 0; }

size_t selinf_fit_active(const selinf_fit* fit, int64_t* active, int* signs, size_t cap) {
    if (!fit) return 0;
    const size_t k = std::min(cap, fit->fit.model.size());
    for (size_t i = 0; i < k; ++i) {
        if (active) active[i] = fit->fit.model.active[i];
        if (signs) signs[i] = fit->fit.model.signs[i];
    }
    return k;
}

selinf_status selinf_fit_to_json(const selinf_fit* fit, const selinf_dataset* ds, char** json_out) {
    return guarded([&] {
        check_pair(ds, fit);
        need(json_out, "json_out");
        nlohmann::json j = selinf::fit_to_json(fit->fit, ds->data);
        j["kappa"] = selinf::finite_or_null(fit->kappa);
        *json_out = dup_string(j.dump(2));
    });
}

void selinf_infer_options_default(selinf_infer_options* opts) {
    if (opts) *opts = selinf_infer_options{0.95, SELINF_SIGMA_PLR, 0.0, 0};
}

selinf_status selinf_infer(const selinf_dataset* ds, const selinf_fit* fit, const selinf_infer_options* opts,
                           char** json_out, char** table_out) {
    return guarded([&] {
        check_pair(ds, fit);
        need(json_out, "json_out");
        selinf_infer_options o;
        selinf_infer_options_default(&o);
        if (opts) o = *opts;
        selinf::InferenceOptions io;
        io.level = o.level;
        io.exact_ci = o.exact_ci != 0;
        io.sigma2_value = o.sigma2_value;
        switch (o.sigma) {
            case SELINF_SIGMA_PLR: io.sigma = selinf::SigmaChoice::RegularizedPseudolik; break;
            case SELINF_SIGMA_PL: io.sigma = selinf::SigmaChoice::Pseudolik; break;
            case SELINF_SIGMA_OLS: io.sigma = selinf::SigmaChoice::Ols; break;
            case SELINF_SIGMA_FIXED: io.sigma = selinf::SigmaChoice::Fixed; break;
            default: selinf::fail(selinf::ErrorCode::InvalidArgument, "unknown sigma choice");
        }
        const selinf::SelectiveReport report = selinf::build_report(ds->data, fit->fit, io, fit->kappa);
        *json_out = dup_string(selinf::report_to_json(report).dump(2));
        if (table_out) *table_out = dup_string(selinf::report_table(report));
    });
}

selinf_status selinf_estimate_sigma(const selinf_dataset* ds, const selinf_fit* fit, char** json_out) {
    return guarded([&] {
        check_pair(ds, fit);
        need(json_out, "json_out");
        const selinf::SqrtLassoFit& bare = fit->fit;
        const selinf::ProjectionPair proj = selinf::build_projection(ds->data, bare.model);
        nlohmann::json j{{"schema", selinf::kSchema},
                         {"lambda", bare.lam},
                         {"active", bare.model.active},
                         {"df", proj.df()},
                         {"sigma2_ols", selinf::ols_sigma2(ds->data, proj)}};
        if (bare.model.empty()) {
            j["sigma2_pl"] = j["sigma2_ols"];
            j["sigma2_plr"] = j["sigma2_ols"];
            j["residual_truncation"] = {{"lower", 0.0}, {"upper", nullptr}};
        } else {
            const selinf::SelectionEvent sel = selinf::build_event(bare, ds->data, proj);
            const selinf::ResidualTruncation t = selinf::residual_truncation(sel.event, ds->data.y());
            j["sigma2_pl"] = selinf::sigma2_pseudolik(sel.event, ds->data.y());
            j["sigma2_plr"] = selinf::sigma2_pseudolik_regularized(sel.event, ds->data.y());
            j["residual_truncation"] = {{"lower", t.lower}, {"upper", selinf::finite_or_null(t.upper)}};
        }
        *json_out = dup_string(j.dump(2));
    });
}

selinf_status selinf_event_json(const selinf_dataset* ds, const selinf_fit* fit, char** json_out) {
    return guarded([&] {
        check_pair(ds, fit);
        need(json_out, "json_out");
        selinf::require(!fit->fit.model.empty(), "the fit selected no variables; there is no event to export");
        const selinf::ProjectionPair proj = selinf::build_projection(ds->data, fit->fit.model);
        const selinf::SelectionEvent sel = selinf::build_event(fit->fit, ds->data, proj);
        *json_out = dup_string(selinf::event_to_json(sel, ds->data).dump(2));
    });
}

selinf_status selinf_diagnose(const selinf_dataset* ds, const selinf_fit* fit, const char* group, int draws,
                              uint64_t seed, char** json_out) {
    return guarded([&] {
        check_pair(ds, fit);
        need(group, "group");
        need(json_out, "json_out");
        selinf::require(draws >= 1, "draws must be positive");
        const std::vector<selinf::Index> cols = parse_group(ds->data, group);
        const selinf::ProjectionPair proj = selinf::build_projection(ds->data, fit->fit.model);
        std::vector<std::string> names;
        for (selinf::Index j : cols) names.push_back(ds->data.column_names()[static_cast<size_t>(j)]);
        selinf::GroupFTest test;
        if (fit->fit.model.empty()) {
            // Null selection: the event is ||X^T u||_inf < lambda on the unit sphere.
            selinf::AncillarySampler sampler;
            sampler.inactive.lhs_scale = 1.0 / fit->fit.lam;
            sampler.inactive.rows = ds->data.X().transpose();
            sampler.inactive.upper = selinf::Vector::Ones(ds->data.p());
            sampler.inactive.lower = -selinf::Vector::Ones(ds->data.p());
            for (selinf::Index j = 0; j < ds->data.p(); ++j) sampler.inactive.columns.push_back(j);
            sampler.null_basis = selinf::null_space_basis(proj);
            sampler.start = selinf::ancillary_direction(ds->data, proj);
            sampler.seed = seed;
            test = selinf::selective_f_test(ds->data, proj, fit->fit.model, cols, sampler, draws);
        } else {
            const selinf::SelectionEvent sel = selinf::build_event(fit->fit, ds->data, proj);
            const selinf::AncillarySampler sampler = selinf::make_sampler(sel, ds->data, seed);
            test = selinf::selective_f_test(ds->data, proj, fit->fit.model, cols, sampler, draws);
        }
        nlohmann::json j = selinf::ftest_to_json(test, names);
        j["active"] = fit->fit.model.active;
        j["seed"] = seed;
        *json_out = dup_string(j.dump(2));
    });
}

void selinf_sim_options_default(selinf_sim_options* opts) {
    if (opts) *opts = selinf_sim_options{nullptr, nullptr, 0, 0, 0, 0, nullptr};
}

selinf_status selinf_simulate(const selinf_sim_options* opts, char** summary_json, char** summary_csv) {
    return guarded([&] {
        need(opts, "options");
        selinf::SimScenario s = opts->preset ? selinf::named_scenario(opts->preset) : selinf::SimScenario{};
        if (opts->config_text) s = selinf::parse_scenario(opts->config_text, s);
        if (opts->override_seed) s.seed = opts->seed;
        if (opts->threads > 0) s.threads = opts->threads;
        if (opts->replicates > 0) s.replicates = opts->replicates;
        s.validate();
        std::ofstream records;
        if (opts->records_path) {
            records.open(opts->records_path);
            if (!records) selinf::fail(selinf::ErrorCode::Io, std::string("cannot write ") + opts->records_path);
        }
        std::mutex mu;
        const selinf::RecordSink sink = [&](const nlohmann::json& rec) {
            if (!records.is_open()) return;
            std::lock_guard<std::mutex> lock(mu);
            records << rec.dump() << '\n';
        };
        const nlohmann::json summary = selinf::run_simulation(s, sink);
        if (summary_json) *summary_json = dup_string(summary.dump(2));
        if (summary_csv) *summary_csv = dup_string(selinf::summary_to_csv(summary));
    });
}

selinf_status selinf_scenario_names(char** out) {
    return guarded([&] {
        need(out, "out");
        std::string all;
        for (const auto& n : selinf::scenario_names()) all += n + "\n";
        *out = dup_string(all);
    });
}

}  // extern "C"
