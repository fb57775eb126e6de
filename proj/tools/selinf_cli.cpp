#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "selinf/selinf.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Failure {
    int code;
    std::string message;
};

void check(selinf_status st) {
    if (st == SELINF_OK) return;
    const int code = st == SELINF_E_VALIDATION ? kExitValidation : kExitNumerical;
    throw Failure{code, selinf_last_error()};
}

struct OwnedString {
    char* p = nullptr;
    ~OwnedString() { selinf_string_free(p); }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

using DatasetPtr = std::unique_ptr<selinf_dataset, decltype(&selinf_dataset_free)>;
using FitPtr = std::unique_ptr<selinf_fit, decltype(&selinf_fit_free)>;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Failure{kExitValidation, "cannot read " + path};
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> parse_config(const std::string& text) {
    std::map<std::string, std::string> out;
    std::stringstream in(text);
    std::string line;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        s = s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
        if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
        return s;
    };
    while (std::getline(in, line)) {
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        if (trim(line).empty() || trim(line).front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Failure{kExitValidation, "config line is not key = value: " + line};
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

// Fills options of `sub` that were not given on the command line from the config map.
void apply_config(CLI::App* sub, const std::map<std::string, std::string>& cfg) {
    for (const auto& [key, value] : cfg) {
        std::string name = key;
        for (char& c : name)
            if (c == '_') c = '-';
        CLI::Option* opt = sub->get_option_no_throw("--" + name);
        if (!opt) throw Failure{kExitValidation, "unknown config key '" + key + "' for " + sub->get_name()};
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw Failure{kExitValidation, "cannot write " + path};
        }
    }
    std::ostream& json() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
    std::ostream& text() { return file_.is_open() ? std::cout : std::cerr; }

private:
    std::ofstream file_;
};

struct DataArgs {
    std::string path;
    std::string response;
    bool normalize = false;

    void add(CLI::App* sub) {
        sub->add_option("--data", path, "CSV file with a header row")->required();
        sub->add_option("--response", response, "name of the response column")->required();
        sub->add_flag("--normalize", normalize, "scale design columns to unit norm");
    }

    DatasetPtr load() const {
        selinf_dataset* ds = nullptr;
        check(selinf_dataset_from_csv(path.c_str(), response.c_str(), normalize ? 1 : 0, &ds));
        return DatasetPtr(ds, &selinf_dataset_free);
    }
};

struct FitArgs {
    double kappa = 0.8;
    double lambda = 0.0;
    double tol = 1e-8;
    int max_iters = 50000;
    int draws = 1000;
    std::optional<unsigned long long> seed;

    void add(CLI::App* sub, bool with_seed) {
        sub->add_option("--kappa", kappa, "multiplier for the Monte-Carlo lambda rule")->check(CLI::Range(1e-12, 1.5));
        sub->add_option("--lambda", lambda, "explicit lambda (overrides --kappa)")->check(CLI::PositiveNumber);
        sub->add_option("--tol", tol, "KKT tolerance")->check(CLI::PositiveNumber);
        sub->add_option("--max-iters", max_iters, "coordinate sweep budget")->check(CLI::PositiveNumber);
        sub->add_option("--lambda-draws", draws, "Monte-Carlo draws for the lambda rule")->check(CLI::Range(100, 100000000));
        if (with_seed) sub->add_option("--seed", seed, "random seed");
    }

    FitPtr run(const selinf_dataset* ds, unsigned long long global_seed, int threads) const {
        selinf_fit_options o;
        selinf_fit_options_default(&o);
        o.kappa = kappa;
        o.lambda = lambda;
        o.tol = tol;
        o.max_sweeps = max_iters;
        o.mc_draws = draws;
        o.seed = seed.value_or(global_seed);
        o.threads = threads;
        selinf_fit* fit = nullptr;
        check(selinf_fit_create(ds, &o, &fit));
        return FitPtr(fit, &selinf_fit_free);
    }
};

void export_event(const std::string& path, const selinf_dataset* ds, const selinf_fit* fit) {
    if (path.empty()) return;
    OwnedString s;
    check(selinf_event_json(ds, fit, &s.p));
    std::ofstream out(path);
    if (!out) throw Failure{kExitValidation, "cannot write " + path};
    out << s.str() << '\n';
}

std::string stem_of(const std::string& path) {
    const auto slash = path.find_last_of('/');
    const auto dot = path.find_last_of('.');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) return path.substr(0, dot);
    return path;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selective inference after the square-root LASSO"};
    app.require_subcommand(1);
    app.fallthrough();
    unsigned long long global_seed = 0;
    int threads = 1;
    std::string config_path, output_path;
    app.add_option("--seed", global_seed, "default random seed");
    app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 1024));
    app.add_option("--config", config_path, "key = value file of option defaults (scenario file for simulate)");
    app.add_option("--output", output_path, "write JSON here instead of stdout");

    DataArgs data;
    FitArgs fit_args;

    CLI::App* fit_cmd = app.add_subcommand("fit", "fit the square-root LASSO");
    data.add(fit_cmd);
    fit_args.add(fit_cmd, true);
    std::string fit_event;
    fit_cmd->add_option("--export-event", fit_event, "write the selection event JSON to this file");

    CLI::App* infer_cmd = app.add_subcommand("infer", "selective p-values and confidence intervals");
    data.add(infer_cmd);
    fit_args.add(infer_cmd, true);
    double level = 0.95;
    std::string sigma = "plr";
    bool exact_ci = false;
    std::string infer_event;
    infer_cmd->add_option("--level", level, "confidence level")->check(CLI::Range(0.5, 1.0));
    infer_cmd->add_option("--sigma", sigma, "plug-in variance: plr, pl, ols or a positive number");
    infer_cmd->add_flag("--exact-ci", exact_ci, "also invert the exact truncated-T test (slow)");
    infer_cmd->add_option("--export-event", infer_event, "write the selection event JSON to this file");

    CLI::App* sigma_cmd = app.add_subcommand("estimate-sigma", "OLS and pseudo-likelihood variance estimates");
    data.add(sigma_cmd);
    fit_args.add(sigma_cmd, true);

    CLI::App* diag_cmd = app.add_subcommand("diagnose", "selective F test for adding a group of columns");
    data.add(diag_cmd);
    fit_args.add(diag_cmd, false);
    std::string group;
    int diag_draws = 1000;
    std::optional<unsigned long long> diag_seed;
    diag_cmd->add_option("--group", group, "comma-separated column names")->required();
    diag_cmd->add_option("--draws", diag_draws, "Monte-Carlo draws")->check(CLI::PositiveNumber);
    diag_cmd->add_option("--seed", diag_seed, "random seed");

    CLI::App* lambda_cmd = app.add_subcommand("lambda", "evaluate the Monte-Carlo lambda rule");
    data.add(lambda_cmd);
    double lam_kappa = 0.8;
    int lam_draws = 1000;
    std::optional<unsigned long long> lam_seed;
    lambda_cmd->add_option("--kappa", lam_kappa, "multiplier")->check(CLI::Range(1e-12, 1.5));
    lambda_cmd->add_option("--draws", lam_draws, "Monte-Carlo draws")->check(CLI::Range(100, 100000000));
    lambda_cmd->add_option("--seed", lam_seed, "random seed");

    CLI::App* sim_cmd = app.add_subcommand("simulate", "run a simulation scenario");
    std::string scenario;
    std::string records_path, csv_path;
    int replicates = 0;
    bool list = false;
    sim_cmd->add_option("--scenario", scenario, "named scenario");
    sim_cmd->add_option("--records", records_path, "JSON-lines file, one record per replicate");
    sim_cmd->add_option("--csv", csv_path, "CSV summary file");
    sim_cmd->add_option("--replicates", replicates, "override the replicate count")->check(CLI::PositiveNumber);
    sim_cmd->add_flag("--list", list, "print the named scenarios and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        std::string config_text;
        if (!config_path.empty()) config_text = read_file(config_path);
        CLI::App* active = app.get_subcommands().front();
        if (!config_text.empty() && active != sim_cmd) {
            try {
                apply_config(active, parse_config(config_text));
            } catch (const CLI::Error& e) {
                throw Failure{kExitValidation, std::string("config: ") + e.what()};
            }
        }
        Output out(output_path);

        if (active == sim_cmd) {
            if (list) {
                OwnedString names;
                check(selinf_scenario_names(&names.p));
                std::cout << names.str();
                return kExitOk;
            }
            if (scenario.empty() && config_text.empty())
                throw Failure{kExitValidation, "simulate needs --scenario or --config"};
            selinf_sim_options o;
            selinf_sim_options_default(&o);
            o.preset = scenario.empty() ? nullptr : scenario.c_str();
            o.config_text = config_text.empty() ? nullptr : config_text.c_str();
            o.override_seed = app.get_option("--seed")->count() > 0 ? 1 : 0;
            o.seed = global_seed;
            o.threads = app.get_option("--threads")->count() > 0 ? threads : 0;
            o.replicates = replicates;
            if (records_path.empty() && !output_path.empty()) records_path = stem_of(output_path) + ".jsonl";
            if (csv_path.empty() && !output_path.empty()) csv_path = stem_of(output_path) + ".csv";
            o.records_path = records_path.empty() ? nullptr : records_path.c_str();
            OwnedString js, csv;
            check(selinf_simulate(&o, &js.p, &csv.p));
            out.json() << js.str() << '\n';
            if (!csv_path.empty()) {
                std::ofstream f(csv_path);
                if (!f) throw Failure{kExitValidation, "cannot write " + csv_path};
                f << csv.str();
            } else {
                out.text() << csv.str();
            }
            return kExitOk;
        }

        DatasetPtr ds = data.load();

        if (active == lambda_cmd) {
            OwnedString js;
            check(selinf_choose_lambda(ds.get(), lam_kappa, lam_draws, lam_seed.value_or(global_seed), threads,
                                       nullptr, &js.p));
            out.json() << js.str() << '\n';
            return kExitOk;
        }

        if (active == diag_cmd) {
            FitPtr fit = fit_args.run(ds.get(), global_seed, threads);
            OwnedString js;
            check(selinf_diagnose(ds.get(), fit.get(), group.c_str(), diag_draws, diag_seed.value_or(global_seed),
                                  &js.p));
            out.json() << js.str() << '\n';
            return kExitOk;
        }

        FitPtr fit = fit_args.run(ds.get(), global_seed, threads);
        if (active == fit_cmd) {
            OwnedString js;
            check(selinf_fit_to_json(fit.get(), ds.get(), &js.p));
            out.json() << js.str() << '\n';
            export_event(fit_event, ds.get(), fit.get());
            return kExitOk;
        }
        if (active == sigma_cmd) {
            OwnedString js;
            check(selinf_estimate_sigma(ds.get(), fit.get(), &js.p));
            out.json() << js.str() << '\n';
            return kExitOk;
        }
        // infer
        selinf_infer_options o;
        selinf_infer_options_default(&o);
        o.level = level;
        o.exact_ci = exact_ci ? 1 : 0;
        if (sigma == "plr") {
            o.sigma = SELINF_SIGMA_PLR;
        } else if (sigma == "pl") {
            o.sigma = SELINF_SIGMA_PL;
        } else if (sigma == "ols") {
            o.sigma = SELINF_SIGMA_OLS;
        } else {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(sigma, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != sigma.size() || !(v > 0.0))
                throw Failure{kExitValidation, "--sigma must be plr, pl, ols or a positive variance"};
            o.sigma = SELINF_SIGMA_FIXED;
            o.sigma2_value = v;
        }
        OwnedString js, table;
        check(selinf_infer(ds.get(), fit.get(), &o, &js.p, &table.p));
        out.json() << js.str() << '\n';
        out.text() << table.str();
        export_event(infer_event, ds.get(), fit.get());
        return kExitOk;
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << '\n';
        return f.code;
    }
}
