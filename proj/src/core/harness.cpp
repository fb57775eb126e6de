#include "selinf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "selinf/error.hpp"
#include "selinf/inference.hpp"
#include "selinf/selection_event.hpp"
#include "selinf/solver.hpp"

namespace selinf {

using nlohmann::json;

std::vector<Index> bhq(const std::vector<double>& pvalues, double q) {
    require(q > 0.0 && q < 1.0, "q must lie in (0, 1)");
    for (double p : pvalues) require(p >= 0.0 && p <= 1.0, "p-values must lie in [0, 1]");
    const std::size_t m = pvalues.size();
    std::vector<Index> order(m);
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return pvalues[static_cast<std::size_t>(a)] < pvalues[static_cast<std::size_t>(b)]; });
    std::size_t cutoff = 0;  // number of rejections
    for (std::size_t i = 0; i < m; ++i) {
        if (pvalues[static_cast<std::size_t>(order[i])] <= double(i + 1) * q / double(m)) cutoff = i + 1;
    }
    if (cutoff == 0) return {};
    // Everything tied with the last rejected value is rejected too.
    const double threshold = pvalues[static_cast<std::size_t>(order[cutoff - 1])];
    std::vector<Index> rejected;
    for (std::size_t i = 0; i < m; ++i)
        if (pvalues[i] <= threshold) rejected.push_back(static_cast<Index>(i));
    return rejected;
}

const char* to_string(ScenarioKind kind) noexcept {
    switch (kind) {
        case ScenarioKind::Coverage: return "coverage";
        case ScenarioKind::SigmaCompare: return "sigma-compare";
        case ScenarioKind::Fdr: return "fdr";
    }
    return "unknown";
}

void SimScenario::validate() const {
    require(n >= 2 && p >= 1, "need n >= 2 and p >= 1");
    require(sparsity >= 0 && sparsity <= p, "sparsity must lie in [0, p]");
    require(rho >= 0.0 && rho < 1.0, "rho must lie in [0, 1)");
    require(sigma_true > 0.0, "sigma must be positive");
    require(kappa > 0.0 && kappa <= 1.5, "kappa must lie in (0, 1.5]");
    require(replicates >= 1, "replicates must be positive");
    require(lambda_draws >= 100, "lambda_draws must be at least 100");
    require(threads >= 1, "threads must be positive");
    require(q > 0.0 && q < 1.0, "q must lie in (0, 1)");
    for (double l : levels) require(l > 0.5 && l < 1.0, "levels must lie in (0.5, 1)");
    for (double r : rho_grid) require(r >= 0.0 && r < 1.0, "rho_grid entries must lie in [0, 1)");
    for (double k : kappa_grid) require(k > 0.0 && k <= 1.5, "kappa_grid entries must lie in (0, 1.5]");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    require(used == v.size() && !v.empty(), "bad number for '" + key + "': " + v);
    return out;
}

long to_long(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    require(d == std::floor(d), "expected an integer for '" + key + "': " + v);
    return static_cast<long>(d);
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(to_double(key, item));
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(ErrorCode::InvalidArgument, "bad boolean for '" + key + "': " + v);
}

// Shortest text that round-trips to the same double.
std::string fmt(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

template <class Body>
void parallel_for(int first, int last, int threads, Body&& body) {
    const int count = last - first;
    if (count <= 0) return;
    if (threads <= 1 || count == 1) {
        for (int i = first; i < last; ++i) body(i);
        return;
    }
    std::atomic<int> next{first};
    std::vector<std::thread> pool;
    const int workers = std::min(threads, count);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < last; i = next++) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

SimScenario parse_scenario(const std::string& text, SimScenario s) {
    std::stringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, "config line " + std::to_string(lineno) + " is not key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string v = trim(line.substr(eq + 1));
        if (key == "name") s.name = v;
        else if (key == "kind") {
            if (v == "coverage") s.kind = ScenarioKind::Coverage;
            else if (v == "sigma-compare") s.kind = ScenarioKind::SigmaCompare;
            else if (v == "fdr") s.kind = ScenarioKind::Fdr;
            else fail(ErrorCode::InvalidArgument, "unknown scenario kind '" + v + "'");
        } else if (key == "n") s.n = to_long(key, v);
        else if (key == "p") s.p = to_long(key, v);
        else if (key == "sparsity") s.sparsity = to_long(key, v);
        else if (key == "rho") s.rho = to_double(key, v);
        else if (key == "amplitude") s.amplitude = to_double(key, v);
        else if (key == "sigma") s.sigma_true = to_double(key, v);
        else if (key == "kappa") s.kappa = to_double(key, v);
        else if (key == "replicates") s.replicates = static_cast<int>(to_long(key, v));
        else if (key == "seed") s.seed = static_cast<std::uint64_t>(to_long(key, v));
        else if (key == "random_signs") s.random_signs = to_bool(key, v);
        else if (key == "lambda_draws") s.lambda_draws = static_cast<int>(to_long(key, v));
        else if (key == "threads") s.threads = static_cast<int>(to_long(key, v));
        else if (key == "levels") s.levels = to_list(key, v);
        else if (key == "min_intervals") s.min_intervals = to_long(key, v);
        else if (key == "q") s.q = to_double(key, v);
        else if (key == "rho_grid") s.rho_grid = to_list(key, v);
        else if (key == "kappa_grid") s.kappa_grid = to_list(key, v);
        else fail(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    }
    s.validate();
    return s;
}

std::vector<std::string> scenario_names() {
    return {"coverage-desk", "coverage-full", "sigma-desk", "sigma-full", "fdr-desk", "fdr-full"};
}

SimScenario named_scenario(const std::string& name) {
    SimScenario s;
    s.name = name;
    if (name == "coverage-desk" || name == "coverage-full") {
        s.kind = ScenarioKind::Coverage;
        s.n = 150;
        s.p = 200;
        s.sparsity = 10;
        s.rho = 0.3;
        s.amplitude = 6.0;
        s.sigma_true = 1.0;
        s.min_intervals = name == "coverage-desk" ? 1000 : 10000;
        s.replicates = name == "coverage-desk" ? 2000 : 20000;
    } else if (name == "sigma-desk" || name == "sigma-full") {
        s.kind = ScenarioKind::SigmaCompare;
        const bool desk = name == "sigma-desk";
        s.n = desk ? 250 : 1000;
        s.p = desk ? 500 : 2000;
        s.sparsity = desk ? 10 : 40;
        s.rho = 0.3;
        s.amplitude = 7.0;
        s.sigma_true = 3.0;
        s.random_signs = true;
        s.replicates = desk ? 200 : 100;
    } else if (name == "fdr-desk" || name == "fdr-full") {
        s.kind = ScenarioKind::Fdr;
        const bool desk = name == "fdr-desk";
        s.n = desk ? 500 : 2000;
        s.p = desk ? 600 : 2500;
        s.sparsity = desk ? 10 : 30;
        s.amplitude = 3.5;
        s.sigma_true = 1.0;
        s.random_signs = true;
        s.replicates = 100;
        s.q = 0.2;
        s.rho_grid = {0.0, 0.3, 0.6};
        s.kappa_grid = {0.6, 0.8, 1.0};
    } else {
        fail(ErrorCode::InvalidArgument, "unknown scenario '" + name + "'");
    }
    return s;
}

std::uint64_t scenario_hash(const SimScenario& s) {
    std::string canon;
    auto add = [&](const std::string& k, const std::string& v) { canon += k + "=" + v + ";"; };
    auto add_list = [&](const std::string& k, const std::vector<double>& v) {
        std::string joined;
        for (double d : v) joined += fmt(d) + ",";
        add(k, joined);
    };
    add("kind", to_string(s.kind));
    add("n", std::to_string(s.n));
    add("p", std::to_string(s.p));
    add("sparsity", std::to_string(s.sparsity));
    add("rho", fmt(s.rho));
    add("amplitude", fmt(s.amplitude));
    add("sigma", fmt(s.sigma_true));
    add("kappa", fmt(s.kappa));
    add("replicates", std::to_string(s.replicates));
    add("seed", std::to_string(s.seed));
    add("random_signs", s.random_signs ? "1" : "0");
    add("lambda_draws", std::to_string(s.lambda_draws));
    add_list("levels", s.levels);
    add("min_intervals", std::to_string(s.min_intervals));
    add("q", fmt(s.q));
    add_list("rho_grid", s.rho_grid);
    add_list("kappa_grid", s.kappa_grid);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string scenario_hash_hex(const SimScenario& s) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(scenario_hash(s)));
    return buf;
}

json scenario_to_json(const SimScenario& s) {
    return json{{"name", s.name},
                {"kind", to_string(s.kind)},
                {"n", s.n},
                {"p", s.p},
                {"sparsity", s.sparsity},
                {"rho", s.rho},
                {"amplitude", s.amplitude},
                {"sigma", s.sigma_true},
                {"kappa", s.kappa},
                {"replicates", s.replicates},
                {"seed", s.seed},
                {"random_signs", s.random_signs},
                {"lambda_draws", s.lambda_draws},
                {"levels", s.levels},
                {"min_intervals", s.min_intervals},
                {"q", s.q},
                {"rho_grid", s.rho_grid},
                {"kappa_grid", s.kappa_grid}};
}

Matrix equicorrelated_design(Index n, Index p, double rho, Rng& rng) {
    require(rho >= 0.0 && rho < 1.0, "rho must lie in [0, 1)");
    Matrix X(n, p);
    const double shared = std::sqrt(rho);
    const double own = std::sqrt(1.0 - rho);
    for (Index i = 0; i < n; ++i) {
        const double common = rng.normal();
        for (Index j = 0; j < p; ++j) X(i, j) = shared * common + own * rng.normal();
    }
    normalize_columns(X);
    return X;
}

SimInstance generate_instance(const SimScenario& s, double rho, Rng& rng) {
    SimInstance inst;
    inst.X = equicorrelated_design(s.n, s.p, rho, rng);
    std::vector<Index> idx(static_cast<std::size_t>(s.p));
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index i = 0; i < s.sparsity; ++i) {
        const auto span = static_cast<std::uint64_t>(s.p - i);
        const Index pick = i + static_cast<Index>(rng.next() % span);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick)]);
    }
    inst.support.assign(idx.begin(), idx.begin() + s.sparsity);
    std::sort(inst.support.begin(), inst.support.end());
    inst.beta = Vector::Zero(s.p);
    for (Index j : inst.support) {
        const double sign = s.random_signs ? (rng.uniform() < 0.5 ? -1.0 : 1.0) : 1.0;
        inst.beta[j] = sign * s.amplitude * s.sigma_true;
    }
    inst.y = inst.X * inst.beta + s.sigma_true * rng.normal_vector(s.n);
    return inst;
}

namespace {

struct CoverageReplicate {
    bool empty = false;
    bool failed = false;
    long intervals = 0;
    std::vector<long> covered;
    std::vector<long> unbounded;
    std::vector<long> failures;
    json record;
};

CoverageReplicate coverage_replicate(const SimScenario& s, int r) {
    CoverageReplicate out;
    const std::size_t L = s.levels.size();
    out.covered.assign(L, 0);
    out.unbounded.assign(L, 0);
    out.failures.assign(L, 0);
    out.record = json{{"replicate", r}};
    try {
        Rng rng(s.seed, 2 * static_cast<std::uint64_t>(r));
        const SimInstance inst = generate_instance(s, s.rho, rng);
        const double lam = s.kappa * expected_noise_score(inst.X, s.lambda_draws,
                                                          substream_seed(s.seed, 2 * static_cast<std::uint64_t>(r) + 1));
        const RegressionData data(inst.y, inst.X);
        const SqrtLassoFit fit = fit_sqrt_lasso(data, lam);
        out.record["lambda"] = lam;
        out.record["selected"] = fit.model.size();
        if (fit.model.empty()) {
            out.empty = true;
            return out;
        }
        const ProjectionPair proj = build_projection(data, fit.model);
        const SelectionEvent sel = build_event(fit, data, proj);
        const double plugin = sigma2_pseudolik_regularized(sel.event, data.y());
        const Vector target = proj.pinv * (inst.X * inst.beta);
        out.record["sigma2_plr"] = plugin;
        json per_level = json::array();
        for (std::size_t l = 0; l < L; ++l) {
            IntervalOptions opts;
            opts.level = s.levels[l];
            opts.allow_unbounded = true;
            long cov = 0;
            for (std::size_t i = 0; i < fit.model.size(); ++i) {
                const Index pos = static_cast<Index>(i);
                const double scale = sel.active.eta_norms[pos];
                try {
                    const ConfidenceInterval ci = gaussian_approx_interval(sel, data.y(), pos, plugin, opts);
                    const double t = target[pos] / scale;
                    if (ci.lo <= t && t <= ci.hi) ++cov;
                    if (ci.lo_unbounded || ci.hi_unbounded) ++out.unbounded[l];
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::BracketFailure) throw;
                    ++out.failures[l];
                }
            }
            out.covered[l] = cov;
            per_level.push_back(json{{"level", s.levels[l]}, {"covered", cov}});
        }
        out.intervals = static_cast<long>(fit.model.size());
        out.record["coverage"] = per_level;
    } catch (const Error& e) {
        out.failed = true;
        out.record["error"] = e.what();
    }
    return out;
}

struct SigmaReplicate {
    bool empty = false;
    bool failed = false;
    bool screened = false;
    double plr = 0.0, pl = 0.0, ols = 0.0;
    json record;
};

SigmaReplicate sigma_replicate(const SimScenario& s, int r) {
    SigmaReplicate out;
    out.record = json{{"replicate", r}};
    try {
        Rng rng(s.seed, 2 * static_cast<std::uint64_t>(r));
        const SimInstance inst = generate_instance(s, s.rho, rng);
        const double lam = s.kappa * expected_noise_score(inst.X, s.lambda_draws,
                                                          substream_seed(s.seed, 2 * static_cast<std::uint64_t>(r) + 1));
        const RegressionData data(inst.y, inst.X);
        const SqrtLassoFit fit = fit_sqrt_lasso(data, lam);
        out.record["lambda"] = lam;
        out.record["selected"] = fit.model.size();
        if (fit.model.empty()) {
            out.empty = true;
            return out;
        }
        const ProjectionPair proj = build_projection(data, fit.model);
        const SelectionEvent sel = build_event(fit, data, proj);
        const double s_ols = ols_sigma2(data, proj);
        const double s_pl = sigma2_pseudolik(sel.event, data.y());
        const double s_plr = sigma2_pseudolik_regularized(sel.event, data.y());

        // Benchmark: OLS on the selected columns of an independent copy of the data.
        const Matrix X2 = equicorrelated_design(s.n, s.p, s.rho, rng);
        const Vector y2 = X2 * inst.beta + s.sigma_true * rng.normal_vector(s.n);
        const ProjectionPair proj2 = build_projection(X2, fit.model.active);
        const double bench = ols_sigma2(y2, proj2);

        out.screened = std::includes(fit.model.active.begin(), fit.model.active.end(), inst.support.begin(),
                                     inst.support.end());
        out.plr = s_plr / bench;
        out.pl = s_pl / bench;
        out.ols = s_ols / bench;
        out.record["screened"] = out.screened;
        out.record["sigma2_bench"] = bench;
        out.record["ratio_plr"] = out.plr;
        out.record["ratio_pl"] = out.pl;
        out.record["ratio_ols"] = out.ols;
    } catch (const Error& e) {
        out.failed = true;
        out.record["error"] = e.what();
    }
    return out;
}

SigmaSummary summarize(const std::vector<const SigmaReplicate*>& reps) {
    SigmaSummary out;
    std::vector<double> plr, pl, ols;
    for (const auto* r : reps) {
        plr.push_back(r->plr);
        pl.push_back(r->pl);
        ols.push_back(r->ols);
    }
    out.count = static_cast<long>(reps.size());
    out.median_plr = median(plr);
    out.median_pl = median(pl);
    out.median_ols = median(ols);
    return out;
}

struct FdrReplicate {
    std::vector<double> fdp, power, selected, rejected;
    std::vector<bool> failed;
    json record;
};

}  // namespace

CoverageResult run_coverage_sim(const SimScenario& s, const RecordSink& sink) {
    s.validate();
    require(s.kind == ScenarioKind::Coverage, "scenario kind must be coverage");
    CoverageResult res;
    for (double l : s.levels) res.rows.push_back(CoverageRow{l});
    const std::string hash = scenario_hash_hex(s);
    const int batch = std::max(8, 2 * s.threads);
    auto enough = [&] {
        if (s.min_intervals <= 0) return false;
        for (const CoverageRow& row : res.rows)
            if (row.intervals < s.min_intervals) return false;
        return true;
    };
    for (int start = 0; start < s.replicates; start += batch) {
        const int stop = std::min(s.replicates, start + batch);
        std::vector<CoverageReplicate> reps(static_cast<std::size_t>(stop - start));
        parallel_for(start, stop, s.threads,
                     [&](int r) { reps[static_cast<std::size_t>(r - start)] = coverage_replicate(s, r); });
        for (auto& rep : reps) {
            if (enough()) break;
            ++res.replicates_used;
            rep.record["scenario_hash"] = hash;
            if (sink) sink(rep.record);
            if (rep.failed) {
                ++res.failed_replicates;
                continue;
            }
            if (rep.empty) {
                ++res.empty_selections;
                continue;
            }
            for (std::size_t l = 0; l < res.rows.size(); ++l) {
                res.rows[l].intervals += rep.intervals - rep.failures[l];
                res.rows[l].covered += rep.covered[l];
                res.rows[l].unbounded += rep.unbounded[l];
                res.rows[l].failures += rep.failures[l];
            }
        }
        if (enough()) break;
    }
    return res;
}

SigmaResult run_sigma_sim(const SimScenario& s, const RecordSink& sink) {
    s.validate();
    require(s.kind == ScenarioKind::SigmaCompare, "scenario kind must be sigma-compare");
    std::vector<SigmaReplicate> reps(static_cast<std::size_t>(s.replicates));
    parallel_for(0, s.replicates, s.threads, [&](int r) { reps[static_cast<std::size_t>(r)] = sigma_replicate(s, r); });
    SigmaResult res;
    const std::string hash = scenario_hash_hex(s);
    std::vector<const SigmaReplicate*> all, scr, nscr;
    for (auto& rep : reps) {
        ++res.replicates_used;
        rep.record["scenario_hash"] = hash;
        if (sink) sink(rep.record);
        if (rep.failed) {
            ++res.failed_replicates;
            continue;
        }
        if (rep.empty) {
            ++res.empty_selections;
            continue;
        }
        all.push_back(&rep);
        (rep.screened ? scr : nscr).push_back(&rep);
    }
    res.all = summarize(all);
    res.screened = summarize(scr);
    res.not_screened = summarize(nscr);
    res.screening_fraction = all.empty() ? 0.0 : double(scr.size()) / double(all.size());
    return res;
}

FdrResult run_fdr_sim(const SimScenario& s, const RecordSink& sink) {
    s.validate();
    require(s.kind == ScenarioKind::Fdr, "scenario kind must be fdr");
    const std::vector<double> rhos = s.rho_grid.empty() ? std::vector<double>{s.rho} : s.rho_grid;
    const std::vector<double> kappas = s.kappa_grid.empty() ? std::vector<double>{s.kappa} : s.kappa_grid;
    const std::string hash = scenario_hash_hex(s);
    FdrResult res;
    for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
        std::vector<FdrReplicate> reps(static_cast<std::size_t>(s.replicates));
        parallel_for(0, s.replicates, s.threads, [&](int r) {
            FdrReplicate& out = reps[static_cast<std::size_t>(r)];
            const std::uint64_t stream = 2 * (static_cast<std::uint64_t>(ri) * 1'000'000ULL + static_cast<std::uint64_t>(r));
            out.record = json{{"replicate", r}, {"rho", rhos[ri]}, {"runs", json::array()}};
            out.failed.assign(kappas.size(), false);
            out.fdp.assign(kappas.size(), 0.0);
            out.power.assign(kappas.size(), 0.0);
            out.selected.assign(kappas.size(), 0.0);
            out.rejected.assign(kappas.size(), 0.0);
            Rng rng(s.seed, stream);
            const SimInstance inst = generate_instance(s, rhos[ri], rng);
            const double score = expected_noise_score(inst.X, s.lambda_draws, substream_seed(s.seed, stream + 1));
            const RegressionData data(inst.y, inst.X);
            for (std::size_t ki = 0; ki < kappas.size(); ++ki) {
                json run{{"kappa", kappas[ki]}};
                try {
                    const SqrtLassoFit fit = fit_sqrt_lasso(data, kappas[ki] * score);
                    std::vector<Index> rejected;
                    if (!fit.model.empty()) {
                        const ProjectionPair proj = build_projection(data, fit.model);
                        const SelectionEvent sel = build_event(fit, data, proj);
                        std::vector<double> pv;
                        for (std::size_t i = 0; i < fit.model.size(); ++i)
                            pv.push_back(selective_pvalue(sel, data.y(), TestSpec{static_cast<Index>(i)}));
                        for (Index pos : bhq(pv, s.q)) rejected.push_back(fit.model.active[static_cast<std::size_t>(pos)]);
                    }
                    long true_rej = 0;
                    for (Index j : rejected)
                        if (std::binary_search(inst.support.begin(), inst.support.end(), j)) ++true_rej;
                    const long false_rej = static_cast<long>(rejected.size()) - true_rej;
                    out.fdp[ki] = double(false_rej) / double(std::max<std::size_t>(1, rejected.size()));
                    out.power[ki] = s.sparsity > 0 ? double(true_rej) / double(s.sparsity)
                                                   : std::numeric_limits<double>::quiet_NaN();
                    out.selected[ki] = double(fit.model.size());
                    out.rejected[ki] = double(rejected.size());
                    run["selected"] = fit.model.size();
                    run["rejected"] = rejected.size();
                    run["fdp"] = out.fdp[ki];
                    run["power"] = json_number(out.power[ki]);
                } catch (const Error& e) {
                    out.failed[ki] = true;
                    run["error"] = e.what();
                }
                out.record["runs"].push_back(run);
            }
        });
        for (std::size_t ki = 0; ki < kappas.size(); ++ki) {
            FdrRow row;
            row.rho = rhos[ri];
            row.kappa = kappas[ki];
            double fdp = 0.0, power = 0.0, sel = 0.0, rej = 0.0;
            for (const auto& rep : reps) {
                if (rep.failed[ki]) {
                    ++row.failed;
                    continue;
                }
                ++row.replicates;
                fdp += rep.fdp[ki];
                power += rep.power[ki];
                sel += rep.selected[ki];
                rej += rep.rejected[ki];
            }
            const double cnt = std::max(1, row.replicates);
            row.mean_fdp = fdp / cnt;
            row.mean_power = power / cnt;
            row.mean_selected = sel / cnt;
            row.mean_rejected = rej / cnt;
            res.rows.push_back(row);
        }
        for (auto& rep : reps) {
            rep.record["scenario_hash"] = hash;
            if (sink) sink(rep.record);
        }
    }
    return res;
}

json run_simulation(const SimScenario& s, const RecordSink& sink) {
    json out{{"schema", "selinf/v1"},
             {"kind", to_string(s.kind)},
             {"scenario", scenario_to_json(s)},
             {"scenario_hash", scenario_hash_hex(s)}};
    auto sigma_json = [](const SigmaSummary& m) {
        return json{{"count", m.count},
                    {"median_ratio_plr", json_number(m.median_plr)},
                    {"median_ratio_pl", json_number(m.median_pl)},
                    {"median_ratio_ols", json_number(m.median_ols)}};
    };
    switch (s.kind) {
        case ScenarioKind::Coverage: {
            const CoverageResult r = run_coverage_sim(s, sink);
            json rows = json::array();
            for (const auto& row : r.rows) {
                rows.push_back(json{{"level", row.level},
                                    {"intervals", row.intervals},
                                    {"covered", row.covered},
                                    {"coverage", row.coverage()},
                                    {"unbounded", row.unbounded},
                                    {"bracket_failures", row.failures}});
            }
            out["rows"] = rows;
            out["replicates_used"] = r.replicates_used;
            out["empty_selections"] = r.empty_selections;
            out["failed_replicates"] = r.failed_replicates;
            break;
        }
        case ScenarioKind::SigmaCompare: {
            const SigmaResult r = run_sigma_sim(s, sink);
            out["replicates_used"] = r.replicates_used;
            out["empty_selections"] = r.empty_selections;
            out["failed_replicates"] = r.failed_replicates;
            out["screening_fraction"] = r.screening_fraction;
            out["all"] = sigma_json(r.all);
            out["screened"] = sigma_json(r.screened);
            out["not_screened"] = sigma_json(r.not_screened);
            break;
        }
        case ScenarioKind::Fdr: {
            const FdrResult r = run_fdr_sim(s, sink);
            json rows = json::array();
            for (const auto& row : r.rows) {
                rows.push_back(json{{"rho", row.rho},
                                    {"kappa", row.kappa},
                                    {"replicates", row.replicates},
                                    {"failed", row.failed},
                                    {"mean_fdp", row.mean_fdp},
                                    {"mean_power", json_number(row.mean_power)},
                                    {"mean_selected", row.mean_selected},
                                    {"mean_rejected", row.mean_rejected}});
            }
            out["rows"] = rows;
            break;
        }
    }
    return out;
}

std::string summary_to_csv(const json& summary) {
    std::ostringstream os;
    const std::string hash = summary.value("scenario_hash", "");
    auto num = [](const json& v) { return v.is_null() ? std::string("NA") : fmt(v.get<double>()); };
    const std::string kind = summary.at("kind").get<std::string>();
    if (kind == "coverage") {
        os << "scenario_hash,level,intervals,covered,coverage,unbounded,bracket_failures\n";
        for (const auto& r : summary.at("rows"))
            os << hash << ',' << num(r["level"]) << ',' << r["intervals"] << ',' << r["covered"] << ','
               << num(r["coverage"]) << ',' << r["unbounded"] << ',' << r["bracket_failures"] << '\n';
    } else if (kind == "sigma-compare") {
        os << "scenario_hash,group,count,median_ratio_plr,median_ratio_pl,median_ratio_ols\n";
        for (const char* g : {"all", "screened", "not_screened"}) {
            const auto& r = summary.at(g);
            os << hash << ',' << g << ',' << r["count"] << ',' << num(r["median_ratio_plr"]) << ','
               << num(r["median_ratio_pl"]) << ',' << num(r["median_ratio_ols"]) << '\n';
        }
    } else {
        os << "scenario_hash,rho,kappa,replicates,failed,mean_fdp,mean_power,mean_selected,mean_rejected\n";
        for (const auto& r : summary.at("rows"))
            os << hash << ',' << num(r["rho"]) << ',' << num(r["kappa"]) << ',' << r["replicates"] << ','
               << r["failed"] << ',' << num(r["mean_fdp"]) << ',' << num(r["mean_power"]) << ','
               << num(r["mean_selected"]) << ',' << num(r["mean_rejected"]) << '\n';
    }
    return os.str();
}

}  // namespace selinf
