#include "overscale/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "overscale/fitting.hpp"
#include "overscale/lawform.hpp"
#include "overscale/stats.hpp"
#include "overscale/synth.hpp"
#include "overscale/testbed.hpp"

namespace overscale::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::uint64_t seed = 0;
    std::string out;
    bool quiet = false;
};

struct Context {
    const Globals& globals;
    std::ostream& out;
    std::ostream& err;
    CommandOutcome outcome;

    void note(const std::string& text) {
        if (!globals.quiet) {
            err << text << '\n';
        }
        if (!outcome.summary.empty()) {
            outcome.summary += '\n';
        }
        outcome.summary += text;
    }

    void emit(const json& j) { out << j.dump(2) << '\n'; }

    // Temp file in the destination directory, then rename, so readers never
    // observe a partial artifact.
    void write_artifact(const std::string& content) {
        if (globals.out.empty()) {
            return;
        }
        const fs::path path(globals.out);
        fs::path tmp = path;
        tmp += ".tmp";
        {
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            os << content;
            os.close();
            if (!os) {
                std::error_code ec;
                fs::remove(tmp, ec);
                fail(ErrorKind::invalid_argument, "cannot write '" + path.string() + "'");
            }
        }
        std::error_code ec;
        fs::rename(tmp, path, ec);
        if (ec) {
            fs::remove(tmp, ec);
            fail(ErrorKind::invalid_argument, "cannot write '" + path.string() + "': " + ec.message());
        }
        outcome.artifacts.push_back(path.string());
    }
};

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::parse_error, "cannot open '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::parse_error, "'" + path + "': " + e.what());
    }
}

AnyLaw load_law(const std::string& path) { return law_from_json(read_json_file(path)); }

LossLawCM as_cm(const AnyLaw& law, const std::string& what) {
    if (const auto* cm = std::get_if<LossLawCM>(&law)) {
        return *cm;
    }
    if (const auto* ch = std::get_if<ChinchillaLaw>(&law)) {
        return chinchilla_to_cm(*ch);
    }
    throw UsageError(what + " must be a cm or chinchilla loss law, got '" + std::string(form_name(law)) + "'");
}

ErrLaw as_err(const AnyLaw& law, const std::string& what) {
    if (const auto* e = std::get_if<ErrLaw>(&law)) {
        return *e;
    }
    throw UsageError(what + " must be an err law, got '" + std::string(form_name(law)) + "'");
}

TestbedConfig testbed_config(const std::string& path) {
    return path.empty() ? builtin_testbed_config() : load_testbed_config(path);
}

std::int64_t as_count(double x, const std::string& flag) {
    if (!std::isfinite(x) || x < 1.0 || x > 9.2e18) {
        throw UsageError(flag + " must be a positive count");
    }
    return std::llround(x);
}

// Tasks shared by every run, in the first run's order.
std::vector<TaskSpec> common_tasks(std::span<const RunRecord> runs) {
    std::vector<TaskSpec> out;
    if (runs.empty()) {
        return out;
    }
    for (const auto& t : runs.front().tasks) {
        const bool everywhere = std::all_of(runs.begin(), runs.end(),
                                            [&](const RunRecord& r) { return r.find_task(t.task.name) != nullptr; });
        if (everywhere) {
            out.push_back(t.task);
        }
    }
    return out;
}

std::vector<TaskSpec> tasks_by_name(std::span<const RunRecord> runs, const std::vector<std::string>& names) {
    std::vector<TaskSpec> out;
    for (const auto& name : names) {
        const TaskResult* found = nullptr;
        for (const auto& r : runs) {
            if ((found = r.find_task(name)) != nullptr) {
                break;
            }
        }
        if (found == nullptr) {
            fail(ErrorKind::validation_error, "task '" + name + "' not present in any run");
        }
        out.push_back(found->task);
    }
    return out;
}

json tasks_json(std::span<const TaskSpec> tasks) {
    json arr = json::array();
    for (const auto& t : tasks) {
        arr.push_back({{"name", t.name}, {"baseline", t.baseline}});
    }
    return arr;
}

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(6) << x;
    return os.str();
}

// fit ---------------------------------------------------------------------

struct FitArgs {
    std::string runs;
    std::string eval_set;
    std::string form = "cm";
    std::string subset;
    std::vector<std::string> exclude;
    std::string config;
    int bootstrap = 0;
    double level = 0.95;
    std::vector<std::string> tasks;
    std::optional<double> threshold;
    double reference_n = 1.54e8;
};

void cmd_fit(const FitArgs& a, Context& ctx) {
    const auto bed = testbed_config(a.config);
    auto runs = load_runs(a.runs);
    const auto all_runs = runs;
    for (const auto& name : a.exclude) {
        const auto it = bed.exclusions.find(name);
        if (it == bed.exclusions.end()) {
            throw UsageError("unknown exclusion window '" + name + "'");
        }
        runs = apply_exclusions(runs, it->second);
    }
    if (!a.subset.empty()) {
        const auto it = bed.presets.find(a.subset);
        if (it == bed.presets.end()) {
            throw UsageError("unknown subset preset '" + a.subset + "'");
        }
        auto sel = select_fit_subset(runs, it->second);
        for (const auto& m : sel.missing) {
            ctx.note("warning: preset pair " + m + " has no matching run");
        }
        runs = std::move(sel.runs);
    }

    const FitConfig cfg;
    const BootstrapOptions boot{a.bootstrap, a.level, ctx.globals.seed, 0.2};
    FitReport report;
    if (a.form == "cm") {
        std::vector<LossPoint> pts;
        for (const auto& r : runs) {
            const auto g = r.geometry();
            pts.push_back({g.compute_c, g.multiplier_m, r.loss(a.eval_set), r.id});
        }
        report = fit_loss_cm(pts, cfg);
        if (a.bootstrap > 0 && report.converged) {
            report.ci = bootstrap_fit(std::span<const LossPoint>(pts), cfg, boot).param_intervals();
        }
    } else if (a.form == "power") {
        std::vector<PowerPoint> pts;
        for (const auto& r : runs) {
            pts.push_back({r.geometry().compute_c, r.loss(a.eval_set), r.id});
        }
        report = fit_power_law(pts, cfg);
        if (a.bootstrap > 0 && report.converged) {
            report.ci = bootstrap_fit(std::span<const PowerPoint>(pts), cfg, boot).param_intervals();
        }
    } else {
        std::vector<TaskSpec> tasks;
        if (!a.tasks.empty()) {
            tasks = tasks_by_name(all_runs, a.tasks);
        } else if (a.threshold) {
            tasks = select_tasks(all_runs, as_count(a.reference_n, "--reference-n"), *a.threshold);
        } else {
            tasks = common_tasks(runs);
        }
        if (tasks.empty()) {
            fail(ErrorKind::insufficient_data, "no downstream tasks available for the err fit");
        }
        std::vector<ErrPoint> pts;
        for (const auto& r : runs) {
            pts.push_back({r.loss(a.eval_set), average_top1_error(r, tasks), r.id});
        }
        report = fit_err(pts, cfg);
        if (a.bootstrap > 0 && report.converged) {
            report.ci = bootstrap_fit(std::span<const ErrPoint>(pts), cfg, boot).param_intervals();
        }
        ctx.note("averaged " + std::to_string(tasks.size()) + " task(s)");
    }

    if (!report.converged) {
        fail(ErrorKind::numerical_failure,
             a.form + " fit did not converge (residual rms " + fmt(report.residual_rms) + ")");
    }
    const json j = to_json(report);
    ctx.write_artifact(j.dump(2) + "\n");
    ctx.emit(j);
    std::string params;
    for (const auto& [name, value] : named_params(report.law)) {
        params += " " + name + "=" + fmt(value);
    }
    ctx.note(a.form + " fit on " + std::to_string(report.n_points) + " runs:" + params +
             " rms=" + fmt(report.residual_rms));
}

// predict -----------------------------------------------------------------

struct PredictArgs {
    std::string fit;
    double params = 0.0;
    std::optional<double> tokens;
    std::optional<double> multiplier;
    std::string chain;
};

void cmd_predict(const PredictArgs& a, Context& ctx) {
    if (!std::isfinite(a.params) || a.params <= 0.0) {
        throw UsageError("--params must be positive");
    }
    if (!a.tokens && !a.multiplier) {
        throw UsageError("give exactly one of --tokens or --multiplier");
    }
    const double n = a.params;
    const double d = a.tokens ? *a.tokens : n * *a.multiplier;
    if (!std::isfinite(d) || d <= 0.0) {
        throw UsageError("tokens and multiplier must be positive");
    }
    const double m = d / n;
    const double c = 6.0 * n * d;

    const auto law = load_law(a.fit);
    std::optional<ErrLaw> err_law;
    if (!a.chain.empty()) {
        err_law = as_err(load_law(a.chain), "--chain");
    }
    double loss = 0.0;
    if (const auto* cm = std::get_if<LossLawCM>(&law)) {
        loss = eval_loss_cm(*cm, c, m);
    } else if (const auto* ch = std::get_if<ChinchillaLaw>(&law)) {
        loss = eval_loss_nd(*ch, n, d);
    } else if (const auto* pw = std::get_if<PowerLaw>(&law)) {
        loss = eval_power_law(*pw, c);
    } else {
        throw UsageError("--fit must be a loss law; pass err laws with --chain");
    }

    json j{{"params_n", n}, {"tokens_d", d}, {"multiplier_m", m}, {"compute_c", c}, {"loss", loss}};
    std::string text = "loss=" + fmt(loss);
    if (err_law) {
        const double e = eval_err(*err_law, loss);
        j["avg_top1_error"] = e;
        text += " avg_top1_error=" + fmt(e);
    }
    ctx.write_artifact(j.dump(2) + "\n");
    ctx.emit(j);
    ctx.note("C=" + fmt(c) + " M=" + fmt(m) + ": " + text);
}

// report ------------------------------------------------------------------

struct ReportArgs {
    std::string runs;
    std::string eval_set;
    std::string fit;
    std::string chain;
    std::vector<std::string> tasks;
    std::optional<double> compute;
    double reference_n = 1.54e8;
    double threshold = 10.0;
    std::string subset;
    std::string config;
    double target_n = 0.0;
    double target_m = 0.0;
    std::vector<int> windows;
    std::string law;
    std::string preset;
    std::string err_law;
    std::string err_preset;
    std::string grid = "sweep";
    std::string budget;
    double loss_sigma = 0.0;
    double err_sigma = 0.0;
    std::string dataset;
};

void require(const std::string& value, const std::string& flag) {
    if (value.empty()) {
        throw UsageError(flag + " is required");
    }
}

void report_pareto(const ReportArgs& a, Context& ctx) {
    require(a.runs, "--runs");
    require(a.eval_set, "--eval-set");
    const auto runs = load_runs(a.runs);
    const auto front = pareto_frontier(runs, a.eval_set);
    json arr = json::array();
    std::ostringstream csv;
    csv << std::setprecision(17) << "id,params_n,tokens_d,compute_c,loss\n";
    for (const auto& r : front) {
        const double c = r.geometry().compute_c;
        const double loss = r.loss(a.eval_set);
        arr.push_back({{"id", r.id}, {"params_n", r.params_n}, {"tokens_d", r.tokens_d}, {"compute_c", c},
                       {"loss", loss}});
        csv << r.id << ',' << r.params_n << ',' << r.tokens_d << ',' << c << ',' << loss << '\n';
    }
    ctx.write_artifact(csv.str());
    ctx.emit({{"eval_set", a.eval_set}, {"frontier", arr}});
    ctx.note(std::to_string(front.size()) + " of " + std::to_string(runs.size()) + " runs on the frontier");
}

void report_grid(const ReportArgs& a, Context& ctx) {
    require(a.runs, "--runs");
    require(a.fit, "--fit");
    const auto runs = load_runs(a.runs);
    const auto loss_law = as_cm(load_law(a.fit), "--fit");
    std::vector<ErrorGridCell> cells;
    std::string target;
    if (a.chain.empty()) {
        require(a.eval_set, "--eval-set");
        cells = error_grid(loss_law, runs, LossTarget{a.eval_set});
        target = "loss:" + a.eval_set;
    } else {
        const auto err_law = as_err(load_law(a.chain), "--chain");
        const auto tasks = a.tasks.empty() ? common_tasks(runs) : tasks_by_name(runs, a.tasks);
        if (tasks.empty()) {
            fail(ErrorKind::insufficient_data, "no downstream tasks shared by all runs");
        }
        cells = error_grid(loss_law, err_law, runs, AvgErrTarget{tasks});
        target = "avg_top1_error";
    }
    std::ostringstream csv;
    write_error_grid_csv(csv, cells);
    ctx.write_artifact(csv.str());

    json arr = json::array();
    double worst = 0.0;
    std::vector<double> errs;
    for (const auto& c : cells) {
        arr.push_back({{"params_n", c.params_n},
                       {"multiplier_m", c.multiplier_m},
                       {"predicted", c.predicted},
                       {"ground_truth", c.ground_truth},
                       {"rel_error", c.rel_error}});
        worst = std::max(worst, c.rel_error);
        errs.push_back(c.rel_error);
    }
    json j{{"target", target}, {"cells", arr}, {"max_rel_error", worst}};
    j["median_rel_error"] = errs.empty() ? json(nullptr) : json(quantile(errs, 0.5));
    ctx.emit(j);
    ctx.note(std::to_string(cells.size()) + " cells, max relative error " + fmt(worst));
}

void report_optimal_m(const ReportArgs& a, Context& ctx) {
    require(a.fit, "--fit");
    const auto law = as_cm(load_law(a.fit), "--fit");
    const double mstar = optimal_multiplier(law);
    json j{{"m_star", mstar}};
    std::string text = "M*=" + fmt(mstar);
    if (a.compute) {
        const auto alloc = optimal_allocation(law, *a.compute);
        j["compute_c"] = *a.compute;
        j["n_star"] = alloc.n_star;
        j["d_star"] = alloc.d_star;
        text += " N*=" + fmt(alloc.n_star) + " D*=" + fmt(alloc.d_star);
    }
    ctx.write_artifact(j.dump(2) + "\n");
    ctx.emit(j);
    ctx.note(text);
}

void report_select_tasks(const ReportArgs& a, Context& ctx) {
    require(a.runs, "--runs");
    const auto runs = load_runs(a.runs);
    const auto ref = as_count(a.reference_n, "--reference-n");
    const auto tasks = select_tasks(runs, ref, a.threshold);
    const json j{{"reference_n", ref}, {"threshold_points", a.threshold}, {"tasks", tasks_json(tasks)}};
    ctx.write_artifact(j.dump(2) + "\n");
    ctx.emit(j);
    ctx.note(std::to_string(tasks.size()) + " task(s) selected");
}

void report_total_compute(const ReportArgs& a, Context& ctx) {
    if (a.subset.empty() && a.runs.empty()) {
        throw UsageError("give --subset, --runs, or both");
    }
    const auto bed = testbed_config(a.config);
    std::optional<FitSubsetPreset> preset;
    if (!a.subset.empty()) {
        const auto it = bed.presets.find(a.subset);
        if (it == bed.presets.end()) {
            throw UsageError("unknown subset preset '" + a.subset + "'");
        }
        preset = it->second;
    }
    json j;
    double total = 0.0;
    if (a.runs.empty()) {
        total = total_compute(std::span<const PresetPair>(preset->pairs));
        j = {{"source", "preset"}, {"subset", a.subset}, {"n_runs", preset->pairs.size()}};
    } else {
        auto runs = load_runs(a.runs);
        if (preset) {
            auto sel = select_fit_subset(runs, *preset);
            for (const auto& m : sel.missing) {
                ctx.note("warning: preset pair " + m + " has no matching run");
            }
            runs = std::move(sel.runs);
        }
        total = total_compute(runs);
        j = {{"source", "runs"}, {"subset", a.subset.empty() ? json(nullptr) : json(a.subset)},
             {"n_runs", runs.size()}};
    }
    j["total_compute"] = total;
    ctx.write_artifact(j.dump(2) + "\n");
    ctx.emit(j);
    ctx.note("total compute " + fmt(total) + " FLOPs");
}

void report_sweep(const ReportArgs& a, Context& ctx) {
    require(a.runs, "--runs");
    require(a.eval_set, "--eval-set");
    if (!(a.target_m > 0.0)) {
        throw UsageError("--target-m must be positive");
    }
    const auto runs = load_runs(a.runs);
    const PresetPair target{as_count(a.target_n, "--target-n"), a.target_m};
    std::vector<int> windows = a.windows;
    if (windows.empty()) {
        for (int w = 5; w < static_cast<int>(runs.size()); ++w) {
            windows.push_back(w);
        }
    }
    const auto sweep = reliability_sweep(runs, target, a.eval_set, windows);

    std::ostringstream csv;
    csv << std::setprecision(17) << "window,compute_used,rel_error,run_ids\n";
    json arr = json::array();
    std::vector<std::pair<double, double>> trend;
    for (const auto& p : sweep.points) {
        std::string ids;
        for (const auto& id : p.run_ids) {
            ids += (ids.empty() ? "" : ";") + id;
        }
        csv << p.window << ',' << p.compute_used << ',' << p.rel_error << ',' << ids << '\n';
        arr.push_back({{"window", p.window},
                       {"compute_used", p.compute_used},
                       {"rel_error", p.rel_error},
                       {"run_ids", p.run_ids}});
        trend.emplace_back(p.compute_used, p.rel_error);
    }
    ctx.write_artifact(csv.str());
    json j{{"points", arr}, {"notices", sweep.notices}, {"spearman", nullptr}};
    try {
        j["spearman"] = rank_correlation(trend);
    } catch (const Error&) {
        // Fewer than two points or a constant column: no trend to report.
    }
    ctx.emit(j);
    for (const auto& n : sweep.notices) {
        ctx.note(n);
    }
    ctx.note(std::to_string(sweep.points.size()) + " window(s) fitted");
}

LossLawCM reference_loss(const std::string& name) {
    if (name == "c4") return reference_laws::c4_loss();
    if (name == "redpajama") return reference_laws::redpajama_loss();
    if (name == "refinedweb") return reference_laws::refinedweb_loss();
    throw UsageError("unknown law preset '" + name + "'");
}

ErrLaw reference_err(const std::string& name) {
    if (name == "c4") return reference_laws::c4_err();
    if (name == "redpajama") return reference_laws::redpajama_err();
    if (name == "refinedweb") return reference_laws::refinedweb_err();
    throw UsageError("unknown err-law preset '" + name + "'");
}

void report_simulate(const ReportArgs& a, Context& ctx) {
    if (a.law.empty() == a.preset.empty()) {
        throw UsageError("give exactly one of --law or --preset");
    }
    if (!a.err_law.empty() && !a.err_preset.empty()) {
        throw UsageError("give at most one of --err-law or --err-preset");
    }
    const auto loss_law = a.preset.empty() ? as_cm(load_law(a.law), "--law") : reference_loss(a.preset);
    std::optional<ErrLaw> err_law;
    if (!a.err_law.empty()) {
        err_law = as_err(load_law(a.err_law), "--err-law");
    } else if (!a.err_preset.empty()) {
        err_law = reference_err(a.err_preset);
    }
    std::vector<PresetPair> grid;
    if (a.grid == "sweep") {
        grid = sweep_grid();
    } else if (a.grid == "table2") {
        grid = table2_grid();
    } else {
        throw UsageError("--grid must be 'sweep' or 'table2'");
    }
    std::optional<DatasetBudget> budget;
    if (!a.budget.empty()) {
        const auto bed = testbed_config(a.config);
        const auto it = bed.budgets.find(a.budget);
        if (it == bed.budgets.end()) {
            throw UsageError("unknown token budget '" + a.budget + "'");
        }
        budget = it->second;
    }
    const NoiseModel noise{a.loss_sigma, a.err_sigma};
    try {
        noise.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    SynthOptions opts;
    opts.eval_set = a.eval_set.empty() ? "val" : a.eval_set;
    opts.dataset = !a.dataset.empty() ? a.dataset : (!a.preset.empty() ? a.preset : "synthetic");
    const auto runs = generate_runs(loss_law, err_law, grid, budget, noise, ctx.globals.seed, opts);

    std::ostringstream jsonl;
    write_runs(jsonl, runs);
    if (ctx.globals.out.empty()) {
        ctx.out << jsonl.str();
    } else {
        ctx.write_artifact(jsonl.str());
        ctx.emit({{"n_runs", runs.size()}, {"path", ctx.globals.out}, {"seed", ctx.globals.seed}});
    }
    ctx.note("generated " + std::to_string(runs.size()) + " runs");
}

} // namespace

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::unsupported_conversion:
        return exit_usage;
    case ErrorKind::invalid_start:
    case ErrorKind::numerical_failure:
    case ErrorKind::bootstrap_unstable:
        return exit_numerical;
    case ErrorKind::invalid_argument:
    case ErrorKind::insufficient_data:
    case ErrorKind::unidentifiable_bracket:
    case ErrorKind::degenerate_data:
    case ErrorKind::parse_error:
    case ErrorKind::validation_error:
        return exit_data;
    }
    return exit_data;
}

CommandOutcome run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fit, convert and extrapolate over-training-aware scaling laws.", "overscale"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals globals;
    app.add_option("--seed", globals.seed, "Seed for bootstrap and simulation");
    app.add_option("--out", globals.out, "Write the command's artifact to this path");
    app.add_flag("--quiet", globals.quiet, "Suppress human-readable output on stderr");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit a law to a runs file and emit a FitReport");
    fit->add_option("--runs", fa.runs, "Runs file (JSON Lines)")->required();
    fit->add_option("--eval-set", fa.eval_set, "Validation set key in each run's losses")->required();
    fit->add_option("--form", fa.form, "Law form")->check(CLI::IsMember({"cm", "power", "err"}));
    fit->add_option("--subset", fa.subset, "Fit-subset preset name");
    fit->add_option("--exclude", fa.exclude, "Named exclusion window(s) to drop");
    fit->add_option("--config", fa.config, "Testbed config JSON with extra presets and windows");
    fit->add_option("--bootstrap", fa.bootstrap, "Attach percentile intervals from B resamples")
        ->check(CLI::NonNegativeNumber);
    fit->add_option("--level", fa.level, "Interval level")->check(CLI::Range(0.5, 0.999999));
    fit->add_option("--tasks", fa.tasks, "Tasks averaged for --form err")->delimiter(',');
    fit->add_option("--threshold", fa.threshold, "Select err tasks by margin above chance (points)");
    fit->add_option("--reference-n", fa.reference_n, "Reference model size for task selection");

    PredictArgs pa;
    auto* predict = app.add_subcommand("predict", "Evaluate a fitted law at a model shape");
    predict->add_option("--fit", pa.fit, "Loss law or FitReport JSON")->required();
    predict->add_option("--params", pa.params, "Parameter count N")->required();
    auto* tokens = predict->add_option("--tokens", pa.tokens, "Training tokens D");
    auto* mult = predict->add_option("--multiplier", pa.multiplier, "Token multiplier M = D/N");
    tokens->excludes(mult);
    mult->excludes(tokens);
    predict->add_option("--chain", pa.chain, "Err law or FitReport to chain onto the loss");

    ReportArgs ra;
    auto* report = app.add_subcommand("report", "Derived reports and synthetic testbeds");
    report->require_subcommand(1);
    report->fallthrough();

    auto* pareto = report->add_subcommand("pareto", "Compute/loss Pareto frontier (CSV artifact)");
    pareto->add_option("--runs", ra.runs);
    pareto->add_option("--eval-set", ra.eval_set);

    auto* grid = report->add_subcommand("grid", "Per-run relative error of a fitted law (CSV artifact)");
    grid->add_option("--runs", ra.runs);
    grid->add_option("--eval-set", ra.eval_set);
    grid->add_option("--fit", ra.fit);
    grid->add_option("--chain", ra.chain, "Err law; switches the target to average top-1 error");
    grid->add_option("--tasks", ra.tasks)->delimiter(',');

    auto* optm = report->add_subcommand("optimal-m", "Compute-optimal multiplier and allocation");
    optm->add_option("--fit", ra.fit);
    optm->add_option("--compute", ra.compute, "Compute budget for N* and D*");

    auto* seltasks = report->add_subcommand("select-tasks", "Tasks above chance at the reference scale");
    seltasks->add_option("--runs", ra.runs);
    seltasks->add_option("--reference-n", ra.reference_n);
    seltasks->add_option("--threshold", ra.threshold, "Margin above chance, in points");

    auto* total = report->add_subcommand("total-compute", "Total training compute of a preset or runs file");
    total->add_option("--subset", ra.subset);
    total->add_option("--runs", ra.runs);
    total->add_option("--config", ra.config);

    auto* sweep = report->add_subcommand("sweep", "Extrapolation error across fit windows (CSV artifact)");
    sweep->add_option("--runs", ra.runs);
    sweep->add_option("--eval-set", ra.eval_set);
    sweep->add_option("--target-n", ra.target_n)->required();
    sweep->add_option("--target-m", ra.target_m)->required();
    sweep->add_option("--windows", ra.windows, "Window sizes (default: 5 up to the pool size)")->delimiter(',');

    auto* simulate = report->add_subcommand("simulate", "Generate a synthetic runs file");
    simulate->add_option("--law", ra.law, "Loss law JSON");
    simulate->add_option("--preset", ra.preset, "Built-in loss law: c4, redpajama, refinedweb");
    simulate->add_option("--err-law", ra.err_law);
    simulate->add_option("--err-preset", ra.err_preset);
    simulate->add_option("--grid", ra.grid, "sweep or table2");
    simulate->add_option("--budget", ra.budget, "Drop runs exceeding this dataset's token budget");
    simulate->add_option("--config", ra.config);
    simulate->add_option("--loss-sigma", ra.loss_sigma);
    simulate->add_option("--err-sigma", ra.err_sigma);
    simulate->add_option("--eval-set", ra.eval_set);
    simulate->add_option("--dataset", ra.dataset);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return {code == 0 ? exit_ok : exit_usage, {}, e.what()};
    }

    Context ctx{globals, out, err, {}};
    try {
        if (*fit) {
            cmd_fit(fa, ctx);
        } else if (*predict) {
            cmd_predict(pa, ctx);
        } else if (*pareto) {
            report_pareto(ra, ctx);
        } else if (*grid) {
            report_grid(ra, ctx);
        } else if (*optm) {
            report_optimal_m(ra, ctx);
        } else if (*seltasks) {
            report_select_tasks(ra, ctx);
        } else if (*total) {
            report_total_compute(ra, ctx);
        } else if (*sweep) {
            report_sweep(ra, ctx);
        } else if (*simulate) {
            report_simulate(ra, ctx);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return {exit_usage, ctx.outcome.artifacts, e.what()};
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return {exit_code_for(e.kind()), ctx.outcome.artifacts, e.what()};
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return {exit_data, ctx.outcome.artifacts, e.what()};
    }
    return ctx.outcome;
}

} // namespace overscale::cli
