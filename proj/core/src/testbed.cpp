#include "overscale/testbed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "overscale/errors.hpp"

namespace overscale {

bool within_relative(double value, double reference, double tolerance) {
    return std::abs(value - reference) <= tolerance * std::abs(reference);
}

void FitSubsetPreset::validate() const {
    if (pairs.empty()) {
        fail(ErrorKind::validation_error, "preset '" + name + "' has no pairs");
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].params_n < 1 || !(pairs[i].multiplier_m > 0.0)) {
            fail(ErrorKind::validation_error, "preset '" + name + "' has a non-positive pair");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (pairs[i] == pairs[j]) {
                fail(ErrorKind::validation_error, "preset '" + name + "' repeats a pair");
            }
        }
    }
}

void ExclusionWindow::validate() const {
    if (!(flop_min > 0.0 && flop_min < flop_max)) {
        fail(ErrorKind::validation_error, "exclusion window needs 0 < flop_min < flop_max");
    }
}

namespace presets {

FitSubsetPreset table2_loss() {
    return {"table2-loss",
            {{11'000'000, 20.0}, {79'000'000, 20.0}, {154'000'000, 20.0}, {411'000'000, 20.0}, {11'000'000, 320.0}}};
}

FitSubsetPreset table2_err() {
    auto p = table2_loss();
    p.name = "table2-err";
    p.pairs.push_back({1'400'000'000, 20.0});
    return p;
}

std::optional<FitSubsetPreset> by_name(const std::string& name) {
    if (name == "table2-loss") {
        return table2_loss();
    }
    if (name == "table2-err") {
        return table2_err();
    }
    return std::nullopt;
}

} // namespace presets

ExclusionWindow default_exclusion_window() { return {5.2e16, 5.2e17}; }

TestbedConfig builtin_testbed_config() {
    TestbedConfig cfg;
    for (auto p : {presets::table2_loss(), presets::table2_err()}) {
        cfg.presets.emplace(p.name, p);
    }
    cfg.exclusions["grid-bump"] = {default_exclusion_window()};
    for (auto b : {budgets::c4(), budgets::redpajama(), budgets::refinedweb()}) {
        cfg.budgets.emplace(b.dataset, b);
    }
    return cfg;
}

TestbedConfig load_testbed_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::parse_error, "cannot open config file '" + path.string() + "'");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse_error, "config '" + path.string() + "': " + e.what());
    }
    auto cfg = builtin_testbed_config();
    try {
        if (j.contains("presets")) {
            for (const auto& pj : j.at("presets")) {
                FitSubsetPreset p;
                p.name = pj.at("name").get<std::string>();
                for (const auto& pair : pj.at("pairs")) {
                    p.pairs.push_back({static_cast<std::int64_t>(std::llround(pair.at(0).get<double>())),
                                       pair.at(1).get<double>()});
                }
                p.validate();
                cfg.presets[p.name] = std::move(p);
            }
        }
        if (j.contains("exclusions")) {
            for (const auto& [name, list] : j.at("exclusions").items()) {
                std::vector<ExclusionWindow> windows;
                for (const auto& w : list) {
                    ExclusionWindow win{w.at("flop_min").get<double>(), w.at("flop_max").get<double>()};
                    win.validate();
                    windows.push_back(win);
                }
                cfg.exclusions[name] = std::move(windows);
            }
        }
        if (j.contains("budgets")) {
            for (const auto& [name, value] : j.at("budgets").items()) {
                const double tokens = value.get<double>();
                if (!(tokens > 0.0)) {
                    fail(ErrorKind::validation_error, "budget '" + name + "' must be positive");
                }
                cfg.budgets[name] = {name, static_cast<std::uint64_t>(std::llround(tokens))};
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse_error, "config '" + path.string() + "': " + e.what());
    }
    return cfg;
}

std::vector<RunRecord> parse_runs(std::istream& in) {
    std::vector<RunRecord> runs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::parse_error, "line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            runs.push_back(run_from_json(j));
        } catch (const Error& e) {
            fail(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return runs;
}

std::vector<RunRecord> load_runs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::parse_error, "cannot open runs file '" + path.string() + "'");
    }
    return parse_runs(in);
}

void write_runs(std::ostream& out, std::span<const RunRecord> runs) {
    for (const auto& run : runs) {
        out << to_json(run).dump() << '\n';
    }
}

std::vector<RunRecord> pareto_frontier(std::span<const RunRecord> runs, const std::string& eval_set) {
    struct Entry {
        double compute;
        double loss;
        std::size_t index;
    };
    std::vector<Entry> entries;
    entries.reserve(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
        entries.push_back({runs[i].geometry().compute_c, runs[i].loss(eval_set), i});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
        if (x.compute != y.compute) return x.compute < y.compute;
        if (x.loss != y.loss) return x.loss < y.loss;
        return x.index < y.index;
    });

    // Sweep compute groups in ascending order. A run survives iff its loss is
    // no worse than the best loss seen at any compute <= its own.
    std::vector<RunRecord> out;
    double best = std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t j = i;
        double group_min = entries[i].loss;
        while (j < entries.size() && entries[j].compute == entries[i].compute) {
            ++j;
        }
        const double threshold = std::min(best, group_min);
        for (std::size_t k = i; k < j; ++k) {
            if (entries[k].loss <= threshold) {
                out.push_back(runs[entries[k].index]);
            }
        }
        best = threshold;
        i = j;
    }
    return out;
}

std::vector<RunRecord> apply_exclusions(std::span<const RunRecord> runs, std::span<const ExclusionWindow> windows) {
    std::vector<RunRecord> out;
    for (const auto& run : runs) {
        const double c = run.geometry().compute_c;
        const bool excluded = std::any_of(windows.begin(), windows.end(), [c](const ExclusionWindow& w) {
            return c >= w.flop_min && c <= w.flop_max;
        });
        if (!excluded) {
            out.push_back(run);
        }
    }
    return out;
}

SubsetSelection select_fit_subset(std::span<const RunRecord> runs, const FitSubsetPreset& preset) {
    SubsetSelection sel;
    std::vector<bool> taken(runs.size(), false);
    for (const auto& pair : preset.pairs) {
        bool found = false;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            if (taken[i]) {
                continue;
            }
            const auto g = runs[i].geometry();
            if (within_relative(static_cast<double>(runs[i].params_n), static_cast<double>(pair.params_n), 0.02) &&
                within_relative(g.multiplier_m, pair.multiplier_m, 0.02)) {
                taken[i] = true;
                found = true;
            }
        }
        if (!found) {
            std::ostringstream os;
            os << "preset '" << preset.name << "': no run matches N=" << pair.params_n << ", M=" << pair.multiplier_m;
            sel.missing.push_back(os.str());
        }
    }
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (taken[i]) {
            sel.runs.push_back(runs[i]);
        }
    }
    return sel;
}

std::vector<PresetPair> feasible_grid(std::span<const std::int64_t> n_set, std::span<const double> m_set,
                                      const DatasetBudget& budget) {
    std::vector<PresetPair> out;
    const auto limit = static_cast<long double>(budget.token_budget);
    for (auto n : n_set) {
        for (double m : m_set) {
            if (static_cast<long double>(n) * static_cast<long double>(m) <= limit) {
                out.push_back({n, m});
            }
        }
    }
    return out;
}

std::vector<TaskSpec> select_tasks(std::span<const RunRecord> runs, std::int64_t reference_n,
                                   double threshold_points) {
    std::vector<const RunRecord*> reference;
    for (const auto& run : runs) {
        if (within_relative(static_cast<double>(run.params_n), static_cast<double>(reference_n), 0.02)) {
            reference.push_back(&run);
        }
    }
    if (reference.empty()) {
        fail(ErrorKind::invalid_argument,
             "no runs within 2% of reference_n=" + std::to_string(reference_n));
    }

    // First-seen order over the reference runs.
    std::vector<TaskSpec> order;
    std::map<std::string, double> best_margin;
    for (const auto* run : reference) {
        for (const auto& t : run->tasks) {
            const double margin = t.accuracy - t.task.baseline;
            auto [it, inserted] = best_margin.emplace(t.task.name, margin);
            if (inserted) {
                order.push_back(t.task);
            } else {
                it->second = std::max(it->second, margin);
            }
        }
    }
    const double threshold = threshold_points / 100.0;
    std::vector<TaskSpec> out;
    for (const auto& task : order) {
        // Tolerate representation error at the threshold (0.40 - 0.30 vs 0.10).
        if (best_margin.at(task.name) >= threshold - 1e-12) {
            out.push_back(task);
        }
    }
    return out;
}

double average_top1_error(const RunRecord& run, std::span<const TaskSpec> tasks) {
    if (tasks.empty()) {
        fail(ErrorKind::invalid_argument, "average_top1_error needs at least one task");
    }
    double sum = 0.0;
    for (const auto& task : tasks) {
        const auto* result = run.find_task(task.name);
        if (result == nullptr) {
            fail(ErrorKind::validation_error, "run '" + run.id + "' has no result for task '" + task.name + "'");
        }
        sum += result->top1_error();
    }
    return sum / static_cast<double>(tasks.size());
}

double total_compute(std::span<const RunRecord> runs) {
    double sum = 0.0;
    for (const auto& run : runs) {
        sum += run.geometry().compute_c;
    }
    return sum;
}

double total_compute(std::span<const PresetPair> pairs) {
    double sum = 0.0;
    for (const auto& p : pairs) {
        const auto n = static_cast<double>(p.params_n);
        sum += 6.0 * n * (p.multiplier_m * n);
    }
    return sum;
}

} // namespace overscale
