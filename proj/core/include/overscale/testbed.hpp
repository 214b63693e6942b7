#pragma once

// Run ingestion and the filters that pick which runs a fit sees.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "overscale/core_model.hpp"

namespace overscale {

struct PresetPair {
    std::int64_t params_n = 0;
    double multiplier_m = 0.0;

    bool operator==(const PresetPair&) const = default;
};

struct FitSubsetPreset {
    std::string name;
    std::vector<PresetPair> pairs;

    void validate() const;
};

/// Runs with compute in [flop_min, flop_max] are dropped.
struct ExclusionWindow {
    double flop_min = 0.0;
    double flop_max = 0.0;

    void validate() const;
};

struct SubsetSelection {
    std::vector<RunRecord> runs;
    /// One notice per preset pair with no matching run.
    std::vector<std::string> missing;
};

/// Presets, windows, and budgets loaded from a JSON config file.
struct TestbedConfig {
    std::map<std::string, FitSubsetPreset> presets;
    std::map<std::string, std::vector<ExclusionWindow>> exclusions;
    std::map<std::string, DatasetBudget> budgets;
};

namespace presets {
/// Rows used for the loss fit: (0.011B,20) (0.079B,20) (0.154B,20) (0.411B,20) (0.011B,320).
FitSubsetPreset table2_loss();
/// table2_loss plus (1.4B, 20), used for the downstream-error fit.
FitSubsetPreset table2_err();
std::optional<FitSubsetPreset> by_name(const std::string& name);
} // namespace presets

/// The [5.2e16, 5.2e17] FLOP band that sits below the frontier in the
/// reference grid search. Shipped under the name "grid-bump".
ExclusionWindow default_exclusion_window();

/// Built-ins merged with the contents of `path` (file entries win).
TestbedConfig load_testbed_config(const std::filesystem::path& path);
TestbedConfig builtin_testbed_config();

std::vector<RunRecord> load_runs(const std::filesystem::path& path);
std::vector<RunRecord> parse_runs(std::istream& in);
void write_runs(std::ostream& out, std::span<const RunRecord> runs);

/// Runs not dominated in (compute, loss): r is dropped iff some q has
/// compute(q) <= compute(r) and loss(q) < loss(r). Sorted by compute.
std::vector<RunRecord> pareto_frontier(std::span<const RunRecord> runs, const std::string& eval_set);

std::vector<RunRecord> apply_exclusions(std::span<const RunRecord> runs, std::span<const ExclusionWindow> windows);

/// Matches on params_n and multiplier within 2% relative.
SubsetSelection select_fit_subset(std::span<const RunRecord> runs, const FitSubsetPreset& preset);

/// Pairs (n, m) with n*m <= budget, i.e. trainable without repeating tokens.
std::vector<PresetPair> feasible_grid(std::span<const std::int64_t> n_set, std::span<const double> m_set,
                                      const DatasetBudget& budget);

/// Tasks whose best accuracy margin over chance among runs at reference_n
/// (within 2%) is at least threshold_points percentage points.
std::vector<TaskSpec> select_tasks(std::span<const RunRecord> runs, std::int64_t reference_n,
                                   double threshold_points);

double average_top1_error(const RunRecord& run, std::span<const TaskSpec> tasks);

double total_compute(std::span<const RunRecord> runs);
double total_compute(std::span<const PresetPair> pairs);

bool within_relative(double value, double reference, double tolerance);

} // namespace overscale
