#pragma once

// Synthetic testbeds drawn from known laws, plus the experiments that use
// them as ground truth.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "overscale/core_model.hpp"
#include "overscale/fitting.hpp"
#include "overscale/lawform.hpp"
#include "overscale/testbed.hpp"

namespace overscale {

struct NoiseModel {
    double loss_sigma = 0.0; // additive Gaussian on loss, nats
    double err_sigma = 0.0;  // additive Gaussian on average error, clamped to [0, 1]

    void validate() const;
};

struct SynthOptions {
    std::string eval_set = "val";
    std::string dataset = "synthetic";
    /// Name of the single aggregate pseudo-task carrying average error.
    std::string task_name = "aggregate";
};

/// One record per grid pair that fits the token budget (if any). Loss is the
/// law at the record's exact (C, M) plus noise; with an error law, a single
/// aggregate task has accuracy 1 - (Err(noiseless loss) + noise).
std::vector<RunRecord> generate_runs(const LossLawCM& loss_law, const std::optional<ErrLaw>& err_law,
                                     std::span<const PresetPair> grid, const std::optional<DatasetBudget>& budget,
                                     const NoiseModel& noise, std::uint64_t seed, const SynthOptions& opts = {});

/// N in {0.011B, 0.079B, 0.154B, 0.411B} x M in {5, ..., 320} plus (1.4B, 20):
/// the 29-run grid the reliability sweep draws from.
std::vector<PresetPair> sweep_grid();

/// The six distinct (N, M) rows of the default fit configuration.
std::vector<PresetPair> table2_grid();

struct ParamRecovery {
    double median = 0.0;
    double p10 = 0.0;
    double p90 = 0.0;
};

struct RecoverySummary {
    int n_seeds = 0;
    int n_failed = 0;
    /// Relative error |fit - truth| / truth per parameter (e_irr, a, b, eta).
    std::map<std::string, ParamRecovery> relative;
    /// Median |eta_fit - eta_true|.
    double eta_abs_median = 0.0;
};

RecoverySummary recovery_experiment(const LossLawCM& truth, std::span<const PresetPair> grid,
                                    const NoiseModel& noise, int n_seeds, const FitConfig& cfg = {},
                                    std::uint64_t base_seed = 0);

struct SweepPoint {
    int window = 0;
    double compute_used = 0.0;
    double rel_error = 0.0;
    std::vector<std::string> run_ids;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::vector<std::string> notices;
};

/// Held-out target run is located by (params_n, multiplier) within 2%. The
/// remaining runs are sorted by compute; for each window n, up to 5 runs are
/// taken at evenly spaced indices of the first n (both endpoints included)
/// and the (C, M) law is fit to them.
SweepResult reliability_sweep(std::span<const RunRecord> runs, const PresetPair& target,
                              const std::string& eval_set, std::span<const int> windows,
                              const FitConfig& cfg = {});

/// Evenly spaced indices into [0, n) including 0 and n-1, at most `count`.
std::vector<std::size_t> window_sample_indices(std::size_t n, std::size_t count);

} // namespace overscale
