#pragma once

// Validation metrics: relative error, per-run error grids, percentile
// bootstrap over fits, and Spearman rank correlation.

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "overscale/core_model.hpp"
#include "overscale/fitting.hpp"
#include "overscale/lawform.hpp"

namespace overscale {

double relative_error(double predicted, double ground_truth);

struct ErrorGridCell {
    std::int64_t params_n = 0;
    double multiplier_m = 0.0;
    double predicted = 0.0;
    double ground_truth = 0.0;
    double rel_error = 0.0;
};

struct LossTarget {
    std::string eval_set;
};

struct AvgErrTarget {
    std::vector<TaskSpec> tasks;
};

/// One cell per run, ordered by (params_n, multiplier_m).
std::vector<ErrorGridCell> error_grid(const LossLawCM& law, std::span<const RunRecord> runs,
                                      const LossTarget& target);
/// Chained prediction of average top-1 error over `target.tasks`.
std::vector<ErrorGridCell> error_grid(const LossLawCM& loss_law, const ErrLaw& err_law,
                                      std::span<const RunRecord> runs, const AvgErrTarget& target);

/// Header: params_n,multiplier_m,predicted,ground_truth,rel_error
void write_error_grid_csv(std::ostream& os, std::span<const ErrorGridCell> cells);

struct BootstrapOptions {
    int n_resamples = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
    /// Resample fits that throw or fail to converge; above this share the
    /// whole bootstrap is rejected.
    double max_failure_rate = 0.2;
};

struct PredictionInterval {
    /// Prediction coordinates: (c, m) for cm fits, (c) for power-law fits,
    /// (loss) for error fits.
    std::vector<double> at;
    Interval interval;
};

struct BootstrapReport {
    int n_resamples = 0;
    double level = 0.95;
    std::map<std::string, Interval> per_param_intervals;
    std::vector<PredictionInterval> prediction_intervals;
    std::uint64_t seed = 0;
    int n_failed = 0;

    ParamIntervals param_intervals() const;
};

BootstrapReport bootstrap_fit(std::span<const LossPoint> points, const FitConfig& cfg,
                              const BootstrapOptions& opts,
                              std::span<const std::pair<double, double>> predict_at = {});
BootstrapReport bootstrap_fit(std::span<const PowerPoint> points, const FitConfig& cfg,
                              const BootstrapOptions& opts, std::span<const double> predict_at = {});
BootstrapReport bootstrap_fit(std::span<const ErrPoint> points, const FitConfig& cfg,
                              const BootstrapOptions& opts, std::span<const double> predict_at = {});

nlohmann::json to_json(const BootstrapReport& report);

/// Linear-interpolation quantile (q in [0, 1]) of an unsorted sample.
double quantile(std::vector<double> values, double q);

/// 1-based ranks; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman correlation of (predicted, ground_truth) pairs with average-rank
/// tie handling.
double rank_correlation(std::span<const std::pair<double, double>> pairs);

} // namespace overscale
