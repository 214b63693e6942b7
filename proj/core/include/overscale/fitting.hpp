#pragma once

// Model-specific fitting on top of lm::multi_start.
//
// Every fit works in an unconstrained internal space: positive parameters
// are exp(q), the error asymptote eps is logistic(q). The objective
// factories below expose those residuals (with analytic Jacobians) so the
// derivatives can be checked independently.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "overscale/core_model.hpp"
#include "overscale/lawform.hpp"
#include "overscale/lmfit.hpp"

namespace overscale {

struct FitConfig {
    std::vector<double> init_eta_grid{0.05, 0.1, 0.15, 0.2, 0.3, 0.5};
    std::vector<double> init_gamma_grid{0.25, 0.5, 0.75, 1.0, 1.5};
    lm::LMOptions lm_options{};
    int min_points_loss = 5;
    int min_points_err = 4;

    void validate() const;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const noexcept { return hi - lo; }
    bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

/// Percentile intervals attached to a fit. Keys are the law's field names.
struct ParamIntervals {
    double level = 0.95;
    int n_resamples = 0;
    std::uint64_t seed = 0;
    std::map<std::string, Interval> params;
};

struct FitReport {
    AnyLaw law;
    double residual_rms = 0.0;
    int n_points = 0;
    std::vector<std::string> point_ids;
    bool converged = false;
    std::optional<ParamIntervals> ci;
};

struct LossPoint {
    double c = 0.0;
    double m = 0.0;
    double loss = 0.0;
    std::string id;
};

struct ErrPoint {
    double loss = 0.0;
    double err = 0.0;
    std::string id;
};

struct PowerPoint {
    double c = 0.0;
    double loss = 0.0;
    std::string id;
};

FitReport fit_loss_cm(std::span<const LossPoint> points, const FitConfig& cfg = {});
FitReport fit_err(std::span<const ErrPoint> points, const FitConfig& cfg = {});
FitReport fit_power_law(std::span<const PowerPoint> points, const FitConfig& cfg = {});

struct SlopeEntry {
    double eta = 0.0;
    std::size_t n_runs = 0;
    bool converged = false;
    std::optional<Interval> ci;
};

struct SlopeAnalysis {
    std::map<double, SlopeEntry> by_multiplier;
    std::vector<std::string> warnings;
};

struct SlopeBootstrap {
    int n_resamples = 200;
    double level = 0.95;
    std::uint64_t seed = 0;
};

/// Groups runs by token multiplier (rounded to 6 significant figures), fits
/// L = E + lambda C^-eta per group, and reports each group's exponent.
/// Groups with fewer than 4 runs are skipped with a warning.
SlopeAnalysis slope_by_multiplier(std::span<const RunRecord> runs, const std::string& eval_set,
                                  const FitConfig& cfg = {},
                                  const std::optional<SlopeBootstrap>& bootstrap = std::nullopt);

/// Round to `digits` significant figures.
double round_significant(double x, int digits);

/// Law parameters as (name, value) pairs, in the law's field order.
std::vector<std::pair<std::string, double>> named_params(const AnyLaw& law);

/// FitReport -> law JSON plus residual_rms, n_points, point_ids, converged, ci.
nlohmann::json to_json(const FitReport& report);
FitReport fit_report_from_json(const nlohmann::json& j);

/// Residual objectives in internal (transformed) coordinates.
namespace objectives {
lm::ObjectiveSpec loss_cm(std::span<const LossPoint> points);
lm::ObjectiveSpec power_law(std::span<const PowerPoint> points);
lm::ObjectiveSpec err(std::span<const ErrPoint> points);

lm::Vector to_internal(const LossLawCM& law);
lm::Vector to_internal(const PowerLaw& law);
lm::Vector to_internal(const ErrLaw& law);
LossLawCM loss_cm_from_internal(const lm::Vector& q);
PowerLaw power_law_from_internal(const lm::Vector& q);
ErrLaw err_from_internal(const lm::Vector& q);
} // namespace objectives

} // namespace overscale
