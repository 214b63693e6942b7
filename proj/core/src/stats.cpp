#include "overscale/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "overscale/errors.hpp"
#include "overscale/random.hpp"
#include "overscale/testbed.hpp"

namespace overscale {

double relative_error(double predicted, double ground_truth) {
    if (ground_truth == 0.0 || !std::isfinite(ground_truth)) {
        fail(ErrorKind::invalid_argument, "relative error needs a finite, nonzero ground truth");
    }
    return std::abs(predicted - ground_truth) / std::abs(ground_truth);
}

namespace {

void sort_cells(std::vector<ErrorGridCell>& cells) {
    std::stable_sort(cells.begin(), cells.end(), [](const auto& x, const auto& y) {
        return std::tie(x.params_n, x.multiplier_m) < std::tie(y.params_n, y.multiplier_m);
    });
}

ErrorGridCell make_cell(const RunRecord& run, double predicted, double truth) {
    const auto g = run.geometry();
    return {run.params_n, g.multiplier_m, predicted, truth, relative_error(predicted, truth)};
}

} // namespace

std::vector<ErrorGridCell> error_grid(const LossLawCM& law, std::span<const RunRecord> runs,
                                      const LossTarget& target) {
    validate(law);
    std::vector<ErrorGridCell> cells;
    cells.reserve(runs.size());
    for (const auto& run : runs) {
        const auto g = run.geometry();
        cells.push_back(make_cell(run, eval_loss_cm(law, g.compute_c, g.multiplier_m), run.loss(target.eval_set)));
    }
    sort_cells(cells);
    return cells;
}

std::vector<ErrorGridCell> error_grid(const LossLawCM& loss_law, const ErrLaw& err_law,
                                      std::span<const RunRecord> runs, const AvgErrTarget& target) {
    validate(loss_law);
    validate(err_law);
    std::vector<ErrorGridCell> cells;
    cells.reserve(runs.size());
    for (const auto& run : runs) {
        const auto g = run.geometry();
        cells.push_back(make_cell(run, chain_predict(loss_law, err_law, g.compute_c, g.multiplier_m),
                                  average_top1_error(run, target.tasks)));
    }
    sort_cells(cells);
    return cells;
}

void write_error_grid_csv(std::ostream& os, std::span<const ErrorGridCell> cells) {
    os << "params_n,multiplier_m,predicted,ground_truth,rel_error\n";
    const auto old = os.precision(17);
    for (const auto& c : cells) {
        os << c.params_n << ',' << c.multiplier_m << ',' << c.predicted << ',' << c.ground_truth << ','
           << c.rel_error << '\n';
    }
    os.precision(old);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        fail(ErrorKind::invalid_argument, "quantile of an empty sample");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        fail(ErrorKind::invalid_argument, "quantile level must lie in [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

ParamIntervals BootstrapReport::param_intervals() const {
    return {level, n_resamples, seed, per_param_intervals};
}

namespace {

template <typename Point, typename Key, typename Predict>
BootstrapReport run_bootstrap(std::span<const Point> points, const FitConfig& cfg, const BootstrapOptions& opts,
                              std::span<const Key> predict_at,
                              FitReport (*fitter)(std::span<const Point>, const FitConfig&), Predict predict) {
    if (opts.n_resamples < 100) {
        fail(ErrorKind::invalid_argument, "bootstrap needs at least 100 resamples");
    }
    if (!(opts.level > 0.0 && opts.level < 1.0)) {
        fail(ErrorKind::invalid_argument, "bootstrap level must lie in (0, 1)");
    }
    if (points.empty()) {
        fail(ErrorKind::insufficient_data, "bootstrap over an empty point set");
    }

    std::vector<std::vector<double>> param_draws;
    std::vector<std::string> names;
    std::vector<std::vector<double>> pred_draws(predict_at.size());
    int failed = 0;

    std::vector<Point> sample(points.size());
    for (int b = 0; b < opts.n_resamples; ++b) {
        auto engine = make_engine(opts.seed, static_cast<std::uint64_t>(b));
        std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
        for (auto& s : sample) {
            s = points[pick(engine)];
        }
        FitReport fit;
        try {
            fit = fitter(sample, cfg);
        } catch (const Error&) {
            ++failed;
            continue;
        }
        if (!fit.converged) {
            ++failed;
            continue;
        }
        const auto params = named_params(fit.law);
        if (names.empty()) {
            for (const auto& [name, _] : params) {
                names.push_back(name);
            }
            param_draws.resize(names.size());
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            param_draws[i].push_back(params[i].second);
        }
        for (std::size_t i = 0; i < predict_at.size(); ++i) {
            pred_draws[i].push_back(predict(fit.law, predict_at[i]));
        }
    }

    if (static_cast<double>(failed) > opts.max_failure_rate * opts.n_resamples || names.empty()) {
        std::ostringstream os;
        os << failed << " of " << opts.n_resamples << " resample fits failed";
        fail(ErrorKind::bootstrap_unstable, os.str());
    }

    const double tail = (1.0 - opts.level) / 2.0;
    BootstrapReport report;
    report.n_resamples = opts.n_resamples;
    report.level = opts.level;
    report.seed = opts.seed;
    report.n_failed = failed;
    for (std::size_t i = 0; i < names.size(); ++i) {
        report.per_param_intervals[names[i]] = {quantile(param_draws[i], tail), quantile(param_draws[i], 1.0 - tail)};
    }
    for (std::size_t i = 0; i < predict_at.size(); ++i) {
        PredictionInterval pi;
        if constexpr (std::is_same_v<Key, double>) {
            pi.at = {predict_at[i]};
        } else {
            pi.at = {predict_at[i].first, predict_at[i].second};
        }
        pi.interval = {quantile(pred_draws[i], tail), quantile(pred_draws[i], 1.0 - tail)};
        report.prediction_intervals.push_back(std::move(pi));
    }
    return report;
}

} // namespace

BootstrapReport bootstrap_fit(std::span<const LossPoint> points, const FitConfig& cfg, const BootstrapOptions& opts,
                              std::span<const std::pair<double, double>> predict_at) {
    return run_bootstrap<LossPoint, std::pair<double, double>>(
        points, cfg, opts, predict_at, &fit_loss_cm, [](const AnyLaw& law, const std::pair<double, double>& at) {
            return eval_loss_cm(std::get<LossLawCM>(law), at.first, at.second);
        });
}

BootstrapReport bootstrap_fit(std::span<const PowerPoint> points, const FitConfig& cfg, const BootstrapOptions& opts,
                              std::span<const double> predict_at) {
    return run_bootstrap<PowerPoint, double>(points, cfg, opts, predict_at, &fit_power_law,
                                             [](const AnyLaw& law, double c) {
                                                 return eval_power_law(std::get<PowerLaw>(law), c);
                                             });
}

BootstrapReport bootstrap_fit(std::span<const ErrPoint> points, const FitConfig& cfg, const BootstrapOptions& opts,
                              std::span<const double> predict_at) {
    return run_bootstrap<ErrPoint, double>(points, cfg, opts, predict_at, &fit_err,
                                           [](const AnyLaw& law, double loss) {
                                               return eval_err(std::get<ErrLaw>(law), loss);
                                           });
}

nlohmann::json to_json(const BootstrapReport& report) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, iv] : report.per_param_intervals) {
        params[name] = {iv.lo, iv.hi};
    }
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& p : report.prediction_intervals) {
        preds.push_back({{"at", p.at}, {"lo", p.interval.lo}, {"hi", p.interval.hi}});
    }
    return {{"n_resamples", report.n_resamples},
            {"level", report.level},
            {"seed", report.seed},
            {"n_failed", report.n_failed},
            {"per_param_intervals", params},
            {"prediction_intervals", preds}};
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return values[i] < values[j]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    return ranks;
}

double rank_correlation(std::span<const std::pair<double, double>> pairs) {
    if (pairs.size() < 2) {
        fail(ErrorKind::invalid_argument, "rank correlation needs at least 2 pairs");
    }
    std::vector<double> xs, ys;
    for (const auto& [x, y] : pairs) {
        if (!std::isfinite(x) || !std::isfinite(y)) {
            fail(ErrorKind::invalid_argument, "rank correlation inputs must be finite");
        }
        xs.push_back(x);
        ys.push_back(y);
    }
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    const double n = static_cast<double>(rx.size());
    const double mean = (n + 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mean) * (ry[i] - mean);
        sxx += (rx[i] - mean) * (rx[i] - mean);
        syy += (ry[i] - mean) * (ry[i] - mean);
    }
    if (sxx == 0.0 || syy == 0.0) {
        fail(ErrorKind::invalid_argument, "rank correlation is undefined when one coordinate is constant");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

} // namespace overscale
