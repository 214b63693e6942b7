#include "overscale/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "overscale/errors.hpp"
#include "overscale/random.hpp"
#include "overscale/stats.hpp"

namespace overscale {

void NoiseModel::validate() const {
    if (!(loss_sigma >= 0.0) || !(err_sigma >= 0.0) || !std::isfinite(loss_sigma) || !std::isfinite(err_sigma)) {
        fail(ErrorKind::invalid_argument, "noise sigmas must be finite and >= 0");
    }
}

std::vector<RunRecord> generate_runs(const LossLawCM& loss_law, const std::optional<ErrLaw>& err_law,
                                     std::span<const PresetPair> grid, const std::optional<DatasetBudget>& budget,
                                     const NoiseModel& noise, std::uint64_t seed, const SynthOptions& opts) {
    validate(loss_law);
    if (err_law) {
        validate(*err_law);
    }
    noise.validate();

    std::vector<PresetPair> pairs(grid.begin(), grid.end());
    if (budget) {
        std::vector<PresetPair> kept;
        for (const auto& p : pairs) {
            // Same test as feasible_grid, applied pairwise so grid order survives.
            const std::int64_t n[] = {p.params_n};
            const double m[] = {p.multiplier_m};
            if (!feasible_grid(n, m, *budget).empty()) {
                kept.push_back(p);
            }
        }
        pairs = std::move(kept);
    }

    std::vector<RunRecord> runs;
    runs.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        auto engine = make_engine(seed, i);
        std::normal_distribution<double> gauss(0.0, 1.0);

        RunRecord run;
        std::ostringstream id;
        id << opts.dataset << "-n" << p.params_n << "-m" << p.multiplier_m;
        run.id = id.str();
        run.dataset = opts.dataset;
        run.params_n = p.params_n;
        run.tokens_d = std::max<std::int64_t>(1, std::llround(static_cast<double>(p.params_n) * p.multiplier_m));
        run.seed = static_cast<std::int64_t>(seed);

        const auto g = run.geometry();
        const double clean = eval_loss_cm(loss_law, g.compute_c, g.multiplier_m);
        const double loss_noise = noise.loss_sigma > 0.0 ? noise.loss_sigma * gauss(engine) : 0.0;
        run.losses[opts.eval_set] = std::max(0.0, clean + loss_noise);

        if (err_law) {
            const double err_noise = noise.err_sigma > 0.0 ? noise.err_sigma * gauss(engine) : 0.0;
            const double err = std::clamp(eval_err(*err_law, clean) + err_noise, 0.0, 1.0);
            run.tasks.push_back({TaskSpec{opts.task_name, 0.0, std::nullopt}, 1.0 - err});
        }
        runs.push_back(std::move(run));
    }
    return runs;
}

std::vector<PresetPair> sweep_grid() {
    std::vector<PresetPair> grid;
    for (std::int64_t n : {11'000'000LL, 79'000'000LL, 154'000'000LL, 411'000'000LL}) {
        for (double m : {5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0}) {
            grid.push_back({n, m});
        }
    }
    grid.push_back({1'400'000'000, 20.0});
    return grid;
}

std::vector<PresetPair> table2_grid() { return presets::table2_err().pairs; }

RecoverySummary recovery_experiment(const LossLawCM& truth, std::span<const PresetPair> grid,
                                    const NoiseModel& noise, int n_seeds, const FitConfig& cfg,
                                    std::uint64_t base_seed) {
    if (n_seeds < 1) {
        fail(ErrorKind::invalid_argument, "recovery experiment needs at least one seed");
    }
    const std::vector<std::pair<std::string, double>> true_params{
        {"e_irr", truth.e_irr}, {"a", truth.a}, {"b", truth.b}, {"eta", truth.eta}};
    std::map<std::string, std::vector<double>> rel;
    std::vector<double> eta_abs;

    RecoverySummary summary;
    summary.n_seeds = n_seeds;
    for (int s = 0; s < n_seeds; ++s) {
        const auto runs = generate_runs(truth, std::nullopt, grid, std::nullopt, noise,
                                        base_seed + static_cast<std::uint64_t>(s));
        std::vector<LossPoint> pts;
        for (const auto& r : runs) {
            const auto g = r.geometry();
            pts.push_back({g.compute_c, g.multiplier_m, r.losses.begin()->second, r.id});
        }
        FitReport fit;
        try {
            fit = fit_loss_cm(pts, cfg);
        } catch (const Error&) {
            ++summary.n_failed;
            continue;
        }
        if (!fit.converged) {
            ++summary.n_failed;
            continue;
        }
        const auto fitted = named_params(fit.law);
        for (std::size_t i = 0; i < true_params.size(); ++i) {
            rel[true_params[i].first].push_back(relative_error(fitted[i].second, true_params[i].second));
        }
        eta_abs.push_back(std::abs(std::get<LossLawCM>(fit.law).eta - truth.eta));
    }
    if (eta_abs.empty()) {
        fail(ErrorKind::numerical_failure, "every recovery fit failed");
    }
    for (const auto& [name, errs] : rel) {
        summary.relative[name] = {quantile(errs, 0.5), quantile(errs, 0.1), quantile(errs, 0.9)};
    }
    summary.eta_abs_median = quantile(eta_abs, 0.5);
    return summary;
}

std::vector<std::size_t> window_sample_indices(std::size_t n, std::size_t count) {
    std::vector<std::size_t> idx;
    if (n == 0 || count == 0) {
        return idx;
    }
    if (n <= count) {
        for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        return idx;
    }
    if (count == 1) {
        return {n - 1};
    }
    for (std::size_t j = 0; j < count; ++j) {
        const double pos = static_cast<double>(j) * static_cast<double>(n - 1) / static_cast<double>(count - 1);
        const auto i = static_cast<std::size_t>(std::llround(pos));
        if (idx.empty() || idx.back() != i) {
            idx.push_back(i);
        }
    }
    return idx;
}

SweepResult reliability_sweep(std::span<const RunRecord> runs, const PresetPair& target,
                              const std::string& eval_set, std::span<const int> windows, const FitConfig& cfg) {
    constexpr std::size_t kPerWindow = 5;

    const RunRecord* target_run = nullptr;
    std::vector<const RunRecord*> pool;
    for (const auto& run : runs) {
        const auto g = run.geometry();
        const bool is_target =
            within_relative(static_cast<double>(run.params_n), static_cast<double>(target.params_n), 0.02) &&
            within_relative(g.multiplier_m, target.multiplier_m, 0.02);
        if (is_target && target_run == nullptr) {
            target_run = &run;
        } else if (!is_target) {
            pool.push_back(&run);
        }
    }
    if (target_run == nullptr) {
        fail(ErrorKind::invalid_argument, "target run is not present in the testbed");
    }
    std::stable_sort(pool.begin(), pool.end(), [](const RunRecord* x, const RunRecord* y) {
        return x->geometry().compute_c < y->geometry().compute_c;
    });

    const auto tg = target_run->geometry();
    const double truth = target_run->loss(eval_set);

    SweepResult result;
    for (int window : windows) {
        std::ostringstream label;
        label << "window " << window;
        if (window < 1 || static_cast<std::size_t>(window) > pool.size()) {
            result.notices.push_back(label.str() + ": skipped, only " + std::to_string(pool.size()) + " runs");
            continue;
        }
        if (window < cfg.min_points_loss) {
            result.notices.push_back(label.str() + ": skipped, below the minimum fit size");
            continue;
        }
        SweepPoint point;
        point.window = window;
        std::vector<LossPoint> pts;
        for (auto i : window_sample_indices(static_cast<std::size_t>(window), kPerWindow)) {
            const auto* run = pool[i];
            const auto g = run->geometry();
            pts.push_back({g.compute_c, g.multiplier_m, run->loss(eval_set), run->id});
            point.compute_used += g.compute_c;
            point.run_ids.push_back(run->id);
        }
        try {
            const auto fit = fit_loss_cm(pts, cfg);
            if (!fit.converged) {
                result.notices.push_back(label.str() + ": fit did not converge");
                continue;
            }
            point.rel_error =
                relative_error(eval_loss_cm(std::get<LossLawCM>(fit.law), tg.compute_c, tg.multiplier_m), truth);
        } catch (const Error& e) {
            result.notices.push_back(label.str() + ": skipped, " + e.what());
            continue;
        }
        result.points.push_back(std::move(point));
    }
    return result;
}

} // namespace overscale
