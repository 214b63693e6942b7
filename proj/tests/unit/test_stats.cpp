#include "doctest.h"

#include <random>
#include <sstream>

#include "overscale/stats.hpp"
#include "overscale/synth.hpp"
#include "test_util.hpp"

using namespace overscale;
using overscale::testing::throws_kind;

namespace {

std::vector<PowerPoint> power_points(const PowerLaw& law, int n, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::vector<PowerPoint> pts;
    for (int i = 0; i < n; ++i) {
        const double c = std::pow(10.0, 16.0 + 5.0 * i / (n - 1));
        pts.push_back({c, eval_power_law(law, c) + (sigma > 0 ? gauss(rng) : 0.0), std::to_string(i)});
    }
    return pts;
}

} // namespace

TEST_CASE("relative_error") {
    CHECK(relative_error(2.0, 2.0) == 0.0);
    CHECK(relative_error(1.98, 2.0) == doctest::Approx(0.01));
    CHECK(throws_kind([] { relative_error(1.0, 0.0); }, ErrorKind::invalid_argument));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        const double p = u(rng), g = u(rng), s = u(rng);
        if (g == 0.0 || s == 0.0) continue;
        CHECK(relative_error(s * p, s * g) == doctest::Approx(relative_error(p, g)).epsilon(1e-12));
    }
}

TEST_CASE("self-prediction at fit points is residual-level") {
    const auto truth = reference_laws::c4_loss();
    const auto runs = generate_runs(truth, std::nullopt, sweep_grid(), std::nullopt, {}, 0);
    std::vector<LossPoint> pts;
    for (const auto& r : runs) {
        const auto g = r.geometry();
        pts.push_back({g.compute_c, g.multiplier_m, r.loss("val"), r.id});
    }
    const auto law = std::get<LossLawCM>(fit_loss_cm(pts).law);
    for (const auto& p : pts) {
        CHECK(relative_error(eval_loss_cm(law, p.c, p.m), p.loss) < 1e-6);
    }
}

TEST_CASE("error_grid") {
    const auto truth = reference_laws::c4_loss();
    const auto err = reference_laws::c4_err();
    const auto runs = generate_runs(truth, err, sweep_grid(), std::nullopt, {}, 3);

    const auto cells = error_grid(truth, runs, LossTarget{"val"});
    REQUIRE(cells.size() == runs.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(cells[i].rel_error < 1e-9);
        if (i > 0) {
            const bool ordered = cells[i - 1].params_n < cells[i].params_n ||
                                 (cells[i - 1].params_n == cells[i].params_n &&
                                  cells[i - 1].multiplier_m <= cells[i].multiplier_m);
            CHECK(ordered);
        }
    }

    auto shifted = truth;
    shifted.e_irr += 0.1;
    for (const auto& c : error_grid(shifted, runs, LossTarget{"val"})) {
        CHECK(c.rel_error > 0.0);
        CHECK(c.rel_error == doctest::Approx(0.1 / c.ground_truth).epsilon(1e-9));
    }

    const TaskSpec agg[] = {{"aggregate", 0.0, {}}};
    for (const auto& c : error_grid(truth, err, runs, AvgErrTarget{{agg[0]}})) {
        CHECK(c.rel_error < 1e-9);
    }

    CHECK(error_grid(truth, std::span<const RunRecord>{}, LossTarget{"val"}).empty());
    CHECK(throws_kind([&] { error_grid(truth, runs, LossTarget{"missing"}); }, ErrorKind::validation_error));

    std::ostringstream csv;
    write_error_grid_csv(csv, cells);
    CHECK(csv.str().rfind("params_n,multiplier_m,predicted,ground_truth,rel_error\n", 0) == 0);
}

TEST_CASE("quantile and ranks") {
    CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
    CHECK(quantile({1.0, 2.0}, 0.25) == doctest::Approx(1.25));
    CHECK(quantile({5.0}, 0.9) == 5.0);
    const double xs[] = {10.0, 20.0, 20.0, 5.0};
    CHECK(average_ranks(xs) == std::vector<double>{2.0, 3.5, 3.5, 1.0});
}

TEST_CASE("rank_correlation") {
    const std::pair<double, double> same[] = {{1, 10}, {2, 20}, {3, 30}, {4, 40}};
    CHECK(rank_correlation(same) == doctest::Approx(1.0));
    const std::pair<double, double> reversed[] = {{1, 4}, {2, 3}, {3, 2}, {4, 1}};
    CHECK(rank_correlation(reversed) == doctest::Approx(-1.0));
    // Hand-computed: ranks (1,1),(2,3),(3,2) -> 1 - 6*2/(3*8) = 0.5.
    const std::pair<double, double> hand[] = {{1, 1}, {2, 3}, {3, 2}};
    CHECK(rank_correlation(hand) == doctest::Approx(0.5));
    const std::pair<double, double> one[] = {{1, 1}};
    CHECK(throws_kind([&] { rank_correlation(one); }, ErrorKind::invalid_argument));

    // Invariant under strictly increasing transforms of either coordinate.
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<std::pair<double, double>> pairs, transformed;
        for (int i = 0; i < 12; ++i) {
            const double x = u(rng), y = u(rng);
            pairs.emplace_back(x, y);
            transformed.emplace_back(std::log(x), y * y * y + 2.0);
        }
        CHECK(rank_correlation(pairs) == doctest::Approx(rank_correlation(transformed)).epsilon(1e-12));
        const double rho = rank_correlation(pairs);
        CHECK(rho >= -1.0);
        CHECK(rho <= 1.0);
    }
}

TEST_CASE("bootstrap on noiseless data has zero width") {
    const PowerLaw truth{1.51, 334.83, 0.121};
    const auto pts = power_points(truth, 12, 0.0, 0);
    const double at[] = {1e22};
    const auto rep = bootstrap_fit(std::span<const PowerPoint>(pts), {}, {200, 0.95, 5, 0.2}, at);
    for (const auto& [name, iv] : rep.per_param_intervals) {
        CHECK(iv.width() < 1e-6 * std::max(1.0, std::abs(iv.lo)));
    }
    REQUIRE(rep.prediction_intervals.size() == 1);
    CHECK(rep.prediction_intervals[0].interval.width() < 1e-6);
}

TEST_CASE("bootstrap is deterministic given the seed") {
    const PowerLaw truth{1.51, 334.83, 0.121};
    const auto pts = power_points(truth, 12, 0.01, 42);
    const BootstrapOptions opts{150, 0.9, 1234, 0.2};
    const auto a = bootstrap_fit(std::span<const PowerPoint>(pts), {}, opts);
    const auto b = bootstrap_fit(std::span<const PowerPoint>(pts), {}, opts);
    CHECK(to_json(a) == to_json(b));
    auto other = opts;
    other.seed = 1235;
    CHECK(to_json(bootstrap_fit(std::span<const PowerPoint>(pts), {}, other)) != to_json(a));
    for (const auto& [name, iv] : a.per_param_intervals) {
        CHECK(iv.lo <= iv.hi);
    }
}

TEST_CASE("bootstrap cm and err fits with prediction intervals") {
    const auto truth = reference_laws::c4_loss();
    const auto runs = generate_runs(truth, reference_laws::c4_err(), sweep_grid(), std::nullopt, {0.005, 0.005}, 9);
    std::vector<LossPoint> lp;
    std::vector<ErrPoint> ep;
    for (const auto& r : runs) {
        const auto g = r.geometry();
        lp.push_back({g.compute_c, g.multiplier_m, r.loss("val"), r.id});
        ep.push_back({r.loss("val"), r.tasks.front().top1_error(), r.id});
    }
    const std::pair<double, double> target[] = {{7.56e21, 642.857}};
    const auto rep = bootstrap_fit(std::span<const LossPoint>(lp), {}, {100, 0.95, 1, 0.2}, target);
    CHECK(rep.per_param_intervals.size() == 4);
    const auto& pi = rep.prediction_intervals.at(0);
    CHECK(pi.at.size() == 2);
    CHECK(pi.interval.lo <= eval_loss_cm(truth, 7.56e21, 642.857) + 0.05);
    CHECK(pi.interval.hi >= eval_loss_cm(truth, 7.56e21, 642.857) - 0.05);

    const double losses[] = {2.5};
    const auto erep = bootstrap_fit(std::span<const ErrPoint>(ep), {}, {100, 0.95, 1, 0.2}, losses);
    CHECK(erep.per_param_intervals.count("gamma") == 1);
    CHECK(erep.prediction_intervals.at(0).interval.lo <= erep.prediction_intervals.at(0).interval.hi);
}

TEST_CASE("bootstrap error paths") {
    const auto pts = power_points({1.51, 334.83, 0.121}, 12, 0.01, 1);
    CHECK(throws_kind([&] { bootstrap_fit(std::span<const PowerPoint>(pts), {}, {50, 0.95, 0, 0.2}); },
                      ErrorKind::invalid_argument));
    // Four points: most resamples have fewer than four distinct compute values.
    const auto few = power_points({1.51, 334.83, 0.121}, 4, 0.01, 1);
    CHECK(throws_kind([&] { bootstrap_fit(std::span<const PowerPoint>(few), {}, {100, 0.95, 0, 0.2}); },
                      ErrorKind::bootstrap_unstable));
}

TEST_CASE("bootstrap intervals widen with noise") {
    const PowerLaw truth{1.51, 334.83, 0.121};
    std::vector<double> narrow, wide;
    for (std::uint64_t s = 0; s < 50; ++s) {
        for (double sigma : {0.005, 0.02}) {
            const auto pts = power_points(truth, 12, sigma, 1000 + s);
            const auto rep = bootstrap_fit(std::span<const PowerPoint>(pts), {}, {100, 0.95, s, 0.2});
            (sigma < 0.01 ? narrow : wide).push_back(rep.per_param_intervals.at("eta").width());
        }
    }
    CHECK(quantile(wide, 0.5) >= quantile(narrow, 0.5));
}
