#include "doctest.h"

#include <random>

#include "overscale/fitting.hpp"
#include "overscale/synth.hpp"
#include "test_util.hpp"

using namespace overscale;
using overscale::testing::rel_diff;
using overscale::testing::throws_kind;

namespace {

std::vector<LossPoint> cm_points(const LossLawCM& law, std::span<const PresetPair> grid) {
    std::vector<LossPoint> pts;
    for (const auto& p : grid) {
        const double n = static_cast<double>(p.params_n);
        const double c = 6.0 * n * n * p.multiplier_m;
        pts.push_back({c, p.multiplier_m, eval_loss_cm(law, c, p.multiplier_m), std::to_string(p.params_n)});
    }
    return pts;
}

} // namespace

TEST_CASE("fit_loss_cm recovers the generator on the six-row grid") {
    const auto truth = reference_laws::c4_loss();
    const auto grid = table2_grid();
    const auto rep = fit_loss_cm(cm_points(truth, grid));
    const auto law = std::get<LossLawCM>(rep.law);
    CHECK(rep.converged);
    CHECK(rep.n_points == 6);
    CHECK(rep.point_ids.size() == 6);
    CHECK(rep.residual_rms < 1e-8);
    CHECK(rel_diff(law.e_irr, truth.e_irr) < 1e-4);
    CHECK(rel_diff(law.a, truth.a) < 1e-4);
    CHECK(rel_diff(law.b, truth.b) < 1e-4);
    CHECK(rel_diff(law.eta, truth.eta) < 1e-4);
}

TEST_CASE("fit_loss_cm recovery holds for random laws") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto grid = sweep_grid();
    for (int i = 0; i < 20; ++i) {
        const LossLawCM truth{1.0 + u(rng), 50.0 + 300.0 * u(rng), 50.0 + 300.0 * u(rng), 0.08 + 0.1 * u(rng)};
        const auto rep = fit_loss_cm(cm_points(truth, grid));
        const auto law = std::get<LossLawCM>(rep.law);
        CHECK(rep.converged);
        CHECK(rel_diff(law.e_irr, truth.e_irr) < 1e-4);
        CHECK(rel_diff(law.a, truth.a) < 1e-4);
        CHECK(rel_diff(law.b, truth.b) < 1e-4);
        CHECK(rel_diff(law.eta, truth.eta) < 1e-4);
    }
}

TEST_CASE("fit_loss_cm preconditions") {
    const auto truth = reference_laws::c4_loss();
    const auto grid = table2_grid();
    auto pts = cm_points(truth, grid);
    pts.resize(4);
    CHECK(throws_kind([&] { fit_loss_cm(pts); }, ErrorKind::insufficient_data));

    std::vector<PresetPair> single_m;
    for (std::int64_t n : {11'000'000LL, 79'000'000LL, 154'000'000LL, 411'000'000LL, 1'400'000'000LL}) {
        single_m.push_back({n, 20.0});
    }
    CHECK(throws_kind([&] { fit_loss_cm(cm_points(truth, single_m)); }, ErrorKind::unidentifiable_bracket));

    // Conflicting duplicates are allowed; they only add residual.
    auto dup = cm_points(truth, grid);
    dup.push_back(dup.front());
    dup.back().loss += 0.01;
    const auto rep = fit_loss_cm(dup);
    CHECK(rep.residual_rms > 0.0);
    CHECK(rep.n_points == 7);
}

TEST_CASE("fit_err recovers the generator") {
    const ErrLaw truth = reference_laws::redpajama_err();
    std::vector<ErrPoint> pts;
    for (double loss : {2.2, 2.5, 2.8, 3.1, 3.6, 4.2}) {
        pts.push_back({loss, eval_err(truth, loss), ""});
    }
    const auto rep = fit_err(pts);
    const auto law = std::get<ErrLaw>(rep.law);
    CHECK(rep.converged);
    CHECK(rel_diff(law.eps, truth.eps) < 1e-3);
    CHECK(rel_diff(law.k, truth.k) < 1e-3);
    CHECK(rel_diff(law.gamma, truth.gamma) < 1e-3);
    CHECK(law.eps <= 1.0);
}

TEST_CASE("fit_err preconditions") {
    std::vector<ErrPoint> flat;
    for (double loss : {2.2, 2.5, 2.8, 3.1}) flat.push_back({loss, 0.5, ""});
    CHECK(throws_kind([&] { fit_err(flat); }, ErrorKind::degenerate_data));
    flat.resize(3);
    CHECK(throws_kind([&] { fit_err(flat); }, ErrorKind::insufficient_data));
    std::vector<ErrPoint> two_losses{{2.0, 0.5, ""}, {2.0, 0.52, ""}, {3.0, 0.6, ""}, {3.0, 0.61, ""}};
    CHECK(throws_kind([&] { fit_err(two_losses); }, ErrorKind::degenerate_data));
}

TEST_CASE("fit_power_law recovery, degeneracy, and scale equivariance") {
    const PowerLaw truth{1.51, 334.83, 0.121};
    std::vector<PowerPoint> pts;
    for (int i = 0; i < 8; ++i) {
        const double c = std::pow(10.0, 16.0 + 0.7 * i);
        pts.push_back({c, eval_power_law(truth, c), ""});
    }
    const auto rep = fit_power_law(pts);
    const auto law = std::get<PowerLaw>(rep.law);
    CHECK(rep.converged);
    CHECK(rel_diff(law.e_irr, truth.e_irr) < 1e-5);
    CHECK(rel_diff(law.lambda, truth.lambda) < 1e-5);
    CHECK(rel_diff(law.eta, truth.eta) < 1e-5);

    const double s = 1e3;
    auto scaled = pts;
    for (auto& p : scaled) p.c *= s;
    const auto srep = std::get<PowerLaw>(fit_power_law(scaled).law);
    CHECK(rel_diff(srep.lambda, law.lambda * std::pow(s, law.eta)) < 1e-4);
    CHECK(rel_diff(srep.eta, law.eta) < 1e-5);
    CHECK(rel_diff(srep.e_irr, law.e_irr) < 1e-5);

    auto flat = pts;
    for (auto& p : flat) p.loss = 2.5;
    const auto frep = fit_power_law(flat);
    const auto fl = std::get<PowerLaw>(frep.law);
    const bool degenerate_ok = !frep.converged || (std::abs(fl.e_irr - 2.5) < 1e-3 && frep.residual_rms < 1e-3);
    CHECK(degenerate_ok);

    pts.resize(3);
    CHECK(throws_kind([&] { fit_power_law(pts); }, ErrorKind::insufficient_data));
}

TEST_CASE("slope_by_multiplier recovers one exponent for every group") {
    const auto truth = reference_laws::c4_loss();
    std::vector<PresetPair> grid;
    for (double m : {20.0, 40.0, 80.0}) {
        for (std::int64_t n : {11'000'000LL, 40'000'000LL, 79'000'000LL, 154'000'000LL, 411'000'000LL}) {
            grid.push_back({n, m});
        }
    }
    const auto runs = generate_runs(truth, std::nullopt, grid, std::nullopt, {}, 1);
    const auto slopes = slope_by_multiplier(runs, "val");
    REQUIRE(slopes.by_multiplier.size() == 3);
    CHECK(slopes.warnings.empty());
    for (const auto& [m, entry] : slopes.by_multiplier) {
        CHECK(std::abs(entry.eta - truth.eta) < 1e-6);
        CHECK(entry.n_runs == 5);
    }

    std::vector<RunRecord> one_group(runs.begin(), runs.begin() + 5);
    CHECK(slope_by_multiplier(one_group, "val").by_multiplier.size() == 1);

    std::vector<RunRecord> small(runs.begin(), runs.begin() + 3);
    const auto skipped = slope_by_multiplier(small, "val");
    CHECK(skipped.by_multiplier.empty());
    CHECK(skipped.warnings.size() == 1);
}

TEST_CASE("slope_by_multiplier bootstrap intervals") {
    const auto truth = reference_laws::c4_loss();
    std::vector<PresetPair> grid;
    for (std::int64_t n : {11'000'000LL, 20'000'000LL, 40'000'000LL, 79'000'000LL, 154'000'000LL, 300'000'000LL,
                           411'000'000LL, 700'000'000LL}) {
        grid.push_back({n, 20.0});
    }
    const auto runs = generate_runs(truth, std::nullopt, grid, std::nullopt, {0.005, 0.0}, 4);
    const auto slopes = slope_by_multiplier(runs, "val", {}, SlopeBootstrap{100, 0.9, 2});
    REQUIRE(slopes.by_multiplier.size() == 1);
    const auto& entry = slopes.by_multiplier.begin()->second;
    if (entry.ci) {
        CHECK(entry.ci->lo <= entry.ci->hi);
    } else {
        CHECK_FALSE(slopes.warnings.empty());
    }
}

TEST_CASE("multiplier grouping rounds to six significant figures") {
    CHECK(round_significant(20.0000001, 6) == 20.0);
    CHECK(round_significant(642.857142857, 6) == doctest::Approx(642.857));
    CHECK(round_significant(0.0012345678, 6) == doctest::Approx(0.00123457));
}

TEST_CASE("fit report json round trip") {
    FitReport rep{reference_laws::c4_loss(), 1e-3, 2, {"a", "b"}, true, std::nullopt};
    rep.ci = ParamIntervals{0.95, 200, 7, {{"eta", {0.1, 0.2}}}};
    const auto j = to_json(rep);
    CHECK(j.at("form") == "cm");
    CHECK(j.at("n_points") == 2);
    const auto back = fit_report_from_json(j);
    CHECK(back.law == rep.law);
    CHECK(back.point_ids == rep.point_ids);
    CHECK(back.ci->params.at("eta").hi == 0.2);
    CHECK(back.ci->seed == 7);
}
