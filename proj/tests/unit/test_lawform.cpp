#include "doctest.h"

#include <random>

#include "overscale/lawform.hpp"
#include "test_util.hpp"

using namespace overscale;
using overscale::testing::rel_diff;
using overscale::testing::throws_kind;

namespace {
const LossLawCM c4 = reference_laws::c4_loss();
const ErrLaw c4_err = reference_laws::c4_err();
} // namespace

// Expected values below were computed independently at 40-digit precision
// (mpmath) directly from the closed forms.

TEST_CASE("eval_loss_cm") {
    CHECK(std::abs(eval_loss_cm(c4, 1e20, 20.0) - 2.783) < 0.002);
    CHECK(eval_loss_cm(c4, 1e20, 20.0) == doctest::Approx(2.7829945959786913).epsilon(1e-13));
    CHECK(std::abs(eval_loss_cm(c4, 1e20, 3.43) - 2.755) < 0.002);
    CHECK(eval_loss_cm(c4, 1e20, 3.43) == doctest::Approx(2.7545614723360149).epsilon(1e-13));
    // M = 1 collapses the bracket.
    CHECK(eval_loss_cm(c4, 1e18, 1.0) == doctest::Approx(c4.e_irr + (c4.a + c4.b) * std::pow(1e18, -c4.eta)));
    CHECK(throws_kind([] { eval_loss_cm(c4, 0.0, 20.0); }, ErrorKind::invalid_argument));
    CHECK(throws_kind([] { eval_loss_cm(c4, 1e20, -1.0); }, ErrorKind::invalid_argument));
    CHECK(std::isfinite(eval_loss_cm(c4, 1e30, 1e4)));
}

TEST_CASE("eval_loss_nd") {
    const ChinchillaLaw law{1.51, 113.5, 0.242, 152.97, 0.242};
    const double v = eval_loss_nd(law, 9.1287e8, 1.82574e10);
    CHECK(std::abs(v - 2.783) < 0.003);
    // Small A and B: result approaches E.
    CHECK(eval_loss_nd({1.51, 1e-30, 0.3, 1e-30, 0.3}, 1e9, 1e9) == doctest::Approx(1.51));
    // alpha = 1, B = 0: doubling N halves the reducible part.
    const ChinchillaLaw homog{1.0, 10.0, 1.0, 0.0, 0.5};
    CHECK(eval_loss_nd(homog, 200.0, 7.0) - 1.0 == doctest::Approx((eval_loss_nd(homog, 100.0, 7.0) - 1.0) / 2.0));
    CHECK(throws_kind([&] { eval_loss_nd(law, -1.0, 1.0); }, ErrorKind::invalid_argument));
    CHECK(throws_kind([] { validate(ChinchillaLaw{1.0, 0.0, 0.3, 0.0, 0.3}); }, ErrorKind::invalid_argument));
}

TEST_CASE("eval_power_law") {
    const PowerLaw law{1.51, 334.83, 0.121};
    CHECK(std::abs(eval_power_law(law, 1e20) - 2.783) < 0.002);
    CHECK(std::abs(eval_power_law(law, 1e20) - eval_loss_cm(c4, 1e20, 20.0)) < 1e-5);
    CHECK(eval_power_law({1.51, 0.0, 0.121}, 1e5) == 1.51);
    CHECK(eval_power_law(law, 1e300) == doctest::Approx(1.51).epsilon(1e-6));
    CHECK(throws_kind([&] { eval_power_law(law, 0.0); }, ErrorKind::invalid_argument));
}

TEST_CASE("eval_err and eval_err_pp") {
    CHECK(std::abs(eval_err(c4_err, 2.783) - 0.596) < 0.002);
    CHECK(eval_err(c4_err, 2.783) == doctest::Approx(0.59629423939953455).epsilon(1e-13));
    CHECK(eval_err({0.85, 0.0, 0.756}, 7.0) == 0.85);
    // Memorization special case: 1 - PP^-l.
    for (double loss : {0.5, 1.0, 3.0}) {
        CHECK(eval_err({1.0, 1.0, 0.7}, loss) == doctest::Approx(1.0 - std::pow(std::exp(loss), -0.7)));
    }
    CHECK(std::abs(eval_err_pp(c4_err, std::exp(2.783)) - 0.596) < 0.002);
    CHECK(eval_err_pp(c4_err, 1.0) == doctest::Approx(0.85 - 2.08));
    CHECK(eval_err_pp(c4_err, 1e300) == doctest::Approx(0.85));
    CHECK(throws_kind([] { eval_err_pp(c4_err, 0.0); }, ErrorKind::invalid_argument));
    CHECK(throws_kind([] { eval_err(c4_err, std::nan("")); }, ErrorKind::invalid_argument));
    CHECK(eval_err(c4_err, 30.0) < c4_err.eps);
}

TEST_CASE("eval_err and eval_err_pp agree through PP = exp(L)") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const ErrLaw law{0.05 + 0.95 * u(rng), 5.0 * u(rng), 0.05 + 2.0 * u(rng)};
        const double loss = 6.0 * u(rng);
        const double x = eval_err(law, loss);
        const double y = eval_err_pp(law, std::exp(loss));
        CHECK(std::abs(x - y) <= 1e-12 * std::max(std::abs(x), 1.0));
    }
}

TEST_CASE("parameter-form conversion") {
    const auto ch = cm_to_chinchilla(c4);
    CHECK(ch.alpha == doctest::Approx(0.242));
    CHECK(ch.beta == doctest::Approx(0.242));
    CHECK(ch.big_a == doctest::Approx(113.51749824540300).epsilon(1e-13));
    CHECK(ch.big_b == doctest::Approx(152.96684160728064).epsilon(1e-13));
    CHECK(std::abs(ch.big_a - 113.5) < 0.05);

    const auto cm = chinchilla_to_cm({1.51, 113.5, 0.242, 152.97, 0.242});
    CHECK(cm.eta == doctest::Approx(0.121));
    CHECK(cm.a == doctest::Approx(140.97826544242114).epsilon(1e-13));

    CHECK(cm_to_chinchilla({1.0, 2.0, 3.0, 0.5}).alpha == 1.0);
    CHECK(throws_kind([] { chinchilla_to_cm({1.0, 1.0, 0.3, 1.0, 0.35}); }, ErrorKind::unsupported_conversion));
}

TEST_CASE("conversion round trips and law equivalence") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const LossLawCM law{3.0 * u(rng), 1.0 + 500.0 * u(rng), 1.0 + 500.0 * u(rng), 0.02 + 0.5 * u(rng)};
        const auto back = chinchilla_to_cm(cm_to_chinchilla(law));
        CHECK(rel_diff(back.a, law.a) < 1e-10);
        CHECK(rel_diff(back.b, law.b) < 1e-10);
        CHECK(rel_diff(back.eta, law.eta) < 1e-10);
        CHECK(back.e_irr == law.e_irr);

        const double n = std::pow(10.0, 6.0 + 4.0 * u(rng));
        const double d = std::pow(10.0, 8.0 + 5.0 * u(rng));
        const double via_nd = eval_loss_nd(cm_to_chinchilla(law), n, d);
        const double via_cm = eval_loss_cm(law, 6.0 * n * d, d / n);
        CHECK(rel_diff(via_nd, via_cm) < 1e-12);
    }
}

TEST_CASE("optimal multiplier") {
    CHECK(optimal_multiplier(c4) == doctest::Approx(3.4297817140538852).epsilon(1e-13));
    CHECK(std::abs(optimal_multiplier(c4) / 3.36 - 1.0) < 0.05);
    const double rpj = optimal_multiplier(reference_laws::redpajama_loss());
    CHECK(rpj == doctest::Approx(7.5199332010479929).epsilon(1e-13));
    CHECK(std::abs(rpj / 7.42 - 1.0) < 0.05);
    CHECK(optimal_multiplier({1.0, 5.0, 5.0, 0.2}) == doctest::Approx(1.0));

    // Invariant to rescaling (a, b).
    for (double t : {1e-3, 0.5, 7.0, 1e4}) {
        CHECK(rel_diff(optimal_multiplier({c4.e_irr, t * c4.a, t * c4.b, c4.eta}), optimal_multiplier(c4)) < 1e-12);
    }
    // It really is the argmin over m at several compute budgets.
    const double mstar = optimal_multiplier(c4);
    for (double c : {1e16, 1e20, 1e24}) {
        const double at_star = eval_loss_cm(c4, c, mstar);
        for (double f = 0.5; f < 2.0; f += 0.01) {
            CHECK(eval_loss_cm(c4, c, mstar * f) >= at_star - 1e-14);
        }
    }
}

TEST_CASE("optimal allocation") {
    const auto alloc = optimal_allocation(c4, 6e18);
    CHECK(alloc.n_star == doctest::Approx(5.399664292199170e8).epsilon(1e-12));
    CHECK(alloc.d_star == doctest::Approx(1.851966985141443e9).epsilon(1e-12));
    CHECK(rel_diff(6.0 * alloc.n_star * alloc.d_star, 6e18) < 1e-12);
    CHECK(rel_diff(alloc.d_star / alloc.n_star, optimal_multiplier(c4)) < 1e-10);

    const auto sym = optimal_allocation({1.0, 3.0, 3.0, 0.2}, 6e10);
    CHECK(sym.n_star == doctest::Approx(1e5));
    CHECK(sym.d_star == doctest::Approx(1e5));

    const auto rpj = reference_laws::redpajama_loss();
    const auto ra = optimal_allocation(rpj, 1e21);
    CHECK(rel_diff(ra.d_star / ra.n_star, 7.5199332010479929) < 1e-10);
    CHECK(throws_kind([] { optimal_allocation(c4, -1.0); }, ErrorKind::invalid_argument));
}

TEST_CASE("overtrained risk") {
    const ChinchillaLaw x{1.51, 113.5, 0.242, 152.97, 0.242};
    const double r = overtrained_risk(x, 1e20, 1.0);
    CHECK(std::abs(r - 2.755) < 0.003);
    CHECK(r == doctest::Approx(2.7544783941663809).epsilon(1e-13));
    // m_rel = 1 is the minimum of the risk over m_rel.
    for (double m = 0.3; m < 3.0; m += 0.05) {
        CHECK(overtrained_risk(x, 1e20, m) >= r - 1e-14);
    }
    // For alpha == beta it coincides with the (C, M) form at m * M*.
    const auto cm = chinchilla_to_cm(x);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const double c = std::pow(10.0, 15.0 + 9.0 * u(rng));
        const double m = std::pow(10.0, -1.0 + 3.0 * u(rng));
        CHECK(rel_diff(overtrained_risk(x, c, m), eval_loss_cm(cm, c, m * optimal_multiplier(cm))) < 1e-9);
    }
    // Unequal exponents still give a finite, m-dependent risk.
    const ChinchillaLaw uneq{1.7, 400.0, 0.34, 410.0, 0.28};
    CHECK(overtrained_risk(uneq, 1e21, 4.0) > overtrained_risk(uneq, 1e21, 1.0));
    CHECK(throws_kind([&] { overtrained_risk(x, 1e20, 0.0); }, ErrorKind::invalid_argument));
}

TEST_CASE("chain_predict") {
    CHECK(std::abs(chain_predict(c4, c4_err, 1e20, 20.0) - 0.596) < 0.002);
    CHECK(chain_predict(c4, c4_err, 1e20, 20.0) == doctest::Approx(0.59629320289772693).epsilon(1e-12));
    CHECK(chain_predict(c4, c4_err, 1e300, 20.0) == doctest::Approx(eval_err(c4_err, c4.e_irr)).epsilon(1e-9));
    // The multiplier minimizing loss also minimizes chained error (grid search).
    const double mstar = optimal_multiplier(c4);
    double best_m = 0.0, best = 1e9;
    for (double m = 1.0; m <= 12.0; m += 0.001) {
        const double e = chain_predict(c4, c4_err, 1e20, m);
        if (e < best) {
            best = e;
            best_m = m;
        }
    }
    CHECK(std::abs(best_m - mstar) < 0.002);
}

TEST_CASE("chain_predict is monotone in compute") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        // Ranges keep L moderate; at very large L the exponential term is below an ulp of eps.
        const LossLawCM law{0.5 + 2.0 * u(rng), 10.0 + 400.0 * u(rng), 10.0 + 400.0 * u(rng), 0.1 + 0.25 * u(rng)};
        const ErrLaw err{0.5 + 0.5 * u(rng), 0.5 + 3.0 * u(rng), 0.2 + u(rng)};
        const double m = std::pow(10.0, 2.5 * u(rng));
        const double c1 = std::pow(10.0, 17.0 + 5.0 * u(rng));
        const double c2 = c1 * (1.5 + 10.0 * u(rng));
        CHECK(chain_predict(law, err, c1, m) > chain_predict(law, err, c2, m));
    }
}

TEST_CASE("parallel lines: log(L - E) vs log C has slope -eta for every M") {
    for (const auto& law : {reference_laws::c4_loss(), reference_laws::redpajama_loss()}) {
        for (double m : {5.0, 20.0, 640.0}) {
            // Least-squares line through 9 samples.
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            const int n = 9;
            for (int i = 0; i < n; ++i) {
                const double lc = std::log(std::pow(10.0, 16.0 + i));
                const double ly = std::log(eval_loss_cm(law, std::exp(lc), m) - law.e_irr);
                sx += lc;
                sy += ly;
                sxx += lc * lc;
                sxy += lc * ly;
            }
            const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            CHECK(std::abs(slope + law.eta) < 1e-9);
        }
    }
}

TEST_CASE("gradients match the closed forms") {
    const auto g = loss_cm_gradient(c4, 1e20, 20.0);
    const double h = 1e-7;
    CHECK(g[0] == 1.0);
    CHECK(g[1] == doctest::Approx((eval_loss_cm({c4.e_irr, c4.a + h, c4.b, c4.eta}, 1e20, 20.0) -
                                   eval_loss_cm({c4.e_irr, c4.a - h, c4.b, c4.eta}, 1e20, 20.0)) /
                                  (2 * h))
                     .epsilon(1e-6));
    const auto ge = err_gradient(c4_err, 3.0);
    CHECK(ge[1] == doctest::Approx(-std::exp(-c4_err.gamma * 3.0)));
}

TEST_CASE("law json") {
    for (const AnyLaw& law : {AnyLaw{c4}, AnyLaw{cm_to_chinchilla(c4)}, AnyLaw{PowerLaw{1.5, 300.0, 0.12}},
                              AnyLaw{c4_err}}) {
        const auto j = to_json(law);
        CHECK(j.at("form") == std::string(form_name(law)));
        CHECK(law_from_json(j) == law);
    }
    CHECK(to_json(AnyLaw{c4}).at("params").at("a") == 141.0);
    CHECK(throws_kind([] { law_from_json(nlohmann::json::parse(R"({"form":"broken","params":{}})")); },
                      ErrorKind::parse_error));
    CHECK(throws_kind([] { law_from_json(nlohmann::json::parse(R"({"form":"err","params":{"eps":1.5,"k":1,"gamma":1}})")); },
                      ErrorKind::validation_error));
}
