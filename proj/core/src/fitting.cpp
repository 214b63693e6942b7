#include "overscale/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "overscale/errors.hpp"
#include "overscale/stats.hpp"

namespace overscale {

namespace {

double logistic(double u) {
    return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

template <typename T, typename Key>
std::size_t count_distinct(std::span<const T> points, Key key) {
    std::set<double> seen;
    for (const auto& p : points) {
        seen.insert(key(p));
    }
    return seen.size();
}

template <typename T>
std::vector<std::string> ids_of(std::span<const T> points) {
    std::vector<std::string> ids;
    ids.reserve(points.size());
    for (const auto& p : points) {
        ids.push_back(p.id);
    }
    return ids;
}

void require_finite_points(bool ok) {
    if (!ok) {
        fail(ErrorKind::invalid_argument, "fit points must be finite");
    }
}

} // namespace

void FitConfig::validate() const {
    auto grid_ok = [](const std::vector<double>& g) {
        return !g.empty() && std::all_of(g.begin(), g.end(), [](double x) { return std::isfinite(x) && x > 0.0; });
    };
    if (!grid_ok(init_eta_grid) || !grid_ok(init_gamma_grid)) {
        fail(ErrorKind::invalid_argument, "initialization grids must be nonempty with positive entries");
    }
    lm_options.validate();
}

double round_significant(double x, int digits) {
    if (x == 0.0 || !std::isfinite(x)) {
        return x;
    }
    const int magnitude = static_cast<int>(std::floor(std::log10(std::abs(x))));
    const double scale = std::pow(10.0, digits - 1 - magnitude);
    return std::round(x * scale) / scale;
}

namespace objectives {

lm::Vector to_internal(const LossLawCM& law) {
    lm::Vector q(4);
    q << std::log(law.e_irr), std::log(law.a), std::log(law.b), std::log(law.eta);
    return q;
}

lm::Vector to_internal(const PowerLaw& law) {
    lm::Vector q(3);
    q << std::log(law.e_irr), std::log(law.lambda), std::log(law.eta);
    return q;
}

lm::Vector to_internal(const ErrLaw& law) {
    lm::Vector q(3);
    q << logit(law.eps), std::log(law.k), std::log(law.gamma);
    return q;
}

LossLawCM loss_cm_from_internal(const lm::Vector& q) {
    return {std::exp(q[0]), std::exp(q[1]), std::exp(q[2]), std::exp(q[3])};
}

PowerLaw power_law_from_internal(const lm::Vector& q) {
    return {std::exp(q[0]), std::exp(q[1]), std::exp(q[2])};
}

ErrLaw err_from_internal(const lm::Vector& q) {
    return {logistic(q[0]), std::exp(q[1]), std::exp(q[2])};
}

// The residual closures own copies of the points so objectives outlive the
// caller's span.

lm::ObjectiveSpec loss_cm(std::span<const LossPoint> points) {
    std::vector<LossPoint> pts(points.begin(), points.end());
    lm::ObjectiveSpec obj;
    obj.n_params = 4;
    obj.n_residuals = static_cast<int>(pts.size());
    obj.residual_fn = [pts](const lm::Vector& q) {
        const auto law = loss_cm_from_internal(q);
        lm::Vector r(static_cast<Eigen::Index>(pts.size()));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            r[static_cast<Eigen::Index>(i)] = eval_loss_cm(law, pts[i].c, pts[i].m) - pts[i].loss;
        }
        return r;
    };
    obj.jacobian_fn = [pts](const lm::Vector& q) {
        const auto law = loss_cm_from_internal(q);
        const std::array<double, 4> chain{law.e_irr, law.a, law.b, law.eta};
        lm::Matrix jac(static_cast<Eigen::Index>(pts.size()), 4);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto g = loss_cm_gradient(law, pts[i].c, pts[i].m);
            for (int j = 0; j < 4; ++j) {
                jac(static_cast<Eigen::Index>(i), j) = g[static_cast<std::size_t>(j)] * chain[static_cast<std::size_t>(j)];
            }
        }
        return jac;
    };
    return obj;
}

lm::ObjectiveSpec power_law(std::span<const PowerPoint> points) {
    std::vector<PowerPoint> pts(points.begin(), points.end());
    lm::ObjectiveSpec obj;
    obj.n_params = 3;
    obj.n_residuals = static_cast<int>(pts.size());
    obj.residual_fn = [pts](const lm::Vector& q) {
        const auto law = power_law_from_internal(q);
        lm::Vector r(static_cast<Eigen::Index>(pts.size()));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            r[static_cast<Eigen::Index>(i)] = eval_power_law(law, pts[i].c) - pts[i].loss;
        }
        return r;
    };
    obj.jacobian_fn = [pts](const lm::Vector& q) {
        const auto law = power_law_from_internal(q);
        const std::array<double, 3> chain{law.e_irr, law.lambda, law.eta};
        lm::Matrix jac(static_cast<Eigen::Index>(pts.size()), 3);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto g = power_law_gradient(law, pts[i].c);
            for (int j = 0; j < 3; ++j) {
                jac(static_cast<Eigen::Index>(i), j) = g[static_cast<std::size_t>(j)] * chain[static_cast<std::size_t>(j)];
            }
        }
        return jac;
    };
    return obj;
}

lm::ObjectiveSpec err(std::span<const ErrPoint> points) {
    std::vector<ErrPoint> pts(points.begin(), points.end());
    lm::ObjectiveSpec obj;
    obj.n_params = 3;
    obj.n_residuals = static_cast<int>(pts.size());
    obj.residual_fn = [pts](const lm::Vector& q) {
        const auto law = err_from_internal(q);
        lm::Vector r(static_cast<Eigen::Index>(pts.size()));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            r[static_cast<Eigen::Index>(i)] = eval_err(law, pts[i].loss) - pts[i].err;
        }
        return r;
    };
    obj.jacobian_fn = [pts](const lm::Vector& q) {
        const auto law = err_from_internal(q);
        const std::array<double, 3> chain{law.eps * (1.0 - law.eps), law.k, law.gamma};
        lm::Matrix jac(static_cast<Eigen::Index>(pts.size()), 3);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto g = err_gradient(law, pts[i].loss);
            for (int j = 0; j < 3; ++j) {
                jac(static_cast<Eigen::Index>(i), j) = g[static_cast<std::size_t>(j)] * chain[static_cast<std::size_t>(j)];
            }
        }
        return jac;
    };
    return obj;
}

} // namespace objectives

FitReport fit_loss_cm(std::span<const LossPoint> points, const FitConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(points.size()) < cfg.min_points_loss) {
        std::ostringstream os;
        os << "cm fit needs at least " << cfg.min_points_loss << " points, got " << points.size();
        fail(ErrorKind::insufficient_data, os.str());
    }
    for (const auto& p : points) {
        require_finite_points(std::isfinite(p.c) && std::isfinite(p.m) && std::isfinite(p.loss) && p.c > 0.0 &&
                              p.m > 0.0);
    }
    if (count_distinct(points, [](const LossPoint& p) { return p.c; }) < 2 ||
        count_distinct(points, [](const LossPoint& p) { return p.m; }) < 2) {
        fail(ErrorKind::unidentifiable_bracket, "cm fit needs at least two distinct compute and multiplier values");
    }
    // With N (or D) fixed, one bracket term is constant and merges into E.
    auto shapes_distinct = [&](auto pick) {
        std::set<double> seen;
        for (const auto& p : points) {
            seen.insert(round_significant(pick(shape_from_geometry(p.c, p.m)), 9));
        }
        return seen.size();
    };
    if (shapes_distinct([](const ModelShape& s) { return s.params_n; }) < 2 ||
        shapes_distinct([](const ModelShape& s) { return s.tokens_d; }) < 2) {
        fail(ErrorKind::unidentifiable_bracket,
             "cm fit needs at least two distinct model sizes and token counts; a single N or D confounds E");
    }

    const auto min_loss = std::min_element(points.begin(), points.end(),
                                           [](const auto& x, const auto& y) { return x.loss < y.loss; })->loss;
    const auto& top = *std::max_element(points.begin(), points.end(),
                                        [](const auto& x, const auto& y) { return x.c < y.c; });
    const double e0 = std::max(0.9 * min_loss, 1e-6);
    const double gap = std::max(top.loss - e0, 1e-6);

    std::vector<lm::Vector> inits;
    for (double eta0 : cfg.init_eta_grid) {
        const double bracket = std::pow(top.m, eta0) + std::pow(top.m, -eta0);
        const double amp = gap * std::exp(eta0 * std::log(top.c)) / bracket;
        inits.push_back(objectives::to_internal(LossLawCM{e0, amp, amp, eta0}));
    }
    const auto obj = objectives::loss_cm(points);
    const auto res = lm::multi_start(obj, inits, cfg.lm_options);
    return {objectives::loss_cm_from_internal(res.params), res.residual_rms, static_cast<int>(points.size()),
            ids_of(points), res.converged, std::nullopt};
}

FitReport fit_err(std::span<const ErrPoint> points, const FitConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(points.size()) < cfg.min_points_err) {
        std::ostringstream os;
        os << "error fit needs at least " << cfg.min_points_err << " points, got " << points.size();
        fail(ErrorKind::insufficient_data, os.str());
    }
    for (const auto& p : points) {
        require_finite_points(std::isfinite(p.loss) && std::isfinite(p.err));
    }
    const auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                              [](const auto& x, const auto& y) { return x.err < y.err; });
    if (lo->err == hi->err) {
        fail(ErrorKind::degenerate_data, "all error values are identical");
    }
    if (count_distinct(points, [](const ErrPoint& p) { return p.loss; }) < 3) {
        fail(ErrorKind::degenerate_data, "error fit needs at least three distinct loss values");
    }

    // eps must stay strictly inside (0, 1) for the logistic transform.
    const double eps0 = std::clamp(hi->err + 0.01, 1e-6, 1.0 - 1e-6);
    const auto& best = *std::min_element(points.begin(), points.end(),
                                         [](const auto& x, const auto& y) { return x.loss < y.loss; });
    const double spread = std::max(eps0 - best.err, 1e-6);

    std::vector<lm::Vector> inits;
    for (double gamma0 : cfg.init_gamma_grid) {
        const double k0 = spread * std::exp(gamma0 * best.loss);
        inits.push_back(objectives::to_internal(ErrLaw{eps0, k0, gamma0}));
    }
    const auto obj = objectives::err(points);
    const auto res = lm::multi_start(obj, inits, cfg.lm_options);
    return {objectives::err_from_internal(res.params), res.residual_rms, static_cast<int>(points.size()),
            ids_of(points), res.converged, std::nullopt};
}

FitReport fit_power_law(std::span<const PowerPoint> points, const FitConfig& cfg) {
    cfg.validate();
    for (const auto& p : points) {
        require_finite_points(std::isfinite(p.c) && std::isfinite(p.loss) && p.c > 0.0);
    }
    if (count_distinct(points, [](const PowerPoint& p) { return p.c; }) < 4) {
        fail(ErrorKind::insufficient_data, "power-law fit needs at least 4 distinct compute values");
    }
    const auto min_loss = std::min_element(points.begin(), points.end(),
                                           [](const auto& x, const auto& y) { return x.loss < y.loss; })->loss;
    const auto& top = *std::max_element(points.begin(), points.end(),
                                        [](const auto& x, const auto& y) { return x.c < y.c; });
    const double e0 = std::max(0.9 * min_loss, 1e-6);
    const double gap = std::max(top.loss - e0, 1e-6);

    std::vector<lm::Vector> inits;
    for (double eta0 : cfg.init_eta_grid) {
        inits.push_back(objectives::to_internal(PowerLaw{e0, gap * std::exp(eta0 * std::log(top.c)), eta0}));
    }
    const auto obj = objectives::power_law(points);
    const auto res = lm::multi_start(obj, inits, cfg.lm_options);
    return {objectives::power_law_from_internal(res.params), res.residual_rms, static_cast<int>(points.size()),
            ids_of(points), res.converged, std::nullopt};
}

SlopeAnalysis slope_by_multiplier(std::span<const RunRecord> runs, const std::string& eval_set,
                                  const FitConfig& cfg, const std::optional<SlopeBootstrap>& bootstrap) {
    std::map<double, std::vector<PowerPoint>> groups;
    for (const auto& run : runs) {
        const auto g = run.geometry();
        groups[round_significant(g.multiplier_m, 6)].push_back({g.compute_c, run.loss(eval_set), run.id});
    }

    SlopeAnalysis out;
    for (const auto& [m, pts] : groups) {
        std::ostringstream label;
        label << "multiplier " << m;
        if (pts.size() < 4) {
            out.warnings.push_back(label.str() + ": skipped, only " + std::to_string(pts.size()) + " runs");
            continue;
        }
        FitReport fit;
        try {
            fit = fit_power_law(pts, cfg);
        } catch (const Error& e) {
            out.warnings.push_back(label.str() + ": skipped, " + e.what());
            continue;
        }
        SlopeEntry entry{std::get<PowerLaw>(fit.law).eta, pts.size(), fit.converged, std::nullopt};
        if (bootstrap) {
            try {
                const auto rep = bootstrap_fit(std::span<const PowerPoint>(pts), cfg,
                                               BootstrapOptions{bootstrap->n_resamples, bootstrap->level,
                                                                bootstrap->seed, 0.2});
                entry.ci = rep.per_param_intervals.at("eta");
            } catch (const Error& e) {
                out.warnings.push_back(label.str() + ": no interval, " + e.what());
            }
        }
        out.by_multiplier.emplace(m, entry);
    }
    return out;
}

std::vector<std::pair<std::string, double>> named_params(const AnyLaw& law) {
    std::vector<std::pair<std::string, double>> out;
    const auto params = to_json(law).at("params");
    // Keep field order as declared rather than the JSON object's sorted keys.
    if (std::holds_alternative<LossLawCM>(law)) {
        for (const char* k : {"e_irr", "a", "b", "eta"}) out.emplace_back(k, params.at(k).get<double>());
    } else if (std::holds_alternative<ChinchillaLaw>(law)) {
        for (const char* k : {"e_irr", "big_a", "alpha", "big_b", "beta"}) out.emplace_back(k, params.at(k).get<double>());
    } else if (std::holds_alternative<PowerLaw>(law)) {
        for (const char* k : {"e_irr", "lambda", "eta"}) out.emplace_back(k, params.at(k).get<double>());
    } else {
        for (const char* k : {"eps", "k", "gamma"}) out.emplace_back(k, params.at(k).get<double>());
    }
    return out;
}

nlohmann::json to_json(const FitReport& report) {
    auto j = to_json(report.law);
    j["residual_rms"] = report.residual_rms;
    j["n_points"] = report.n_points;
    j["point_ids"] = report.point_ids;
    j["converged"] = report.converged;
    if (report.ci) {
        nlohmann::json params = nlohmann::json::object();
        for (const auto& [name, iv] : report.ci->params) {
            params[name] = {iv.lo, iv.hi};
        }
        j["ci"] = {{"level", report.ci->level},
                   {"n_resamples", report.ci->n_resamples},
                   {"seed", report.ci->seed},
                   {"params", params}};
    } else {
        j["ci"] = nullptr;
    }
    return j;
}

FitReport fit_report_from_json(const nlohmann::json& j) {
    FitReport report;
    report.law = law_from_json(j);
    try {
        report.residual_rms = j.value("residual_rms", 0.0);
        report.n_points = j.value("n_points", 0);
        report.point_ids = j.value("point_ids", std::vector<std::string>{});
        report.converged = j.value("converged", true);
        if (j.contains("ci") && j.at("ci").is_object()) {
            const auto& cj = j.at("ci");
            ParamIntervals ci;
            ci.level = cj.value("level", 0.95);
            ci.n_resamples = cj.value("n_resamples", 0);
            ci.seed = cj.value("seed", std::uint64_t{0});
            for (const auto& [name, iv] : cj.at("params").items()) {
                ci.params[name] = {iv.at(0).get<double>(), iv.at(1).get<double>()};
            }
            report.ci = std::move(ci);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse_error, std::string("malformed fit report: ") + e.what());
    }
    return report;
}

} // namespace overscale
