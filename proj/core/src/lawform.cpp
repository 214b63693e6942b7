#include "overscale/lawform.hpp"

#include <cmath>
#include <sstream>

#include "overscale/errors.hpp"

namespace overscale {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

void require(bool ok, const char* what) {
    if (!ok) {
        fail(ErrorKind::invalid_argument, what);
    }
}

void require_positive(double x, const char* what) {
    if (!positive_finite(x)) {
        std::ostringstream os;
        os << what << " must be positive and finite (got " << x << ")";
        fail(ErrorKind::invalid_argument, os.str());
    }
}

// a m^eta + b m^-eta at compute c, in log space.
double reducible_cm(const LossLawCM& law, double c, double m) {
    const double log_c = std::log(c);
    const double log_m = std::log(m);
    return std::exp(std::log(law.a) + law.eta * (log_m - log_c)) +
           std::exp(std::log(law.b) - law.eta * (log_m + log_c));
}

} // namespace

void validate(const PowerLaw& law) {
    require(std::isfinite(law.e_irr) && law.e_irr >= 0.0, "power law: e_irr must be finite and >= 0");
    require(std::isfinite(law.lambda) && law.lambda >= 0.0, "power law: lambda must be finite and >= 0");
    require_positive(law.eta, "power law: eta");
}

void validate(const LossLawCM& law) {
    require(std::isfinite(law.e_irr) && law.e_irr >= 0.0, "cm law: e_irr must be finite and >= 0");
    require_positive(law.a, "cm law: a");
    require_positive(law.b, "cm law: b");
    require_positive(law.eta, "cm law: eta");
}

void validate(const ChinchillaLaw& law) {
    require(std::isfinite(law.e_irr) && law.e_irr >= 0.0, "chinchilla law: e_irr must be finite and >= 0");
    require(std::isfinite(law.big_a) && law.big_a >= 0.0, "chinchilla law: big_a must be finite and >= 0");
    require(std::isfinite(law.big_b) && law.big_b >= 0.0, "chinchilla law: big_b must be finite and >= 0");
    require(law.big_a > 0.0 || law.big_b > 0.0, "chinchilla law: big_a and big_b cannot both be zero");
    require_positive(law.alpha, "chinchilla law: alpha");
    require_positive(law.beta, "chinchilla law: beta");
}

void validate(const ErrLaw& law) {
    require(std::isfinite(law.eps) && law.eps > 0.0 && law.eps <= 1.0, "err law: eps must lie in (0, 1]");
    require(std::isfinite(law.k) && law.k >= 0.0, "err law: k must be finite and >= 0");
    require_positive(law.gamma, "err law: gamma");
}

double eval_loss_cm(const LossLawCM& law, double c, double m) {
    require_positive(c, "compute c");
    require_positive(m, "multiplier m");
    return law.e_irr + reducible_cm(law, c, m);
}

double eval_loss_nd(const ChinchillaLaw& law, double n, double d) {
    require_positive(n, "params n");
    require_positive(d, "tokens d");
    double value = law.e_irr;
    if (law.big_a > 0.0) {
        value += std::exp(std::log(law.big_a) - law.alpha * std::log(n));
    }
    if (law.big_b > 0.0) {
        value += std::exp(std::log(law.big_b) - law.beta * std::log(d));
    }
    return value;
}

double eval_power_law(const PowerLaw& law, double c) {
    require_positive(c, "compute c");
    if (law.lambda == 0.0) {
        return law.e_irr;
    }
    return law.e_irr + std::exp(std::log(law.lambda) - law.eta * std::log(c));
}

double eval_err(const ErrLaw& law, double loss) {
    require(std::isfinite(loss), "loss must be finite");
    return law.eps - law.k * std::exp(-law.gamma * loss);
}

double eval_err_pp(const ErrLaw& law, double pp) {
    require_positive(pp, "perplexity");
    return law.eps - law.k * std::pow(pp, -law.gamma);
}

LossLawCM chinchilla_to_cm(const ChinchillaLaw& law) {
    validate(law);
    if (std::abs(law.alpha - law.beta) > 1e-9 * std::max(std::abs(law.alpha), std::abs(law.beta))) {
        fail(ErrorKind::unsupported_conversion,
             "alpha != beta has no (C, M) form with a single exponent; use overtrained_risk instead");
    }
    const double eta = law.alpha / 2.0;
    const double scale = std::pow(6.0, eta);
    return {law.e_irr, law.big_a * scale, law.big_b * scale, eta};
}

ChinchillaLaw cm_to_chinchilla(const LossLawCM& law) {
    validate(law);
    const double scale = std::pow(6.0, -law.eta);
    return {law.e_irr, law.a * scale, 2.0 * law.eta, law.b * scale, 2.0 * law.eta};
}

double optimal_multiplier(const LossLawCM& law) {
    validate(law);
    return std::exp((std::log(law.b) - std::log(law.a)) / (2.0 * law.eta));
}

Allocation optimal_allocation(const LossLawCM& law, double c) {
    validate(law);
    require_positive(c, "compute c");
    const double log_g = (std::log(law.a) - std::log(law.b)) / (4.0 * law.eta);
    const double log_root = 0.5 * std::log(c / 6.0);
    return {std::exp(log_g + log_root), std::exp(log_root - log_g)};
}

double overtrained_risk(const ChinchillaLaw& law, double c, double m_rel) {
    validate(law);
    require_positive(c, "compute c");
    require_positive(m_rel, "m_rel");
    const double sum = law.alpha + law.beta;
    const double log_ratio = std::log(law.alpha * law.big_a) - std::log(law.beta * law.big_b);
    const double log_m = std::log(m_rel);
    const double log_c6 = std::log(c / 6.0);
    const double c_exp = -law.alpha * law.beta / sum;
    const double n_term = std::exp(std::log(law.big_a) + 0.5 * law.alpha * log_m -
                                   law.alpha / sum * log_ratio + c_exp * log_c6);
    const double d_term = std::exp(std::log(law.big_b) - 0.5 * law.beta * log_m +
                                   law.beta / sum * log_ratio + c_exp * log_c6);
    return law.e_irr + n_term + d_term;
}

double chain_predict(const LossLawCM& loss_law, const ErrLaw& err_law, double c, double m) {
    return eval_err(err_law, eval_loss_cm(loss_law, c, m));
}

std::array<double, 4> loss_cm_gradient(const LossLawCM& law, double c, double m) {
    require_positive(c, "compute c");
    require_positive(m, "multiplier m");
    const double log_c = std::log(c);
    const double log_m = std::log(m);
    const double up = std::exp(law.eta * (log_m - log_c));    // M^eta C^-eta
    const double down = std::exp(-law.eta * (log_m + log_c)); // M^-eta C^-eta
    const double d_eta = log_m * (law.a * up - law.b * down) - log_c * (law.a * up + law.b * down);
    return {1.0, up, down, d_eta};
}

std::array<double, 3> power_law_gradient(const PowerLaw& law, double c) {
    require_positive(c, "compute c");
    const double log_c = std::log(c);
    const double base = std::exp(-law.eta * log_c);
    return {1.0, base, -law.lambda * log_c * base};
}

std::array<double, 3> err_gradient(const ErrLaw& law, double loss) {
    const double decay = std::exp(-law.gamma * loss);
    return {1.0, -decay, law.k * loss * decay};
}

std::string_view form_name(const AnyLaw& law) noexcept {
    struct Visitor {
        std::string_view operator()(const LossLawCM&) const { return "cm"; }
        std::string_view operator()(const ChinchillaLaw&) const { return "chinchilla"; }
        std::string_view operator()(const PowerLaw&) const { return "power"; }
        std::string_view operator()(const ErrLaw&) const { return "err"; }
    };
    return std::visit(Visitor{}, law);
}

nlohmann::json to_json(const AnyLaw& law) {
    nlohmann::json params;
    if (const auto* p = std::get_if<LossLawCM>(&law)) {
        params = {{"e_irr", p->e_irr}, {"a", p->a}, {"b", p->b}, {"eta", p->eta}};
    } else if (const auto* p = std::get_if<ChinchillaLaw>(&law)) {
        params = {{"e_irr", p->e_irr}, {"big_a", p->big_a}, {"alpha", p->alpha},
                  {"big_b", p->big_b}, {"beta", p->beta}};
    } else if (const auto* p = std::get_if<PowerLaw>(&law)) {
        params = {{"e_irr", p->e_irr}, {"lambda", p->lambda}, {"eta", p->eta}};
    } else if (const auto* p = std::get_if<ErrLaw>(&law)) {
        params = {{"eps", p->eps}, {"k", p->k}, {"gamma", p->gamma}};
    }
    return {{"form", std::string(form_name(law))}, {"params", params}};
}

AnyLaw law_from_json(const nlohmann::json& j) {
    try {
        const auto form = j.at("form").get<std::string>();
        const auto& p = j.at("params");
        auto get = [&](const char* key) { return p.at(key).get<double>(); };
        if (form == "cm") {
            LossLawCM law{get("e_irr"), get("a"), get("b"), get("eta")};
            validate(law);
            return law;
        }
        if (form == "chinchilla") {
            ChinchillaLaw law{get("e_irr"), get("big_a"), get("alpha"), get("big_b"), get("beta")};
            validate(law);
            return law;
        }
        if (form == "power") {
            PowerLaw law{get("e_irr"), get("lambda"), get("eta")};
            validate(law);
            return law;
        }
        if (form == "err") {
            ErrLaw law{get("eps"), get("k"), get("gamma")};
            validate(law);
            return law;
        }
        fail(ErrorKind::parse_error, "unknown law form '" + form + "'");
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse_error, std::string("malformed law JSON: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::invalid_argument) {
            fail(ErrorKind::validation_error, e.what());
        }
        throw;
    }
}

namespace reference_laws {
LossLawCM c4_loss() { return {1.51, 141.0, 190.0, 0.121}; }
LossLawCM redpajama_loss() { return {1.84, 212.0, 367.0, 0.136}; }
LossLawCM refinedweb_loss() { return {1.73, 157.0, 246.0, 0.127}; }
ErrLaw c4_err() { return {0.850, 2.08, 0.756}; }
ErrLaw redpajama_err() { return {0.857, 2.21, 0.715}; }
ErrLaw refinedweb_err() { return {0.865, 2.21, 0.707}; }
} // namespace reference_laws

} // namespace overscale
