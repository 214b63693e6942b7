#pragma once

// Closed-form scaling laws: evaluation, parameter-form conversion,
// compute-optimal allocation, and the chained compute -> error predictor.
//
// Loss laws are evaluated in log space (exp(log a + eta*log m - eta*log c))
// so compute budgets around 1e22 FLOPs never overflow an intermediate.

#include <array>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

namespace overscale {

/// L(C) = E + lambda * C^-eta
struct PowerLaw {
    double e_irr = 0.0;
    double lambda = 1.0;
    double eta = 1.0;

    bool operator==(const PowerLaw&) const = default;
};

/// L(C, M) = E + (a M^eta + b M^-eta) C^-eta
struct LossLawCM {
    double e_irr = 0.0;
    double a = 1.0;
    double b = 1.0;
    double eta = 1.0;

    bool operator==(const LossLawCM&) const = default;
};

/// L(N, D) = E + A N^-alpha + B D^-beta
struct ChinchillaLaw {
    double e_irr = 0.0;
    double big_a = 1.0;
    double alpha = 1.0;
    double big_b = 1.0;
    double beta = 1.0;

    bool operator==(const ChinchillaLaw&) const = default;
};

/// Err(L) = eps - k exp(-gamma L), average top-1 error as a function of loss.
struct ErrLaw {
    double eps = 1.0;
    double k = 1.0;
    double gamma = 1.0;

    bool operator==(const ErrLaw&) const = default;
};

using AnyLaw = std::variant<LossLawCM, ChinchillaLaw, PowerLaw, ErrLaw>;

struct Allocation {
    double n_star = 0.0;
    double d_star = 0.0;
};

// Parameter checks. Each throws invalid_argument describing the bad field.
void validate(const PowerLaw& law);
void validate(const LossLawCM& law);
void validate(const ChinchillaLaw& law);
void validate(const ErrLaw& law);

double eval_loss_cm(const LossLawCM& law, double c, double m);
double eval_loss_nd(const ChinchillaLaw& law, double n, double d);
double eval_power_law(const PowerLaw& law, double c);
double eval_err(const ErrLaw& law, double loss);
double eval_err_pp(const ErrLaw& law, double pp);

/// Requires alpha == beta (relative 1e-9); otherwise unsupported_conversion.
LossLawCM chinchilla_to_cm(const ChinchillaLaw& law);
ChinchillaLaw cm_to_chinchilla(const LossLawCM& law);

/// M* = (b/a)^(1/(2 eta)), the loss-minimizing multiplier at any compute.
double optimal_multiplier(const LossLawCM& law);

/// N* = G (c/6)^(1/2), D* = (c/6)^(1/2) / G with G = (a/b)^(1/(4 eta)).
Allocation optimal_allocation(const LossLawCM& law, double c);

/// Risk of a model trained at m_rel times the compute-optimal multiplier for
/// a general (alpha != beta allowed) Chinchilla law. The compute factor is
/// (c/6)^(-alpha beta / (alpha + beta)), which makes the alpha == beta case
/// coincide with eval_loss_cm(chinchilla_to_cm(law), c, m_rel * M*).
double overtrained_risk(const ChinchillaLaw& law, double c, double m_rel);

/// Err(L(c, m)).
double chain_predict(const LossLawCM& loss_law, const ErrLaw& err_law, double c, double m);

/// Analytic partial derivatives in natural parameters.
/// Order: (E, a, b, eta).
std::array<double, 4> loss_cm_gradient(const LossLawCM& law, double c, double m);
/// Order: (E, lambda, eta).
std::array<double, 3> power_law_gradient(const PowerLaw& law, double c);
/// Order: (eps, k, gamma).
std::array<double, 3> err_gradient(const ErrLaw& law, double loss);

std::string_view form_name(const AnyLaw& law) noexcept;

/// {"form": "cm"|"chinchilla"|"power"|"err", "params": {...}}
nlohmann::json to_json(const AnyLaw& law);
AnyLaw law_from_json(const nlohmann::json& j);

/// Fitted coefficients reported for the three reference corpora (loss on the
/// C4 validation set, and average top-1 error on the 17-task split).
namespace reference_laws {
LossLawCM c4_loss();
LossLawCM redpajama_loss();
LossLawCM refinedweb_loss();
ErrLaw c4_err();
ErrLaw redpajama_err();
ErrLaw refinedweb_err();
} // namespace reference_laws

} // namespace overscale
