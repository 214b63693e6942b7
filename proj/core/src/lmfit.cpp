#include "overscale/lmfit.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "overscale/errors.hpp"

namespace overscale::lm {

namespace {

constexpr double kMaxDamping = 1e32;

bool all_finite(const Vector& v) { return v.allFinite(); }

Vector evaluate(const ObjectiveSpec& obj, const Vector& x) {
    Vector r = obj.residual_fn(x);
    if (r.size() != obj.n_residuals) {
        std::ostringstream os;
        os << "residual_fn returned " << r.size() << " residuals, expected " << obj.n_residuals;
        fail(ErrorKind::invalid_argument, os.str());
    }
    return r;
}

Matrix jacobian(const ObjectiveSpec& obj, const Vector& x) {
    if (obj.jacobian_fn) {
        Matrix jac = obj.jacobian_fn(x);
        if (jac.rows() != obj.n_residuals || jac.cols() != obj.n_params) {
            fail(ErrorKind::invalid_argument, "jacobian_fn returned a matrix of the wrong shape");
        }
        return jac;
    }
    return numeric_jacobian(obj, x);
}

double rms(double cost, int n) { return std::sqrt(cost / static_cast<double>(n)); }

bool step_is_small(const Vector& step, const Vector& x, double tol) {
    return step.norm() <= tol * (x.norm() + tol);
}

} // namespace

void LMOptions::validate() const {
    if (max_iterations < 1) {
        fail(ErrorKind::invalid_argument, "max_iterations must be positive");
    }
    if (!(gradient_tolerance > 0.0) || !(step_tolerance > 0.0) || !(initial_damping > 0.0)) {
        fail(ErrorKind::invalid_argument, "tolerances and initial damping must be positive");
    }
    if (!(damping_increase > 1.0) || !(damping_decrease > 0.0 && damping_decrease < 1.0)) {
        fail(ErrorKind::invalid_argument, "damping factors must satisfy increase > 1 > decrease > 0");
    }
}

std::string_view to_string(Termination t) noexcept {
    switch (t) {
    case Termination::gradient: return "gradient";
    case Termination::step: return "step";
    case Termination::max_iter: return "max_iter";
    }
    return "unknown";
}

LMResult solve_least_squares(const ObjectiveSpec& obj, const Vector& init, const LMOptions& opts) {
    opts.validate();
    if (obj.n_params < 1 || obj.n_residuals < obj.n_params) {
        fail(ErrorKind::invalid_argument, "objective needs n_params >= 1 and n_residuals >= n_params");
    }
    if (init.size() != obj.n_params) {
        fail(ErrorKind::invalid_argument, "initial parameter vector has the wrong length");
    }
    if (!all_finite(init)) {
        fail(ErrorKind::invalid_start, "initial parameters are not finite");
    }

    Vector x = init;
    Vector r = evaluate(obj, x);
    if (!all_finite(r)) {
        fail(ErrorKind::invalid_start, "residuals are not finite at the initial point");
    }

    LMResult result;
    double cost = r.squaredNorm();
    result.cost_trace.push_back(cost);

    Matrix jac = jacobian(obj, x);
    Vector grad = jac.transpose() * r;
    double damping = opts.initial_damping;

    auto finish = [&](bool converged, Termination why, int iterations) {
        result.params = x;
        result.residual_rms = rms(cost, obj.n_residuals);
        result.iterations = iterations;
        result.converged = converged;
        result.termination = why;
        return result;
    };

    if (!all_finite(grad)) {
        fail(ErrorKind::numerical_failure, "Jacobian is not finite at the initial point");
    }
    if (grad.lpNorm<Eigen::Infinity>() <= opts.gradient_tolerance) {
        return finish(true, Termination::gradient, 0);
    }

    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        const Matrix normal = jac.transpose() * jac;
        Vector scale = normal.diagonal();
        const double max_diag = scale.maxCoeff();
        for (Eigen::Index i = 0; i < scale.size(); ++i) {
            // Parameters the residuals do not see still get unit damping.
            if (!(scale[i] > 1e-300)) {
                scale[i] = max_diag > 0.0 ? max_diag : 1.0;
            }
        }

        bool accepted = false;
        bool any_solvable = false;
        while (damping <= kMaxDamping) {
            Matrix damped = normal;
            damped.diagonal() += damping * scale;
            Eigen::LDLT<Matrix> ldlt(damped);
            Vector step;
            if (ldlt.info() == Eigen::Success) {
                step = ldlt.solve(-grad);
            }
            if (step.size() != x.size() || !all_finite(step)) {
                damping *= opts.damping_increase;
                continue;
            }
            any_solvable = true;

            const Vector candidate = x + step;
            const Vector r_new = evaluate(obj, candidate);
            const double cost_new = all_finite(r_new) ? r_new.squaredNorm()
                                                      : std::numeric_limits<double>::infinity();
            if (cost_new < cost) {
                const bool small = step_is_small(step, x, opts.step_tolerance);
                x = candidate;
                r = r_new;
                cost = cost_new;
                result.cost_trace.push_back(cost);
                damping = std::max(damping * opts.damping_decrease, 1e-300);
                accepted = true;
                if (small) {
                    return finish(true, Termination::step, iter);
                }
                break;
            }
            if (step_is_small(step, x, opts.step_tolerance)) {
                return finish(true, Termination::step, iter);
            }
            damping *= opts.damping_increase;
        }

        if (!accepted) {
            if (!any_solvable) {
                fail(ErrorKind::numerical_failure, "normal equations are singular at every damping level");
            }
            return finish(true, Termination::step, iter);
        }

        jac = jacobian(obj, x);
        grad = jac.transpose() * r;
        if (!all_finite(grad)) {
            fail(ErrorKind::numerical_failure, "Jacobian became non-finite");
        }
        if (grad.lpNorm<Eigen::Infinity>() <= opts.gradient_tolerance) {
            return finish(true, Termination::gradient, iter);
        }
    }
    return finish(false, Termination::max_iter, opts.max_iterations);
}

Matrix numeric_jacobian(const ObjectiveSpec& obj, const Vector& at, double rel_step) {
    if (!(rel_step > 0.0)) {
        fail(ErrorKind::invalid_argument, "rel_step must be positive");
    }
    if (at.size() != obj.n_params) {
        fail(ErrorKind::invalid_argument, "evaluation point has the wrong length");
    }
    const Vector center = evaluate(obj, at);
    if (!all_finite(center)) {
        fail(ErrorKind::numerical_failure, "residuals are not finite at the evaluation point");
    }
    Matrix jac(obj.n_residuals, obj.n_params);
    Vector probe = at;
    for (int j = 0; j < obj.n_params; ++j) {
        const double h = rel_step * std::max(std::abs(at[j]), 1.0);
        probe[j] = at[j] + h;
        const Vector plus = evaluate(obj, probe);
        probe[j] = at[j] - h;
        const Vector minus = evaluate(obj, probe);
        probe[j] = at[j];
        if (!all_finite(plus) || !all_finite(minus)) {
            fail(ErrorKind::numerical_failure, "residuals are not finite within the difference stencil");
        }
        jac.col(j) = (plus - minus) / (2.0 * h);
    }
    return jac;
}

LMResult multi_start(const ObjectiveSpec& obj, std::span<const Vector> inits, const LMOptions& opts) {
    if (inits.empty()) {
        fail(ErrorKind::invalid_argument, "multi_start needs at least one initial point");
    }
    std::optional<LMResult> best_converged;
    std::optional<LMResult> best_other;
    // Strict < keeps the earliest index on ties.
    auto better = [](const std::optional<LMResult>& current, const LMResult& cand) {
        return !current || cand.residual_rms < current->residual_rms;
    };
    for (const auto& init : inits) {
        LMResult res;
        try {
            res = solve_least_squares(obj, init, opts);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::invalid_argument) {
                throw;
            }
            continue;
        }
        if (res.converged) {
            if (better(best_converged, res)) {
                best_converged = std::move(res);
            }
        } else if (better(best_other, res)) {
            best_other = std::move(res);
        }
    }
    if (best_converged) {
        return *best_converged;
    }
    if (best_other) {
        return *best_other;
    }
    LMResult flagged;
    flagged.params = inits.front();
    flagged.residual_rms = std::numeric_limits<double>::infinity();
    flagged.converged = false;
    flagged.termination = Termination::max_iter;
    return flagged;
}

} // namespace overscale::lm
