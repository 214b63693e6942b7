#pragma once

// Damped least squares (Levenberg-Marquardt) with Marquardt diagonal
// scaling, multi-start, and central-difference Jacobians. Bounds are the
// caller's business: fit parameters through exp/logistic transforms.

#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace overscale::lm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct ObjectiveSpec {
    std::function<Vector(const Vector&)> residual_fn;
    /// Optional analytic Jacobian (n_residuals x n_params). When absent the
    /// solver falls back to numeric_jacobian.
    std::function<Matrix(const Vector&)> jacobian_fn;
    int n_params = 0;
    int n_residuals = 0;
};

struct LMOptions {
    int max_iterations = 200;
    double gradient_tolerance = 1e-10; // on max |J^T r|
    double step_tolerance = 1e-12;     // relative parameter change
    double initial_damping = 1e-3;
    double damping_increase = 10.0;
    double damping_decrease = 0.1;

    /// Throws invalid_argument if any invariant is violated.
    void validate() const;
};

enum class Termination { gradient, step, max_iter };

std::string_view to_string(Termination t) noexcept;

struct LMResult {
    Vector params;
    double residual_rms = 0.0;
    int iterations = 0;
    bool converged = false;
    Termination termination = Termination::max_iter;
    /// Sum of squared residuals at the start and after every accepted step.
    std::vector<double> cost_trace;
};

LMResult solve_least_squares(const ObjectiveSpec& obj, const Vector& init, const LMOptions& opts = {});

/// Central differences with step rel_step * max(|x_j|, 1).
Matrix numeric_jacobian(const ObjectiveSpec& obj, const Vector& at, double rel_step = 1e-6);

/// Best converged start by (residual_rms, init index); if none converged,
/// the best of the rest with converged = false. Starts that throw count as
/// failed; if all of them throw, a flagged result at the first init is
/// returned instead of an exception.
LMResult multi_start(const ObjectiveSpec& obj, std::span<const Vector> inits, const LMOptions& opts = {});

} // namespace overscale::lm
