#pragma once

// Bounded Levenberg-Marquardt least squares.
//
// The problem is posed in the caller's parameter coordinates, which should be
// scaled so that every parameter is O(1); the step-size stopping rule is an
// absolute/relative test on the plain Euclidean norm of the step.

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace qloss::lm {

// Fills `residuals` (always) and `jacobian` (when non-null, rows = residuals,
// cols = parameters) at `params`.
using Model = std::function<void(const Eigen::VectorXd& params, Eigen::VectorXd& residuals, Eigen::MatrixXd* jacobian)>;

struct Options {
    int max_iterations = 200;
    // Converged when ||step|| <= step_tolerance * (||params|| + step_tolerance).
    double step_tolerance = 1e-10;
    double initial_lambda = 1e-3;
};

// Box constraints; empty vectors mean unbounded.
struct Bounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

enum class Status { Converged, MaxIterations, NumericalFailure };

struct Result {
    Eigen::VectorXd params;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;
    double cost = 0.0;  // 0.5 * sum of squared residuals
    int iterations = 0;
    Status status = Status::NumericalFailure;
    std::vector<bool> at_lower;
    std::vector<bool> at_upper;

    bool converged() const noexcept { return status == Status::Converged; }
};

Result solve(const Model& model, Eigen::VectorXd initial, const Options& options = {}, const Bounds& bounds = {});

// Parameter covariance from the Jacobian at the optimum. With
// `scale_by_residual_variance` the unit-weight variance RSS/(m - n) is
// applied, otherwise the residuals are taken to be already normalised.
// Parameters pinned at a bound get zero variance.
Eigen::MatrixXd covariance(const Result& result, bool scale_by_residual_variance = true);

std::string to_string(Status status);

}  // namespace qloss::lm
