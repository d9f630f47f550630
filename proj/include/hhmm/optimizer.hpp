#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hhmm {

struct BfgsOptions {
    int max_iterations = 500;
    // Converged when max|g| <= gradient_tolerance * max(1, |f|).
    double gradient_tolerance = 1e-6;
    int max_line_search_steps = 60;
    double armijo = 1e-4;
    // Search directions longer than this (max norm) are shortened.
    double max_step = 2.0;
};

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string status;
    std::vector<double> trace;  // objective after every accepted step
};

using ObjectiveFunction = std::function<double(const Eigen::VectorXd&)>;
// Gradient at x given the already-known value f(x).
using GradientFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

/// Quasi-Newton minimisation with inverse-Hessian BFGS updates and
/// backtracking Armijo line search. Updates with non-positive curvature
/// are skipped, so the inverse Hessian stays positive definite and every
/// accepted step decreases the objective.
BfgsResult minimize_bfgs(const ObjectiveFunction& objective, const GradientFunction& gradient,
                         Eigen::VectorXd start, const BfgsOptions& options = {});

/// Central differences with step cbrt(eps) * max(1, |x_j|).
Eigen::VectorXd central_difference_gradient(const ObjectiveFunction& objective,
                                            const Eigen::VectorXd& x);

double finite_difference_step(double x);

/// Scaled gradient norm used by the convergence test.
double scaled_gradient_norm(const Eigen::VectorXd& gradient, double value);

}  // namespace hhmm
