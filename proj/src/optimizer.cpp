#include "hhmm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hhmm {

double finite_difference_step(double x) {
    static const double base = std::cbrt(std::numeric_limits<double>::epsilon());
    return base * std::max(1.0, std::fabs(x));
}

double scaled_gradient_norm(const Eigen::VectorXd& gradient, double value) {
    if (gradient.size() == 0) return 0.0;
    return gradient.cwiseAbs().maxCoeff() / std::max(1.0, std::fabs(value));
}

Eigen::VectorXd central_difference_gradient(const ObjectiveFunction& objective,
                                            const Eigen::VectorXd& x) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = finite_difference_step(x[j]);
        probe[j] = x[j] + h;
        const double up = objective(probe);
        probe[j] = x[j] - h;
        const double down = objective(probe);
        probe[j] = x[j];
        g[j] = (up - down) / (2.0 * h);
    }
    return g;
}

BfgsResult minimize_bfgs(const ObjectiveFunction& objective, const GradientFunction& gradient,
                         Eigen::VectorXd start, const BfgsOptions& options) {
    const Eigen::Index n = start.size();
    BfgsResult result;
    result.x = std::move(start);
    result.value = objective(result.x);
    result.evaluations = 1;
    if (!std::isfinite(result.value)) {
        result.status = "non-finite objective at start";
        return result;
    }
    result.gradient = gradient(result.x, result.value);
    result.trace.push_back(result.value);

    Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(n, n);
    bool hessian_is_identity = true;
    bool first_update = true;

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        if (scaled_gradient_norm(result.gradient, result.value) <= options.gradient_tolerance) {
            result.converged = true;
            result.status = "gradient tolerance reached";
            return result;
        }
        Eigen::VectorXd direction = -(inv_hessian * result.gradient);
        double slope = direction.dot(result.gradient);
        if (!(slope < 0.0)) {
            inv_hessian.setIdentity();
            hessian_is_identity = true;
            direction = -result.gradient;
            slope = direction.dot(result.gradient);
        }
        const double longest = direction.cwiseAbs().maxCoeff();
        if (longest > options.max_step) {
            direction *= options.max_step / longest;
            slope = direction.dot(result.gradient);
        }

        double step = 1.0;
        double trial_value = 0.0;
        Eigen::VectorXd trial;
        bool accepted = false;
        for (int ls = 0; ls < options.max_line_search_steps; ++ls) {
            trial = result.x + step * direction;
            trial_value = objective(trial);
            ++result.evaluations;
            if (std::isfinite(trial_value) &&
                trial_value <= result.value + options.armijo * step * slope &&
                trial_value < result.value) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!hessian_is_identity) {
                inv_hessian.setIdentity();
                hessian_is_identity = true;
                continue;
            }
            result.status = "line search failed";
            result.iterations = iter;
            result.converged =
                scaled_gradient_norm(result.gradient, result.value) <= options.gradient_tolerance;
            return result;
        }

        Eigen::VectorXd new_gradient = gradient(trial, trial_value);
        const Eigen::VectorXd s = trial - result.x;
        const Eigen::VectorXd y = new_gradient - result.gradient;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (first_update) {
                inv_hessian *= sy / y.squaredNorm();
                first_update = false;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = inv_hessian * y;
            inv_hessian += rho * rho * (y.dot(hy) + sy) * (s * s.transpose()) -
                           rho * (hy * s.transpose() + s * hy.transpose());
            hessian_is_identity = false;
        }
        result.x = std::move(trial);
        result.value = trial_value;
        result.gradient = std::move(new_gradient);
        result.trace.push_back(result.value);
        result.iterations = iter + 1;
    }
    result.converged =
        scaled_gradient_norm(result.gradient, result.value) <= options.gradient_tolerance;
    result.status = result.converged ? "gradient tolerance reached" : "iteration limit";
    return result;
}

}  // namespace hhmm
