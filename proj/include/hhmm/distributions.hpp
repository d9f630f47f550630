#pragma once

#include <cstddef>
#include <vector>

#include "hhmm/random.hpp"

namespace hhmm {

/// Location-scale Student-t distribution used for every state-dependent
/// emission density. Construction validates scale > 0 and dof > 0.
class ScaledTDistribution {
public:
    ScaledTDistribution() = default;
    ScaledTDistribution(double location, double scale, double dof);

    double location() const noexcept { return location_; }
    double scale() const noexcept { return scale_; }
    double dof() const noexcept { return dof_; }

    friend bool operator==(const ScaledTDistribution&, const ScaledTDistribution&) = default;

private:
    double location_ = 0.0;
    double scale_ = 1.0;
    double dof_ = 1.0;
};

/// Log-density with the normalising constant evaluated once. Use this in
/// loops over many observations; log_density() builds one per call.
class TLogDensity {
public:
    explicit TLogDensity(const ScaledTDistribution& d);

    double operator()(double x) const noexcept;

private:
    double location_;
    double inv_scale_;
    double inv_dof_;
    double half_dof_plus_one_;
    double log_norm_;
};

double log_density(const ScaledTDistribution& d, double x);
double density(const ScaledTDistribution& d, double x);
double cdf(const ScaledTDistribution& d, double x);

/// Throws ErrorKind::domain unless 0 < p < 1.
double quantile(const ScaledTDistribution& d, double p);

std::vector<double> sample(const ScaledTDistribution& d, Rng& rng, std::size_t n);
double sample_one(const ScaledTDistribution& d, Rng& rng);

double normal_cdf(double x);

/// Inverse standard normal CDF; throws ErrorKind::domain unless 0 < p < 1.
double normal_quantile(double p);

/// I_x(a, b), continued fraction with 1e-12 convergence tolerance.
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace hhmm
