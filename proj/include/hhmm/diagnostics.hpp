#pragma once

#include <span>
#include <vector>

#include "hhmm/decoding.hpp"
#include "hhmm/model.hpp"
#include "hhmm/panel.hpp"

namespace hhmm {

/// CDF values are clamped to [kResidualClamp, 1 - kResidualClamp] before
/// the inverse normal transform.
inline constexpr double kResidualClamp = 1e-12;

struct QQPoint {
    double theoretical;  // Phi^-1((i - 0.5) / n)
    double empirical;    // i-th order statistic
};

struct Histogram {
    double lower = -4.0;
    double upper = 4.0;
    std::vector<int> counts;
    int below = 0;
    int above = 0;
};

struct ResidualSummary {
    double ks_statistic = 0.0;
    std::vector<QQPoint> qq;
    Histogram histogram;
    std::vector<double> autocorrelation;  // lags 1..max_lag
};

struct ResidualReport {
    Vector coarse_residuals;
    std::vector<Vector> fine_residuals;
    ResidualSummary coarse;
    ResidualSummary fine;  // all chunks concatenated in time order
};

struct ResidualOptions {
    int histogram_bins = 30;
    double histogram_lower = -4.0;
    double histogram_upper = 4.0;
    int max_lag = 20;
};

/// Z = Phi^-1(F(x)) with F the emission CDF of the decoded state: coarse
/// emission of S_t for X_t, fine emission (S_t, S*_{t,t*}) for X*_{t,t*}.
ResidualReport pseudo_residuals(const HierarchicalModel& model, const ObservationPanel& panel,
                                const DecodedStates& decoded, const ResidualOptions& options = {});

/// Kolmogorov-Smirnov distance between the empirical CDF and Phi.
double ks_statistic_normal(std::span<const double> values);

/// Asymptotic one-sample KS critical value at alpha = 0.01: 1.63 / sqrt(n).
double ks_critical_value_01(std::size_t n);

std::vector<QQPoint> qq_points(std::span<const double> values);
Histogram histogram(std::span<const double> values, int bins, double lower, double upper);
std::vector<double> autocorrelations(std::span<const double> values, int max_lag);

}  // namespace hhmm
