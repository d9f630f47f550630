#include "hhmm/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "hhmm/distributions.hpp"
#include "hhmm/error.hpp"

namespace hhmm {

namespace {

double residual(const ScaledTDistribution& d, double x) {
    const double u = std::clamp(cdf(d, x), kResidualClamp, 1.0 - kResidualClamp);
    return normal_quantile(u);
}

ResidualSummary summarize(std::span<const double> values, const ResidualOptions& options) {
    ResidualSummary s;
    s.ks_statistic = ks_statistic_normal(values);
    s.qq = qq_points(values);
    s.histogram = histogram(values, options.histogram_bins, options.histogram_lower,
                            options.histogram_upper);
    s.autocorrelation = autocorrelations(values, options.max_lag);
    return s;
}

}  // namespace

ResidualReport pseudo_residuals(const HierarchicalModel& model, const ObservationPanel& panel,
                                const DecodedStates& decoded, const ResidualOptions& options) {
    check_consistent(decoded, panel, model.n_coarse(), model.n_fine());
    ResidualReport report;
    const int n_chunks = panel.n_chunks();
    report.coarse_residuals.resize(n_chunks);
    std::vector<double> all_fine;
    all_fine.reserve(static_cast<std::size_t>(panel.n_fine_observations()));
    for (int t = 0; t < n_chunks; ++t) {
        const auto tt = static_cast<std::size_t>(t);
        const int state = decoded.coarse[tt];
        report.coarse_residuals[t] =
            residual(model.coarse_emissions()[static_cast<std::size_t>(state)], panel.coarse()[t]);
        const auto& fm = model.fine_model(state);
        const auto& chunk = panel.chunk(t);
        Vector z(chunk.size());
        for (Eigen::Index k = 0; k < chunk.size(); ++k) {
            const int fine_state = decoded.fine[tt][static_cast<std::size_t>(k)];
            z[k] = residual(fm.emissions[static_cast<std::size_t>(fine_state)], chunk[k]);
            all_fine.push_back(z[k]);
        }
        report.fine_residuals.push_back(std::move(z));
    }
    report.coarse = summarize({report.coarse_residuals.data(), static_cast<std::size_t>(n_chunks)},
                              options);
    report.fine = summarize(all_fine, options);
    return report;
}

double ks_statistic_normal(std::span<const double> values) {
    if (values.empty()) return 0.0;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = normal_cdf(sorted[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double ks_critical_value_01(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }

std::vector<QQPoint> qq_points(std::span<const double> values) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    std::vector<QQPoint> out;
    out.reserve(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        out.push_back({normal_quantile((static_cast<double>(i) + 0.5) / n), sorted[i]});
    }
    return out;
}

Histogram histogram(std::span<const double> values, int bins, double lower, double upper) {
    if (bins < 1 || !(upper > lower)) {
        throw Error(ErrorKind::invalid_parameter, "histogram needs bins >= 1 and upper > lower");
    }
    Histogram h{lower, upper, std::vector<int>(static_cast<std::size_t>(bins), 0), 0, 0};
    const double width = (upper - lower) / bins;
    for (double v : values) {
        if (v < lower) {
            ++h.below;
        } else if (v > upper) {
            ++h.above;
        } else {
            const int b = std::min(bins - 1, static_cast<int>((v - lower) / width));
            ++h.counts[static_cast<std::size_t>(b)];
        }
    }
    return h;
}

std::vector<double> autocorrelations(std::span<const double> values, int max_lag) {
    const std::size_t n = values.size();
    std::vector<double> out;
    if (n < 2 || max_lag < 1) return out;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double denom = 0.0;
    for (double v : values) denom += (v - mean) * (v - mean);
    for (int lag = 1; lag <= max_lag; ++lag) {
        const auto l = static_cast<std::size_t>(lag);
        if (l >= n || denom == 0.0) {
            out.push_back(0.0);
            continue;
        }
        double num = 0.0;
        for (std::size_t t = l; t < n; ++t) num += (values[t] - mean) * (values[t - l] - mean);
        out.push_back(num / denom);
    }
    return out;
}

}  // namespace hhmm
