#include "hhmm/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "hhmm/error.hpp"

namespace hhmm {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kBetaTolerance = 1e-12;
constexpr int kBetaMaxIterations = 200000;

bool is_valid_probability(double p) { return p > 0.0 && p < 1.0; }

// log B(a, b) in extended precision; the lgamma terms cancel badly in double
// once a reaches ~1e5 (degrees of freedom in the normal limit).
long double log_beta(double a, double b) {
    const long double la = a, lb = b;
    return std::lgamma(la) + std::lgamma(lb) - std::lgamma(la + lb);
}

double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kBetaMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kBetaTolerance) return h;
    }
    return h;
}

// I_x(a, b) with 1 - x supplied separately so that x close to 1 keeps its
// complement exactly.
double incomplete_beta(double a, double b, double x, double one_minus_x) {
    if (x <= 0.0) return 0.0;
    if (one_minus_x <= 0.0) return 1.0;
    const long double log_front = a * std::log(static_cast<long double>(x)) +
                                  b * std::log(static_cast<long double>(one_minus_x)) -
                                  log_beta(a, b);
    const double front = static_cast<double>(std::exp(log_front));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, one_minus_x) / b;
}

// P(T <= t) for the standard t distribution with t <= 0.
double standard_t_lower_tail(double t, double dof) {
    if (t == 0.0) return 0.5;
    if (std::isinf(t)) return 0.0;
    const double t2 = t * t;
    const double denom = dof + t2;
    return 0.5 * incomplete_beta(0.5 * dof, 0.5, dof / denom, t2 / denom);
}

double standard_t_cdf(double t, double dof) {
    if (t <= 0.0) return standard_t_lower_tail(t, dof);
    return 1.0 - standard_t_lower_tail(-t, dof);
}

double standard_t_log_norm(double dof) {
    if (dof >= 100.0) {
        // lgamma(x + 1/2) - lgamma(x) = ln(x)/2 + series, with x = dof/2; the
        // logs then cancel against ln(dof pi)/2 exactly. Direct lgamma
        // differences lose ~lgamma(x) * eps, which swamps the dof gradient.
        const double x = 0.5 * dof;
        const double r = 1.0 / (x * x);
        const double series = (-1.0 / 8.0 + r * (1.0 / 192.0 + r * (-1.0 / 640.0 + r * (17.0 / 14336.0)))) / x;
        return series - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    const long double half = 0.5L * dof;
    const long double ratio = std::lgamma(half + 0.5L) - std::lgamma(half);
    return static_cast<double>(ratio) - 0.5 * std::log(dof * std::numbers::pi);
}

double standard_t_density(double t, double dof) {
    return std::exp(standard_t_log_norm(dof) - 0.5 * (dof + 1.0) * std::log1p(t * t / dof));
}

// Standard t quantile for p <= 0.5: bracket, bisect, then Newton polish.
double standard_t_lower_quantile(double p, double dof) {
    if (p == 0.5) return 0.0;
    double lo = -1.0;
    double hi = 0.0;
    while (standard_t_cdf(lo, dof) > p) {
        hi = lo;
        lo *= 2.0;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (hi - lo <= 1e-6 * std::max(1.0, std::fabs(mid))) break;
        if (standard_t_cdf(mid, dof) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double t = 0.5 * (lo + hi);
    for (int i = 0; i < 100; ++i) {
        const double f = standard_t_cdf(t, dof) - p;
        if (f == 0.0) break;
        if (f < 0.0) {
            lo = t;
        } else {
            hi = t;
        }
        double next = t - f / standard_t_density(t, dof);
        if (!(next >= lo && next <= hi)) next = 0.5 * (lo + hi);
        const bool done = std::fabs(next - t) <= 4e-16 * std::max(1.0, std::fabs(t));
        t = next;
        if (done || hi - lo <= 4e-16 * std::max(1.0, std::fabs(t))) break;
    }
    return t;
}

}  // namespace

ScaledTDistribution::ScaledTDistribution(double location, double scale, double dof)
    : location_(location), scale_(scale), dof_(dof) {
    if (!std::isfinite(location) || !std::isfinite(scale) || !(scale > 0.0) ||
        !(dof > 0.0) || std::isnan(dof)) {
        throw Error(ErrorKind::invalid_parameter,
                    "scaled t requires finite location, scale > 0 and dof > 0 (got location=" +
                        std::to_string(location) + ", scale=" + std::to_string(scale) +
                        ", dof=" + std::to_string(dof) + ")");
    }
}

TLogDensity::TLogDensity(const ScaledTDistribution& d)
    : location_(d.location()),
      inv_scale_(1.0 / d.scale()),
      inv_dof_(1.0 / d.dof()),
      half_dof_plus_one_(0.5 * (d.dof() + 1.0)),
      log_norm_(standard_t_log_norm(d.dof()) - std::log(d.scale())) {}

double TLogDensity::operator()(double x) const noexcept {
    const double z = (x - location_) * inv_scale_;
    return log_norm_ - half_dof_plus_one_ * std::log1p(z * z * inv_dof_);
}

double log_density(const ScaledTDistribution& d, double x) { return TLogDensity(d)(x); }

double density(const ScaledTDistribution& d, double x) { return std::exp(log_density(d, x)); }

double cdf(const ScaledTDistribution& d, double x) {
    if (std::isnan(x)) return x;
    return standard_t_cdf((x - d.location()) / d.scale(), d.dof());
}

double quantile(const ScaledTDistribution& d, double p) {
    if (!is_valid_probability(p)) {
        throw Error(ErrorKind::domain, "quantile requires 0 < p < 1, got " + std::to_string(p));
    }
    // 1 - p is exact for p in [0.5, 1).
    const double t = p <= 0.5 ? standard_t_lower_quantile(p, d.dof())
                              : -standard_t_lower_quantile(1.0 - p, d.dof());
    return d.location() + d.scale() * t;
}

double sample_one(const ScaledTDistribution& d, Rng& rng) {
    const double z = rng.normal();
    const double chi2 = rng.chi_squared(d.dof());
    return d.location() + d.scale() * z / std::sqrt(chi2 / d.dof());
}

std::vector<double> sample(const ScaledTDistribution& d, Rng& rng, std::size_t n) {
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_one(d, rng));
    return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!is_valid_probability(p)) {
        throw Error(ErrorKind::domain,
                    "normal_quantile requires 0 < p < 1, got " + std::to_string(p));
    }
    if (p > 0.5) return -normal_quantile(1.0 - p);

    // Acklam's rational approximation (relative error 1.15e-9) followed by
    // one Halley step against erfc.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x = 0.0;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw Error(ErrorKind::domain, "incomplete beta requires a, b > 0");
    }
    if (!(x >= 0.0 && x <= 1.0)) {
        throw Error(ErrorKind::domain, "incomplete beta requires 0 <= x <= 1");
    }
    return incomplete_beta(a, b, x, 1.0 - x);
}

}  // namespace hhmm
