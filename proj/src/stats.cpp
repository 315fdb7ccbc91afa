#include "triagekit/stats.hpp"

#include <algorithm>
#include <cmath>

#include "triagekit/errors.hpp"

namespace triagekit {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt2Pi = 2.5066282746310002;

} // namespace

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / kSqrt2Pi;
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / kSqrt2);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw NumericError("normal_quantile: p must be in (0, 1)");
    }
    // Acklam's rational approximation, then one Halley refinement.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    const double e = normal_cdf(x) - p;
    const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

double mean_of(std::span<const double> values) {
    if (values.empty()) throw NumericError("mean_of: empty input");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double population_sd(std::span<const double> values) {
    const double m = mean_of(values);
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(values.size()));
}

double sample_sd(std::span<const double> values) {
    if (values.size() < 2) throw NumericError("sample_sd: need at least 2 values");
    const double m = mean_of(values);
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

double sorted_quantile(const std::vector<double>& sorted, double level) {
    if (sorted.empty()) throw NumericError("sorted_quantile: empty input");
    const double pos = level * static_cast<double>(sorted.size() - 1);
    std::size_t idx = static_cast<std::size_t>(pos);
    if (idx >= sorted.size()) idx = sorted.size() - 1;
    return sorted[idx];
}

double truncated_normal_mean(double location, double sd, double lower, double upper) {
    const double alpha = (lower - location) / sd;
    const double beta = (upper - location) / sd;
    const double z = 0.5 * (std::erfc(alpha / kSqrt2) - std::erfc(beta / kSqrt2));
    if (z <= 0.0) {
        // mass numerically vanished; the mean collapses onto the nearer bound
        return alpha > 0.0 ? lower : upper;
    }
    return location + sd * (normal_pdf(alpha) - normal_pdf(beta)) / z;
}

TruncatedNormal::TruncatedNormal(double mean, double sd, double lower, double upper)
    : mean_(mean), sd_(sd), lower_(lower), upper_(upper) {
    if (!(sd > 0.0)) throw NumericError("TruncatedNormal: sd must be positive");
    if (!(lower < upper)) throw NumericError("TruncatedNormal: lower must be below upper");
    if (!(mean > lower && mean < upper)) {
        throw NumericError("TruncatedNormal: mean must lie strictly inside [lower, upper]");
    }

    // truncated_normal_mean is strictly increasing in the location parameter
    double lo = lower - 20.0 * sd;
    double hi = upper + 20.0 * sd;
    if (truncated_normal_mean(lo, sd, lower, upper) > mean ||
        truncated_normal_mean(hi, sd, lower, upper) < mean) {
        throw NumericError("TruncatedNormal: requested mean not attainable");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-13 * sd; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (truncated_normal_mean(mid, sd, lower, upper) < mean) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    location_ = 0.5 * (lo + hi);
}

double TruncatedNormal::sample(Rng& rng) const {
    const double alpha = (lower_ - location_) / sd_;
    const double beta = (upper_ - location_) / sd_;

    auto tail_sample = [&rng](double a, double b) {
        // Robert's exponential rejection for the right tail [a, b], a >= 0.
        const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
        for (;;) {
            const double z = a - std::log(rng.uniform_pos()) / lambda;
            if (z > b) continue;
            const double rho = std::exp(-0.5 * (z - lambda) * (z - lambda));
            if (rng.uniform() <= rho) return z;
        }
    };

    double z;
    if (alpha >= 0.35) {
        z = tail_sample(alpha, beta);
    } else if (beta <= -0.35) {
        z = -tail_sample(-beta, -alpha);
    } else {
        // bounds straddle the bulk; plain rejection is cheap here
        do {
            z = rng.gaussian();
        } while (z < alpha || z > beta);
    }
    return location_ + sd_ * z;
}

} // namespace triagekit
