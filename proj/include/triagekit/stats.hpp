#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "triagekit/errors.hpp"
#include "triagekit/rng.hpp"

namespace triagekit {

double normal_pdf(double x);
double normal_cdf(double x);

/// Inverse of normal_cdf, accurate to full double precision.
double normal_quantile(double p);

double mean_of(std::span<const double> values);
double population_sd(std::span<const double> values);
double sample_sd(std::span<const double> values);

/// Empirical quantile of an ascending-sorted vector at level in [0, 1]
/// (nearest-index rule, deterministic).
double sorted_quantile(const std::vector<double>& sorted, double level);

/// Normal distribution truncated to [lower, upper]. `mean` is the mean of the
/// truncated distribution itself: the underlying location parameter is solved
/// at construction so that the truncated mean hits the requested value.
class TruncatedNormal {
public:
    TruncatedNormal(double mean, double sd, double lower, double upper);

    double sample(Rng& rng) const;

    double mean() const { return mean_; }
    double sd() const { return sd_; }
    double lower() const { return lower_; }
    double upper() const { return upper_; }
    double location() const { return location_; }

private:
    double mean_, sd_, lower_, upper_;
    double location_; // pre-truncation location
};

/// Mean of a normal(location, sd) restricted to [lower, upper].
double truncated_normal_mean(double location, double sd, double lower, double upper);

} // namespace triagekit
