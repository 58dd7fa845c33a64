#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "numeric.hpp"

namespace sclhom {

struct sample_summary {
    double mean = 0.0;
    double variance = 0.0;
    /// 95% confidence half-width from the t-distribution.
    double half_width = 0.0;
    std::size_t n = 0;
};

inline sample_summary summarize(const std::vector<double>& xs, double confidence = 0.95)
{
    sample_summary s;
    s.n = xs.size();
    if (xs.empty())
        return s;
    s.mean = pairwise_sum(xs) / static_cast<double>(xs.size());
    if (xs.size() < 2) {
        s.half_width = std::numeric_limits<double>::infinity();
        return s;
    }
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        sq[i] = (xs[i] - s.mean) * (xs[i] - s.mean);
    s.variance = pairwise_sum(sq) / static_cast<double>(xs.size() - 1);
    const boost::math::students_t dist(static_cast<double>(xs.size() - 1));
    const double q = boost::math::quantile(dist, 0.5 + 0.5 * confidence);
    s.half_width = q * std::sqrt(s.variance / static_cast<double>(xs.size()));
    return s;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Kolmogorov-Smirnov statistic of the sample against the standard normal.
inline double ks_statistic_normal(std::vector<double> xs)
{
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double F = normal_cdf(xs[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
    }
    return d;
}

/// Asymptotic critical value at significance 0.01.
inline double ks_critical_001(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

} // namespace sclhom
