#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "error.hpp"

namespace sclhom {

using scalar_fn = std::function<double(double)>;

inline std::vector<double> linspace(double a, double b, std::size_t n)
{
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = a;
        return out;
    }
    for (std::size_t i = 0; i < n; ++i)
        out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

/// Root of an increasing function on [lo, hi] with fn(lo) <= target <= fn(hi).
/// Newton steps are accepted only when they stay inside the current bracket,
/// otherwise the step falls back to bisection.
inline double solve_increasing(const scalar_fn& fn, const scalar_fn& dfn, double target, double lo,
                               double hi, double xtol = 0.0, int max_iter = 200)
{
    double flo = fn(lo) - target;
    double fhi = fn(hi) - target;
    if (flo == 0.0)
        return lo;
    if (fhi == 0.0)
        return hi;
    if (flo > 0.0 || fhi < 0.0)
        fail(errc::out_of_range, "target not bracketed by [" + std::to_string(lo) + ", " +
                                     std::to_string(hi) + "]");
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < max_iter; ++it) {
        const double fx = fn(x) - target;
        if (fx == 0.0)
            return x;
        if (fx < 0.0)
            lo = x;
        else
            hi = x;
        const double width = hi - lo;
        if (width <= xtol || width <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)))
            return x;
        double next = 0.5 * (lo + hi);
        if (dfn) {
            const double d = dfn(x);
            if (d > 0.0 && std::isfinite(d)) {
                const double newton = x - fx / d;
                if (newton > lo && newton < hi)
                    next = newton;
            }
        }
        if (next == x)
            return x;
        x = next;
    }
    return x;
}

/// Expands [lo, hi] geometrically around a guess until an increasing function brackets target.
inline std::pair<double, double> bracket_increasing(const scalar_fn& fn, double target, double guess,
                                                    double step = 1.0, double limit = 1e8)
{
    double lo = guess - step;
    double hi = guess + step;
    while (fn(lo) > target) {
        step *= 2.0;
        lo = guess - step;
        if (step > limit)
            fail(errc::range_exceeded, "cannot bracket value " + std::to_string(target) + " from below");
    }
    step = std::max(step, 1.0);
    while (fn(hi) < target) {
        step *= 2.0;
        hi = guess + step;
        if (step > limit)
            fail(errc::range_exceeded, "cannot bracket value " + std::to_string(target) + " from above");
    }
    return {lo, hi};
}

/// Piecewise cubic Hermite interpolant on a uniform grid. Derivatives at the
/// nodes are supplied by the caller (usually exact), and are limited with the
/// Fritsch-Carlson condition when the data is monotone so the interpolant stays
/// monotone.
class hermite_table {
public:
    hermite_table() = default;

    hermite_table(double x0, double h, std::vector<double> values, std::vector<double> slopes,
                  bool enforce_monotone = false)
        : x0_(x0), h_(h), y_(std::move(values)), m_(std::move(slopes))
    {
        if (y_.size() < 2 || y_.size() != m_.size() || !(h_ > 0.0))
            fail(errc::malformed_spec, "hermite_table needs >= 2 nodes with matching slopes");
        if (enforce_monotone)
            limit_slopes();
    }

    double x_min() const { return x0_; }
    double x_max() const { return x0_ + h_ * static_cast<double>(y_.size() - 1); }
    double step() const { return h_; }
    std::size_t size() const { return y_.size(); }
    double node(std::size_t k) const { return x0_ + h_ * static_cast<double>(k); }
    const std::vector<double>& values() const { return y_; }
    const std::vector<double>& slopes() const { return m_; }

    bool contains(double x) const { return x >= x_min() && x <= x_max(); }

    double operator()(double x) const
    {
        auto [k, s] = locate(x);
        return eval(k, s);
    }

    double derivative(double x) const
    {
        auto [k, s] = locate(x);
        const double s2 = s * s;
        const double dh00 = 6.0 * s2 - 6.0 * s;
        const double dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        const double dh01 = -dh00;
        const double dh11 = 3.0 * s2 - 2.0 * s;
        return (dh00 * y_[k] + dh01 * y_[k + 1]) / h_ + dh10 * m_[k] + dh11 * m_[k + 1];
    }

    /// Inverse of an increasing interpolant, exact to roundoff relative to operator().
    double inverse(double value) const
    {
        if (!(value >= y_.front() && value <= y_.back()))
            fail(errc::range_exceeded, "value " + std::to_string(value) + " outside table image [" +
                                           std::to_string(y_.front()) + ", " + std::to_string(y_.back()) + "]");
        const auto it = std::upper_bound(y_.begin(), y_.end(), value);
        std::size_t k = it == y_.begin() ? 0 : static_cast<std::size_t>(it - y_.begin()) - 1;
        if (k >= y_.size() - 1)
            k = y_.size() - 2;
        const double lo = node(k);
        const double hi = node(k + 1);
        if (value == y_[k])
            return lo;
        if (value == y_[k + 1])
            return hi;
        return solve_increasing([&](double x) { return eval_in(k, x); },
                                [&](double x) { return derivative(x); }, value, lo, hi);
    }

private:
    double x0_ = 0.0;
    double h_ = 1.0;
    std::vector<double> y_;
    std::vector<double> m_;

    std::pair<std::size_t, double> locate(double x) const
    {
        if (!(x >= x_min() && x <= x_max()))
            fail(errc::range_exceeded, "argument " + std::to_string(x) + " outside table range [" +
                                           std::to_string(x_min()) + ", " + std::to_string(x_max()) + "]");
        const double r = (x - x0_) / h_;
        auto k = static_cast<std::size_t>(r);
        if (k >= y_.size() - 1)
            k = y_.size() - 2;
        return {k, r - static_cast<double>(k)};
    }

    double eval_in(std::size_t k, double x) const { return eval(k, (x - node(k)) / h_); }

    double eval(std::size_t k, double s) const
    {
        const double s2 = s * s;
        const double s3 = s2 * s;
        const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        const double h10 = s3 - 2.0 * s2 + s;
        const double h01 = -2.0 * s3 + 3.0 * s2;
        const double h11 = s3 - s2;
        return h00 * y_[k] + h10 * h_ * m_[k] + h01 * y_[k + 1] + h11 * h_ * m_[k + 1];
    }

    void limit_slopes()
    {
        for (std::size_t k = 0; k + 1 < y_.size(); ++k) {
            const double delta = (y_[k + 1] - y_[k]) / h_;
            if (delta <= 0.0)
                fail(errc::malformed_spec, "monotone table requires strictly increasing values");
            const double a = m_[k] / delta;
            const double b = m_[k + 1] / delta;
            const double r2 = a * a + b * b;
            if (r2 > 9.0) {
                const double tau = 3.0 / std::sqrt(r2);
                m_[k] = tau * a * delta;
                m_[k + 1] = tau * b * delta;
            }
        }
    }
};

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work is assigned
/// by static striding, and every result must be written to slot i, so the
/// outcome never depends on scheduling.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body)
{
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n; i += workers)
                        body(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

/// Pairwise summation; fixed evaluation order regardless of caller.
inline double pairwise_sum(const double* data, std::size_t n)
{
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

} // namespace sclhom
