#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "error.hpp"

namespace sclhom {

/// Philox4x32-10 counter-based generator (Salmon et al.). Stateless: the
/// output is a pure function of (counter, key).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key)
{
    constexpr std::uint32_t m0 = 0xD2511F53u;
    constexpr std::uint32_t m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

/// Standard normal draw keyed by (seed, stream, level, index).
inline double keyed_normal(std::uint64_t seed, std::uint64_t stream, std::uint32_t level, std::uint32_t index)
{
    const std::array<std::uint32_t, 4> ctr{index, level, static_cast<std::uint32_t>(stream),
                                           static_cast<std::uint32_t>(stream >> 32)};
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    const auto r = philox4x32(ctr, key);
    const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32 | r[1]) >> 11;
    const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32 | r[3]) >> 11;
    constexpr double scale = 1.0 / 9007199254740992.0; // 2^-53
    const double u1 = (static_cast<double>(a) + 1.0) * scale; // (0, 1]
    const double u2 = static_cast<double>(b) * scale;          // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Wiener path values on the dyadic grid t_j = j T / 2^level.
///
/// Values are stored on the fixed-point lattice of multiples of 2^-44, so every
/// sum or difference of path values below 2^9 in magnitude is exact in double
/// arithmetic. Sums of increments therefore telescope bit-exactly.
class brownian_path {
public:
    static constexpr int max_level = 30;
    static constexpr double quantum = 1.0 / 17592186044416.0; // 2^-44

    brownian_path() = default;

    double final_time() const { return T_; }
    int level() const { return level_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }
    std::size_t intervals() const { return values_.size() - 1; }
    double dt() const { return T_ / static_cast<double>(intervals()); }
    double time(std::size_t j) const { return T_ * static_cast<double>(j) / static_cast<double>(intervals()); }
    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t j) const { return values_.at(j); }

    /// W(t) for t on this path's grid.
    double at_time(double t) const
    {
        const double r = t / T_ * static_cast<double>(intervals());
        const double j = std::round(r);
        if (std::abs(r - j) > 1e-9 || j < 0.0 || j > static_cast<double>(intervals()))
            fail(errc::index_out_of_range, "time " + std::to_string(t) + " is not a node of the path grid");
        return values_[static_cast<std::size_t>(j)];
    }

    /// W(t_{j+1}) - W(t_j).
    double increment(std::size_t j) const
    {
        if (j >= intervals())
            fail(errc::index_out_of_range, "increment index " + std::to_string(j) + " outside [0, " +
                                               std::to_string(intervals()) + ")");
        return values_[j + 1] - values_[j];
    }

    double max_abs() const
    {
        double m = 0.0;
        for (double v : values_)
            m = std::max(m, std::abs(v));
        return m;
    }

    friend brownian_path sample_path(std::uint64_t seed, std::uint64_t stream_id, double T, int level);
    friend brownian_path refine(const brownian_path& path);

private:
    double T_ = 1.0;
    int level_ = 0;
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::vector<double> values_;

    static double quantize(double w) { return std::nearbyint(w / quantum) * quantum; }
};

/// One level of Brownian-bridge refinement: midpoints drawn from
/// N((W_l + W_r)/2, dt/4) with the stream keyed by (level + 1, interval index).
inline brownian_path refine(const brownian_path& path)
{
    if (path.level_ >= brownian_path::max_level)
        fail(errc::level_too_deep, "cannot refine beyond level " + std::to_string(brownian_path::max_level));
    brownian_path out;
    out.T_ = path.T_;
    out.level_ = path.level_ + 1;
    out.seed_ = path.seed_;
    out.stream_ = path.stream_;
    const std::size_t n = path.intervals();
    out.values_.resize(2 * n + 1);
    const double sd = std::sqrt(path.dt() / 4.0);
    const auto next_level = static_cast<std::uint32_t>(out.level_);
    for (std::size_t j = 0; j < n; ++j) {
        const double wl = path.values_[j];
        const double wr = path.values_[j + 1];
        const double z = keyed_normal(path.seed_, path.stream_, next_level, static_cast<std::uint32_t>(j));
        out.values_[2 * j] = wl;
        out.values_[2 * j + 1] = brownian_path::quantize(0.5 * (wl + wr) + sd * z);
    }
    out.values_[2 * n] = path.values_[n];
    return out;
}

/// Path at the given dyadic level; a pure function of (seed, stream_id, T, level).
inline brownian_path sample_path(std::uint64_t seed, std::uint64_t stream_id, double T, int level)
{
    if (level < 0 || level > brownian_path::max_level)
        fail(errc::level_too_deep, "level " + std::to_string(level) + " outside [0, 30]");
    if (!(T > 0.0))
        fail(errc::malformed_spec, "final time must be positive");
    brownian_path p;
    p.T_ = T;
    p.level_ = 0;
    p.seed_ = seed;
    p.stream_ = stream_id;
    p.values_ = {0.0, brownian_path::quantize(std::sqrt(T) * keyed_normal(seed, stream_id, 0, 0))};
    for (int l = 0; l < level; ++l)
        p = refine(p);
    return p;
}

/// Refines until the path reaches at least `level`.
inline brownian_path refine_to(brownian_path path, int level)
{
    while (path.level() < level)
        path = refine(path);
    return path;
}

inline double increment(const brownian_path& path, std::size_t j) { return path.increment(j); }

inline void write_path_csv(std::ostream& os, const brownian_path& path)
{
    os << "t,W\n";
    char buf[64];
    for (std::size_t j = 0; j <= path.intervals(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", path.time(j), path[j]);
        os << buf;
    }
}

} // namespace sclhom
