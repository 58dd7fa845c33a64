#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "brownian.hpp"
#include "effective_flux.hpp"
#include "error.hpp"
#include "fv_engine.hpp"
#include "kinetic.hpp"
#include "model_catalog.hpp"
#include "numeric.hpp"
#include "stats.hpp"

namespace sclhom {

/// Smooth compactly supported test function on the box.
struct test_function {
    enum class shape { bump, trig_window };
    shape kind = shape::bump;
    point center{0.0, 0.0};
    double radius = 0.5;
    /// Trigonometric window: cos(2 pi (frequency . x) + phase) times the bump.
    point frequency{0.0, 0.0};
    double phase = 0.0;
    std::string name;

    double operator()(const point& x) const
    {
        const double dx0 = x[0] - center[0];
        const double dx1 = x[1] - center[1];
        const double r2 = (dx0 * dx0 + dx1 * dx1) / (radius * radius);
        if (r2 >= 1.0)
            return 0.0;
        const double b = std::exp(1.0 - 1.0 / (1.0 - r2));
        if (kind == shape::bump)
            return b;
        return b * std::cos(2.0 * std::numbers::pi * (frequency[0] * x[0] + frequency[1] * x[1]) + phase);
    }

    static test_function bump(point c, double r, std::string name = "bump")
    {
        return {shape::bump, c, r, {0.0, 0.0}, 0.0, std::move(name)};
    }
    static test_function trig(point c, double r, point freq, double phase, std::string name = "trig")
    {
        return {shape::trig_window, c, r, freq, phase, std::move(name)};
    }
};

/// Default set for a box of half-width L in dimension d.
inline std::vector<test_function> default_test_functions(double L, int dim)
{
    const double r = 0.6 * L;
    if (dim == 1)
        return {test_function::bump({0.0, 0.0}, r, "bump0"), test_function::bump({0.3 * L, 0.0}, 0.5 * L, "bump1"),
                test_function::trig({0.0, 0.0}, r, {1.0 / L, 0.0}, 0.3, "trig0")};
    return {test_function::bump({0.0, 0.0}, r, "bump0"),
            test_function::trig({0.0, 0.0}, r, {0.5 / L, 0.5 / L}, 0.3, "trig0")};
}

/// |sum_i (u_eps_i - u_bar_i) phi(x_i) dx^d| for every phi.
inline std::vector<double> weak_star_error(const grid_field& u_eps, const grid_field& u_bar,
                                           const std::vector<test_function>& phis)
{
    if (!u_eps.same_grid(u_bar))
        fail(errc::grid_mismatch, "weak-star error needs fields on the same grid");
    if (std::abs(u_eps.time - u_bar.time) > 1e-12)
        fail(errc::grid_mismatch, "weak-star error needs fields at the same time");
    std::vector<double> out;
    std::vector<double> terms(u_eps.size());
    for (const auto& phi : phis) {
        for (std::size_t k = 0; k < u_eps.size(); ++k)
            terms[k] = (u_eps.u[k] - u_bar.u[k]) * phi(u_eps.position(k));
        out.push_back(std::abs(pairwise_sum(terms) * u_eps.cell_volume()));
    }
    return out;
}

/// Corrector U(x) = g(fbar_1(u_bar(x)) + V(x_1/eps)) on the grid of u_bar.
inline grid_field corrector_field(const grid_field& u_bar, const effective_flux_table& table, const scalar_flux& flux,
                                  const oscillatory_potential& V, double eps)
{
    const auto g = flow_primitive::from_increasing(flux[0].f, flux[0].df);
    grid_field U = u_bar;
    for (std::size_t k = 0; k < U.size(); ++k)
        U.u[k] = g.forward(table.fbar1(u_bar.u[k]) + V(u_bar.position(k)[0] / eps), u_bar.u[k]);
    return U;
}

/// L1 norm of u_eps - g(fbar_1(u_bar) + V(x_1/eps)).
inline double corrector_error(const grid_field& u_eps, const grid_field& u_bar, const effective_flux_table& table,
                              const scalar_flux& flux, const oscillatory_potential& V, double eps)
{
    if (!u_eps.same_grid(u_bar))
        fail(errc::grid_mismatch, "corrector error needs fields on the same grid");
    const auto U = corrector_field(u_bar, table, flux, V, eps);
    std::vector<double> terms(u_eps.size());
    for (std::size_t k = 0; k < u_eps.size(); ++k)
        terms[k] = std::abs(u_eps.u[k] - U.u[k]);
    return pairwise_sum(terms) * u_eps.cell_volume();
}

/// Reference solution on the grid of an eps-run, at the requested times.
using reference_solver = std::function<std::vector<grid_field>(double eps, std::size_t n, const brownian_path& path,
                                                               const std::vector<double>& times, int min_level)>;

/// ubar from the homogenized equation, solved on the eps-run's grid and level.
inline reference_solver effective_reference(const effective_flux_table& table, double kappa0, box_domain domain,
                                            std::function<double(const point&)> v0, scheme_config cfg = {})
{
    return [=](double, std::size_t n, const brownian_path& path, const std::vector<double>& times, int min_level) {
        scheme_config c = cfg;
        c.min_level = std::max(c.min_level, min_level);
        const auto traj = solve_effective(table, kappa0, domain, n, v0, path, c, times.back(), times);
        std::vector<grid_field> out;
        for (std::size_t t = 0; t < times.size(); ++t)
            out.push_back(traj.snapshots.at(t + 1).field);
        return out;
    };
}

struct sweep_plan {
    std::function<problem_spec(double eps)> make_spec;
    std::vector<double> epsilons;
    std::vector<std::uint64_t> seeds;
    std::vector<test_function> phis;
    std::vector<double> times;
    /// Cells per axis: fixed, or ceil(2 L resolution / eps) when zero.
    std::size_t fixed_n = 0;
    double resolution = 16.0;
    /// Kept coarse so every eps-run refines to its own CFL level: dt / dx is
    /// then the same for all eps and the scheme error scales with dx alone.
    int path_level = 2;
    scheme_config scheme;
    reference_solver reference;
    /// Reference for corrector errors; `reference` when empty.
    reference_solver corrector_reference;
    /// Present for problem 2: enables corrector errors.
    std::optional<effective_flux_table> table;
    unsigned threads = 1;

    std::size_t cells(double eps, double half_width) const
    {
        if (fixed_n)
            return fixed_n;
        return static_cast<std::size_t>(std::ceil(2.0 * half_width * resolution / eps - 1e-9));
    }
};

struct convergence_row {
    std::uint64_t seed = 0;
    double eps = 0.0;
    double time = 0.0;
    std::size_t n = 0;
    std::vector<double> weak_errors;
    double corrector_error = std::numeric_limits<double>::quiet_NaN();
};

struct convergence_table {
    std::vector<std::string> phi_names;
    std::vector<convergence_row> rows;

    /// Consecutive ratios err(eps_{j+1}) / err(eps_j) for one (seed, time, phi).
    std::vector<double> weak_ratios(std::uint64_t seed, double time, std::size_t phi) const
    {
        std::vector<double> errs;
        for (const auto& r : rows)
            if (r.seed == seed && std::abs(r.time - time) < 1e-12)
                errs.push_back(r.weak_errors.at(phi));
        std::vector<double> out;
        for (std::size_t j = 1; j < errs.size(); ++j)
            out.push_back(errs[j] / errs[j - 1]);
        return out;
    }

    /// Every halving shrinks the error by max_ratio, unless both errors are
    /// already below the round-off floor.
    bool weak_trend(std::uint64_t seed, double time, std::size_t phi, double max_ratio, double floor = 1e-12) const
    {
        std::vector<double> errs;
        for (const auto& r : rows)
            if (r.seed == seed && std::abs(r.time - time) < 1e-12)
                errs.push_back(r.weak_errors.at(phi));
        for (std::size_t j = 1; j < errs.size(); ++j)
            if (!(errs[j] <= max_ratio * errs[j - 1] || std::max(errs[j], errs[j - 1]) <= floor))
                return false;
        return true;
    }
};

inline void check_plan(const sweep_plan& plan)
{
    if (!plan.make_spec || !plan.reference)
        fail(errc::malformed_spec, "sweep plan needs a spec builder and a reference solver");
    if (plan.epsilons.empty() || plan.seeds.empty() || plan.times.empty())
        fail(errc::malformed_spec, "sweep plan needs epsilons, seeds and times");
    for (double e : plan.epsilons) {
        const double r = std::log2(e);
        if (!(e > 0.0) || std::abs(r - std::round(r)) > 1e-12)
            fail(errc::malformed_spec, "sweep epsilons must be dyadic");
    }
}

/// Runs every (seed, eps) job; all eps-runs of one seed use the same path.
inline convergence_table eps_sweep(const sweep_plan& plan)
{
    check_plan(plan);
    struct job {
        std::size_t seed_index, eps_index;
    };
    std::vector<job> jobs;
    for (std::size_t s = 0; s < plan.seeds.size(); ++s)
        for (std::size_t e = 0; e < plan.epsilons.size(); ++e)
            jobs.push_back({s, e});
    const double T_path = plan.make_spec(plan.epsilons.front()).final_time;
    std::vector<std::vector<convergence_row>> results(jobs.size());
    parallel_for(jobs.size(), plan.threads, [&](std::size_t jb) {
        const auto [s, e] = jobs[jb];
        const double eps = plan.epsilons[e];
        const auto spec = plan.make_spec(eps);
        const std::size_t n = plan.cells(eps, spec.domain.half_width);
        if (2.0 * spec.domain.half_width / static_cast<double>(n) > eps / 16.0 * (1.0 + 1e-12))
            fail(errc::resolution_too_coarse, "grid does not resolve eps with dx <= eps / 16");
        const auto path = sample_path(plan.seeds[s], 0, T_path, plan.path_level);
        const auto field0 = initial_field(spec, n);
        int level = plan.scheme.min_level;
        if (spec.is_transport())
            level = std::max(level, required_level(make_law(spec.transport(), eps), field0, plan.scheme, T_path));
        scheme_config cfg = plan.scheme;
        cfg.min_level = level;
        const auto traj = solve_problem(spec, n, path, cfg, plan.times);
        const auto refs = plan.reference(eps, n, path, plan.times, traj.level);
        std::vector<grid_field> corr_refs;
        if (plan.table && !spec.is_transport() && plan.corrector_reference)
            corr_refs = plan.corrector_reference(eps, n, path, plan.times, traj.level);
        for (std::size_t t = 0; t < plan.times.size(); ++t) {
            const auto& snap = traj.snapshots.at(t + 1);
            convergence_row row;
            row.seed = plan.seeds[s];
            row.eps = eps;
            row.time = plan.times[t];
            row.n = n;
            row.weak_errors = weak_star_error(snap.field, refs.at(t), plan.phis);
            if (plan.table && !spec.is_transport())
                row.corrector_error =
                    corrector_error(snap.field, corr_refs.empty() ? refs.at(t) : corr_refs.at(t), *plan.table, spec.stiff().flux, spec.stiff().potential, eps);
            results[jb].push_back(std::move(row));
        }
    });
    convergence_table table;
    for (const auto& phi : plan.phis)
        table.phi_names.push_back(phi.name);
    // seed-major, then time, then eps
    for (std::size_t s = 0; s < plan.seeds.size(); ++s)
        for (std::size_t t = 0; t < plan.times.size(); ++t)
            for (std::size_t e = 0; e < plan.epsilons.size(); ++e)
                table.rows.push_back(results[s * plan.epsilons.size() + e][t]);
    return table;
}

/// Fractional position y = (x_1 / eps) mod P in [0, P).
inline double cell_coordinate(double x1, double eps, double period)
{
    const double y = std::fmod(x1 / eps, period);
    return y < 0.0 ? y + period : y;
}

inline std::size_t y_bin_of(double x1, double eps, double period, std::size_t y_bins)
{
    const double y = cell_coordinate(x1, eps, period) / period;
    return std::min(static_cast<std::size_t>(y * static_cast<double>(y_bins)), y_bins - 1);
}

inline void check_resolution(const grid_field& f, double eps, double period, std::size_t y_bins)
{
    if (y_bins == 0)
        fail(errc::malformed_spec, "need at least one y-bin");
    if (eps * period / f.dx() < static_cast<double>(y_bins))
        fail(errc::resolution_too_coarse, "fewer than one cell per y-bin: dx = " + std::to_string(f.dx()));
}

/// Histogram of the cell values grouped by y = x_1/eps mod period.
inline young_measure_histogram young_measure_estimate(const grid_field& u_eps, double eps, std::size_t y_bins,
                                                      std::size_t xi_bins, double period = 1.0,
                                                      std::optional<std::pair<double, double>> xi_range = {})
{
    check_resolution(u_eps, eps, period, y_bins);
    if (xi_bins == 0)
        fail(errc::malformed_spec, "need at least one xi-bin");
    double lo = xi_range ? xi_range->first : u_eps.min();
    double hi = xi_range ? xi_range->second : u_eps.max();
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    young_measure_histogram h;
    h.time = u_eps.time;
    h.y_bins = y_bins;
    h.xi_edges = linspace(lo, hi, xi_bins + 1);
    h.weights.assign(y_bins, std::vector<double>(xi_bins, 0.0));
    h.counts.assign(y_bins, 0);
    const double width = (hi - lo) / static_cast<double>(xi_bins);
    for (std::size_t k = 0; k < u_eps.size(); ++k) {
        const std::size_t b = y_bin_of(u_eps.position(k)[0], eps, period, y_bins);
        const double r = (u_eps.u[k] - lo) / width;
        const auto j = static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(xi_bins - 1)));
        h.weights[b][j] += 1.0;
        ++h.counts[b];
    }
    for (std::size_t b = 0; b < y_bins; ++b)
        if (h.counts[b])
            for (double& w : h.weights[b])
                w /= static_cast<double>(h.counts[b]);
    return h;
}

/// Sample variance of the cell values inside each y-bin.
inline std::vector<double> bin_variances(const grid_field& values, double eps, std::size_t y_bins,
                                         double period = 1.0)
{
    check_resolution(values, eps, period, y_bins);
    std::vector<std::vector<double>> groups(y_bins);
    for (std::size_t k = 0; k < values.size(); ++k)
        groups[y_bin_of(values.position(k)[0], eps, period, y_bins)].push_back(values.u[k]);
    std::vector<double> out(y_bins, 0.0);
    for (std::size_t b = 0; b < y_bins; ++b) {
        const auto& g = groups[b];
        if (g.size() < 2)
            continue;
        const double mean = pairwise_sum(g) / static_cast<double>(g.size());
        std::vector<double> sq(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            sq[i] = (g[i] - mean) * (g[i] - mean);
        out[b] = pairwise_sum(sq) / static_cast<double>(g.size() - 1);
    }
    return out;
}

struct moment_stats {
    double p = 1.0;
    sample_summary summary;
};

struct ensemble_time_stats {
    double time = 0.0;
    grid_field mean_field;
    std::vector<moment_stats> moments;
};

struct ensemble_stats {
    std::size_t n_paths = 0;
    std::vector<ensemble_time_stats> per_time;
};

struct monte_carlo_plan {
    problem_spec spec;
    std::size_t n = 256;
    std::vector<double> times;
    std::uint64_t seed = 1;
    int path_level = 8;
    scheme_config scheme;
    std::vector<double> powers{1.0, 2.0, 4.0};
    std::function<double(const point&)> weight = [](const point&) { return 1.0; };
    unsigned threads = 1;
};

/// E int |u|^p w dx with t-statistic half-widths, paths keyed by stream id.
inline ensemble_stats monte_carlo(const monte_carlo_plan& plan, std::size_t n_paths)
{
    if (n_paths < 2)
        fail(errc::insufficient_paths, "monte carlo needs at least two paths");
    if (plan.times.empty())
        fail(errc::malformed_spec, "monte carlo needs observation times");
    const double T = plan.spec.final_time;
    std::vector<trajectory> runs(n_paths);
    parallel_for(n_paths, plan.threads, [&](std::size_t m) {
        const auto path = sample_path(plan.seed, m, T, plan.path_level);
        auto traj = solve_problem(plan.spec, plan.n, path, plan.scheme, plan.times);
        traj.steps.clear();
        runs[m] = std::move(traj);
    });
    ensemble_stats out;
    out.n_paths = n_paths;
    for (std::size_t t = 0; t < plan.times.size(); ++t) {
        ensemble_time_stats st;
        st.time = plan.times[t];
        st.mean_field = runs[0].snapshots.at(t + 1).field;
        std::vector<double> w(st.mean_field.size());
        for (std::size_t k = 0; k < w.size(); ++k)
            w[k] = plan.weight(st.mean_field.position(k));
        for (std::size_t k = 0; k < st.mean_field.size(); ++k) {
            double acc = 0.0;
            for (std::size_t m = 0; m < n_paths; ++m)
                acc += runs[m].snapshots.at(t + 1).field.u[k];
            st.mean_field.u[k] = acc / static_cast<double>(n_paths);
        }
        for (double p : plan.powers) {
            std::vector<double> samples(n_paths);
            for (std::size_t m = 0; m < n_paths; ++m) {
                const auto& f = runs[m].snapshots.at(t + 1).field;
                std::vector<double> terms(f.size());
                for (std::size_t k = 0; k < f.size(); ++k)
                    terms[k] = std::pow(std::abs(f.u[k]), p) * w[k];
                samples[m] = pairwise_sum(terms) * f.cell_volume();
            }
            st.moments.push_back({p, summarize(samples)});
        }
        out.per_time.push_back(std::move(st));
    }
    return out;
}

} // namespace sclhom
