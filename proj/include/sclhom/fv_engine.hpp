#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "brownian.hpp"
#include "effective_flux.hpp"
#include "error.hpp"
#include "model_catalog.hpp"
#include "numeric.hpp"

namespace sclhom {

enum class flux_kind { godunov, engquist_osher, rusanov };

inline flux_kind parse_flux_kind(const std::string& name)
{
    if (name == "godunov")
        return flux_kind::godunov;
    if (name == "engquist-osher" || name == "eo")
        return flux_kind::engquist_osher;
    if (name == "rusanov")
        return flux_kind::rusanov;
    fail(errc::unknown_kind, "unknown numerical flux '" + name + "'");
}

namespace detail {

/// Points where f may attain an extremum inside [a, b]: endpoints and declared critical points.
template <class Fn>
void for_each_candidate(const flux_component& f, double a, double b, Fn&& fn)
{
    fn(a);
    fn(b);
    for (double c : f.critical_points)
        if (c > a && c < b)
            fn(c);
}

/// int_a^b max(f', 0) using the declared critical points to split [a, b] into
/// monotone pieces.
inline double positive_variation(const flux_component& f, double a, double b)
{
    if (a == b)
        return 0.0;
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    std::vector<double> knots{lo};
    for (double c : f.critical_points)
        if (c > lo && c < hi)
            knots.push_back(c);
    knots.push_back(hi);
    std::sort(knots.begin(), knots.end());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k)
        total += std::max(f.f(knots[k + 1]) - f.f(knots[k]), 0.0);
    return b > a ? total : -total;
}

/// max |f'| on [a, b]: endpoints, critical points and 31 interior samples.
inline double max_abs_derivative(const flux_component& f, double a, double b)
{
    double lo = std::min(a, b);
    double hi = std::max(a, b);
    double m = std::max(std::abs(f.df(lo)), std::abs(f.df(hi)));
    if (hi > lo)
        for (int k = 1; k < 32; ++k)
            m = std::max(m, std::abs(f.df(lo + (hi - lo) * k / 32.0)));
    return m;
}

} // namespace detail

/// Two-point monotone numerical flux for a scalar flux f.
inline double numerical_flux(double uL, double uR, const flux_component& f, flux_kind kind)
{
    switch (kind) {
    case flux_kind::godunov: {
        if (uL == uR)
            return f.f(uL);
        if (uL < uR) {
            double m = std::numeric_limits<double>::infinity();
            detail::for_each_candidate(f, uL, uR, [&](double u) { m = std::min(m, f.f(u)); });
            return m;
        }
        double m = -std::numeric_limits<double>::infinity();
        detail::for_each_candidate(f, uR, uL, [&](double u) { m = std::max(m, f.f(u)); });
        return m;
    }
    case flux_kind::engquist_osher:
        if (uL == uR)
            return f.f(uL);
        return f.f(uR) - detail::positive_variation(f, uL, uR);
    case flux_kind::rusanov: {
        if (uL == uR)
            return f.f(uL);
        const double s = detail::max_abs_derivative(f, uL, uR);
        return 0.5 * (f.f(uL) + f.f(uR)) - 0.5 * s * (uR - uL);
    }
    }
    fail(errc::unknown_kind, "unknown numerical flux kind");
}

/// Cell averages on a uniform grid over the box [-L, L)^d.
struct grid_field {
    int dim = 1;
    double half_width = 1.0;
    std::size_t n = 0;
    boundary_mode boundary = boundary_mode::periodic;
    double time = 0.0;
    std::vector<double> u;
    /// Far-field ghost cell values (1-D only).
    double ghost_left = 0.0;
    double ghost_right = 0.0;

    double dx() const { return 2.0 * half_width / static_cast<double>(n); }
    double center(std::size_t i) const { return -half_width + (static_cast<double>(i) + 0.5) * dx(); }
    double face(std::size_t i) const { return -half_width + static_cast<double>(i) * dx(); }
    std::size_t size() const { return u.size(); }
    std::size_t index(std::size_t i, std::size_t j) const { return i + n * j; }
    point position(std::size_t idx) const
    {
        if (dim == 1)
            return {center(idx), 0.0};
        return {center(idx % n), center(idx / n)};
    }
    double cell_volume() const { return dim == 1 ? dx() : dx() * dx(); }

    double min() const { return *std::min_element(u.begin(), u.end()); }
    double max() const { return *std::max_element(u.begin(), u.end()); }

    /// Sum of u times the cell volume (pairwise summation, schedule independent).
    double mass() const { return pairwise_sum(u) * cell_volume(); }

    bool same_grid(const grid_field& o) const
    {
        return dim == o.dim && n == o.n && half_width == o.half_width;
    }
};

template <class Fn>
grid_field make_field(const box_domain& domain, std::size_t n, Fn&& value)
{
    if (n < 2)
        fail(errc::malformed_spec, "grid needs at least two cells per axis");
    if (domain.dimension == 2 && domain.boundary == boundary_mode::far_field)
        fail(errc::malformed_spec, "far-field boundaries are only supported in one dimension");
    grid_field f;
    f.dim = domain.dimension;
    f.half_width = domain.half_width;
    f.n = n;
    f.boundary = domain.boundary;
    const std::size_t cells = f.dim == 1 ? n : n * n;
    f.u.resize(cells);
    for (std::size_t k = 0; k < cells; ++k)
        f.u[k] = value(f.position(k));
    if (f.boundary == boundary_mode::far_field) {
        f.ghost_left = value(point{f.center(0) - f.dx(), 0.0});
        f.ghost_right = value(point{f.center(n - 1) + f.dx(), 0.0});
    }
    return f;
}

struct scheme_config {
    flux_kind kind = flux_kind::godunov;
    double cfl = 0.9;
    double viscosity = 0.0;
    bool well_balanced = true;
    /// Finest path level is at least this (forces the time step).
    int min_level = 0;
    bool record_steps = false;
};

/// Data kept per time step for entropy-production estimates (1-D only).
struct step_record {
    double dt = 0.0;
    double dW = 0.0;
    std::vector<double> before;
    double ghost_left = 0.0;
    double ghost_right = 0.0;
    std::vector<double> after_deterministic;
    std::vector<double> after;
    /// Face velocity multiplier a_{i+1/2}, faces 0..n (face i is the left face of cell i).
    std::vector<double> face_speed;
};

struct snapshot {
    double time = 0.0;
    double W = 0.0;
    grid_field field;
};

struct trajectory {
    std::vector<snapshot> snapshots;
    std::vector<step_record> steps;
    int level = 0;
    std::size_t step_count = 0;
    /// Flux used by the deterministic step, for entropy bookkeeping.
    flux_component flux;
    flux_kind kind = flux_kind::godunov;
    double viscosity = 0.0;

    const grid_field& final_field() const { return snapshots.back().field; }
};

namespace detail {

/// Neighbour value along an axis with periodic wrap or far-field ghost.
inline double neighbour(const grid_field& f, std::size_t i, std::size_t j, int axis, int offset)
{
    const auto n = static_cast<long>(f.n);
    long a = static_cast<long>(axis == 0 ? i : j) + offset;
    if (a < 0 || a >= n) {
        if (f.boundary == boundary_mode::far_field)
            return a < 0 ? f.ghost_left : f.ghost_right;
        a = (a + n) % n;
    }
    const auto aa = static_cast<std::size_t>(a);
    return axis == 0 ? f.u[f.index(aa, j)] : f.u[f.index(i, aa)];
}

inline double oriented_flux(double a, double uL, double uR, const flux_component& f, flux_kind kind)
{
    if (a == 0.0)
        return 0.0;
    return a > 0.0 ? a * numerical_flux(uL, uR, f, kind) : a * numerical_flux(uR, uL, f, kind);
}

} // namespace detail

/// Stochastic transport with oscillatory divergence-free velocity,
/// discretized in the conservative form div(a(x/eps) f(u)).
struct transport_law {
    flux_component flux;
    velocity_field velocity;
    double epsilon = 1.0;
    stochastic_flow_model model;

    double face_velocity(int axis, const point& x_face) const
    {
        return velocity.component(axis, {x_face[0] / epsilon, x_face[1] / epsilon});
    }

    double max_dt(const grid_field& f, const scheme_config& cfg) const
    {
        const double fp = detail::max_abs_derivative(flux, f.min(), f.max());
        double rate = 0.0;
        for (int axis = 0; axis < f.dim; ++axis)
            rate += velocity.sup_component(axis) * fp / f.dx();
        return rate > 0.0 ? cfg.cfl / rate : std::numeric_limits<double>::infinity();
    }

    void deterministic_step(const grid_field& in, grid_field& out, double dt, const scheme_config& cfg,
                            step_record* rec) const
    {
        const double lambda = dt / in.dx();
        const std::size_t n = in.n;
        if (in.dim == 1) {
            std::vector<double> F(n + 1);
            if (rec)
                rec->face_speed.resize(n + 1);
            for (std::size_t i = 0; i <= n; ++i) {
                const double uL = i == 0 ? detail::neighbour(in, 0, 0, 0, -1) : in.u[i - 1];
                const double uR = i == n ? detail::neighbour(in, n - 1, 0, 0, 1) : in.u[i];
                const double a = face_velocity(0, {in.face(i), 0.0});
                F[i] = detail::oriented_flux(a, uL, uR, flux, cfg.kind);
                if (rec)
                    rec->face_speed[i] = a;
            }
            if (in.boundary == boundary_mode::periodic)
                F[n] = F[0];
            for (std::size_t i = 0; i < n; ++i)
                out.u[i] = in.u[i] - lambda * (F[i + 1] - F[i]);
            return;
        }
        // 2-D, periodic: unsplit dimension-by-dimension update
        std::vector<double> Fx(n * n), Fy(n * n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t k = in.index(i, j);
                const double ax = face_velocity(0, {in.face(i), in.center(j)});
                const double ay = face_velocity(1, {in.center(i), in.face(j)});
                Fx[k] = detail::oriented_flux(ax, detail::neighbour(in, i, j, 0, -1), in.u[k], flux, cfg.kind);
                Fy[k] = detail::oriented_flux(ay, detail::neighbour(in, i, j, 1, -1), in.u[k], flux, cfg.kind);
            }
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t k = in.index(i, j);
                const std::size_t kx = in.index((i + 1) % n, j);
                const std::size_t ky = in.index(i, (j + 1) % n);
                out.u[k] = in.u[k] - lambda * ((Fx[kx] - Fx[k]) + (Fy[ky] - Fy[k]));
            }
    }

    double noise_map(double u, double delta) const { return noise_flow(u, delta, model); }
};

/// Stiff oscillatory source (1/eps) V'(x_1/eps), well-balanced through the
/// equilibrium variable w = f_1(u) - V(x_1/eps). With V = 0 this is a plain
/// conservation law, which is how the effective equation is solved.
struct stiff_law {
    scalar_flux flux;
    oscillatory_potential potential;
    double epsilon = 1.0;
    stochastic_flow_model model;

    double v_at(double x) const { return potential(x / epsilon); }

    /// For increasing f_1 the Godunov and Engquist-Osher fluxes pick the left
    /// state, so the reconstructed interface flux minus V at the face is the
    /// left equilibrium value.
    bool upwind_shortcut(const scheme_config& cfg) const
    {
        return flux.delta0 > 0.0 && cfg.kind != flux_kind::rusanov;
    }

    double reconstruct(double w, double v_face, double guess) const
    {
        return model.g.forward(w + v_face, guess);
    }

    double max_dt(const grid_field& f, const scheme_config& cfg) const
    {
        const double lo = f.min();
        const double hi = f.max();
        double s1 = detail::max_abs_derivative(flux[0], lo, hi);
        if (!potential.is_zero() && cfg.kind == flux_kind::rusanov && cfg.well_balanced) {
            // interface states leave the cell range; bound by their derivative ratio
            const double vb = 2.0 * potential.bound();
            const double ulo = model.g.forward(flux[0].f(lo) - vb, lo);
            const double uhi = model.g.forward(flux[0].f(hi) + vb, hi);
            const double smax = detail::max_abs_derivative(flux[0], ulo, uhi);
            double dmin = std::numeric_limits<double>::infinity();
            for (int k = 0; k <= 32; ++k)
                dmin = std::min(dmin, flux[0].df(ulo + (uhi - ulo) * k / 32.0));
            s1 = smax * smax / dmin;
        }
        double rate = s1 / f.dx();
        for (int axis = 1; axis < f.dim; ++axis)
            rate += detail::max_abs_derivative(flux[static_cast<std::size_t>(axis)], lo, hi) / f.dx();
        return rate > 0.0 ? cfg.cfl / rate : std::numeric_limits<double>::infinity();
    }

    /// Interface flux G_{i+1/2} in the x_1 direction (physical flux minus V at the face).
    double x1_flux(double uL, double uR, double xL, double xR, double x_face, const scheme_config& cfg) const
    {
        const auto& f1 = flux[0];
        if (potential.is_zero())
            return numerical_flux(uL, uR, f1, cfg.kind);
        const double vf = v_at(x_face);
        if (!cfg.well_balanced)
            return numerical_flux(uL, uR, f1, cfg.kind);
        const double wL = f1.f(uL) - v_at(xL);
        if (upwind_shortcut(cfg))
            return wL;
        const double wR = f1.f(uR) - v_at(xR);
        const double sL = reconstruct(wL, vf, uL);
        const double sR = reconstruct(wR, vf, uR);
        return numerical_flux(sL, sR, f1, cfg.kind) - vf;
    }

    void deterministic_step(const grid_field& in, grid_field& out, double dt, const scheme_config& cfg,
                            step_record* rec) const
    {
        const double lambda = dt / in.dx();
        const std::size_t n = in.n;
        const bool naive_source = !cfg.well_balanced && !potential.is_zero();
        if (in.dim == 1) {
            std::vector<double> F(n + 1);
            for (std::size_t i = 0; i <= n; ++i) {
                const double uL = i == 0 ? detail::neighbour(in, 0, 0, 0, -1) : in.u[i - 1];
                const double uR = i == n ? detail::neighbour(in, n - 1, 0, 0, 1) : in.u[i];
                const double xf = in.face(i);
                F[i] = x1_flux(uL, uR, xf - 0.5 * in.dx(), xf + 0.5 * in.dx(), xf, cfg);
            }
            if (in.boundary == boundary_mode::periodic)
                F[n] = F[0];
            // the entropy flux is only defined without the stiff source
            if (rec && potential.is_zero())
                rec->face_speed.assign(n + 1, 1.0);
            for (std::size_t i = 0; i < n; ++i) {
                out.u[i] = in.u[i] - lambda * (F[i + 1] - F[i]);
                if (naive_source)
                    out.u[i] += dt * potential.derivative(in.center(i) / epsilon) / epsilon;
            }
            return;
        }
        const auto& f2 = flux[1];
        std::vector<double> Fx(n * n), Fy(n * n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t k = in.index(i, j);
                const double xf = in.face(i);
                Fx[k] = x1_flux(detail::neighbour(in, i, j, 0, -1), in.u[k], xf - 0.5 * in.dx(), xf + 0.5 * in.dx(),
                                xf, cfg);
                Fy[k] = numerical_flux(detail::neighbour(in, i, j, 1, -1), in.u[k], f2, cfg.kind);
            }
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t k = in.index(i, j);
                const std::size_t kx = in.index((i + 1) % n, j);
                const std::size_t ky = in.index(i, (j + 1) % n);
                out.u[k] = in.u[k] - lambda * ((Fx[kx] - Fx[k]) + (Fy[ky] - Fy[k]));
                if (naive_source)
                    out.u[k] += dt * potential.derivative(in.center(i) / epsilon) / epsilon;
            }
    }

    double noise_map(double u, double delta) const
    {
        if (delta == 0.0)
            return u;
        return model.g.forward(model.g.inverse(u) + delta, u);
    }
};

/// Explicit centered heat step u += nu dt Laplacian(u).
inline void viscous_step(grid_field& field, double eps_visc, double dt)
{
    if (eps_visc == 0.0)
        return;
    const double dx = field.dx();
    if (dt > dx * dx / (2.0 * field.dim * eps_visc) * (1.0 + 1e-12))
        fail(errc::stability_violation, "dt exceeds the explicit diffusion bound dx^2/(2 d eps_visc)");
    const double mu = eps_visc * dt / (dx * dx);
    const grid_field in = field;
    const std::size_t n = field.n;
    if (field.dim == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            const double l = detail::neighbour(in, i, 0, 0, -1);
            const double r = detail::neighbour(in, i, 0, 0, 1);
            field.u[i] = in.u[i] + mu * (l - 2.0 * in.u[i] + r);
        }
        return;
    }
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = in.index(i, j);
            const double lap = detail::neighbour(in, i, j, 0, -1) + detail::neighbour(in, i, j, 0, 1) +
                               detail::neighbour(in, i, j, 1, -1) + detail::neighbour(in, i, j, 1, 1) -
                               4.0 * in.u[k];
            field.u[k] = in.u[k] + mu * lap;
        }
}

/// Cellwise exact noise map u -> flow(u, k0 dW), ghost cells included.
template <class Law>
void noise_step(grid_field& field, double dW, const Law& law)
{
    const double delta = law.model.kappa0 * dW;
    if (delta == 0.0)
        return;
    for (double& v : field.u)
        v = law.noise_map(v, delta);
    if (field.boundary == boundary_mode::far_field) {
        field.ghost_left = law.noise_map(field.ghost_left, delta);
        field.ghost_right = law.noise_map(field.ghost_right, delta);
    }
}

inline void noise_step(grid_field& field, double dW, const stochastic_flow_model& model)
{
    const double delta = model.kappa0 * dW;
    if (delta == 0.0)
        return;
    for (double& v : field.u)
        v = noise_flow(v, delta, model);
    if (field.boundary == boundary_mode::far_field) {
        field.ghost_left = noise_flow(field.ghost_left, delta, model);
        field.ghost_right = noise_flow(field.ghost_right, delta, model);
    }
}

/// One deterministic step with the CFL condition checked first.
template <class Law>
grid_field det_step(const Law& law, const grid_field& field, double dt, const scheme_config& cfg)
{
    if (dt > law.max_dt(field, cfg) * (1.0 + 1e-12))
        fail(errc::cfl_violation, "time step " + std::to_string(dt) + " violates the CFL bound");
    grid_field out = field;
    law.deterministic_step(field, out, dt, cfg, nullptr);
    out.time = field.time + dt;
    return out;
}

inline grid_field det_step_p1(const grid_field& field, const transport_law& law, double dt, const scheme_config& cfg)
{
    if (law.velocity.dimension != field.dim)
        fail(errc::grid_mismatch, "velocity dimension does not match the grid");
    return det_step(law, field, dt, cfg);
}

inline grid_field det_step_p2(const grid_field& field, const stiff_law& law, double dt, const scheme_config& cfg)
{
    if (law.flux.dimension() != static_cast<std::size_t>(field.dim))
        fail(errc::grid_mismatch, "flux dimension does not match the grid");
    return det_step(law, field, dt, cfg);
}

namespace detail {

inline long dyadic_index(double t, double T, int level)
{
    const double r = t / T * std::ldexp(1.0, level);
    const double k = std::round(r);
    if (std::abs(r - k) > 1e-9 * std::max(1.0, r))
        return -1;
    return static_cast<long>(k);
}

} // namespace detail

/// Smallest path level whose uniform step satisfies the CFL (and diffusion) bound for `field`.
template <class Law>
int required_level(const Law& law, const grid_field& field, const scheme_config& cfg, double T)
{
    double dt_max = law.max_dt(field, cfg);
    if (cfg.viscosity > 0.0)
        dt_max = std::min(dt_max, field.dx() * field.dx() / (2.0 * field.dim * cfg.viscosity));
    int level = cfg.min_level;
    while (T / std::ldexp(1.0, level) > dt_max) {
        if (++level > brownian_path::max_level)
            fail(errc::level_too_deep, "CFL requires a path finer than level 30");
    }
    return level;
}

/// Lie splitting on the dyadic grid of the Brownian path: deterministic step,
/// optional viscous step, then the exact noise map over the same interval.
/// The path is refined whenever the CFL bound of the current state requires a
/// smaller step; refinement never interpolates W. Snapshots are recorded at
/// t = 0, every requested time and t_target.
template <class Law>
trajectory advance(grid_field field, brownian_path path, const scheme_config& cfg, const Law& law, double t_target,
                   std::vector<double> snapshot_times = {})
{
    const double T = path.final_time();
    if (t_target > T * (1.0 + 1e-12) || t_target < field.time)
        fail(errc::index_out_of_range, "target time outside the path horizon");
    int level = std::max(path.level(), cfg.min_level);
    // targets and snapshots must be dyadic nodes
    snapshot_times.push_back(t_target);
    std::sort(snapshot_times.begin(), snapshot_times.end());
    for (double ts : snapshot_times)
        while (detail::dyadic_index(ts, T, level) < 0)
            if (++level > brownian_path::max_level)
                fail(errc::level_too_deep, "time " + std::to_string(ts) + " is not dyadic");
    path = refine_to(std::move(path), level);

    long j = detail::dyadic_index(field.time, T, level);
    if (j < 0)
        fail(errc::index_out_of_range, "initial time is not a node of the path grid");

    trajectory traj;
    if constexpr (requires { law.velocity; })
        traj.flux = law.flux;
    else
        traj.flux = law.flux[0];
    traj.kind = cfg.kind;
    traj.viscosity = cfg.viscosity;
    traj.snapshots.push_back({field.time, path[static_cast<std::size_t>(j)], field});
    std::size_t next_snap = 0;
    while (next_snap < snapshot_times.size() && snapshot_times[next_snap] <= field.time + 1e-14)
        ++next_snap;

    grid_field work = field;
    while (true) {
        const long target_j = detail::dyadic_index(t_target, T, level);
        if (j >= target_j)
            break;
        double dt = T / std::ldexp(1.0, level);
        double dt_max = law.max_dt(field, cfg);
        if (cfg.viscosity > 0.0)
            dt_max = std::min(dt_max, field.dx() * field.dx() / (2.0 * field.dim * cfg.viscosity));
        if (dt > dt_max) {
            path = refine(path);
            ++level;
            j *= 2;
            continue;
        }
        step_record rec;
        step_record* recp = cfg.record_steps ? &rec : nullptr;
        if (recp) {
            rec.before = field.u;
            rec.ghost_left = field.ghost_left;
            rec.ghost_right = field.ghost_right;
        }
        law.deterministic_step(field, work, dt, cfg, recp);
        if (cfg.viscosity > 0.0)
            viscous_step(work, cfg.viscosity, dt);
        if (recp)
            rec.after_deterministic = work.u;
        const double dW = path.increment(static_cast<std::size_t>(j));
        noise_step(work, dW, law);
        ++j;
        work.time = T * static_cast<double>(j) / std::ldexp(1.0, level);
        std::swap(field.u, work.u);
        field.time = work.time;
        field.ghost_left = work.ghost_left;
        field.ghost_right = work.ghost_right;
        work.ghost_left = field.ghost_left;
        work.ghost_right = field.ghost_right;
        ++traj.step_count;
        if (recp) {
            rec.dt = dt;
            rec.dW = dW;
            rec.after = field.u;
            traj.steps.push_back(std::move(rec));
        }
        while (next_snap < snapshot_times.size() &&
               detail::dyadic_index(snapshot_times[next_snap], T, level) == j) {
            traj.snapshots.push_back({field.time, path[static_cast<std::size_t>(j)], field});
            ++next_snap;
        }
    }
    traj.level = level;
    return traj;
}

// ---------------------------------------------------------------------------
// problem-level drivers

inline transport_law make_law(const transport_problem& p, double eps)
{
    return {p.flux[0], p.velocity, eps, p.model};
}

inline stiff_law make_law(const stiff_source_problem& p, double eps) { return {p.flux, p.potential, eps, p.model}; }

/// u_0(x) = U_0(x, x/eps) sampled at cell centres.
inline grid_field initial_field(const problem_spec& spec, std::size_t n)
{
    const double eps = spec.epsilon;
    if (spec.is_transport()) {
        const auto& tp = spec.transport();
        return make_field(spec.domain, n, [&](const point& x) { return tp.initial(x, {x[0] / eps, x[1] / eps}); });
    }
    const auto& sp = spec.stiff();
    return make_field(spec.domain, n, [&](const point& x) {
        return sp.model.g.forward(sp.potential(x[0] / eps) + sp.v0(x));
    });
}

inline trajectory solve_problem(const problem_spec& spec, std::size_t n, const brownian_path& path,
                                const scheme_config& cfg, const std::vector<double>& snapshot_times = {})
{
    const auto field = initial_field(spec, n);
    if (spec.is_transport())
        return advance(field, path, cfg, make_law(spec.transport(), spec.epsilon), spec.final_time, snapshot_times);
    return advance(field, path, cfg, make_law(spec.stiff(), spec.epsilon), spec.final_time, snapshot_times);
}

/// Law of the homogenized equation: flux fbar, noise flow gbar(fbar_1(u) + delta).
inline stiff_law effective_law(const effective_flux_table& table, double kappa0)
{
    return {table.as_flux(), oscillatory_potential::zero(), 1.0, table.noise_model(kappa0)};
}

/// Solves the homogenized equation from ubar_0 = gbar(v_0(x)).
template <class V0>
trajectory solve_effective(const effective_flux_table& table, double kappa0, const box_domain& domain, std::size_t n,
                           V0&& v0, const brownian_path& path, const scheme_config& cfg, double t_target,
                           const std::vector<double>& snapshot_times = {})
{
    const auto law = effective_law(table, kappa0);
    auto field = make_field(domain, n, [&](const point& x) { return table.gbar(v0(x)); });
    return advance(field, path, cfg, law, t_target, snapshot_times);
}

struct family_result {
    std::vector<trajectory> members;
    /// Weighted average of the members at every snapshot.
    std::vector<snapshot> average;
};

/// Solves the y-parameterized transport equations dU + div(a(y) f(U)) dt = noise
/// with the shared path and averages u = sum_j weights_j U(., ., y_j).
inline family_result solve_family_p1(const problem_spec& spec, std::size_t n, const brownian_path& path,
                                     const std::vector<point>& y_nodes, const std::vector<double>& weights,
                                     scheme_config cfg, const std::vector<double>& snapshot_times = {},
                                     unsigned threads = 1)
{
    if (!spec.is_transport())
        fail(errc::unsupported_velocity_family, "family solve applies to the transport problem");
    if (y_nodes.empty() || y_nodes.size() != weights.size())
        fail(errc::malformed_spec, "y_nodes and weights must be nonempty and of equal length");
    const auto& tp = spec.transport();
    // all members share the time step of the oscillating problem
    const auto law_eps = make_law(tp, spec.epsilon);
    const auto field_eps = initial_field(spec, n);
    cfg.min_level = std::max(cfg.min_level, required_level(law_eps, field_eps, cfg, path.final_time()));

    family_result res;
    res.members.resize(y_nodes.size());
    parallel_for(y_nodes.size(), threads, [&](std::size_t m) {
        const point y = y_nodes[m];
        transport_law law{tp.flux[0], tp.velocity.frozen(y), spec.epsilon, tp.model};
        auto field = make_field(spec.domain, n, [&](const point& x) { return tp.initial(x, y); });
        res.members[m] = advance(field, path, cfg, law, spec.final_time, snapshot_times);
    });
    const auto& first = res.members.front();
    for (std::size_t s = 0; s < first.snapshots.size(); ++s) {
        snapshot avg = first.snapshots[s];
        std::fill(avg.field.u.begin(), avg.field.u.end(), 0.0);
        for (std::size_t m = 0; m < res.members.size(); ++m) {
            const auto& src = res.members[m].snapshots.at(s).field.u;
            for (std::size_t k = 0; k < src.size(); ++k)
                avg.field.u[k] += weights[m] * src[k];
        }
        res.average.push_back(std::move(avg));
    }
    return res;
}

inline void write_snapshot_csv(std::ostream& os, const grid_field& f, const std::vector<double>* extra = nullptr,
                               const char* extra_name = nullptr)
{
    os << (f.dim == 1 ? "x,u" : "x,y,u");
    if (extra)
        os << ',' << extra_name;
    os << '\n';
    char buf[128];
    for (std::size_t k = 0; k < f.size(); ++k) {
        const point p = f.position(k);
        if (f.dim == 1)
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", p[0], f.u[k]);
        else
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", p[0], p[1], f.u[k]);
        os << buf;
        if (extra) {
            std::snprintf(buf, sizeof buf, ",%.17g", (*extra)[k]);
            os << buf;
        }
        os << '\n';
    }
}

} // namespace sclhom
