#pragma once

#include <cmath>
#include <functional>
#include <numbers>

#include "sclhom/model_catalog.hpp"
#include "sclhom/models.hpp"

namespace testing_support {

using namespace sclhom;

inline scalar_flux make_flux(std::vector<flux_component> comps, double u_min, double u_max, double delta0 = 0.0)
{
    scalar_flux f;
    f.components = std::move(comps);
    f.u_min = u_min;
    f.u_max = u_max;
    f.delta0 = delta0;
    return f;
}

/// 1-D or 2-D transport problem.
inline problem_spec p1_spec(flux_component f, velocity_field a, stochastic_flow_model model,
                            std::function<double(const point&, const point&)> u0, double eps, double L, double T,
                            boundary_mode bc = boundary_mode::periodic, double u_min = -3.0, double u_max = 3.0)
{
    transport_problem tp;
    tp.flux = make_flux({std::move(f)}, u_min, u_max);
    tp.velocity = std::move(a);
    tp.model = std::move(model);
    tp.initial = std::move(u0);
    problem_spec s;
    s.variant = std::move(tp);
    s.epsilon = eps;
    s.domain = {s.transport().velocity.dimension, L, bc};
    s.final_time = T;
    return s;
}

inline problem_spec p2_spec(std::vector<flux_component> f, double delta0, oscillatory_potential V, double kappa0,
                            std::function<double(const point&)> v0, double eps, double L, double T,
                            boundary_mode bc = boundary_mode::periodic, double u_min = -3.0, double u_max = 3.0)
{
    stiff_source_problem sp;
    const int dim = static_cast<int>(f.size());
    sp.flux = make_flux(std::move(f), u_min, u_max, delta0);
    sp.potential = std::move(V);
    sp.model = make_stiff_noise_model(sp.flux[0], kappa0);
    sp.v0 = std::move(v0);
    problem_spec s;
    s.variant = std::move(sp);
    s.epsilon = eps;
    s.domain = {dim, L, bc};
    s.final_time = T;
    return s;
}

/// Bisection root of an increasing function, used as an independent oracle.
inline double bisect(const std::function<double(double)>& f, double target, double lo, double hi)
{
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Explicit Euler integration of du = sigma(u) dxi from u0 over [0, delta].
inline double euler_flow(const std::function<double(double)>& sigma, double u0, double delta, double step = 1e-5)
{
    const int n = static_cast<int>(std::ceil(std::abs(delta) / step));
    const double h = delta / n;
    double u = u0;
    for (int i = 0; i < n; ++i)
        u += h * sigma(u);
    return u;
}

} // namespace testing_support
