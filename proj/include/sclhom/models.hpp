#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "error.hpp"
#include "model_catalog.hpp"

// Built-in models addressable by name from configuration files.

namespace sclhom::models {

inline flux_component linear(double c = 1.0)
{
    return {[c](double u) { return c * u; }, [c](double) { return c; }, [](double) { return 0.0; },
            [](double) { return 0.0; }, {}};
}

inline flux_component zero_flux() { return linear(0.0); }

/// u^2 / 2, critical point at 0.
inline flux_component burgers()
{
    return {[](double u) { return 0.5 * u * u; }, [](double u) { return u; }, [](double) { return 1.0; },
            [](double) { return 0.0; }, {0.0}};
}

/// u + u^3 / 3, f' >= 1.
inline flux_component cubic()
{
    return {[](double u) { return u + u * u * u / 3.0; }, [](double u) { return 1.0 + u * u; },
            [](double u) { return 2.0 * u; }, [](double) { return 2.0; }, {}};
}

/// Named scalar flux component; `param` scales the linear flux.
inline flux_component flux_by_name(const std::string& name, double param = 1.0)
{
    if (name == "linear")
        return linear(param);
    if (name == "zero")
        return zero_flux();
    if (name == "burgers")
        return burgers();
    if (name == "cubic")
        return cubic();
    fail(errc::unknown_kind, "unknown flux '" + name + "' (linear, zero, burgers, cubic)");
}

inline bool flux_is_linear(const std::string& name) { return name == "linear" || name == "zero"; }

/// sigma = 1: g(xi) = xi.
inline stochastic_flow_model unit_noise(double kappa0, double u_lo, double u_hi)
{
    auto m = make_transport_noise_model([](double) { return 1.0; }, [](double) { return 0.0; },
                                        [](double) { return 0.0; }, kappa0, u_lo, u_hi, 1.0);
    // exact identity instead of the tabulated ODE flow
    m.g = flow_primitive::from_increasing([](double u) { return u; }, [](double) { return 1.0; });
    return m;
}

/// sigma = sqrt(1 + u^2), h = u: g = sinh.
inline stochastic_flow_model sinh_noise(double kappa0, double u_lo, double u_hi)
{
    return make_transport_noise_model([](double u) { return std::sqrt(1.0 + u * u); },
                                      [](double u) { return u / std::sqrt(1.0 + u * u); },
                                      [](double u) { return u; }, kappa0, u_lo, u_hi, 1.0);
}

inline stochastic_flow_model noise_by_name(const std::string& name, double kappa0, double u_lo, double u_hi)
{
    if (name == "one" || name == "unit")
        return unit_noise(kappa0, u_lo, u_hi);
    if (name == "sinh")
        return sinh_noise(kappa0, u_lo, u_hi);
    fail(errc::unknown_kind, "unknown noise '" + name + "' (one, sinh)");
}

/// sin(z) + sin(sqrt(2) z).
inline oscillatory_potential quasi_periodic_pair(double amplitude = 1.0)
{
    oscillatory_potential v;
    v.modes = {{amplitude, 0.5 / std::numbers::pi, 0.0}, {amplitude, std::numbers::sqrt2 * 0.5 / std::numbers::pi, 0.0}};
    v.kind = potential_kind::quasi_periodic;
    v.period = 0.0;
    return v;
}

inline oscillatory_potential potential_by_name(const std::string& name, double amplitude = 1.0,
                                               double frequency = 1.0)
{
    if (name == "sin")
        return oscillatory_potential::sine(amplitude, frequency);
    if (name == "zero")
        return oscillatory_potential::zero();
    if (name == "quasi")
        return quasi_periodic_pair(amplitude);
    fail(errc::unknown_kind, "unknown potential '" + name + "' (sin, zero, quasi)");
}

inline velocity_field velocity_by_name(const std::string& name, int dim, double c0, double c1, double amplitude)
{
    if (name == "constant")
        return velocity_field::constant(c0, c1, dim);
    if (name == "shear") {
        if (dim != 2)
            fail(errc::unsupported_velocity_family, "shear velocity requires d = 2");
        return velocity_field::shear(c1, oscillatory_potential::sine(amplitude, 1.0));
    }
    fail(errc::unsupported_velocity_family,
         "velocity '" + name + "' has no closed-form projection (constant, shear)");
}

} // namespace sclhom::models
