#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "numeric.hpp"

namespace sclhom {

using point = std::array<double, 2>;

/// One component f_k of the flux together with its derivatives. d3f is only
/// needed for the first component of a stiff-source problem.
struct flux_component {
    scalar_fn f;
    scalar_fn df;
    scalar_fn d2f;
    scalar_fn d3f;
    /// Declared zeros of df inside the evaluation range (transport problem).
    std::vector<double> critical_points;
};

struct scalar_flux {
    std::vector<flux_component> components;
    /// Lower bound for f_1' (stiff-source problem only).
    double delta0 = 0.0;
    double u_min = -1.0;
    double u_max = 1.0;

    const flux_component& operator[](std::size_t k) const { return components.at(k); }
    std::size_t dimension() const { return components.size(); }
};

/// The pair g, g^{-1} generating the exact pathwise noise map. For the
/// transport problem g solves g' = sigma(g), g(0) = 0; for the stiff-source
/// problem g is the inverse of f_1.
class flow_primitive {
public:
    flow_primitive() = default;

    /// Integrates g' = sigma(g) with classical RK4 on a uniform xi-grid of
    /// spacing h until g covers [u_lo, u_hi] (and 0). g is then the monotone
    /// cubic Hermite interpolant of the nodes with slopes sigma(g_k).
    static flow_primitive from_ode(const scalar_fn& sigma, double u_lo, double u_hi, double h = 1e-3,
                                   std::size_t max_nodes = 4'000'000)
    {
        if (!(u_lo < u_hi))
            fail(errc::malformed_spec, "empty range for the flow primitive");
        const double lo = std::min(u_lo, 0.0);
        const double hi = std::max(u_hi, 0.0);
        auto march = [&](double step, auto reached) {
            std::vector<double> out{0.0};
            double y = 0.0;
            while (!reached(y)) {
                const double k1 = sigma(y);
                const double k2 = sigma(y + 0.5 * step * k1);
                const double k3 = sigma(y + 0.5 * step * k2);
                const double k4 = sigma(y + step * k3);
                y += step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
                if (!std::isfinite(y) || out.size() > max_nodes)
                    fail(errc::malformed_spec, "flow primitive ODE did not reach the evaluation range");
                out.push_back(y);
            }
            return out;
        };
        // one extra node past each end keeps the range endpoints interior
        auto fwd = march(h, [&, extra = 0](double y) mutable { return y > hi && ++extra > 1; });
        auto bwd = march(-h, [&, extra = 0](double y) mutable { return y < lo && ++extra > 1; });

        std::vector<double> values;
        values.reserve(fwd.size() + bwd.size() - 1);
        for (auto it = bwd.rbegin(); it != bwd.rend(); ++it)
            values.push_back(*it);
        values.insert(values.end(), fwd.begin() + 1, fwd.end());
        std::vector<double> slopes(values.size());
        for (std::size_t k = 0; k < values.size(); ++k)
            slopes[k] = sigma(values[k]);

        const double x0 = -h * static_cast<double>(bwd.size() - 1);
        flow_primitive p;
        p.table_ = std::make_shared<hermite_table>(x0, h, std::move(values), std::move(slopes), true);
        return p;
    }

    /// g = f_1^{-1}, g^{-1} = f_1 for a strictly increasing f_1.
    static flow_primitive from_increasing(scalar_fn f1, scalar_fn df1)
    {
        flow_primitive p;
        p.f1_ = std::move(f1);
        p.df1_ = std::move(df1);
        return p;
    }

    /// Wraps an existing monotone table as g^{-1} (the table maps u to xi).
    static flow_primitive from_inverse_table(std::shared_ptr<const hermite_table> inverse_table)
    {
        flow_primitive p;
        p.inverse_table_ = std::move(inverse_table);
        return p;
    }

    bool empty() const { return !table_ && !f1_ && !inverse_table_; }

    double forward(double xi) const
    {
        if (table_)
            return (*table_)(xi);
        if (inverse_table_)
            return inverse_table_->inverse(xi);
        return invert_f1(xi, xi);
    }

    /// forward(xi) with a starting guess for the root solve (stiff-source case).
    double forward(double xi, double guess) const
    {
        if (f1_)
            return invert_f1(xi, guess);
        return forward(xi);
    }

    double inverse(double u) const
    {
        if (table_)
            return table_->inverse(u);
        if (inverse_table_)
            return (*inverse_table_)(u);
        return f1_(u);
    }

    double forward_derivative(double xi) const
    {
        if (table_)
            return table_->derivative(xi);
        if (inverse_table_)
            return 1.0 / inverse_table_->derivative(forward(xi));
        return 1.0 / df1_(forward(xi));
    }

    /// Range of xi on which forward() is defined (infinite for f_1^{-1}).
    double xi_min() const
    {
        if (table_)
            return table_->x_min();
        if (inverse_table_)
            return inverse_table_->values().front();
        return -std::numeric_limits<double>::infinity();
    }
    double xi_max() const
    {
        if (table_)
            return table_->x_max();
        if (inverse_table_)
            return inverse_table_->values().back();
        return std::numeric_limits<double>::infinity();
    }

private:
    std::shared_ptr<const hermite_table> table_;
    std::shared_ptr<const hermite_table> inverse_table_;
    scalar_fn f1_;
    scalar_fn df1_;

    double invert_f1(double w, double guess) const
    {
        if (!std::isfinite(w))
            fail(errc::range_exceeded, "non-finite argument to f1^{-1}");
        const double f_guess = f1_(guess);
        if (f_guess == w)
            return guess;
        const double d = df1_(guess);
        double step = std::abs(w - f_guess) / std::max(d, 1e-300);
        step = std::clamp(step, 1e-12, 1e6) * 1.5;
        auto [lo, hi] = bracket_increasing(f1_, w, guess, step);
        return solve_increasing(f1_, df1_, w, lo, hi);
    }
};

enum class problem_kind { transport, stiff_source };

struct stochastic_flow_model {
    problem_kind kind = problem_kind::transport;
    scalar_fn sigma;
    scalar_fn dsigma;
    scalar_fn h;
    flow_primitive g;
    double kappa0 = 0.0;
    /// Lower bound declared for sigma (transport problem).
    double sigma_min = 0.0;
};

/// sigma, h and g = f_1^{-1} all derived from f_1 (stiff-source problem).
inline stochastic_flow_model make_stiff_noise_model(const flux_component& f1, double kappa0)
{
    stochastic_flow_model m;
    m.kind = problem_kind::stiff_source;
    m.sigma = [df = f1.df](double u) { return 1.0 / df(u); };
    m.dsigma = [df = f1.df, d2f = f1.d2f](double u) {
        const double d = df(u);
        return -d2f(u) / (d * d);
    };
    m.h = [df = f1.df, d2f = f1.d2f](double u) {
        const double d = df(u);
        return -d2f(u) / (d * d * d);
    };
    m.g = flow_primitive::from_increasing(f1.f, f1.df);
    m.kappa0 = kappa0;
    return m;
}

inline stochastic_flow_model make_transport_noise_model(scalar_fn sigma, scalar_fn dsigma, scalar_fn h,
                                                        double kappa0, double u_lo, double u_hi,
                                                        double sigma_min, double xi_step = 1e-3)
{
    stochastic_flow_model m;
    m.kind = problem_kind::transport;
    m.g = flow_primitive::from_ode(sigma, u_lo, u_hi, xi_step);
    m.sigma = std::move(sigma);
    m.dsigma = std::move(dsigma);
    m.h = std::move(h);
    m.kappa0 = kappa0;
    m.sigma_min = sigma_min;
    return m;
}

struct potential_mode {
    double amplitude = 0.0;
    double frequency = 0.0;
    double phase = 0.0;
};

enum class potential_kind { periodic, quasi_periodic };

/// V(z) = offset + sum_j A_j sin(2 pi lambda_j z + phi_j).
struct oscillatory_potential {
    std::vector<potential_mode> modes;
    double offset = 0.0;
    potential_kind kind = potential_kind::periodic;
    /// Fundamental period (periodic kind).
    double period = 1.0;

    double operator()(double z) const
    {
        double v = offset;
        for (const auto& m : modes)
            v += m.amplitude * std::sin(2.0 * std::numbers::pi * m.frequency * z + m.phase);
        return v;
    }

    double derivative(double z) const
    {
        double v = 0.0;
        for (const auto& m : modes) {
            const double w = 2.0 * std::numbers::pi * m.frequency;
            v += m.amplitude * w * std::cos(w * z + m.phase);
        }
        return v;
    }

    double bound() const
    {
        double b = std::abs(offset);
        for (const auto& m : modes)
            b += std::abs(m.amplitude);
        return b;
    }

    double mean() const
    {
        double v = offset;
        for (const auto& m : modes)
            if (m.frequency == 0.0)
                v += m.amplitude * std::sin(m.phase);
        return v;
    }

    double max_frequency() const
    {
        double f = 0.0;
        for (const auto& m : modes)
            f = std::max(f, std::abs(m.frequency));
        return f;
    }

    bool is_zero() const
    {
        if (offset != 0.0)
            return false;
        for (const auto& m : modes)
            if (m.amplitude != 0.0)
                return false;
        return true;
    }

    static oscillatory_potential zero() { return {}; }

    static oscillatory_potential sine(double amplitude = 1.0, double frequency = 1.0)
    {
        oscillatory_potential v;
        v.modes.push_back({amplitude, frequency, 0.0});
        v.period = 1.0 / frequency;
        return v;
    }
};

struct constant_velocity {
    point c{0.0, 0.0};
};

/// a(y) = (0, c1 + b(y_1)), divergence-free and invariant along its own flow.
struct shear_velocity {
    double c1 = 0.0;
    oscillatory_potential b;
};

struct velocity_field {
    std::variant<constant_velocity, shear_velocity> family;
    int dimension = 1;

    double component(int axis, const point& y) const
    {
        if (const auto* cst = std::get_if<constant_velocity>(&family))
            return cst->c[static_cast<std::size_t>(axis)];
        const auto& sh = std::get<shear_velocity>(family);
        return axis == 0 ? 0.0 : sh.c1 + sh.b(y[0]);
    }

    /// sup_y |a_axis(y)|.
    double sup_component(int axis) const
    {
        if (const auto* cst = std::get_if<constant_velocity>(&family))
            return std::abs(cst->c[static_cast<std::size_t>(axis)]);
        const auto& sh = std::get<shear_velocity>(family);
        return axis == 0 ? 0.0 : std::abs(sh.c1) + sh.b.bound();
    }

    bool is_constant() const { return std::holds_alternative<constant_velocity>(family); }

    /// The member of the y-family with frozen coefficient a(y).
    velocity_field frozen(const point& y) const
    {
        velocity_field v;
        v.dimension = dimension;
        v.family = constant_velocity{{component(0, y), component(1, y)}};
        return v;
    }

    static velocity_field constant(double c0, double c1 = 0.0, int dim = 1)
    {
        return {constant_velocity{{c0, c1}}, dim};
    }
    static velocity_field shear(double c1, oscillatory_potential b) { return {shear_velocity{c1, std::move(b)}, 2}; }
};

enum class boundary_mode { periodic, far_field };

struct box_domain {
    int dimension = 1;
    double half_width = 1.0;
    boundary_mode boundary = boundary_mode::periodic;
};

struct transport_problem {
    scalar_flux flux;
    velocity_field velocity;
    stochastic_flow_model model;
    /// U_0(x, y).
    std::function<double(const point&, const point&)> initial;
};

struct stiff_source_problem {
    scalar_flux flux;
    oscillatory_potential potential;
    stochastic_flow_model model;
    /// v_0(x); the initial data is u_0(x, y) = g(V(y) + v_0(x)).
    std::function<double(const point&)> v0;
};

struct problem_spec {
    std::variant<transport_problem, stiff_source_problem> variant;
    double epsilon = 1.0;
    box_domain domain;
    double final_time = 1.0;

    bool is_transport() const { return std::holds_alternative<transport_problem>(variant); }
    const transport_problem& transport() const { return std::get<transport_problem>(variant); }
    const stiff_source_problem& stiff() const { return std::get<stiff_source_problem>(variant); }
    const stochastic_flow_model& model() const
    {
        return is_transport() ? transport().model : stiff().model;
    }
};

/// Exact pathwise solution map of du = k0 sigma(u) dW + k0^2 h(u) dt / 2 over
/// an increment delta = k0 dW: u -> g(g^{-1}(u) + delta).
inline double noise_flow(double u, double delta, const stochastic_flow_model& model)
{
    if (delta == 0.0)
        return u;
    const double xi = model.g.inverse(u) + delta;
    if (xi < model.g.xi_min() || xi > model.g.xi_max())
        fail(errc::range_exceeded, "noise flow argument " + std::to_string(xi) + " leaves the range of g");
    return model.g.forward(xi, u);
}

/// psi_alpha(t) = g(alpha + k0 W(t)) for the transport problem.
inline double special_solution_p1(double alpha, double /*t*/, double w_t, const stochastic_flow_model& model)
{
    const double xi = alpha + model.kappa0 * w_t;
    if (xi < model.g.xi_min() || xi > model.g.xi_max())
        fail(errc::range_exceeded, "special solution argument " + std::to_string(xi) + " leaves the range of g");
    return model.g.forward(xi);
}

/// psi_alpha(t, y) = g(V(y) + k0 W(t) + alpha) for the stiff-source problem.
inline double special_solution_p2(double alpha, double y, double /*t*/, double w_t,
                                  const oscillatory_potential& potential, const stochastic_flow_model& model)
{
    return model.g.forward(potential(y) + model.kappa0 * w_t + alpha);
}

// ---------------------------------------------------------------------------
// validation

struct validation_entry {
    std::string name;
    bool pass = true;
    double worst_residual = 0.0;
};

struct validation_report {
    std::vector<validation_entry> entries;

    bool pass() const
    {
        for (const auto& e : entries)
            if (!e.pass)
                return false;
        return true;
    }

    const validation_entry* find(const std::string& name) const
    {
        for (const auto& e : entries)
            if (e.name == name)
                return &e;
        return nullptr;
    }
};

namespace detail {

inline double rel_residual(double got, double want)
{
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

inline void check_flux(const scalar_flux& flux, problem_kind kind, validation_report& report,
                       std::size_t samples)
{
    if (flux.components.empty())
        fail(errc::malformed_spec, "flux has no components");
    const auto us = linspace(flux.u_min, flux.u_max, samples);
    if (kind == problem_kind::stiff_source) {
        validation_entry lower{"f1_prime_lower_bound", true, 0.0};
        for (double u : us) {
            const double gap = flux[0].df(u) - flux.delta0;
            if (gap < 0.0) {
                lower.pass = false;
                lower.worst_residual = std::max(lower.worst_residual, -gap);
            }
        }
        report.entries.push_back(lower);
        validation_entry mono{"fk_prime_nonnegative", true, 0.0};
        for (std::size_t k = 1; k < flux.dimension(); ++k)
            for (double u : us) {
                const double d = flux[k].df(u);
                if (d < 0.0) {
                    mono.pass = false;
                    mono.worst_residual = std::max(mono.worst_residual, -d);
                }
            }
        report.entries.push_back(mono);
        return;
    }
    // transport: every sign change or vanishing of f' must sit at a declared zero
    validation_entry zeros{"f_prime_zero_set", true, 0.0};
    const auto& f = flux[0];
    const double du = us.size() > 1 ? us[1] - us[0] : 1.0;
    auto declared_near = [&](double a, double b) {
        for (double z : f.critical_points)
            if (z >= a - du && z <= b + du)
                return true;
        return false;
    };
    for (double z : f.critical_points)
        if (z < flux.u_min || z > flux.u_max) {
            zeros.pass = false;
            zeros.worst_residual = std::max(zeros.worst_residual, 1.0);
        }
    for (std::size_t i = 0; i < us.size(); ++i) {
        const double d = f.df(us[i]);
        if (std::abs(d) <= 1e-14 && !declared_near(us[i], us[i])) {
            zeros.pass = false;
            zeros.worst_residual = std::max(zeros.worst_residual, std::abs(d) + 1.0);
        }
        if (i + 1 < us.size()) {
            const double d1 = f.df(us[i + 1]);
            if (d * d1 < 0.0 && !declared_near(us[i], us[i + 1])) {
                zeros.pass = false;
                zeros.worst_residual = std::max(zeros.worst_residual, 1.0);
            }
        }
    }
    report.entries.push_back(zeros);
}

inline void check_model(const scalar_flux& flux, const stochastic_flow_model& m, validation_report& report,
                        std::size_t samples)
{
    const auto us = linspace(flux.u_min, flux.u_max, samples);
    if (m.kind == problem_kind::transport) {
        validation_entry pos{"sigma_positive", true, 0.0};
        double smin = std::numeric_limits<double>::infinity();
        for (double u : us)
            smin = std::min(smin, m.sigma(u));
        pos.worst_residual = smin;
        pos.pass = smin > 0.0 && smin >= m.sigma_min;
        report.entries.push_back(pos);

        validation_entry hs{"h_equals_sigma_prime_sigma", true, 0.0};
        for (double u : us) {
            const double want = m.dsigma(u) * m.sigma(u);
            const double got = m.h(u);
            hs.worst_residual = std::max(hs.worst_residual, std::abs(got - want));
            if (rel_residual(got, want) > 1e-8)
                hs.pass = false;
        }
        report.entries.push_back(hs);

        validation_entry ode{"g_prime_equals_sigma_of_g", true, 0.0};
        validation_entry inv{"g_inverse_roundtrip", true, 0.0};
        const double xlo = m.g.inverse(flux.u_min);
        const double xhi = m.g.inverse(flux.u_max);
        // offset by an irrational fraction so most samples fall between nodes
        const auto xis = linspace(xlo, xhi, samples);
        for (std::size_t i = 0; i + 1 < xis.size(); ++i) {
            const double xi = xis[i] + (xis[i + 1] - xis[i]) * (std::numbers::sqrt2 - 1.0);
            const double g = m.g.forward(xi);
            const double r = rel_residual(m.g.forward_derivative(xi), m.sigma(g));
            ode.worst_residual = std::max(ode.worst_residual, r);
            const double back = std::abs(m.g.inverse(g) - xi);
            inv.worst_residual = std::max(inv.worst_residual, back);
        }
        ode.pass = ode.worst_residual <= 1e-6;
        inv.pass = inv.worst_residual <= 1e-10;
        report.entries.push_back(ode);
        report.entries.push_back(inv);
        return;
    }

    const auto& f1 = flux[0];
    validation_entry sig{"sigma_equals_inverse_f1_prime", true, 0.0};
    validation_entry hh{"h_equals_f1_formula", true, 0.0};
    for (double u : us) {
        const double d = f1.df(u);
        const double ws = 1.0 / d;
        const double wh = -f1.d2f(u) / (d * d * d);
        sig.worst_residual = std::max(sig.worst_residual, std::abs(m.sigma(u) - ws));
        hh.worst_residual = std::max(hh.worst_residual, std::abs(m.h(u) - wh));
        if (rel_residual(m.sigma(u), ws) > 1e-8)
            sig.pass = false;
        if (rel_residual(m.h(u), wh) > 1e-8)
            hh.pass = false;
    }
    report.entries.push_back(sig);
    report.entries.push_back(hh);

    validation_entry inv{"g_inverse_roundtrip", true, 0.0};
    for (double u : us) {
        const double w = f1.f(u);
        const double back = m.g.forward(w);
        inv.worst_residual = std::max(inv.worst_residual, std::abs(m.g.inverse(back) - w));
    }
    inv.pass = inv.worst_residual <= 1e-10;
    report.entries.push_back(inv);
}

inline void check_potential(const oscillatory_potential& v, const std::string& prefix, validation_report& report)
{
    validation_entry bounded{prefix + "_bounded", true, 0.0};
    validation_entry periodic{prefix + "_periodic", true, 0.0};
    const double bound = v.bound();
    const double p = v.period;
    for (int i = 0; i < 2000; ++i) {
        const double z = -7.3 + 0.0123 * i;
        const double val = v(z);
        if (std::abs(val) > bound + 1e-12) {
            bounded.pass = false;
            bounded.worst_residual = std::max(bounded.worst_residual, std::abs(val) - bound);
        }
        if (v.kind == potential_kind::periodic) {
            const double r = std::abs(v(z + p) - val);
            periodic.worst_residual = std::max(periodic.worst_residual, r);
        }
    }
    periodic.pass = periodic.worst_residual <= 1e-12 && (v.kind != potential_kind::periodic || p > 0.0);
    report.entries.push_back(bounded);
    report.entries.push_back(periodic);
}

} // namespace detail

/// Samples every structural invariant of a problem specification and reports
/// pass/fail with the worst residual per invariant. Throws MalformedSpec when
/// the spec cannot be sampled at all.
inline validation_report validate_problem(const problem_spec& spec, std::size_t samples = 1001)
{
    validation_report report;
    const auto& model = spec.model();
    const scalar_flux& flux = spec.is_transport() ? spec.transport().flux : spec.stiff().flux;
    if (!(flux.u_min < flux.u_max))
        fail(errc::malformed_spec, "evaluation_range is empty");
    if (model.kind == problem_kind::stiff_source && !(flux.delta0 > 0.0))
        fail(errc::malformed_spec, "delta0 must be positive for the stiff-source problem");
    if (!(spec.epsilon > 0.0) || !(spec.final_time > 0.0) || !(spec.domain.half_width > 0.0))
        fail(errc::malformed_spec, "epsilon, final time and box half-width must be positive");
    if (model.g.empty())
        fail(errc::malformed_spec, "noise model has no flow primitive");

    detail::check_flux(flux, model.kind, report, samples);
    detail::check_model(flux, model, report, samples);

    const int d = spec.domain.dimension;
    const double L = spec.domain.half_width;
    validation_entry init{"initial_data_bounded", true, 0.0};
    if (spec.is_transport()) {
        const auto& tp = spec.transport();
        if (tp.velocity.dimension != d)
            fail(errc::malformed_spec, "velocity field dimension does not match the domain");
        if (const auto* sh = std::get_if<shear_velocity>(&tp.velocity.family)) {
            if (d != 2)
                fail(errc::unsupported_velocity_family, "shear velocity requires d = 2");
            detail::check_potential(sh->b, "velocity_profile", report);
        }
        report.entries.push_back({"velocity_divergence_free", true, 0.0});
        if (!tp.initial)
            fail(errc::malformed_spec, "transport problem needs U_0");
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int i = 0; i < 101; ++i)
            for (int j = 0; j < (d == 2 ? 101 : 1); ++j) {
                const point x{-L + 2.0 * L * i / 100.0, d == 2 ? -L + 2.0 * L * j / 100.0 : 0.0};
                const point y{x[0] / spec.epsilon, x[1] / spec.epsilon};
                const double u = tp.initial(x, y);
                lo = std::min(lo, u);
                hi = std::max(hi, u);
            }
        init.pass = std::isfinite(lo) && std::isfinite(hi) && lo >= flux.u_min && hi <= flux.u_max;
        init.worst_residual = std::max({0.0, flux.u_min - lo, hi - flux.u_max});
    } else {
        const auto& sp = spec.stiff();
        if (flux.dimension() != static_cast<std::size_t>(d))
            fail(errc::malformed_spec, "flux component count does not match the domain dimension");
        detail::check_potential(sp.potential, "potential", report);
        if (!sp.v0)
            fail(errc::malformed_spec, "stiff-source problem needs v_0");
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int i = 0; i < 101; ++i)
            for (int j = 0; j < (d == 2 ? 101 : 1); ++j) {
                const point x{-L + 2.0 * L * i / 100.0, d == 2 ? -L + 2.0 * L * j / 100.0 : 0.0};
                const double v = sp.v0(x);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        init.pass = std::isfinite(lo) && std::isfinite(hi);
        init.worst_residual = init.pass ? 0.0 : std::numeric_limits<double>::infinity();
    }
    report.entries.push_back(init);
    return report;
}

} // namespace sclhom
