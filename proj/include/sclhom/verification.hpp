#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "brownian.hpp"
#include "error.hpp"
#include "fv_engine.hpp"
#include "model_catalog.hpp"
#include "numeric.hpp"
#include "stats.hpp"

namespace sclhom {

/// w_N(x) = (1 + |x|^2)^(-N), N > d/2.
struct weight_function {
    double N = 1.0;
    int dim = 1;
    /// Periodic boxes are compact: the weight is identically one there.
    bool unit = false;

    double operator()(const point& x) const
    {
        if (unit)
            return 1.0;
        const double r2 = x[0] * x[0] + (dim == 2 ? x[1] * x[1] : 0.0);
        return std::pow(1.0 + r2, -N);
    }

    double gradient_norm(const point& x) const
    {
        if (unit)
            return 0.0;
        const double r2 = x[0] * x[0] + (dim == 2 ? x[1] * x[1] : 0.0);
        return 2.0 * N * std::sqrt(r2) * std::pow(1.0 + r2, -N - 1.0);
    }

    static weight_function for_domain(const box_domain& d, double N)
    {
        if (!(N > 0.5 * d.dimension))
            fail(errc::malformed_spec, "weight exponent must exceed d/2");
        return {N, d.dimension, d.boundary == boundary_mode::periodic};
    }
};

/// psi_alpha at cell position x and path value W.
inline double special_value(const problem_spec& spec, double alpha, const point& x, double W)
{
    if (spec.is_transport())
        return special_solution_p1(alpha, 0.0, W, spec.transport().model);
    const auto& sp = spec.stiff();
    return special_solution_p2(alpha, x[0] / spec.epsilon, 0.0, W, sp.potential, sp.model);
}

struct comparison_report {
    std::size_t violations = 0;
    std::size_t checked = 0;
    std::size_t steps = 0;
    bool bit_identical = false;
};

namespace detail {

/// Runs both initial data with one shared time grid; refines both if either needs it.
inline std::pair<trajectory, trajectory> paired_runs(const problem_spec& spec, const grid_field& a,
                                                     const grid_field& b, const brownian_path& path,
                                                     scheme_config cfg)
{
    cfg.record_steps = true;
    auto run = [&](const grid_field& f) {
        if (spec.is_transport())
            return advance(f, path, cfg, make_law(spec.transport(), spec.epsilon), spec.final_time);
        return advance(f, path, cfg, make_law(spec.stiff(), spec.epsilon), spec.final_time);
    };
    for (int attempt = 0; attempt < 8; ++attempt) {
        auto ta = run(a);
        auto tb = run(b);
        // a run may refine part-way, so equal final levels need not mean equal steps
        if (ta.level == tb.level && ta.steps.size() == tb.steps.size())
            return {std::move(ta), std::move(tb)};
        cfg.min_level = std::max(ta.level, tb.level);
    }
    fail(errc::cfl_violation, "paired runs did not settle on a common time grid");
}

} // namespace detail

/// Pathwise ordering check after every step: u_low <= u_high + 1e-12.
template <class Low, class High>
comparison_report comparison_test(const problem_spec& spec, std::size_t n, Low&& u0_low, High&& u0_high,
                                  const brownian_path& path, const scheme_config& cfg = {})
{
    const auto a = make_field(spec.domain, n, u0_low);
    const auto b = make_field(spec.domain, n, u0_high);
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a.u[k] > b.u[k])
            fail(errc::malformed_spec, "initial data are not ordered");
    auto [ta, tb] = detail::paired_runs(spec, a, b, path, cfg);
    comparison_report r;
    r.steps = ta.steps.size();
    r.bit_identical = true;
    for (std::size_t s = 0; s < ta.steps.size(); ++s) {
        const auto& ua = ta.steps[s].after;
        const auto& ub = tb.steps[s].after;
        for (std::size_t k = 0; k < ua.size(); ++k) {
            ++r.checked;
            if (ua[k] > ub[k] + 1e-12)
                ++r.violations;
            if (ua[k] != ub[k])
                r.bit_identical = false;
        }
    }
    return r;
}

/// C = k0^2 Lip(h) / 2 + Lip_u(source), Lip(h) from sampled difference quotients.
inline double contraction_constant(const problem_spec& spec, std::size_t samples = 2001)
{
    const auto& m = spec.model();
    const auto& flux = spec.is_transport() ? spec.transport().flux : spec.stiff().flux;
    const auto us = linspace(flux.u_min, flux.u_max, samples);
    double lip = 0.0;
    for (std::size_t i = 0; i + 1 < us.size(); ++i)
        lip = std::max(lip, std::abs(m.h(us[i + 1]) - m.h(us[i])) / (us[i + 1] - us[i]));
    // the stiff source (1/eps) V'(x_1/eps) does not depend on u
    return 0.5 * m.kappa0 * m.kappa0 * lip;
}

struct contraction_point {
    double time = 0.0;
    sample_summary distance;
    double bound = 0.0;
    bool pass = false;
};

struct contraction_report {
    double C = 0.0;
    double initial = 0.0;
    std::size_t n_paths = 0;
    std::vector<contraction_point> points;

    bool pass() const
    {
        for (const auto& p : points)
            if (!p.pass)
                return false;
        return true;
    }
};

struct contraction_plan {
    std::size_t n = 256;
    std::vector<double> times;
    std::uint64_t seed = 1;
    int path_level = 8;
    double N = 1.0;
    scheme_config scheme;
    unsigned threads = 1;
};

/// Monte Carlo E int |u_1 - u_2| w_N dx against exp(C t) times the initial distance.
template <class A, class B>
contraction_report l1_contraction_test(const problem_spec& spec, A&& u0_a, B&& u0_b, std::size_t n_paths,
                                       const contraction_plan& plan)
{
    if (n_paths < 16)
        fail(errc::insufficient_paths, "contraction test needs at least 16 paths");
    const auto w = weight_function::for_domain(spec.domain, plan.N);
    const auto fa = make_field(spec.domain, plan.n, u0_a);
    const auto fb = make_field(spec.domain, plan.n, u0_b);
    auto distance = [&](const grid_field& x, const grid_field& y) {
        std::vector<double> terms(x.size());
        for (std::size_t k = 0; k < x.size(); ++k)
            terms[k] = std::abs(x.u[k] - y.u[k]) * w(x.position(k));
        return pairwise_sum(terms) * x.cell_volume();
    };
    contraction_report rep;
    rep.C = contraction_constant(spec);
    rep.initial = distance(fa, fb);
    rep.n_paths = n_paths;
    std::vector<std::vector<double>> d(plan.times.size(), std::vector<double>(n_paths));
    parallel_for(n_paths, plan.threads, [&](std::size_t m) {
        const auto path = sample_path(plan.seed, m, spec.final_time, plan.path_level);
        scheme_config cfg = plan.scheme;
        auto run = [&](const grid_field& f) {
            if (spec.is_transport())
                return advance(f, path, cfg, make_law(spec.transport(), spec.epsilon), spec.final_time, plan.times);
            return advance(f, path, cfg, make_law(spec.stiff(), spec.epsilon), spec.final_time, plan.times);
        };
        const auto ta = run(fa);
        const auto tb = run(fb);
        for (std::size_t t = 0; t < plan.times.size(); ++t)
            d[t][m] = distance(ta.snapshots.at(t + 1).field, tb.snapshots.at(t + 1).field);
    });
    for (std::size_t t = 0; t < plan.times.size(); ++t) {
        contraction_point p;
        p.time = plan.times[t];
        p.distance = summarize(d[t]);
        p.bound = std::exp(rep.C * p.time) * rep.initial * 1.1 + 2.0 * p.distance.half_width;
        p.pass = p.distance.mean <= p.bound;
        rep.points.push_back(p);
    }
    return rep;
}

/// Separable test function phi(t, x) = theta(t) beta(x), with exact derivatives.
struct separable_test_function {
    std::function<double(double)> theta;
    std::function<double(double)> dtheta;
    std::function<double(const point&)> beta;
    std::function<point(const point&)> grad_beta;
};

/// theta(t) = cos^2(pi t / 2T) and a smooth bump of radius r centred at c.
inline separable_test_function smooth_kruzkov_test_function(double T, point c, double r)
{
    separable_test_function phi;
    phi.theta = [T](double t) {
        const double s = std::cos(0.5 * std::numbers::pi * t / T);
        return t >= T ? 0.0 : s * s;
    };
    phi.dtheta = [T](double t) {
        return t >= T ? 0.0 : -0.5 * std::numbers::pi / T * std::sin(std::numbers::pi * t / T);
    };
    phi.beta = [c, r](const point& x) {
        const double q = ((x[0] - c[0]) * (x[0] - c[0]) + (x[1] - c[1]) * (x[1] - c[1])) / (r * r);
        return q >= 1.0 ? 0.0 : std::exp(1.0 - 1.0 / (1.0 - q));
    };
    phi.grad_beta = [c, r](const point& x) -> point {
        const double q = ((x[0] - c[0]) * (x[0] - c[0]) + (x[1] - c[1]) * (x[1] - c[1])) / (r * r);
        if (q >= 1.0)
            return {0.0, 0.0};
        const double b = std::exp(1.0 - 1.0 / (1.0 - q));
        const double dq = -b / ((1.0 - q) * (1.0 - q)) * 2.0 / (r * r);
        return {dq * (x[0] - c[0]), dq * (x[1] - c[1])};
    };
    return phi;
}

struct kruzkov_result {
    double residual = 0.0;
    double dx = 0.0;
    /// max(0, -residual) / dx.
    double c_res = 0.0;
};

/// Discrete stochastic Kato-Kruzkov functional with u_1 the numerical solution
/// and u_2 = psi_alpha. Time integrals use the left endpoint of every step, so
/// the dW-integral is an Ito sum.
inline kruzkov_result kruzkov_residual(const problem_spec& spec, std::size_t n, const brownian_path& path,
                                       double alpha, const separable_test_function& phi, scheme_config cfg = {})
{
    const double T = spec.final_time;
    if (std::abs(phi.theta(T)) > 1e-14)
        fail(errc::unsupported_test_function, "test function must vanish at the final time");
    const auto field0 = initial_field(spec, n);
    const double L = spec.domain.half_width;
    for (double x : {-L, L - 1e-12})
        if (std::abs(phi.beta({x, 0.0})) > 1e-14 || (spec.domain.dimension == 2 && std::abs(phi.beta({0.0, x})) > 1e-14))
            fail(errc::unsupported_test_function, "test function must be compactly supported in the box");

    cfg.record_steps = true;
    const auto traj = spec.is_transport()
                          ? advance(field0, path, cfg, make_law(spec.transport(), spec.epsilon), T)
                          : advance(field0, path, cfg, make_law(spec.stiff(), spec.epsilon), T);
    const auto& m = spec.model();
    const double k0 = m.kappa0;
    const double vol = field0.cell_volume();
    const int d = field0.dim;

    std::vector<point> xs(field0.size());
    std::vector<double> beta(field0.size());
    std::vector<point> grad(field0.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
        xs[k] = field0.position(k);
        beta[k] = phi.beta(xs[k]);
        grad[k] = phi.grad_beta(xs[k]);
    }

    // flux-times-direction term S (A(u) - A(psi)) . grad beta
    auto flux_term = [&](std::size_t k, double u, double psi) {
        const double s = sign(u - psi);
        double acc = 0.0;
        if (spec.is_transport()) {
            const auto& tp = spec.transport();
            const point y{xs[k][0] / spec.epsilon, xs[k][1] / spec.epsilon};
            const double df = tp.flux[0].f(u) - tp.flux[0].f(psi);
            for (int ax = 0; ax < d; ++ax)
                acc += tp.velocity.component(ax, y) * grad[k][static_cast<std::size_t>(ax)];
            return s * df * acc;
        }
        const auto& sp = spec.stiff();
        for (int ax = 0; ax < d; ++ax) {
            const auto& fc = sp.flux[static_cast<std::size_t>(ax)];
            acc += (fc.f(u) - fc.f(psi)) * grad[k][static_cast<std::size_t>(ax)];
        }
        return s * acc;
    };

    std::vector<double> step_terms;
    double t = 0.0;
    double W = 0.0;
    // initial term
    {
        std::vector<double> terms(field0.size());
        for (std::size_t k = 0; k < terms.size(); ++k)
            terms[k] = std::abs(field0.u[k] - special_value(spec, alpha, xs[k], 0.0)) * beta[k];
        step_terms.push_back(phi.theta(0.0) * pairwise_sum(terms) * vol);
    }
    std::vector<double> det(field0.size()), sto(field0.size());
    for (const auto& st : traj.steps) {
        const double th = phi.theta(t);
        const double dth = phi.dtheta(t);
        for (std::size_t k = 0; k < det.size(); ++k) {
            const double u = st.before[k];
            const double psi = special_value(spec, alpha, xs[k], W);
            const double s = sign(u - psi);
            det[k] = std::abs(u - psi) * dth * beta[k] + th * flux_term(k, u, psi) +
                     0.5 * k0 * k0 * s * (m.h(u) - m.h(psi)) * th * beta[k];
            sto[k] = k0 * s * (m.sigma(u) - m.sigma(psi)) * th * beta[k];
        }
        step_terms.push_back(pairwise_sum(det) * vol * st.dt + pairwise_sum(sto) * vol * st.dW);
        t += st.dt;
        W += st.dW;
    }
    kruzkov_result r;
    r.residual = pairwise_sum(step_terms);
    r.dx = field0.dx();
    r.c_res = std::max(0.0, -r.residual) / r.dx;
    return r;
}

struct sandwich_report {
    std::size_t violations = 0;
    std::size_t checked = 0;
    std::size_t snapshots = 0;
};

/// psi_{alpha1} <= u <= psi_{alpha2} cellwise at every snapshot, tolerance 1e-10.
inline sandwich_report sandwich_test(const problem_spec& spec, const trajectory& traj, double alpha1, double alpha2)
{
    sandwich_report r;
    for (const auto& snap : traj.snapshots) {
        ++r.snapshots;
        for (std::size_t k = 0; k < snap.field.size(); ++k) {
            const point x = snap.field.position(k);
            const double lo = special_value(spec, alpha1, x, snap.W);
            const double hi = special_value(spec, alpha2, x, snap.W);
            ++r.checked;
            if (snap.field.u[k] < lo - 1e-10 || snap.field.u[k] > hi + 1e-10)
                ++r.violations;
        }
    }
    return r;
}

} // namespace sclhom
