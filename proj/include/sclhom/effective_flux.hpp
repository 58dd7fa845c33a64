#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>
#include <vector>

#include "error.hpp"
#include "model_catalog.hpp"
#include "numeric.hpp"

namespace sclhom {

/// Mean-value estimator for integrands composed with an oscillatory potential.
///
/// Periodic potentials use the trapezoid rule over one period with the number
/// of points doubled until two consecutive estimates agree within tolerance.
/// Quasi-periodic potentials use Hann-windowed averages over [0, R] for
/// R in `windows`, accepting the first window whose change from the previous
/// one is below tolerance.
struct mean_value_engine {
    oscillatory_potential potential;
    double tolerance = 1e-13;
    std::size_t initial_points = 64;
    std::size_t max_points = std::size_t{1} << 20;
    std::vector<double> windows{1e3, 1e4, 1e5};
    /// Quadrature points per shortest period in quasi-periodic windows.
    double points_per_period = 32.0;
};

struct mean_estimate {
    double value = 0.0;
    double bracket = 0.0;
};

/// Sample values V(z_j) with normalized weights; means become weighted sums.
struct quadrature_rule {
    std::vector<double> v;
    std::vector<double> w;

    template <class F>
    double mean(F&& integrand) const
    {
        // mean = h_0 + sum w_j (h_j - h_0): exact for constant integrands
        const double h0 = integrand(v[0]);
        std::vector<double> terms(v.size());
        for (std::size_t j = 0; j < v.size(); ++j)
            terms[j] = w[j] * (integrand(v[j]) - h0);
        return h0 + pairwise_sum(terms);
    }

    /// Mean of precomputed integrand values h_j at the nodes.
    double mean_of_values(const std::vector<double>& h) const
    {
        std::vector<double> terms(h.size());
        for (std::size_t j = 0; j < h.size(); ++j)
            terms[j] = w[j] * (h[j] - h[0]);
        return h[0] + pairwise_sum(terms);
    }
};

namespace detail {

inline quadrature_rule periodic_rule(const oscillatory_potential& V, std::size_t n)
{
    quadrature_rule r;
    r.v.resize(n);
    r.w.assign(n, 1.0 / static_cast<double>(n));
    const double P = V.period;
    for (std::size_t j = 0; j < n; ++j)
        r.v[j] = V(P * static_cast<double>(j) / static_cast<double>(n));
    return r;
}

inline quadrature_rule window_rule(const oscillatory_potential& V, double R, double points_per_period)
{
    const double fmax = std::max(V.max_frequency(), 1.0 / R);
    const auto n = static_cast<std::size_t>(std::ceil(R * fmax * points_per_period)) + 1;
    quadrature_rule r;
    r.v.resize(n + 1);
    r.w.resize(n + 1);
    const double h = R / static_cast<double>(n);
    std::vector<double> raw(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        const double z = h * static_cast<double>(j);
        const double s = std::sin(std::numbers::pi * z / R);
        raw[j] = s * s;
        r.v[j] = V(z);
    }
    const double total = pairwise_sum(raw);
    for (std::size_t j = 0; j <= n; ++j)
        r.w[j] = raw[j] / total;
    return r;
}

} // namespace detail

/// Builds the coarsest quadrature rule on which every probe integrand has
/// converged to the engine tolerance. The returned bracket is the largest
/// change across probes at acceptance.
template <class Probes>
std::pair<quadrature_rule, double> calibrate_rule(const mean_value_engine& engine, const Probes& probes)
{
    const auto& V = engine.potential;
    auto max_change = [&](const quadrature_rule& a, const quadrature_rule& b) {
        double worst = 0.0;
        for (const auto& probe : probes)
            worst = std::max(worst, std::abs(a.mean(probe) - b.mean(probe)));
        return worst;
    };
    if (V.kind == potential_kind::periodic) {
        std::size_t n = engine.initial_points;
        auto coarse = detail::periodic_rule(V, n);
        while (2 * n <= engine.max_points) {
            auto fine = detail::periodic_rule(V, 2 * n);
            const double change = max_change(coarse, fine);
            if (change <= engine.tolerance)
                return {std::move(fine), change};
            coarse = std::move(fine);
            n *= 2;
        }
        fail(errc::no_convergence, "periodic mean did not converge within " + std::to_string(engine.max_points) +
                                       " points");
    }
    if (engine.windows.size() < 2)
        fail(errc::no_convergence, "quasi-periodic mean needs at least two windows");
    auto prev = detail::window_rule(V, engine.windows[0], engine.points_per_period);
    double last_change = 0.0;
    for (std::size_t k = 1; k < engine.windows.size(); ++k) {
        auto next = detail::window_rule(V, engine.windows[k], engine.points_per_period);
        last_change = max_change(prev, next);
        if (last_change <= engine.tolerance)
            return {std::move(next), last_change};
        prev = std::move(next);
    }
    fail(errc::no_convergence, "quasi-periodic window bracket " + std::to_string(last_change) +
                                   " above tolerance " + std::to_string(engine.tolerance));
}

/// M(integrand o V) with its error bracket.
inline mean_estimate mean_value_estimate(const scalar_fn& integrand, const mean_value_engine& engine)
{
    const std::vector<scalar_fn> probes{integrand};
    auto [rule, bracket] = calibrate_rule(engine, probes);
    return {rule.mean(integrand), bracket};
}

inline double mean_value(const scalar_fn& integrand, const mean_value_engine& engine)
{
    return mean_value_estimate(integrand, engine).value;
}

// ---------------------------------------------------------------------------

namespace detail {

/// Derivatives of g = f_1^{-1} expressed through f_1 at u = g(w).
struct inverse_derivatives {
    double g1, g2, g3;
};

inline inverse_derivatives inverse_derivs(const flux_component& f1, double u)
{
    const double d1 = f1.df(u);
    const double d2 = f1.d2f(u);
    const double d3 = f1.d3f ? f1.d3f(u) : 0.0;
    return {1.0 / d1, -d2 / (d1 * d1 * d1), (3.0 * d2 * d2 - d1 * d3) / std::pow(d1, 5)};
}

} // namespace detail

/// q = fbar_1(p), the root of F(q) = M(g(q + V)) = p.
inline double solve_fbar1(double p, const scalar_flux& flux, const quadrature_rule& rule, double residual_tol = 1e-10)
{
    const auto& f1 = flux[0];
    const auto g = flow_primitive::from_increasing(f1.f, f1.df);
    double vmin = rule.v[0], vmax = rule.v[0];
    for (double v : rule.v) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    const double fp = f1.f(p);
    double lo = fp - vmax;
    double hi = fp - vmin;
    // F(q) = M(g(q+V)) with cached roots as Newton guesses
    std::vector<double> guess(rule.v.size(), p);
    auto F = [&](double q) {
        std::vector<double> terms(rule.v.size());
        const double h0 = g.forward(q + rule.v[0], guess[0]);
        for (std::size_t j = 0; j < rule.v.size(); ++j) {
            const double u = g.forward(q + rule.v[j], guess[j]);
            guess[j] = u;
            terms[j] = rule.w[j] * (u - h0);
        }
        return h0 + pairwise_sum(terms);
    };
    auto dF = [&](double q) {
        return rule.mean([&](double v) { return 1.0 / f1.df(g.forward(q + v, p)); });
    };
    if (lo == hi)
        return lo;
    if (F(lo) > p || F(hi) < p)
        fail(errc::out_of_range, "p = " + std::to_string(p) + " outside the image of the averaged inverse");
    const double q = solve_increasing(F, dF, p, lo, hi);
    const double res = std::abs(F(q) - p);
    if (res > residual_tol * std::max(1.0, std::abs(p)))
        fail(errc::no_convergence, "fbar1 fixed-point residual " + std::to_string(res));
    return q;
}

inline double solve_fbar1(double p, const scalar_flux& flux, const oscillatory_potential& V,
                          const mean_value_engine& engine)
{
    const auto& f1 = flux[0];
    const auto g = flow_primitive::from_increasing(f1.f, f1.df);
    const double q0 = f1.f(p) - V.mean();
    const std::vector<scalar_fn> probes{[&](double v) { return g.forward(q0 + v); }};
    mean_value_engine e = engine;
    e.potential = V;
    const auto rule = calibrate_rule(e, probes).first;
    return solve_fbar1(p, flux, rule);
}

/// Homogenized flux tables on a uniform p-grid.
class effective_flux_table {
public:
    struct node_diagnostics {
        double fixed_point_residual = 0.0;
        double inverse_residual = 0.0;
    };

    effective_flux_table() = default;

    double p_min() const { return fbar1_->x_min(); }
    double p_max() const { return fbar1_->x_max(); }
    std::size_t size() const { return fbar1_->size(); }
    std::size_t dimension() const { return 1 + fbar_k_.size(); }
    double node(std::size_t k) const { return fbar1_->node(k); }

    double fbar1(double p) const { return (*fbar1_)(p); }
    double fbar1_prime(double p) const { return (*fbar1p_)(p); }
    double fbar1_second(double p) const { return (*fbar1pp_)(p); }
    /// fbar_k for k = 2..d (index k - 1 here, k >= 1).
    double fbar(std::size_t k, double p) const { return k == 0 ? fbar1(p) : (*fbar_k_.at(k - 1))(p); }
    double fbar_prime(std::size_t k, double p) const
    {
        return k == 0 ? fbar1_prime(p) : fbar_k_.at(k - 1)->derivative(p);
    }
    /// gbar = fbar_1^{-1}.
    double gbar(double xi) const { return fbar1_->inverse(xi); }
    double sigma_bar(double p) const { return 1.0 / fbar1_prime(p); }
    double h_bar(double p) const
    {
        const double d = fbar1_prime(p);
        return -fbar1_second(p) / (d * d * d);
    }

    const std::vector<node_diagnostics>& diagnostics() const { return diag_; }
    double max_fixed_point_residual() const
    {
        double m = 0.0;
        for (const auto& d : diag_)
            m = std::max(m, d.fixed_point_residual);
        return m;
    }
    double max_inverse_residual() const
    {
        double m = 0.0;
        for (const auto& d : diag_)
            m = std::max(m, d.inverse_residual);
        return m;
    }

    /// Flux usable by the finite-volume engine: components fbar_k with derivatives.
    scalar_flux as_flux() const
    {
        scalar_flux out;
        auto self = *this;
        flux_component c1;
        c1.f = [t = self](double p) { return t.fbar1(p); };
        c1.df = [t = self](double p) { return t.fbar1_prime(p); };
        c1.d2f = [t = self](double p) { return t.fbar1_second(p); };
        c1.d3f = [t = self](double p) { return t.fbar1pp_->derivative(p); };
        out.components.push_back(std::move(c1));
        for (std::size_t k = 0; k < fbar_k_.size(); ++k) {
            flux_component ck;
            auto tab = fbar_k_[k];
            ck.f = [tab](double p) { return (*tab)(p); };
            ck.df = [tab](double p) { return tab->derivative(p); };
            ck.d2f = [tab](double p) {
                const double h = 1e-5 * tab->step();
                const double a = std::max(tab->x_min(), p - h);
                const double b = std::min(tab->x_max(), p + h);
                return (tab->derivative(b) - tab->derivative(a)) / (b - a);
            };
            out.components.push_back(std::move(ck));
        }
        out.u_min = p_min();
        out.u_max = p_max();
        double dmin = std::numeric_limits<double>::infinity();
        for (double v : fbar1p_->values())
            dmin = std::min(dmin, v);
        out.delta0 = dmin;
        return out;
    }

    /// Noise model of the effective equation: flow u -> gbar(fbar_1(u) + delta).
    stochastic_flow_model noise_model(double kappa0) const
    {
        stochastic_flow_model m;
        m.kind = problem_kind::stiff_source;
        auto self = *this;
        m.sigma = [t = self](double p) { return t.sigma_bar(p); };
        m.h = [t = self](double p) { return t.h_bar(p); };
        m.dsigma = [t = self](double p) {
            const double d = t.fbar1_prime(p);
            return -t.fbar1_second(p) / (d * d);
        };
        m.g = flow_primitive::from_inverse_table(fbar1_);
        m.kappa0 = kappa0;
        return m;
    }

    void write_csv(std::ostream& os) const
    {
        os << "p,fbar1,fbar1p,fbar1pp,gbar";
        for (std::size_t k = 0; k < fbar_k_.size(); ++k)
            os << ",fbar_" << (k + 2);
        os << '\n';
        char buf[64];
        for (std::size_t i = 0; i < size(); ++i) {
            const double p = node(i);
            double gb = std::numeric_limits<double>::quiet_NaN();
            if (p >= fbar1_->values().front() && p <= fbar1_->values().back())
                gb = gbar(p);
            std::snprintf(buf, sizeof buf, "%.17g", p);
            os << buf;
            for (double v : {fbar1(p), fbar1_prime(p), fbar1_second(p), gb}) {
                std::snprintf(buf, sizeof buf, ",%.17g", v);
                os << buf;
            }
            for (std::size_t k = 0; k < fbar_k_.size(); ++k) {
                std::snprintf(buf, sizeof buf, ",%.17g", (*fbar_k_[k])(p));
                os << buf;
            }
            os << '\n';
        }
    }

    friend effective_flux_table build_effective_flux(const scalar_flux& flux, const oscillatory_potential& V,
                                                     const mean_value_engine& engine, double p_min, double p_max,
                                                     std::size_t n, unsigned threads);

private:
    std::shared_ptr<const hermite_table> fbar1_;
    std::shared_ptr<const hermite_table> fbar1p_;
    std::shared_ptr<const hermite_table> fbar1pp_;
    std::vector<std::shared_ptr<const hermite_table>> fbar_k_;
    std::vector<node_diagnostics> diag_;
};

/// Tabulates fbar_1 and its first three derivatives (implicit differentiation of
/// F(q) = M(g(q + V))), the transverse fluxes fbar_k = M(f_k(g(fbar_1(p) + V)))
/// and their derivatives on n uniform nodes of [p_min, p_max]. Root solves per
/// node are independent and run on `threads` workers.
inline effective_flux_table build_effective_flux(const scalar_flux& flux, const oscillatory_potential& V,
                                                 const mean_value_engine& engine, double p_min, double p_max,
                                                 std::size_t n = 801, unsigned threads = 1)
{
    if (!(p_min < p_max) || n < 2)
        fail(errc::malformed_spec, "effective flux grid must be a nonempty interval with >= 2 nodes");
    const auto& f1 = flux[0];
    const auto g = flow_primitive::from_increasing(f1.f, f1.df);
    mean_value_engine e = engine;
    e.potential = V;
    // calibrate once on the extreme nodes, with the most oscillatory integrand
    std::vector<scalar_fn> probes;
    for (double p : {p_min, p_max}) {
        const double q0 = f1.f(p) - V.mean();
        probes.push_back([&g, q0](double v) { return g.forward(q0 + v); });
        probes.push_back([&g, &f1, q0](double v) {
            const double u = g.forward(q0 + v);
            return detail::inverse_derivs(f1, u).g2;
        });
    }
    const auto rule = calibrate_rule(e, probes).first;

    const auto ps = linspace(p_min, p_max, n);
    const std::size_t extra = flux.dimension() - 1;
    std::vector<double> q(n), d1(n), d2(n), d3(n), res(n);
    std::vector<std::vector<double>> fk(extra, std::vector<double>(n)), dfk(extra, std::vector<double>(n));
    parallel_for(n, threads, [&](std::size_t i) {
        const double p = ps[i];
        const double qi = solve_fbar1(p, flux, rule);
        std::vector<double> us(rule.v.size());
        for (std::size_t j = 0; j < us.size(); ++j)
            us[j] = g.forward(qi + rule.v[j], p);
        auto mean_of = [&](auto&& fn) {
            std::vector<double> vals(us.size());
            for (std::size_t j = 0; j < us.size(); ++j)
                vals[j] = fn(us[j]);
            return rule.mean_of_values(vals);
        };
        const double F = mean_of([](double u) { return u; });
        const double F1 = mean_of([&](double u) { return detail::inverse_derivs(f1, u).g1; });
        const double F2 = mean_of([&](double u) { return detail::inverse_derivs(f1, u).g2; });
        const double F3 = mean_of([&](double u) { return detail::inverse_derivs(f1, u).g3; });
        q[i] = qi;
        res[i] = std::abs(F - p);
        d1[i] = 1.0 / F1;
        d2[i] = -F2 / (F1 * F1 * F1);
        d3[i] = -F3 / std::pow(F1, 4) + 3.0 * F2 * F2 / std::pow(F1, 5);
        for (std::size_t k = 0; k < extra; ++k) {
            const auto& fc = flux[k + 1];
            fk[k][i] = mean_of([&](double u) { return fc.f(u); });
            const double dq = mean_of([&](double u) { return fc.df(u) * detail::inverse_derivs(f1, u).g1; });
            dfk[k][i] = dq * d1[i];
        }
    });

    const double h = ps[1] - ps[0];
    effective_flux_table t;
    t.fbar1_ = std::make_shared<hermite_table>(p_min, h, q, d1, true);
    t.fbar1p_ = std::make_shared<hermite_table>(p_min, h, d1, d2);
    t.fbar1pp_ = std::make_shared<hermite_table>(p_min, h, d2, d3);
    for (std::size_t k = 0; k < extra; ++k)
        t.fbar_k_.push_back(std::make_shared<hermite_table>(p_min, h, fk[k], dfk[k]));
    t.diag_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        t.diag_[i].fixed_point_residual = res[i];
        t.diag_[i].inverse_residual = std::abs(t.gbar(q[i]) - ps[i]);
    }
    return t;
}

struct miraculous_report {
    double sigma_residual = 0.0;
    double h_residual = 0.0;
};

/// Compares sigma_{fbar_1}(gbar(v)) and h_{fbar_1}(gbar(v)), read off the
/// tables, with independent mean values of sigma_{f_1}(g(v + V)) and
/// h_{f_1}(g(v + V)) over the v-grid.
inline miraculous_report check_miraculous(const effective_flux_table& table, const scalar_flux& flux,
                                          const oscillatory_potential& V, const mean_value_engine& engine,
                                          const std::vector<double>& v_grid)
{
    const auto& f1 = flux[0];
    const auto g = flow_primitive::from_increasing(f1.f, f1.df);
    mean_value_engine e = engine;
    e.potential = V;
    miraculous_report r;
    for (double v : v_grid) {
        const double p = table.gbar(v);
        const double lhs_sigma = table.sigma_bar(p);
        const double lhs_h = table.h_bar(p);
        const double rhs_sigma = mean_value([&](double z) { return 1.0 / f1.df(g.forward(v + z)); }, e);
        const double rhs_h = mean_value(
            [&](double z) {
                const double u = g.forward(v + z);
                const double d = f1.df(u);
                return -f1.d2f(u) / (d * d * d);
            },
            e);
        r.sigma_residual = std::max(r.sigma_residual, std::abs(lhs_sigma - rhs_sigma));
        r.h_residual = std::max(r.h_residual, std::abs(lhs_h - rhs_h));
    }
    return r;
}

/// Largest |M(g(v_0 + V)) - gbar(v_0)| over the sampled values v_0.
inline double initial_mean_consistency(const effective_flux_table& table, const scalar_flux& flux,
                                       const oscillatory_potential& V, const mean_value_engine& engine,
                                       const std::vector<double>& v0_samples)
{
    const auto& f1 = flux[0];
    const auto g = flow_primitive::from_increasing(f1.f, f1.df);
    mean_value_engine e = engine;
    e.potential = V;
    double worst = 0.0;
    for (double v0 : v0_samples) {
        const double avg = mean_value([&](double z) { return g.forward(v0 + z); }, e);
        worst = std::max(worst, std::abs(avg - table.gbar(v0)));
    }
    return worst;
}

} // namespace sclhom
