#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "../brownian.hpp"
#include "../effective_flux.hpp"
#include "../fv_engine.hpp"
#include "../homogenization_lab.hpp"
#include "../kinetic.hpp"
#include "../verification.hpp"
#include "config.hpp"
#include "manifest.hpp"

namespace sclhom::runner {

struct run_context {
    config cfg;
    unsigned threads = 1;
};

using experiment_fn = experiment_result (*)(const run_context&);

struct experiment_info {
    const char* name;
    const char* description;
    /// Built-in configuration; user files merge over it.
    const char* defaults;
    experiment_fn run;
    /// false: only the flux table is built, so the time-stepping checks do not apply
    bool steps_in_time = true;
};

// ---------------------------------------------------------------------------
// output helpers

class csv_table {
public:
    explicit csv_table(const std::string& header) : out_(header + "\n") {}

    template <class... Cells>
    void row(const Cells&... cells)
    {
        bool first = true;
        ((out_ += (first ? "" : ","), out_ += cell(cells), first = false), ...);
        out_ += '\n';
    }

    const std::string& str() const { return out_; }

private:
    template <class T>
    static std::string cell(const T& v)
    {
        if constexpr (std::is_floating_point_v<T>)
            return detail::format_double(v);
        else if constexpr (std::is_integral_v<T>)
            return std::to_string(v);
        else
            return std::string(v);
    }

    std::string out_;
};

inline std::string snapshot_csv(const grid_field& f, const std::vector<double>* extra = nullptr,
                                const char* extra_name = nullptr)
{
    std::ostringstream os;
    write_snapshot_csv(os, f, extra, extra_name);
    return os.str();
}

inline std::string path_csv(const brownian_path& p)
{
    std::ostringstream os;
    write_path_csv(os, p);
    return os.str();
}

inline std::vector<std::uint64_t> seeds_of(const config& c)
{
    std::vector<std::uint64_t> out;
    if (c.has("sweep", "seeds")) {
        for (double s : c.list("sweep", "seeds")) {
            if (s < 0 || s != std::floor(s))
                fail(errc::validation_error, "[sweep] seeds must be nonnegative integers");
            out.push_back(static_cast<std::uint64_t>(s));
        }
        return out;
    }
    const long s = c.integer("sweep", "seed", 1);
    if (s < 0)
        fail(errc::validation_error, "[sweep] seed must be nonnegative");
    return {static_cast<std::uint64_t>(s)};
}

inline std::size_t cells_of(const config& c)
{
    const long n = c.integer("grid", "n", 0);
    if (n < 4)
        fail(errc::validation_error, "[grid] n must be at least 4");
    return static_cast<std::size_t>(n);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

inline double l1_distance(const grid_field& a, const grid_field& b)
{
    std::vector<double> t(a.size());
    for (std::size_t k = 0; k < t.size(); ++k)
        t[k] = std::abs(a.u[k] - b.u[k]);
    return pairwise_sum(t) * a.cell_volume();
}

/// Cell averages of pairs of cells: the field on the grid with half the cells.
inline grid_field restrict_half(const grid_field& fine)
{
    if (fine.dim != 1 || fine.n % 2)
        fail(errc::grid_mismatch, "restriction needs an even 1-D grid");
    grid_field g = fine;
    g.n = fine.n / 2;
    g.u.resize(g.n);
    for (std::size_t i = 0; i < g.n; ++i)
        g.u[i] = 0.5 * (fine.u[2 * i] + fine.u[2 * i + 1]);
    return g;
}

inline void need(bool ok, const std::string& what)
{
    if (!ok)
        fail(errc::validation_error, what);
}

inline std::string convergence_csv(const convergence_table& t)
{
    csv_table csv("seed,eps,time,n,phi,weak_error,corrector_error");
    for (const auto& r : t.rows)
        for (std::size_t p = 0; p < t.phi_names.size(); ++p)
            csv.row(r.seed, r.eps, r.time, r.n, t.phi_names[p], r.weak_errors[p], r.corrector_error);
    return csv.str();
}

/// Weak errors along eps for one (seed, phi) at the last time.
inline std::vector<double> weak_series(const convergence_table& t, std::uint64_t seed, double time, std::size_t phi)
{
    std::vector<double> out;
    for (const auto& r : t.rows)
        if (r.seed == seed && std::abs(r.time - time) < 1e-12)
            out.push_back(r.weak_errors.at(phi));
    return out;
}

// ---------------------------------------------------------------------------
// special solutions

inline experiment_result special_invariance(const run_context& ctx, bool stiff, double tol)
{
    const auto& c = ctx.cfg;
    const auto spec = validated_problem(c);
    need(spec.is_transport() != stiff, stiff ? "this experiment needs kind = stiff" : "this experiment needs kind = transport");
    need(c.str("problem", "initial", "") == "special", "[problem] initial must be 'special'");
    const auto cfg = build_scheme(c);
    const auto seed = seeds_of(c).front();
    const double alpha = c.num("problem", "alpha", 0.0);
    const std::size_t n = cells_of(c);
    const auto path = sample_path(seed, 0, spec.final_time, cfg.min_level);
    const auto traj = solve_problem(spec, n, path, cfg);
    const auto& f = traj.final_field();
    const double W = traj.snapshots.back().W;
    std::vector<double> psi(f.size());
    for (std::size_t k = 0; k < f.size(); ++k)
        psi[k] = special_value(spec, alpha, f.position(k), W);
    const double dev = max_abs_diff(f.u, psi);

    experiment_result res;
    res.seeds = {seed};
    res.metrics = {{"max_deviation", dev}, {"W_T", W},           {"alpha", alpha},
                   {"n", n},               {"level", traj.level}, {"steps", traj.step_count}};
    res.add(check_le("max_deviation", dev, tol, "max_i |u_i(T) - psi_alpha(T, x_i)|"));
    res.file("final.csv", "snapshot", snapshot_csv(f, &psi, "psi"));
    if (c.flag("output", "path", true))
        res.file("path.csv", "path", path_csv(refine_to(path, traj.level)));
    return res;
}

inline experiment_result run_special_invariance_p1(const run_context& ctx)
{
    return special_invariance(ctx, false, 1e-10);
}

inline experiment_result run_special_invariance_p2(const run_context& ctx)
{
    return special_invariance(ctx, true, 1e-9);
}

// ---------------------------------------------------------------------------
// effective flux

inline experiment_result run_effective_flux(const run_context& ctx)
{
    const auto& c = ctx.cfg;
    // only the flux table is built: f2' >= 0 (needed for time stepping) is not required here
    const auto spec = build_problem(c);
    need(!spec.is_transport() && spec.domain.dimension == 2, "effective-flux needs kind = stiff with f2 set");
    need(c.str("flux", "f1") == "linear" && c.num("flux", "slope", 1.0) == 1.0 && c.str("flux", "f2") == "burgers" &&
             c.str("oscillation", "V", "sin") == "sin",
         "the closed form needs f1 = linear (slope 1), f2 = burgers, V = sin");
    const auto& sp = spec.stiff();
    const double A = c.num("oscillation", "amplitude", 1.0);
    const auto nodes = static_cast<std::size_t>(c.integer("sweep", "points", 401));
    const auto table = build_effective_flux(sp.flux, sp.potential, {}, sp.flux.u_min, sp.flux.u_max, nodes, ctx.threads);

    experiment_result res;
    csv_table pts("p,fbar1,fbar2,closed_form,abs_error");
    double worst = 0.0, worst1 = 0.0;
    json rows = json::array();
    for (double p : {-1.0, 0.0, 0.5, 1.0}) {
        const double got = table.fbar(1, p);
        // mean of (p + A sin)^2 / 2
        const double want = 0.5 * (p * p + 0.5 * A * A);
        worst = std::max(worst, std::abs(got - want));
        worst1 = std::max(worst1, std::abs(table.fbar1(p) - p));
        pts.row(p, table.fbar1(p), got, want, std::abs(got - want));
        rows.push_back({{"p", p}, {"fbar2", got}, {"closed_form", want}});
    }
    res.metrics = {{"max_error_fbar2", worst}, {"max_error_fbar1", worst1}, {"nodes", nodes}, {"points", rows}};
    res.add(check_le("fbar2_closed_form", worst, 1e-8, "|fbar2(p) - (p^2 + A^2/2)/2| at p in {-1, 0, 0.5, 1}"));
    res.add(check_le("fbar1_identity", worst1, 1e-8, "|fbar1(p) - p|"));
    res.file("points.csv", "table", pts.str());
    std::ostringstream os;
    table.write_csv(os);
    res.file("table.csv", "table", os.str());
    return res;
}

inline experiment_result run_miraculous(const run_context& ctx)
{
    const auto& c = ctx.cfg;
    const auto spec = validated_problem(c);
    need(!spec.is_transport(), "miraculous needs kind = stiff");
    const auto& sp = spec.stiff();
    const auto nodes = static_cast<std::size_t>(c.integer("sweep", "nodes", 801));
    const auto points = static_cast<std::size_t>(c.integer("sweep", "points", 41));
    const auto table = build_effective_flux(sp.flux, sp.potential, {}, sp.flux.u_min, sp.flux.u_max, nodes, ctx.threads);
    const auto vs = linspace(-2.0, 2.0, points);
    const auto rep = check_miraculous(table, sp.flux, sp.potential, {}, vs);

    // per-point listing
    mean_value_engine e;
    e.potential = sp.potential;
    const auto& f1 = sp.flux[0];
    csv_table csv("v,p,sigma_bar,sigma_mean,h_bar,h_mean");
    for (double v : vs) {
        const double p = table.gbar(v);
        const double sm = mean_value([&](double z) { return 1.0 / f1.df(sp.model.g.forward(v + z)); }, e);
        const double hm = mean_value(
            [&](double z) {
                const double u = sp.model.g.forward(v + z);
                const double d = f1.df(u);
                return -f1.d2f(u) / (d * d * d);
            },
            e);
        csv.row(v, p, table.sigma_bar(p), sm, table.h_bar(p), hm);
    }
    experiment_result res;
    res.metrics = {{"sigma_residual", rep.sigma_residual}, {"h_residual", rep.h_residual}, {"points", points}};
    res.add(check_le("sigma_identity", rep.sigma_residual, 1e-7));
    res.add(check_le("h_identity", rep.h_residual, 1e-7));
    res.file("identities.csv", "table", csv.str());
    return res;
}

// ---------------------------------------------------------------------------
// homogenization sweeps

inline std::vector<double> dyadic_list(const config& c, const std::string& key)
{
    auto v = c.list("sweep", key);
    for (double e : v)
        need(e > 0.0, "[sweep] " + key + " entries must be positive");
    return v;
}

inline experiment_result run_eps_sweep_p2(const run_context& ctx)
{
    const auto& c = ctx.cfg;
    const auto base = validated_problem(c);
    need(!base.is_transport() && base.domain.dimension == 1, "eps-sweep-p2 needs a 1-D stiff problem");
    const auto& sp0 = base.stiff();
    const double kappa0 = sp0.model.kappa0;
    const double T = base.final_time;
    const auto table = build_effective_flux(sp0.flux, sp0.potential, {}, sp0.flux.u_min, sp0.flux.u_max,
                                            static_cast<std::size_t>(c.integer("sweep", "nodes", 201)), ctx.threads);
    sweep_plan plan;
    plan.make_spec = [&c](double eps) { return build_problem(c, eps); };
    plan.epsilons = dyadic_list(c, "eps");
    plan.seeds = seeds_of(c);
    plan.phis = default_test_functions(base.domain.half_width, 1);
    plan.times = c.has("sweep", "times") ? c.list("sweep", "times") : std::vector<double>{T};
    plan.resolution = c.num("sweep", "resolution", 16.0);
    plan.path_level = static_cast<int>(c.integer("sweep", "path_level", 2));
    plan.scheme = build_scheme(c);
    plan.table = table;
    plan.threads = ctx.threads;
    plan.reference = effective_reference(table, kappa0, base.domain, sp0.v0, plan.scheme);
    const bool closed_form = c.str("flux", "f1") == "linear" && c.num("flux", "slope", 1.0) == 1.0;
    if (closed_form) {
        // ubar = v0(x - t) + kappa0 W(t)
        const auto v0 = sp0.v0;
        const auto domain = base.domain;
        plan.corrector_reference = [v0, domain, kappa0](double, std::size_t n, const brownian_path& path,
                                                        const std::vector<double>& times, int) {
            std::vector<grid_field> out;
            for (double t : times) {
                const double W = path.at_time(t);
                auto f = make_field(domain, n, [&](const point& x) { return v0({x[0] - t, 0.0}) + kappa0 * W; });
                f.time = t;
                out.push_back(std::move(f));
            }
            return out;
        };
    }
    const auto conv = eps_sweep(plan);
    const double t_last = plan.times.back();

    experiment_result res;
    res.seeds = plan.seeds;
    bool weak_ok = true;
    double worst_weak_ratio = 0.0;
    double corr_lo = 1e300, corr_hi = 0.0, c_max = 0.0;
    json per_seed = json::array();
    for (auto seed : plan.seeds) {
        for (std::size_t p = 0; p < plan.phis.size(); ++p) {
            weak_ok = weak_ok && conv.weak_trend(seed, t_last, p, 0.7);
            const auto errs = weak_series(conv, seed, t_last, p);
            for (std::size_t j = 1; j < errs.size(); ++j)
                if (std::max(errs[j], errs[j - 1]) > 1e-12)
                    worst_weak_ratio = std::max(worst_weak_ratio, errs[j] / errs[j - 1]);
        }
        std::vector<double> ce, dxs;
        for (const auto& r : conv.rows)
            if (r.seed == seed && std::abs(r.time - t_last) < 1e-12) {
                ce.push_back(r.corrector_error);
                dxs.push_back(2.0 * base.domain.half_width / static_cast<double>(r.n));
            }
        json ratios = json::array();
        for (std::size_t j = 0; j < ce.size(); ++j) {
            c_max = std::max(c_max, ce[j] / dxs[j]);
            if (j) {
                const double r = ce[j] / ce[j - 1];
                corr_lo = std::min(corr_lo, r);
                corr_hi = std::max(corr_hi, r);
                ratios.push_back(r);
            }
        }
        per_seed.push_back({{"seed", seed}, {"corrector_errors", ce}, {"corrector_ratios", ratios}});
    }
    res.metrics = {{"worst_weak_ratio", worst_weak_ratio},
                   {"corrector_ratio_min", corr_lo},
                   {"corrector_ratio_max", corr_hi},
                   {"corrector_constant", c_max},
                   {"corrector_reference", closed_form ? "closed_form" : "effective_solve"},
                   {"per_seed", per_seed}};
    res.add(check_true("weak_star_trend", weak_ok, "every eps-halving: ratio <= 0.7 or both errors <= 1e-12"));
    res.add(check_in("corrector_ratio_min", corr_lo, 0.4, 0.7));
    res.add(check_in("corrector_ratio_max", corr_hi, 0.4, 0.7));
    res.file("convergence.csv", "convergence", convergence_csv(conv));

    if (c.flag("output", "fields", true)) {
        // u_eps, ubar and the corrector at the coarsest eps, first seed
        const double eps = plan.epsilons.front();
        const auto spec = build_problem(c, eps);
        const std::size_t n = plan.cells(eps, spec.domain.half_width);
        const auto path = sample_path(plan.seeds.front(), 0, T, plan.path_level);
        const auto traj = solve_problem(spec, n, path, plan.scheme, {t_last});
        const auto ubar = (closed_form ? plan.corrector_reference : plan.reference)(eps, n, path, {t_last}, traj.level);
        const auto& ue = traj.snapshots.at(1).field;
        const auto U = corrector_field(ubar.front(), table, spec.stiff().flux, spec.stiff().potential, eps);
        csv_table f("x,u,ubar,corrector");
        for (std::size_t k = 0; k < ue.size(); ++k)
            f.row(ue.center(k), ue.u[k], ubar.front().u[k], U.u[k]);
        res.file("fields.csv", "snapshot", f.str());
    }
    return res;
}

inline experiment_result run_eps_sweep_p1_shear(const run_context& ctx)
{
    const auto& c = ctx.cfg;
    const auto base = validated_problem(c);
    need(base.is_transport() && base.domain.dimension == 2, "eps-sweep-p1-shear needs a 2-D transport problem");
    const double T = base.final_time;
    const auto q = static_cast<std::size_t>(c.integer("sweep", "nodes", 32));
    need(q >= 2, "[sweep] nodes must be at least 2");
    // midpoint nodes in y_1; the shear profile does not depend on y_2
    std::vector<point> ys;
    std::vector<double> ws;
    for (std::size_t j = 0; j < q; ++j) {
        ys.push_back({(static_cast<double>(j) + 0.5) / static_cast<double>(q), 0.0});
        ws.push_back(1.0 / static_cast<double>(q));
    }
    const unsigned threads = ctx.threads;
    sweep_plan plan;
    plan.make_spec = [&c](double eps) { return build_problem(c, eps); };
    plan.epsilons = dyadic_list(c, "eps");
    plan.seeds = seeds_of(c);
    plan.phis = default_test_functions(base.domain.half_width, 2);
    plan.times = {T};
    plan.fixed_n = cells_of(c);
    plan.path_level = static_cast<int>(c.integer("sweep", "path_level", 2));
    plan.scheme = build_scheme(c);
    plan.reference = [&c, ys, ws, threads, cfg = plan.scheme](double eps, std::size_t n, const brownian_path& path,
                                                              const std::vector<double>& times, int level) {
        scheme_config s = cfg;
        s.min_level = std::max(s.min_level, level);
        const auto fam = solve_family_p1(build_problem(c, eps), n, path, ys, ws, s, times, threads);
        std::vector<grid_field> out;
        for (std::size_t t = 0; t < times.size(); ++t)
            out.push_back(fam.average.at(t + 1).field);
        return out;
    };
    const auto conv = eps_sweep(plan);

    experiment_result res;
    res.seeds = plan.seeds;
    bool mono = true;
    json series = json::array();
    for (auto seed : plan.seeds)
        for (std::size_t p = 0; p < plan.phis.size(); ++p) {
            const auto errs = weak_series(conv, seed, T, p);
            for (std::size_t j = 1; j < errs.size(); ++j)
                if (!(errs[j] < errs[j - 1] || std::max(errs[j], errs[j - 1]) <= 1e-12))
                    mono = false;
            series.push_back({{"seed", seed}, {"phi", conv.phi_names[p]}, {"weak_errors", errs}});
        }
    res.metrics = {{"series", series}, {"nodes", q}, {"n", plan.fixed_n}};
    res.add(check_true("weak_star_monotone", mono, "errors strictly decrease over eps for every seed and phi"));
    res.file("convergence.csv", "convergence", convergence_csv(conv));
    return res;
}

// ---------------------------------------------------------------------------
// structural checks

/// Random trigonometric profile with coefficients from the keyed generator.
inline std::function<double(const point&)> keyed_profile(std::uint64_t seed, std::uint64_t stream, double amp, double L)
{
    std::array<double, 8> a{};
    for (std::uint32_t j = 0; j < 8; ++j)
        a[j] = amp * keyed_normal(seed, stream, 0, j) / (1.0 + j / 2);
    return [a, L](const point& x) {
        double s = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            const double w = std::numbers::pi * static_cast<double>(j + 1) * x[0] / L;
            s += a[2 * j] * std::sin(w) + a[2 * j + 1] * std::cos(w);
        }
        return s;
    };
}

inline experiment_result run_comparison(const run_context& ctx)
{
    const auto& c = ctx.cfg;
    need(c.str("problem", "kind") == "both", "comparison runs both problems: set [problem] kind = both");
    const auto p1 = validated_problem(c, 0.0, false);
    const auto p2 = validated_problem(c, 0.0, true);
    const auto seed = seeds_of(c).front();
    const auto paths = static_cast<std::size_t>(c.integer("sweep", "paths", 16));
    const std::size_t n = cells_of(c);
    const int level = static_cast<int>(c.integer("sweep", "path_level", 6));
    const auto cfg = build_scheme(c);
    const double L = p1.domain.half_width;
    const double amp = c.num("problem", "amplitude", 0.6);

    struct row {
        std::size_t violations = 0, checked = 0, steps = 0;
    };
    std::vector<row> r1(paths), r2(paths);
    parallel_for(paths, ctx.threads, [&](std::size_t m) {
        // profile streams sit above the path streams
        const auto lo = keyed_profile(seed, (std::uint64_t{1} << 40) + 2 * m, amp, L);
        const auto d = keyed_profile(seed, (std::uint64_t{1} << 40) + 2 * m + 1, 0.5 * amp, L);
        auto hi = [&](const point& x) { return lo(x) + 0.05 + d(x) * d(x); };
        const auto path = sample_path(seed, m, p1.final_time, level);
        const auto a = comparison_test(p1, n, lo, hi, path, cfg);
        r1[m] = {a.violations, a.checked, a.steps};
        const auto& sp = p2.stiff();
        const double eps = p2.epsilon;
        auto lo2 = [&](const point& x) { return sp.model.g.forward(sp.potential(x[0] / eps) + lo(x)); };
        auto hi2 = [&](const point& x) { return sp.model.g.forward(sp.potential(x[0] / eps) + hi(x)); };
        const auto b = comparison_test(p2, n, lo2, hi2, path, cfg);
        r2[m] = {b.violations, b.checked, b.steps};
    });
    experiment_result res;
    res.seeds = {seed};
    csv_table csv("problem,path,violations,checked,steps");
    std::size_t v1 = 0, v2 = 0, checked = 0;
    for (std::size_t m = 0; m < paths; ++m) {
        csv.row(std::string("transport"), m, r1[m].violations, r1[m].checked, r1[m].steps);
        v1 += r1[m].violations;
        checked += r1[m].checked;
    }
    for (std::size_t m = 0; m < paths; ++m) {
        csv.row(std::string("stiff"), m, r2[m].violations, r2[m].checked, r2[m].steps);
        v2 += r2[m].violations;
        checked += r2[m].checked;
    }
    res.metrics = {{"violations_transport", v1}, {"violations_stiff", v2}, {"checked", checked}, {"paths", paths}};
    res.add(check_eq("violations_transport", static_cast<double>(v1), 0.0));
    res.add(check_eq("violations_stiff", static_cast<double>(v2), 0.0));
    res.file("ordering.csv", "table", csv.str());
    return res;
}

inline experiment_result run_contraction(const run_context& ctx)
{
    const auto& c = ctx.cfg;
    const auto spec = validated_problem(c);
    need(spec.is_transport(), "contraction needs kind = transport");
    contraction_plan plan;
    plan.n = cells_of(c);
    plan.times = c.list("sweep", "times");
    plan.seed = seeds_of(c).front();
    plan.path_level = static_cast<int>(c.integer("sweep", "path_level", 6));
    plan.N = c.num("sweep", "weight_N", 1.0);
    plan.scheme = build_scheme(c);
    plan.threads = ctx.threads;
    const auto paths = static_cast<std::size_t>(c.integer("sweep", "paths", 64));
    const double L = spec.domain.half_width;
    const auto ua = initial_shape(c.str("problem", "initial", "sin"), c.num("problem", "amplitude", 0.5),
                                  c.num("problem", "offset", 0.0), L);
    auto ub = [ua, L](const point& x) { return ua(x) + 0.3 * std::cos(std::numbers::pi * x[0] / L) + 0.2; };
    const auto rep = l1_contraction_test(spec, ua, ub, paths, plan);

    experiment_result res;
    res.seeds = {plan.seed};
    csv_table csv("time,mean,half_width,variance,bound,initial,C");
    json pts = json::array();
    for (const auto& p : rep.points) {
        csv.row(p.time, p.distance.mean, p.distance.half_width, p.distance.variance, p.bound, rep.initial, rep.C);
        pts.push_back({{"time", p.time}, {"mean", p.distance.mean}, {"bound", p.bound}});
        res.add(check_le("contraction_t=" + detail::format_double(p.time), p.distance.mean, p.bound,
                         "E int |u1 - u2| w_N <= exp(C t) initial 1.1 + 2 half-width"));
    }
    res.metrics = {{"C", rep.C}, {"initial", rep.initial}, {"paths", paths}, {"points", pts}};
    res.file("moments.csv", "moments", csv.str());
    return res;
}

inline experiment_result run_kruzkov(const run_context& ctx)
{
    const auto& c = ctx.cfg;
    const auto spec = validated_problem(c);
    const double T = spec.final_time;
    const double L = spec.domain.half_width;
    const std::size_t n = cells_of(c);
    need(n % 2 == 0, "[grid] n must be even");
    const double alpha = c.num("problem", "alpha", 0.0);
    const auto phi = smooth_kruzkov_test_function(T, {0.0, 0.0}, 0.8 * L);
    const auto cfg = build_scheme(c);
    const int level = static_cast<int>(c.integer("sweep", "path_level", 4));
    const auto seeds = seeds_of(c);

    std::vector<std::pair<kruzkov_result, kruzkov_result>> out(seeds.size());
    parallel_for(seeds.size(), ctx.threads, [&](std::size_t s) {
        const auto path = sample_path(seeds[s], 0, T, level);
        out[s] = {kruzkov_residual(spec, n / 2, path, alpha, phi, cfg), kruzkov_residual(spec, n, path, alpha, phi, cfg)};
    });
    experiment_result res;
    res.seeds = seeds;
    csv_table csv("seed,n,dx,residual,c_res");
    json per = json::array();
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto& [a, b] = out[s];
        csv.row(seeds[s], n / 2, a.dx, a.residual, a.c_res);
        csv.row(seeds[s], n, b.dx, b.residual, b.c_res);
        const double C = std::max(a.c_res, b.c_res);
        const std::string tag = "seed=" + std::to_string(seeds[s]);
        res.add(check_ge("residual_lower_bound_" + tag, std::min(a.residual + C * a.dx, b.residual + C * b.dx), 0.0,
                         "residual + C_res dx at both resolutions"));
        if (a.c_res == 0.0 && b.c_res == 0.0) {
            res.add(check_true("c_res_stable_" + tag, true, "residual nonnegative at both resolutions"));
        } else {
            const double ratio = a.c_res > 0.0 ? b.c_res / a.c_res : 1e300;
            res.add(check_in("c_res_ratio_" + tag, ratio, 0.5, 2.0, "C_res(dx0) / C_res(2 dx0)"));
        }
        per.push_back({{"seed", seeds[s]}, {"residual_2dx0", a.residual}, {"residual_dx0", b.residual},
                       {"c_res_2dx0", a.c_res}, {"c_res_dx0", b.c_res}});
    }
    res.metrics = {{"alpha", alpha}, {"per_seed", per}};
    res.file("residuals.csv", "table", csv.str());
    return res;
}

inline experiment_result run_kinetic_identities(const run_context& ctx)
{
    const auto& c = ctx.cfg;
    const double dxi = c.num("sweep", "xi_step", 1e-3);
    need(dxi > 0.0 && dxi <= 0.1, "[sweep] xi_step must lie in (0, 0.1]");
    const std::vector<double> values{-1.5, -0.7, 0.0, 0.4, 1.3};
    const auto m = static_cast<std::size_t>(std::llround(6.0 / dxi));
    const auto xi = linspace(-3.0, 3.0, m + 1);

    experiment_result res;
    csv_table csv("u,v,positive_part,absolute,quarter,bound");
    double worst = 0.0;
    for (double u : values)
        for (double v : values) {
            const auto r = chi_identity_check(u, v, xi);
            csv.row(u, v, r.positive_part, r.absolute, r.quarter, 2.0 * r.dxi);
            worst = std::max(worst, r.worst());
        }
    res.add(check_le("chi_identities", worst, 2.0 * dxi, "worst residual over all (u, v) pairs"));

    young_measure_histogram two;
    two.y_bins = 1;
    two.xi_edges = {-0.5, 0.5, 1.5};
    two.weights = {{0.5, 0.5}};
    two.counts = {2};
    const double rig = rigidity_defect(two);
    res.add(check_eq("rigidity_two_unit_spikes", rig, 0.25));

    // kinetic measure of a stationary 1|-1 Burgers shock: (1 - k^2) dt / 2 per step
    const double T = c.num("problem", "T", 0.25);
    const std::size_t n = static_cast<std::size_t>(c.integer("grid", "n", 64));
    transport_problem tp;
    tp.flux.components = {models::burgers()};
    tp.flux.u_min = -3.0;
    tp.flux.u_max = 3.0;
    tp.velocity = velocity_field::constant(1.0);
    tp.model = models::unit_noise(0.0, -3.0, 3.0);
    tp.initial = [](const point& x, const point&) { return x[0] < 0.0 ? 1.0 : -1.0; };
    problem_spec spec;
    spec.variant = tp;
    spec.domain = {1, 1.0, boundary_mode::far_field};
    spec.final_time = T;
    scheme_config cfg;
    cfg.record_steps = true;
    const auto traj = solve_problem(spec, n, sample_path(1, 0, T, 0), cfg);
    const auto ep = entropy_production(traj, linspace(-1.0, 1.0, 401), ctx.threads);
    csv_table mom("p,moment,exact");
    json moments = json::array();
    for (double p : {0.0, 1.0, 2.0}) {
        // int_{-1}^{1} |k|^p (1 - k^2) dk / 2 = 2 / ((p + 1)(p + 3))
        const double exact = 2.0 / ((p + 1.0) * (p + 3.0)) * T;
        const double got = weighted_p_moment(ep, p);
        mom.row(p, got, exact);
        moments.push_back({{"p", p}, {"moment", got}, {"exact", exact}});
        res.add(check_le("shock_moment_p=" + detail::format_double(p), std::abs(got - exact), 0.02 * exact,
                         "relative trapezoid error in k"));
    }
    res.metrics = {{"chi_worst", worst}, {"dxi", dxi}, {"rigidity", rig}, {"shock_moments", moments}};
    res.file("residuals.csv", "table", csv.str());
    res.file("moments.csv", "moments", mom.str());
    return res;
}

inline experiment_result run_young_concentration(const run_context& ctx)
{
    const auto& c = ctx.cfg;
    const auto base = validated_problem(c);
    need(!base.is_transport() && base.domain.dimension == 1, "young-concentration needs a 1-D stiff problem");
    need(c.str("flux", "f1") == "linear" && c.num("flux", "slope", 1.0) == 1.0,
         "young-concentration uses the closed-form limit: f1 = linear with slope 1");
    const double T = base.final_time;
    const double kappa0 = base.stiff().model.kappa0;
    const auto seed = seeds_of(c).front();
    const auto eps_list = dyadic_list(c, "eps");
    const auto y_bins = static_cast<std::size_t>(c.integer("sweep", "y_bins", 8));
    const auto xi_bins = static_cast<std::size_t>(c.integer("sweep", "xi_bins", 32));
    const double resolution = c.num("sweep", "resolution", 16.0);
    const int path_level = static_cast<int>(c.integer("sweep", "path_level", 2));
    const auto cfg = build_scheme(c);
    const auto path = sample_path(seed, 0, T, path_level);
    const double W = path.at_time(T);

    struct level_out {
        std::vector<double> var;
        young_measure_histogram hist;
        std::size_t n = 0;
    };
    std::vector<level_out> lv(eps_list.size());
    parallel_for(eps_list.size(), ctx.threads, [&](std::size_t e) {
        const double eps = eps_list[e];
        const auto spec = build_problem(c, eps);
        const auto& sp = spec.stiff();
        const auto n = static_cast<std::size_t>(std::ceil(2.0 * spec.domain.half_width * resolution / eps - 1e-9));
        const auto traj = solve_problem(spec, n, path, cfg);
        auto diff = traj.final_field();
        for (std::size_t i = 0; i < diff.size(); ++i) {
            const double x = diff.center(i);
            // U(T, x, y) = v0(x - T) + kappa0 W(T) + V(y)
            diff.u[i] -= sp.v0({x - T, 0.0}) + kappa0 * W + sp.potential(x / eps);
        }
        lv[e].var = bin_variances(diff, eps, y_bins);
        lv[e].hist = young_measure_estimate(traj.final_field(), eps, y_bins, xi_bins);
        lv[e].n = n;
    });

    experiment_result res;
    res.seeds = {seed};
    csv_table vc("eps,n,y_bin,variance");
    csv_table hc("eps,y_bin,xi_center,weight");
    json levels = json::array();
    double worst_ratio = 0.0;
    for (std::size_t e = 0; e < lv.size(); ++e) {
        for (std::size_t b = 0; b < y_bins; ++b) {
            vc.row(eps_list[e], lv[e].n, b, lv[e].var[b]);
            for (std::size_t j = 0; j < xi_bins; ++j)
                hc.row(eps_list[e], b, lv[e].hist.xi_center(j), lv[e].hist.weights[b][j]);
            if (e)
                worst_ratio = std::max(worst_ratio, lv[e].var[b] / lv[e - 1].var[b]);
        }
        levels.push_back({{"eps", eps_list[e]}, {"n", lv[e].n}, {"rigidity", rigidity_defect(lv[e].hist)},
                          {"max_variance", *std::max_element(lv[e].var.begin(), lv[e].var.end())}});
    }
    res.metrics = {{"worst_variance_ratio", worst_ratio}, {"levels", levels}};
    res.add(check_le("variance_ratio", worst_ratio, 0.5, "per y-bin variance ratio per eps-halving"));
    res.file("variances.csv", "table", vc.str());
    res.file("histogram.csv", "histogram", hc.str());
    return res;
}

inline experiment_result run_viscosity_crosscheck(const run_context& ctx)
{
    const auto& c = ctx.cfg;
    const auto spec = validated_problem(c);
    need(spec.domain.dimension == 1, "viscosity-crosscheck is one-dimensional");
    const std::size_t n = cells_of(c);
    const double T = spec.final_time;
    const auto seed = seeds_of(c).front();
    const auto path = sample_path(seed, 0, T, static_cast<int>(c.integer("sweep", "path_level", 4)));
    const double cv = c.num("sweep", "viscosity_c", 0.25);
    need(cv > 0.0, "[sweep] viscosity_c must be positive");
    auto cfg = build_scheme(c);
    cfg.viscosity = 0.0;

    const double dx = 2.0 * spec.domain.half_width / static_cast<double>(n);
    const std::vector<double> mult{4.0, 2.0, 1.0};
    std::vector<trajectory> runs(2 + mult.size());
    parallel_for(runs.size(), ctx.threads, [&](std::size_t j) {
        scheme_config s = cfg;
        std::size_t cells = n;
        if (j == 1)
            cells = 2 * n;
        else if (j >= 2)
            s.viscosity = mult[j - 2] * cv * dx;
        runs[j] = solve_problem(spec, cells, path, s);
    });
    const auto& hyp = runs[0].final_field();
    // Richardson: |u_dx - u| ~ 2 |u_dx - R u_{dx/2}| for a first-order scheme
    const double trunc = 2.0 * l1_distance(hyp, restrict_half(runs[1].final_field()));
    std::vector<double> dist;
    csv_table csv("viscosity,l1_distance");
    for (std::size_t j = 0; j < mult.size(); ++j) {
        dist.push_back(l1_distance(runs[j + 2].final_field(), hyp));
        csv.row(mult[j] * cv * dx, dist.back());
    }
    experiment_result res;
    res.seeds = {seed};
    bool mono = true;
    for (std::size_t j = 1; j < dist.size(); ++j)
        mono = mono && dist[j] < dist[j - 1];
    res.metrics = {{"distances", dist}, {"truncation_estimate", trunc}, {"c", cv}, {"dx", dx}};
    res.add(check_true("distance_monotone", mono, "L1 distance decreases with the viscosity"));
    res.add(check_le("smallest_vs_truncation", dist.back(), 2.0 * trunc, "smallest distance <= 2 x truncation estimate"));
    res.file("distances.csv", "table", csv.str());
    if (c.flag("output", "fields", true))
        res.file("final.csv", "snapshot", snapshot_csv(hyp));
    return res;
}

// ---------------------------------------------------------------------------
// registry

inline constexpr const char* defaults_comparison = R"(
[problem]
kind = both
eps = 1/8
T = 0.25
amplitude = 0.6
[flux]
f1 = burgers
f1_stiff = cubic
delta0 = 1
u_min = -6
u_max = 6
[noise]
kappa0 = 0.5
sigma = sinh
[oscillation]
V = sin
velocity = constant
a0 = 1
[grid]
n = 256
L = 1
[sweep]
seed = 7
paths = 16
path_level = 6
)";

inline constexpr const char* defaults_contraction = R"(
[problem]
kind = transport
eps = 1
T = 0.5
initial = sin
amplitude = 0.5
[flux]
f1 = burgers
u_min = -6
u_max = 6
[noise]
kappa0 = 0.5
sigma = sinh
[oscillation]
velocity = constant
a0 = 1
[grid]
n = 256
L = 1
boundary = periodic
[sweep]
seed = 11
paths = 64
times = 0.125, 0.25, 0.5
path_level = 6
weight_N = 1
)";

inline constexpr const char* defaults_effective_flux = R"(
[problem]
kind = stiff
eps = 1/8
T = 0.25
initial = zero
[flux]
f1 = linear
f2 = burgers
u_min = -3
u_max = 3
[noise]
kappa0 = 0.5
[oscillation]
V = sin
[grid]
n = 64
L = 1
[sweep]
points = 401
)";

inline constexpr const char* defaults_eps_sweep_p1_shear = R"(
[problem]
kind = transport
eps = 1/4
T = 0.25
initial = wave2d
amplitude = 1
[flux]
f1 = linear
u_min = -6
u_max = 6
[noise]
kappa0 = 0.5
sigma = one
[oscillation]
velocity = shear
a1 = 1
shear = 0.5
[grid]
n = 128
L = 0.25
[sweep]
eps = 1/4, 1/8, 1/16
seeds = 1, 2
nodes = 32
path_level = 2
)";

inline constexpr const char* defaults_eps_sweep_p2 = R"(
[problem]
kind = stiff
eps = 0.125
T = 0.25
initial = sin
amplitude = 0.5
[flux]
f1 = linear
u_min = -3
u_max = 3
[noise]
kappa0 = 0.5
[oscillation]
V = sin
[grid]
n = 1024
L = 1
[sweep]
eps = 1/8, 1/16, 1/32, 1/64
seeds = 1, 2, 3
resolution = 16
path_level = 2
nodes = 201
)";

inline constexpr const char* defaults_kinetic_identities = R"(
[problem]
T = 0.25
[grid]
n = 64
[sweep]
xi_step = 0.001
)";

inline constexpr const char* defaults_kruzkov = R"(
[problem]
kind = transport
eps = 1
T = 0.25
initial = sin
amplitude = 0.5
alpha = 0.6
[flux]
f1 = burgers
u_min = -6
u_max = 6
[noise]
kappa0 = 0.5
sigma = sinh
[oscillation]
velocity = constant
a0 = 1
[grid]
n = 512
L = 1
[sweep]
seeds = 4
path_level = 4
)";

inline constexpr const char* defaults_miraculous = R"(
[problem]
kind = stiff
eps = 1/8
T = 0.25
initial = zero
[flux]
f1 = cubic
delta0 = 1
u_min = -2
u_max = 2
[noise]
kappa0 = 0.5
[oscillation]
V = sin
[grid]
n = 64
L = 1
[sweep]
points = 41
nodes = 801
)";

inline constexpr const char* defaults_special_invariance_p1 = R"(
[problem]
kind = transport
eps = 1
T = 1
initial = special
alpha = 0.3
[flux]
f1 = burgers
u_min = -6
u_max = 6
[noise]
kappa0 = 0.5
sigma = sinh
[oscillation]
velocity = constant
a0 = 1
[grid]
n = 512
L = 1
[scheme]
level = 10
[sweep]
seed = 1
)";

inline constexpr const char* defaults_special_invariance_p2 = R"(
[problem]
kind = stiff
eps = 1/16
T = 0.5
initial = special
alpha = 0.2
[flux]
f1 = cubic
delta0 = 1
u_min = -4
u_max = 4
[noise]
kappa0 = 0.5
[oscillation]
V = sin
[grid]
n = 1024
L = 1
[sweep]
seed = 1
)";

inline constexpr const char* defaults_viscosity_crosscheck = R"(
[problem]
kind = transport
eps = 1
T = 0.5
initial = sin
amplitude = 0.5
offset = 0.2
[flux]
f1 = burgers
u_min = -6
u_max = 6
[noise]
kappa0 = 0.5
sigma = sinh
[oscillation]
velocity = constant
a0 = 1
[grid]
n = 512
L = 1
[sweep]
seed = 1
path_level = 4
viscosity_c = 0.25
)";

inline constexpr const char* defaults_young_concentration = R"(
[problem]
kind = stiff
eps = 1/8
T = 0.25
initial = sin
amplitude = 0.5
[flux]
f1 = linear
u_min = -3
u_max = 3
[noise]
kappa0 = 0.5
[oscillation]
V = sin
[grid]
n = 256
L = 1
[sweep]
eps = 1/8, 1/16, 1/32
seed = 4
resolution = 16
y_bins = 8
xi_bins = 32
path_level = 2
)";

/// Sorted by name.
inline const std::vector<experiment_info>& registry()
{
    static const std::vector<experiment_info> r{
        {"comparison", "pathwise ordering of ordered initial pairs, both problems", defaults_comparison,
         run_comparison},
        {"contraction", "Monte Carlo weighted L1 contraction for a nonlinear transport problem", defaults_contraction,
         run_contraction},
        {"effective-flux", "effective flux against the closed-form average for f1 = u, f2 = u^2/2",
         defaults_effective_flux, run_effective_flux, false},
        {"eps-sweep-p1-shear", "2-D shear transport: weak-star error against the y-averaged family",
         defaults_eps_sweep_p1_shear, run_eps_sweep_p1_shear},
        {"eps-sweep-p2", "stiff-source homogenization sweep: weak-star and corrector errors over eps",
         defaults_eps_sweep_p2, run_eps_sweep_p2},
        {"kinetic-identities", "chi-function identities, rigidity defect and shock entropy moments",
         defaults_kinetic_identities, run_kinetic_identities},
        {"kruzkov", "stochastic Kato-Kruzkov residual against a special solution", defaults_kruzkov, run_kruzkov},
        {"miraculous", "sigma and h of the effective flux against mean values", defaults_miraculous, run_miraculous},
        {"special-invariance-p1", "transport problem keeps the special solution g(alpha + kappa0 W)",
         defaults_special_invariance_p1, run_special_invariance_p1},
        {"special-invariance-p2", "well-balanced stiff-source scheme keeps g(V + kappa0 W + alpha)",
         defaults_special_invariance_p2, run_special_invariance_p2},
        {"viscosity-crosscheck", "vanishing-viscosity runs approach the hyperbolic solution",
         defaults_viscosity_crosscheck, run_viscosity_crosscheck},
        {"young-concentration", "per-bin variance of u_eps - U shrinks with eps (stiff linear case)",
         defaults_young_concentration, run_young_concentration},
    };
    return r;
}

} // namespace sclhom::runner
