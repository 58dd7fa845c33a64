#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sclhom/kinetic.hpp"
#include "sclhom/models.hpp"
#include "support.hpp"

using namespace sclhom;
using namespace testing_support;

namespace {

constexpr double pi = std::numbers::pi;

trajectory burgers_shock(std::size_t n, double T, flux_kind kind = flux_kind::godunov)
{
    auto spec = p1_spec(models::burgers(), velocity_field::constant(1.0), models::unit_noise(0.0, -3, 3),
                        [](const point& x, const point&) { return x[0] < 0 ? 1.0 : -1.0; }, 0.1, 1.0, T,
                        boundary_mode::far_field);
    scheme_config cfg;
    cfg.kind = kind;
    cfg.record_steps = true;
    return solve_problem(spec, n, sample_path(1, 0, T, 0), cfg);
}

trajectory smooth_advection(std::size_t n, double T)
{
    auto spec = p1_spec(models::linear(), velocity_field::constant(1.0), models::unit_noise(0.0, -3, 3),
                        [](const point& x, const point&) { return std::sin(pi * x[0]); }, 0.1, 1.0, T);
    scheme_config cfg;
    cfg.record_steps = true;
    return solve_problem(spec, n, sample_path(1, 0, T, 0), cfg);
}

young_measure_histogram one_bin(std::vector<double> edges, std::vector<double> w, std::size_t count = 10)
{
    young_measure_histogram h;
    h.y_bins = 1;
    h.xi_edges = std::move(edges);
    h.weights = {std::move(w)};
    h.counts = {count};
    return h;
}

} // namespace

TEST(Chi, Definitions)
{
    EXPECT_EQ(chi_plus(0.2, 0.5), 1.0);
    EXPECT_EQ(chi_plus(0.5, 0.5), 0.0);
    EXPECT_EQ(chi_minus(0.7, 0.5), -1.0);
    EXPECT_EQ(chi(-0.3, 0.5), 0.0);
    EXPECT_EQ(chi(0.3, 0.5), 1.0);
    EXPECT_EQ(chi(-0.3, -0.5), -1.0);
    EXPECT_EQ(chi(-0.7, -0.5), 0.0);
}

TEST(KineticSample, SingleTransitionAndCompactSupport)
{
    const auto xi = linspace(-2.0, 2.0, 401);
    const auto s = make_kinetic_sample(0.73, xi);
    int transitions = 0;
    for (std::size_t j = 0; j + 1 < xi.size(); ++j) {
        EXPECT_GE(s.chi_plus[j], s.chi_plus[j + 1]);
        transitions += s.chi_plus[j] != s.chi_plus[j + 1];
    }
    EXPECT_EQ(transitions, 1);
    EXPECT_EQ(s.chi.front(), 0.0);
    EXPECT_EQ(s.chi.back(), 0.0);
}

TEST(ChiIdentities, AbsoluteValueExample)
{
    const auto xi = linspace(-3.0, 4.0, 7001);
    const auto r = chi_identity_check(2.0, -1.0, xi);
    EXPECT_NEAR(r.absolute_integral, 3.0, r.dxi);
    EXPECT_TRUE(r.pass());
}

TEST(ChiIdentities, EqualArgumentsExact)
{
    const auto r = chi_identity_check(0.4, 0.4, linspace(-1.0, 2.0, 3001));
    EXPECT_EQ(r.positive_part, 0.0);
    EXPECT_EQ(r.absolute, 0.0);
    EXPECT_EQ(r.quarter, 0.0);
}

TEST(ChiIdentities, PositivePartExample)
{
    const auto r = chi_identity_check(0.7, 0.2, linspace(-1.0, 2.0, 3001));
    EXPECT_NEAR(r.dxi, 1e-3, 1e-15);
    EXPECT_NEAR(r.positive_part_integral, 0.5, 2e-3);
    EXPECT_NEAR(r.quarter_integral, 0.125, 2e-3);
    EXPECT_LE(r.worst(), 2.0 * r.dxi);
}

TEST(ChiIdentities, RandomPairs)
{
    const auto xi = linspace(-5.0, 5.0, 10001);
    for (double u : {-3.1, -0.45, 0.0, 1.9})
        for (double v : {-2.2, 0.33, 3.8})
            EXPECT_TRUE(chi_identity_check(u, v, xi).pass()) << u << " " << v;
}

TEST(ChiIdentities, GridTooNarrow)
{
    try {
        chi_identity_check(0.0, 1.0, linspace(-0.5, 1.5, 101));
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::grid_too_narrow);
    }
}

TEST(EntropyProduction, ConstantFieldIsZero)
{
    auto spec = p1_spec(models::burgers(), velocity_field::constant(1.0), models::unit_noise(0.0, -3, 3),
                        [](const point&, const point&) { return 0.4; }, 0.1, 1.0, 0.25);
    scheme_config cfg;
    cfg.record_steps = true;
    const auto traj = solve_problem(spec, 64, sample_path(1, 0, 0.25, 0), cfg);
    const auto ep = entropy_production(traj, linspace(-1.0, 1.0, 21));
    for (const auto& row : ep.per_cell)
        for (double v : row)
            EXPECT_EQ(v, 0.0);
    EXPECT_EQ(weighted_p_moment(ep, 0.0), 0.0);
}

TEST(EntropyProduction, StationaryShockRate)
{
    const double T = 0.25;
    const auto traj = burgers_shock(64, T);
    ASSERT_EQ(traj.final_field().u, traj.snapshots.front().field.u); // stationary discrete shock
    const auto ks = linspace(-1.0, 1.0, 201);
    const auto ep = entropy_production(traj, ks);
    // Rankine-Hugoniot: the |u - k| flux jump across a 1|-1 shock is 1 - k^2
    for (std::size_t m = 0; m < ks.size(); ++m) {
        double total = 0.0;
        for (double v : ep.per_cell[m])
            total += v;
        EXPECT_NEAR(total, (1.0 - ks[m] * ks[m]) * T, 1e-12);
    }
}

TEST(EntropyProduction, ShockMassMatchesDissipation)
{
    const double T = 0.25;
    const auto ep = entropy_production(burgers_shock(64, T), linspace(-1.5, 1.5, 301));
    const double jump = 2.0;
    const double oracle = std::pow(jump, 3) / 12.0 * T;
    EXPECT_NEAR(weighted_p_moment(ep, 0.0), oracle, 0.1 * oracle);
    EXPECT_GT(weighted_p_moment(ep, 2.0), 0.0);
}

TEST(EntropyProduction, NonnegativeForAllFluxes)
{
    auto spec = p1_spec(models::cubic(), velocity_field::constant(-1.0), models::unit_noise(0.0, -3, 3),
                        [](const point& x, const point&) { return std::sin(3.0 * pi * x[0]) + (x[0] > 0.2); },
                        0.1, 1.0, 0.25);
    for (auto kind : {flux_kind::godunov, flux_kind::engquist_osher, flux_kind::rusanov}) {
        scheme_config cfg;
        cfg.kind = kind;
        cfg.record_steps = true;
        const auto traj = solve_problem(spec, 128, sample_path(1, 0, 0.25, 0), cfg);
        const auto ep = entropy_production(traj, linspace(-2.5, 2.5, 51));
        EXPECT_GE(ep.min_entry, -1e-12);
    }
}

TEST(EntropyProduction, SmoothAdvectionVanishesWithGrid)
{
    const auto ks = linspace(-1.2, 1.2, 241);
    std::vector<double> mass;
    for (std::size_t n : {64, 128, 256})
        mass.push_back(weighted_p_moment(entropy_production(smooth_advection(n, 0.25), ks), 0.0));
    // upwind numerical diffusion: total production is first order in dx
    EXPECT_NEAR(mass[1] / mass[0], 0.5, 0.1);
    EXPECT_NEAR(mass[2] / mass[1], 0.5, 0.1);
}

TEST(EntropyProduction, SmoothAdvectionPerCellStepIsSecondOrder)
{
    const auto ks = linspace(-1.2, 1.2, 121);
    std::vector<double> peak;
    for (std::size_t n : {64, 128}) {
        const auto traj = smooth_advection(n, 0.25);
        const auto ep = entropy_production(traj, ks);
        double worst = 0.0;
        for (const auto& row : ep.per_step)
            for (double v : row)
                worst = std::max(worst, v);
        peak.push_back(worst);
    }
    // per step the production summed over cells is O(dx dt) = O(dx^2)
    EXPECT_NEAR(peak[1] / peak[0], 0.25, 0.08);
}

TEST(EntropyProduction, MissingStepData)
{
    auto spec = p1_spec(models::burgers(), velocity_field::constant(1.0), models::unit_noise(0.0, -3, 3),
                        [](const point&, const point&) { return 0.4; }, 0.1, 1.0, 0.25);
    const auto traj = solve_problem(spec, 32, sample_path(1, 0, 0.25, 0), {});
    try {
        entropy_production(traj, {0.0});
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::missing_step_data);
    }
}

TEST(EntropyProduction, ThreadIndependent)
{
    const auto traj = burgers_shock(64, 0.125, flux_kind::rusanov);
    const auto a = entropy_production(traj, linspace(-1.0, 1.0, 41), 1);
    const auto b = entropy_production(traj, linspace(-1.0, 1.0, 41), 3);
    EXPECT_EQ(a.per_cell, b.per_cell);
}

TEST(WeightedMoment, ZeroFieldAndWeight)
{
    entropy_production_field f;
    f.k = {-1.0, 0.0, 1.0};
    f.k_weight = {0.5, 1.0, 0.5};
    f.x = {0.0, 0.5};
    f.per_cell.assign(3, std::vector<double>(2, 0.0));
    EXPECT_EQ(weighted_p_moment(f, 1.0), 0.0);
    f.per_cell[2][1] = 4.0;
    EXPECT_EQ(weighted_p_moment(f, 0.0), 1.0);
    EXPECT_EQ(weighted_p_moment(f, 2.0, [](const point& x) { return x[0] > 0.25 ? 3.0 : 0.0; }), 3.0);
}

TEST(Rigidity, PointMassIsZero)
{
    EXPECT_EQ(rigidity_defect(one_bin({0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 0.0})), 0.0);
}

TEST(Rigidity, TwoUnitSpikes)
{
    // centres 0 and 1
    EXPECT_EQ(rigidity_defect(one_bin({-0.5, 0.5, 1.5}, {0.5, 0.5})), 0.25);
}

TEST(Rigidity, TwoPointQuarterSpread)
{
    // spikes at centres 0 and 3 with a gap bin between
    const double d = rigidity_defect(one_bin({-0.5, 0.5, 1.5, 2.5, 3.5}, {0.5, 0.0, 0.0, 0.5}));
    EXPECT_NEAR(d, 0.25 * 3.0, 1e-15);
}

TEST(Rigidity, WeightsBySampleShare)
{
    young_measure_histogram h;
    h.y_bins = 2;
    h.xi_edges = {-0.5, 0.5, 1.5};
    h.weights = {{0.5, 0.5}, {1.0, 0.0}};
    h.counts = {30, 10};
    EXPECT_NEAR(rigidity_defect(h), 0.25 * 0.75, 1e-15);
    EXPECT_GE(rigidity_defect(h), 0.0);
}
