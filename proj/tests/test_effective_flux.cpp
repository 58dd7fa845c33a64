#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "sclhom/effective_flux.hpp"
#include "sclhom/models.hpp"
#include "support.hpp"

using namespace sclhom;
using namespace testing_support;

namespace {

mean_value_engine engine_for(const oscillatory_potential& V)
{
    mean_value_engine e;
    e.potential = V;
    return e;
}

/// Independent midpoint-rule average over one period of sin(2 pi z).
double sine_average(const std::function<double(double)>& h, int n = 4096)
{
    double s = 0.0;
    for (int j = 0; j < n; ++j)
        s += h(std::sin(2.0 * std::numbers::pi * (j + 0.5) / n));
    return s / n;
}

} // namespace

TEST(MeanValue, SineSquared)
{
    EXPECT_NEAR(mean_value([](double w) { return w * w; }, engine_for(oscillatory_potential::sine())), 0.5, 1e-13);
}

TEST(MeanValue, QuasiPeriodicSquare)
{
    auto e = engine_for(models::quasi_periodic_pair());
    e.tolerance = 1e-4;
    const auto est = mean_value_estimate([](double w) { return w * w; }, e);
    EXPECT_NEAR(est.value, 1.0, 1e-4);
    EXPECT_LE(est.bracket, 1e-4);
}

TEST(MeanValue, ConstantIsExact)
{
    EXPECT_EQ(mean_value([](double) { return 2.75; }, engine_for(oscillatory_potential::sine())), 2.75);
    auto e = engine_for(models::quasi_periodic_pair());
    e.tolerance = 1e-4;
    EXPECT_EQ(mean_value([](double) { return -1.5; }, e), -1.5);
}

TEST(MeanValue, QuasiPeriodicBracketTooTight)
{
    auto e = engine_for(models::quasi_periodic_pair());
    e.tolerance = 1e-15;
    e.windows = {1e2, 1e3};
    try {
        mean_value([](double w) { return w * w; }, e);
        FAIL();
    } catch (const error& err) {
        EXPECT_EQ(err.code(), errc::no_convergence);
    }
}

TEST(SolveFbar1, NoOscillationGivesF1)
{
    const auto flux = make_flux({models::cubic()}, -3, 3, 1.0);
    EXPECT_NEAR(solve_fbar1(0.7, flux, oscillatory_potential::zero(), {}), models::cubic().f(0.7), 1e-12);
}

TEST(SolveFbar1, LinearIsIdentity)
{
    const auto flux = make_flux({models::linear()}, -3, 3, 1.0);
    for (double p : {-1.0, 0.2, 0.9})
        EXPECT_NEAR(solve_fbar1(p, flux, oscillatory_potential::sine(), {}), p, 1e-12);
}

TEST(SolveFbar1, CubicOddSymmetry)
{
    const auto flux = make_flux({models::cubic()}, -3, 3, 1.0);
    EXPECT_NEAR(solve_fbar1(0.0, flux, oscillatory_potential::sine(), {}), 0.0, 1e-12);
}

TEST(SolveFbar1, FixedPointAgainstIndependentAverage)
{
    const auto f = models::cubic();
    const auto flux = make_flux({f}, -3, 3, 1.0);
    const double p = 0.6;
    const double q = solve_fbar1(p, flux, oscillatory_potential::sine(), {});
    const double F = sine_average([&](double v) { return bisect(f.f, q + v, -5, 5); });
    EXPECT_NEAR(F, p, 1e-10);
}

TEST(BuildEffectiveFlux, QuadraticTransverseClosedForm)
{
    const auto flux = make_flux({models::linear(), models::burgers()}, -3, 3, 1.0);
    const auto t = build_effective_flux(flux, oscillatory_potential::sine(), {}, -2.0, 2.0, 401);
    for (double p : {-1.0, 0.0, 0.5, 1.0}) {
        const double oracle = sine_average([p](double v) { return 0.5 * (p + v) * (p + v); });
        EXPECT_NEAR(t.fbar(1, p), (p * p + 0.5) / 2.0, 1e-8);
        EXPECT_NEAR(t.fbar(1, p), oracle, 1e-8);
    }
    EXPECT_NEAR(t.fbar(1, 1.0), 0.75, 1e-8);
    EXPECT_NEAR(t.fbar(1, 0.0), 0.25, 1e-8);
}

TEST(BuildEffectiveFlux, NoOscillationReproducesFlux)
{
    const auto flux = make_flux({models::cubic(), models::linear(2.0)}, -3, 3, 1.0);
    const auto t = build_effective_flux(flux, oscillatory_potential::zero(), {}, -1.5, 1.5, 301);
    for (double p : {-1.2, -0.1, 0.4, 1.3}) {
        EXPECT_NEAR(t.fbar1(p), flux[0].f(p), 1e-9);
        EXPECT_NEAR(t.fbar(1, p), 2.0 * p, 1e-9);
    }
}

TEST(BuildEffectiveFlux, LinearHasUnitSlope)
{
    const auto flux = make_flux({models::linear()}, -3, 3, 1.0);
    const auto t = build_effective_flux(flux, oscillatory_potential::sine(), {}, -2.0, 2.0, 101);
    for (std::size_t i = 0; i < t.size(); ++i)
        EXPECT_NEAR(t.fbar1_prime(t.node(i)), 1.0, 1e-12);
}

TEST(BuildEffectiveFlux, ResidualsAndMonotonicity)
{
    const auto flux = make_flux({models::cubic(), models::cubic()}, -3, 3, 1.0);
    const auto t = build_effective_flux(flux, oscillatory_potential::sine(), {}, -2.0, 2.0, 201);
    EXPECT_LE(t.max_fixed_point_residual(), 1e-10);
    EXPECT_LE(t.max_inverse_residual(), 1e-10);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        EXPECT_LT(t.fbar1(t.node(i)), t.fbar1(t.node(i + 1)));
        EXPECT_LE(t.fbar(1, t.node(i)), t.fbar(1, t.node(i + 1)));
        EXPECT_GE(t.fbar1_prime(t.node(i)), 1.0 - 1e-12); // f_1' >= 1 is inherited
    }
}

TEST(BuildEffectiveFlux, DerivativeBoundsFromShiftedArguments)
{
    const auto f = models::cubic();
    const auto flux = make_flux({f}, -3, 3, 1.0);
    const auto t = build_effective_flux(flux, oscillatory_potential::sine(), {}, -1.0, 1.0, 81);
    for (double p : {-0.8, 0.0, 0.55}) {
        const double q = t.fbar1(p);
        double gmin = 1e300, gmax = 0.0;
        for (int j = 0; j < 400; ++j) {
            const double u = bisect(f.f, q + std::sin(2.0 * std::numbers::pi * j / 400.0), -5, 5);
            gmin = std::min(gmin, 1.0 / f.df(u));
            gmax = std::max(gmax, 1.0 / f.df(u));
        }
        EXPECT_GE(t.fbar1_prime(p), 1.0 / gmax - 1e-9);
        EXPECT_LE(t.fbar1_prime(p), 1.0 / gmin + 1e-9);
    }
}

TEST(Miraculous, LinearIsExact)
{
    const auto flux = make_flux({models::linear()}, -3, 3, 1.0);
    const auto V = oscillatory_potential::sine();
    const auto t = build_effective_flux(flux, V, {}, -3.0, 3.0, 121);
    const auto r = check_miraculous(t, flux, V, {}, linspace(-2, 2, 41));
    EXPECT_LE(r.sigma_residual, 1e-14);
    EXPECT_LE(r.h_residual, 1e-14);
}

TEST(Miraculous, CubicWithSine)
{
    const auto flux = make_flux({models::cubic()}, -3, 3, 1.0);
    const auto V = oscillatory_potential::sine();
    const auto t = build_effective_flux(flux, V, {}, -2.0, 2.0, 801);
    const auto r = check_miraculous(t, flux, V, {}, linspace(-2, 2, 41));
    EXPECT_LE(r.sigma_residual, 1e-7);
    EXPECT_LE(r.h_residual, 1e-7);
}

TEST(Miraculous, NoOscillationReducesToDefinition)
{
    const auto flux = make_flux({models::cubic()}, -3, 3, 1.0);
    const auto V = oscillatory_potential::zero();
    const auto t = build_effective_flux(flux, V, {}, -1.5, 1.5, 801);
    const auto r = check_miraculous(t, flux, V, {}, linspace(-1.5, 1.5, 41));
    EXPECT_LE(r.sigma_residual, 1e-12);
    EXPECT_LE(r.h_residual, 1e-12);
}

TEST(EffectiveInitialData, MeanConsistency)
{
    const auto flux = make_flux({models::cubic()}, -3, 3, 1.0);
    const auto V = oscillatory_potential::sine();
    const auto t = build_effective_flux(flux, V, {}, -2.0, 2.0, 401);
    EXPECT_LE(initial_mean_consistency(t, flux, V, {}, linspace(-1.5, 1.5, 25)), 1e-8);
}

TEST(EffectiveFluxTable, CsvColumns)
{
    const auto flux = make_flux({models::linear(), models::burgers()}, -3, 3, 1.0);
    const auto t = build_effective_flux(flux, oscillatory_potential::sine(), {}, -1.0, 1.0, 11);
    std::ostringstream os;
    t.write_csv(os);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "p,fbar1,fbar1p,fbar1pp,gbar,fbar_2");
}

TEST(EffectiveFluxTable, ThreadCountDoesNotChangeTables)
{
    const auto flux = make_flux({models::cubic(), models::cubic()}, -3, 3, 1.0);
    const auto a = build_effective_flux(flux, oscillatory_potential::sine(), {}, -2.0, 2.0, 101, 1);
    const auto b = build_effective_flux(flux, oscillatory_potential::sine(), {}, -2.0, 2.0, 101, 4);
    std::ostringstream sa, sb;
    a.write_csv(sa);
    b.write_csv(sb);
    EXPECT_EQ(sa.str(), sb.str());
}

TEST(EffectiveNoise, PreservesEffectiveSpecialSolution)
{
    const auto flux = make_flux({models::cubic()}, -3, 3, 1.0);
    const auto V = oscillatory_potential::sine();
    const auto t = build_effective_flux(flux, V, {}, -2.0, 2.0, 401);
    const auto m = t.noise_model(0.5);
    const double gamma = 0.3;
    double u = t.gbar(gamma);
    double W = 0.0;
    for (double dW : {0.1, -0.25, 0.05, 0.3}) {
        u = noise_flow(u, 0.5 * dW, m);
        W += dW;
    }
    EXPECT_NEAR(u, t.gbar(gamma + 0.5 * W), 1e-12);
}
