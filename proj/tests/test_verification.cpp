#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sclhom/models.hpp"
#include "sclhom/verification.hpp"
#include "support.hpp"

using namespace sclhom;
using namespace testing_support;

namespace {

constexpr double pi = std::numbers::pi;

problem_spec sinh_burgers(double T, double kappa0 = 0.5)
{
    return p1_spec(models::burgers(), velocity_field::constant(1.0), models::sinh_noise(kappa0, -6, 6),
                   [](const point& x, const point&) { return 0.5 * std::sin(pi * x[0]); }, 0.1, 1.0, T,
                   boundary_mode::periodic, -6, 6);
}

problem_spec cubic_p2(double T, double kappa0 = 0.5)
{
    return p2_spec({models::cubic()}, 1.0, oscillatory_potential::sine(), kappa0,
                   [](const point& x) { return 0.3 * std::cos(pi * x[0]); }, 1.0 / 8, 1.0, T);
}

/// Random trigonometric profile; the pair is ordered by adding a positive gap.
std::function<double(const point&)> random_profile(std::uint64_t seed, double amp)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::array<double, 4> a{}, b{};
    for (std::size_t j = 0; j < 4; ++j) {
        a[j] = amp * U(rng) / (j + 1);
        b[j] = amp * U(rng) / (j + 1);
    }
    return [a, b](const point& x) {
        double s = 0.0;
        for (std::size_t j = 0; j < 4; ++j)
            s += a[j] * std::sin(pi * (j + 1) * x[0]) + b[j] * std::cos(pi * (j + 1) * x[0]);
        return s;
    };
}

} // namespace

TEST(WeightFunction, IntegrableAndGradient)
{
    const weight_function w{1.0, 1, false};
    EXPECT_EQ(w({0.0, 0.0}), 1.0);
    EXPECT_NEAR(w({2.0, 0.0}), 0.2, 1e-15);
    for (double x : {0.0, 0.3, 0.9, 1.0, 2.0, 7.5}) {
        const double r = std::abs(x);
        // exact: |grad w| = 2 N |x| w / (1 + |x|^2)
        EXPECT_NEAR(w.gradient_norm({x, 0.0}), 2.0 * r * w({x, 0.0}) / (1.0 + r * r), 1e-15);
        EXPECT_LE(w.gradient_norm({x, 0.0}), 4.0 * w({x, 0.0}) / (1.0 + r) + 1e-15);
        if (r <= 1.0)
            EXPECT_LE(w.gradient_norm({x, 0.0}), 2.0 * w({x, 0.0}) / (1.0 + r) + 1e-15);
    }
    double integral = 0.0;
    const double h = 1e-3;
    for (double x = -200.0; x < 200.0; x += h)
        integral += w({x + 0.5 * h, 0.0}) * h;
    EXPECT_NEAR(integral, pi, 1e-2);
}

TEST(WeightFunction, ExponentAndPeriodicBoxes)
{
    EXPECT_THROW(weight_function::for_domain({2, 1.0, boundary_mode::far_field}, 1.0), error);
    EXPECT_TRUE(weight_function::for_domain({1, 1.0, boundary_mode::periodic}, 1.0).unit);
    EXPECT_FALSE(weight_function::for_domain({1, 1.0, boundary_mode::far_field}, 1.0).unit);
}

TEST(Comparison, IdenticalDataBitIdentical)
{
    const auto spec = sinh_burgers(0.25);
    auto u0 = [](const point& x) { return 0.5 * std::sin(pi * x[0]); };
    const auto r = comparison_test(spec, 64, u0, u0, sample_path(1, 0, 0.25, 4));
    EXPECT_EQ(r.violations, 0u);
    EXPECT_TRUE(r.bit_identical);
    EXPECT_GT(r.checked, 0u);
}

TEST(Comparison, SpecialSolutionPairP1)
{
    const double T = 0.25;
    const auto spec = sinh_burgers(T);
    const auto& m = spec.model();
    const auto path = sample_path(2, 0, T, 6);
    const auto r = comparison_test(
        spec, 64, [&](const point&) { return m.g.forward(-0.2); }, [&](const point&) { return m.g.forward(0.4); },
        path);
    EXPECT_EQ(r.violations, 0u);
    EXPECT_FALSE(r.bit_identical);
}

TEST(Comparison, RandomOrderedPairsBothProblems)
{
    for (std::uint64_t s = 0; s < 4; ++s) {
        const auto lo = random_profile(100 + s, 0.6);
        const auto d = random_profile(200 + s, 0.3);
        auto hi = [&](const point& x) { return lo(x) + 0.05 + d(x) * d(x); };
        const auto path = sample_path(7, s, 0.25, 6);
        EXPECT_EQ(comparison_test(sinh_burgers(0.25), 128, lo, hi, path).violations, 0u);
        const auto spec2 = cubic_p2(0.25);
        const auto& sp = spec2.stiff();
        const double eps = spec2.epsilon;
        auto lo2 = [&](const point& x) { return sp.model.g.forward(sp.potential(x[0] / eps) + lo(x)); };
        auto hi2 = [&](const point& x) { return sp.model.g.forward(sp.potential(x[0] / eps) + hi(x)); };
        EXPECT_EQ(comparison_test(spec2, 256, lo2, hi2, path).violations, 0u);
    }
}

TEST(Comparison, UnorderedDataRejected)
{
    const auto spec = sinh_burgers(0.25);
    EXPECT_THROW(comparison_test(
                     spec, 32, [](const point& x) { return x[0]; }, [](const point&) { return 0.0; },
                     sample_path(1, 0, 0.25, 2)),
                 error);
}

TEST(ContractionConstant, FromModelData)
{
    // sinh model: h(u) = u, Lip = 1
    EXPECT_NEAR(contraction_constant(sinh_burgers(1.0, 0.5)), 0.125, 1e-12);
    EXPECT_EQ(contraction_constant(sinh_burgers(1.0, 0.0)), 0.0);
    // linear stiff model: sigma constant, h = 0
    const auto lin = p2_spec({models::linear()}, 1.0, oscillatory_potential::sine(), 0.5,
                             [](const point&) { return 0.0; }, 0.125, 1.0, 1.0);
    EXPECT_EQ(contraction_constant(lin), 0.0);
}

TEST(Contraction, EqualDataStayEqual)
{
    contraction_plan plan;
    plan.n = 64;
    plan.times = {0.125, 0.25};
    auto u0 = [](const point& x) { return std::cos(pi * x[0]); };
    const auto rep = l1_contraction_test(sinh_burgers(0.25), u0, u0, 16, plan);
    for (const auto& p : rep.points) {
        EXPECT_EQ(p.distance.mean, 0.0);
        EXPECT_TRUE(p.pass);
    }
}

TEST(Contraction, DeterministicNonincreasing)
{
    contraction_plan plan;
    plan.n = 128;
    plan.times = {0.0625, 0.125, 0.25, 0.5};
    const auto spec = sinh_burgers(0.5, 0.0);
    const auto rep = l1_contraction_test(
        spec, [](const point& x) { return std::sin(pi * x[0]); },
        [](const point& x) { return 0.5 * std::cos(2.0 * pi * x[0]); }, 16, plan);
    EXPECT_EQ(rep.C, 0.0);
    double prev = rep.initial;
    for (const auto& p : rep.points) {
        EXPECT_LE(p.distance.mean, prev + 1e-13);
        EXPECT_LE(p.distance.variance, 1e-28);
        prev = p.distance.mean;
    }
}

TEST(Contraction, AdditiveNoiseCancels)
{
    contraction_plan plan;
    plan.n = 256;
    plan.times = {0.125, 0.25};
    auto make = [](double k0) {
        return p2_spec({models::linear()}, 1.0, oscillatory_potential::sine(), k0,
                       [](const point& x) { return 0.3 * std::cos(pi * x[0]); }, 0.125, 1.0, 0.25);
    };
    auto a = [](const point& x) { return std::sin(2.0 * pi * x[0] / 0.125) + std::sin(pi * x[0]); };
    auto b = [](const point& x) { return std::sin(2.0 * pi * x[0] / 0.125) + 0.2; };
    plan.scheme.min_level = 9;
    const auto noisy = l1_contraction_test(make(0.5), a, b, 16, plan);
    const auto quiet = l1_contraction_test(make(0.0), a, b, 16, plan);
    for (std::size_t t = 0; t < plan.times.size(); ++t) {
        EXPECT_NEAR(noisy.points[t].distance.mean, quiet.points[t].distance.mean, 1e-12);
        EXPECT_TRUE(noisy.points[t].pass);
    }
}

TEST(Contraction, NonlinearBoundHolds)
{
    contraction_plan plan;
    plan.n = 64;
    plan.times = {0.125, 0.25, 0.5};
    plan.path_level = 6;
    const auto rep = l1_contraction_test(
        sinh_burgers(0.5), [](const point& x) { return 0.5 * std::sin(pi * x[0]); },
        [](const point& x) { return 0.5 * std::sin(pi * x[0]) + 0.3 * std::cos(pi * x[0]) + 0.2; }, 16, plan);
    EXPECT_TRUE(rep.pass());
}

TEST(Contraction, InsufficientPaths)
{
    contraction_plan plan;
    plan.times = {0.25};
    auto u0 = [](const point&) { return 0.0; };
    try {
        l1_contraction_test(sinh_burgers(0.25), u0, u0, 15, plan);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::insufficient_paths);
    }
}

TEST(Kruzkov, ExactSpecialSolutionGivesZero)
{
    // dyadic alpha and kappa0 with quantized W: every update is exact arithmetic
    const double T = 0.5, alpha = 0.25;
    const auto spec = p1_spec(models::burgers(), velocity_field::constant(1.0), models::unit_noise(0.5, -6, 6),
                              [&](const point&, const point&) { return alpha; }, 0.1, 1.0, T,
                              boundary_mode::periodic, -6, 6);
    const auto phi = smooth_kruzkov_test_function(T, {0.0, 0.0}, 0.8);
    const auto r = kruzkov_residual(spec, 64, sample_path(3, 0, T, 6), alpha, phi);
    EXPECT_EQ(r.residual, 0.0);
    EXPECT_EQ(r.c_res, 0.0);
}

TEST(Kruzkov, ZeroTestFunction)
{
    const double T = 0.25;
    separable_test_function phi;
    phi.theta = [](double) { return 0.0; };
    phi.dtheta = [](double) { return 0.0; };
    phi.beta = [](const point& x) { return std::abs(x[0]) < 0.5 ? 1.0 : 0.0; };
    phi.grad_beta = [](const point&) { return point{0.0, 0.0}; };
    const auto r = kruzkov_residual(sinh_burgers(T), 64, sample_path(1, 0, T, 4), 0.1, phi);
    EXPECT_EQ(r.residual, 0.0);
}

TEST(Kruzkov, LinearStiffResidualStable)
{
    const double T = 0.25;
    const auto spec = p2_spec({models::linear()}, 1.0, oscillatory_potential::sine(), 0.5,
                              [](const point& x) { return 0.4 * std::sin(pi * x[0]); }, 1.0 / 8, 1.0, T);
    const auto phi = smooth_kruzkov_test_function(T, {0.1, 0.0}, 0.7);
    const auto path = sample_path(4, 0, T, 3);
    const auto coarse = kruzkov_residual(spec, 256, path, 0.1, phi);
    const auto fine = kruzkov_residual(spec, 512, path, 0.1, phi);
    if (coarse.c_res == 0.0 && fine.c_res == 0.0)
        SUCCEED();
    else {
        EXPECT_LE(fine.c_res, 2.0 * coarse.c_res);
        EXPECT_GE(fine.c_res, 0.5 * coarse.c_res);
    }
    EXPECT_GE(fine.residual, -fine.c_res * fine.dx);
}

TEST(Kruzkov, DeterministicNonlinearResidualNonnegative)
{
    const double T = 0.25;
    const auto spec = sinh_burgers(T, 0.0);
    const auto phi = smooth_kruzkov_test_function(T, {0.0, 0.0}, 0.8);
    const auto path = sample_path(4, 0, T, 4);
    for (std::size_t n : {128, 256, 512})
        EXPECT_GE(kruzkov_residual(spec, n, path, 0.6, phi).residual, -1e-12) << n;
}

TEST(Kruzkov, NoisyNonlinearResidualConstantStable)
{
    // pathwise, sum (dW^2 - dt) h-terms fluctuate like sqrt(dt): C_res grows ~ sqrt(2) per halving
    const double T = 0.25;
    const auto spec = sinh_burgers(T);
    const auto phi = smooth_kruzkov_test_function(T, {0.0, 0.0}, 0.8);
    const auto path = sample_path(4, 0, T, 4);
    const auto a = kruzkov_residual(spec, 256, path, 0.6, phi);
    const auto b = kruzkov_residual(spec, 512, path, 0.6, phi);
    EXPECT_GT(a.c_res, 0.0);
    EXPECT_LE(b.c_res, 2.0 * a.c_res);
    EXPECT_GE(b.c_res, 0.5 * a.c_res);
    EXPECT_GE(b.residual, -b.c_res * b.dx);
}

TEST(Kruzkov, UnsupportedTestFunction)
{
    const double T = 0.25;
    auto phi = smooth_kruzkov_test_function(T, {0.0, 0.0}, 0.5);
    phi.beta = [](const point&) { return 1.0; };
    try {
        kruzkov_residual(sinh_burgers(T), 32, sample_path(1, 0, T, 2), 0.0, phi);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::unsupported_test_function);
    }
    auto phi2 = smooth_kruzkov_test_function(T, {0.0, 0.0}, 0.5);
    phi2.theta = [](double) { return 1.0; };
    EXPECT_THROW(kruzkov_residual(sinh_burgers(T), 32, sample_path(1, 0, T, 2), 0.0, phi2), error);
}

TEST(Sandwich, LowerBoundPersists)
{
    const double T = 0.5;
    auto spec = sinh_burgers(T);
    const auto& m = spec.model();
    std::get<transport_problem>(spec.variant).initial = [&](const point&, const point&) { return m.g.forward(-0.3); };
    const auto path = sample_path(5, 0, T, 6);
    const auto traj = solve_problem(spec, 64, path, {}, {0.125, 0.25});
    const auto r = sandwich_test(spec, traj, -0.3, 0.7);
    EXPECT_EQ(r.violations, 0u);
    for (const auto& s : traj.snapshots)
        for (double v : s.field.u)
            EXPECT_NEAR(v, special_solution_p1(-0.3, s.time, s.W, m), 1e-12);
}

TEST(Sandwich, RandomBoundedDataTenSnapshots)
{
    const double T = 0.5;
    std::vector<double> times;
    for (int j = 1; j <= 9; ++j)
        times.push_back(T * j / 16.0);
    const auto prof = random_profile(9, 0.4);
    auto spec = sinh_burgers(T);
    const auto& m = spec.model();
    std::get<transport_problem>(spec.variant).initial = [&](const point& x, const point&) {
        return m.g.forward(std::clamp(prof(x), -0.5, 0.5));
    };
    const auto traj = solve_problem(spec, 128, sample_path(6, 1, T, 6), {}, times);
    EXPECT_EQ(traj.snapshots.size(), 11u);
    EXPECT_EQ(sandwich_test(spec, traj, -0.5, 0.5).violations, 0u);

    auto spec2 = cubic_p2(T);
    std::get<stiff_source_problem>(spec2.variant).v0 = [&](const point& x) { return std::clamp(prof(x), -0.5, 0.5); };
    const auto traj2 = solve_problem(spec2, 256, sample_path(6, 1, T, 6), {}, times);
    EXPECT_EQ(sandwich_test(spec2, traj2, -0.5, 0.5).violations, 0u);
}

TEST(Sandwich, NoNoiseBoundsConstant)
{
    const auto spec = sinh_burgers(0.25, 0.0);
    const auto& m = spec.model();
    EXPECT_EQ(special_value(spec, 0.4, {0.0, 0.0}, 0.0), special_value(spec, 0.4, {0.0, 0.0}, 1.7));
    EXPECT_EQ(special_value(spec, 0.4, {0.0, 0.0}, 0.0), m.g.forward(0.4));
}
