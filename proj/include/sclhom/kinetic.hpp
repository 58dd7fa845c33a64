#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "error.hpp"
#include "fv_engine.hpp"
#include "numeric.hpp"

namespace sclhom {

inline double chi_plus(double xi, double u) { return xi < u ? 1.0 : 0.0; }
inline double chi_minus(double xi, double u) { return chi_plus(xi, u) - 1.0; }
inline double chi(double xi, double u) { return chi_plus(xi, u) - (xi < 0.0 ? 1.0 : 0.0); }

struct kinetic_sample {
    double u = 0.0;
    std::vector<double> xi;
    std::vector<double> chi_plus;
    std::vector<double> chi;
};

inline kinetic_sample make_kinetic_sample(double u, const std::vector<double>& xi)
{
    kinetic_sample s{u, xi, std::vector<double>(xi.size()), std::vector<double>(xi.size())};
    for (std::size_t j = 0; j < xi.size(); ++j) {
        s.chi_plus[j] = sclhom::chi_plus(xi[j], u);
        s.chi[j] = sclhom::chi(xi[j], u);
    }
    return s;
}

/// Residuals of the three chi_+ identities on a uniform xi-grid (rectangle rule).
struct chi_identity_residuals {
    double positive_part = 0.0; ///< |(u - v)_+ - int chi_+(u) (1 - chi_+(v))|
    double absolute = 0.0;      ///< |(|u - v|) - int |chi_+(u) - chi_+(v)||
    double quarter = 0.0;       ///< |(|u - v| / 4) - int (g - g^2)|
    double positive_part_integral = 0.0;
    double absolute_integral = 0.0;
    double quarter_integral = 0.0;
    double dxi = 0.0;

    double worst() const { return std::max({positive_part, absolute, quarter}); }
    bool pass() const { return worst() <= 2.0 * dxi; }
};

inline chi_identity_residuals chi_identity_check(double u, double v, const std::vector<double>& xi)
{
    if (xi.size() < 2)
        fail(errc::grid_too_narrow, "xi-grid needs at least two points");
    const double lo = std::min(u, v) - 1.0;
    const double hi = std::max(u, v) + 1.0;
    if (xi.front() > lo || xi.back() < hi)
        fail(errc::grid_too_narrow, "xi-grid must cover [min(u,v) - 1, max(u,v) + 1]");
    const double dxi = xi[1] - xi[0];
    std::vector<double> a(xi.size()), b(xi.size()), c(xi.size());
    for (std::size_t j = 0; j < xi.size(); ++j) {
        const double cu = chi_plus(xi[j], u);
        const double cv = chi_plus(xi[j], v);
        const double g = 0.5 * (cu + cv);
        a[j] = cu * (1.0 - cv);
        b[j] = std::abs(cu - cv);
        c[j] = g - g * g;
    }
    chi_identity_residuals r;
    r.dxi = dxi;
    r.positive_part_integral = pairwise_sum(a) * dxi;
    r.absolute_integral = pairwise_sum(b) * dxi;
    r.quarter_integral = pairwise_sum(c) * dxi;
    r.positive_part = std::abs(std::max(u - v, 0.0) - r.positive_part_integral);
    r.absolute = std::abs(std::abs(u - v) - r.absolute_integral);
    r.quarter = std::abs(0.25 * std::abs(u - v) - r.quarter_integral);
    return r;
}

/// Kruzkov entropy production of the deterministic substeps, kinetic
/// normalization m = production / 2 (since d^2/dk^2 |u - k| = 2 delta).
struct entropy_production_field {
    std::vector<double> k;
    /// Trapezoid weights for integrals over k.
    std::vector<double> k_weight;
    std::vector<double> x;
    /// [k][cell], summed over time steps.
    std::vector<std::vector<double>> per_cell;
    /// [k][step], summed over cells.
    std::vector<std::vector<double>> per_step;
    /// Smallest single (cell, step, k) entry.
    double min_entry = 0.0;
    double dx = 0.0;
};

namespace detail {

inline double face_entropy_flux(double uL, double uR, double k, double a, const flux_component& f, flux_kind kind)
{
    const auto F = [&](double l, double r) { return oriented_flux(a, l, r, f, kind); };
    return F(std::max(uL, k), std::max(uR, k)) - F(std::min(uL, k), std::min(uR, k));
}

} // namespace detail

/// Cell entropy production -[(|u*_i - k| - |u_i - k|) dx + dt (Q_{i+1/2} - Q_{i-1/2})]
/// with the Crandall-Majda numerical entropy flux Q. Nonnegative for monotone
/// schemes; asserted to -1e-12.
inline entropy_production_field entropy_production(const trajectory& traj, const std::vector<double>& k_values,
                                                   unsigned threads = 1)
{
    if (traj.steps.empty())
        fail(errc::missing_step_data, "trajectory has no recorded steps (enable record_steps)");
    if (traj.viscosity != 0.0)
        fail(errc::missing_step_data, "entropy production is defined for the hyperbolic scheme only");
    const auto& f0 = traj.snapshots.front().field;
    if (f0.dim != 1)
        fail(errc::missing_step_data, "entropy production is recorded for one-dimensional runs only");
    for (const auto& s : traj.steps)
        if (s.face_speed.size() != f0.n + 1)
            fail(errc::missing_step_data, "per-face fluxes were not recorded for this law");

    const std::size_t n = f0.n;
    const double dx = f0.dx();
    const bool periodic = f0.boundary == boundary_mode::periodic;
    entropy_production_field out;
    out.k = k_values;
    out.dx = dx;
    out.k_weight.assign(k_values.size(), 0.0);
    for (std::size_t m = 0; m + 1 < k_values.size(); ++m) {
        const double h = 0.5 * (k_values[m + 1] - k_values[m]);
        out.k_weight[m] += h;
        out.k_weight[m + 1] += h;
    }
    out.x.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.x[i] = f0.center(i);
    out.per_cell.assign(k_values.size(), std::vector<double>(n, 0.0));
    out.per_step.assign(k_values.size(), std::vector<double>(traj.steps.size(), 0.0));
    std::vector<double> mins(k_values.size(), 0.0);

    parallel_for(k_values.size(), threads, [&](std::size_t m) {
        const double k = k_values[m];
        std::vector<double> Q(n + 1), prod(n);
        double lowest = 0.0;
        for (std::size_t s = 0; s < traj.steps.size(); ++s) {
            const auto& st = traj.steps[s];
            for (std::size_t i = 0; i <= n; ++i) {
                double uL, uR;
                if (periodic) {
                    uL = st.before[(i + n - 1) % n];
                    uR = st.before[i % n];
                } else {
                    uL = i == 0 ? st.ghost_left : st.before[i - 1];
                    uR = i == n ? st.ghost_right : st.before[i];
                }
                Q[i] = detail::face_entropy_flux(uL, uR, k, st.face_speed[i], traj.flux, traj.kind);
            }
            if (periodic)
                Q[n] = Q[0];
            for (std::size_t i = 0; i < n; ++i) {
                const double deta = std::abs(st.after_deterministic[i] - k) - std::abs(st.before[i] - k);
                prod[i] = -(deta * dx + st.dt * (Q[i + 1] - Q[i]));
                lowest = std::min(lowest, prod[i]);
                out.per_cell[m][i] += prod[i];
            }
            out.per_step[m][s] = pairwise_sum(prod);
        }
        mins[m] = lowest;
    });
    out.min_entry = mins.empty() ? 0.0 : *std::min_element(mins.begin(), mins.end());
    if (out.min_entry < -1e-12)
        fail(errc::stability_violation, "negative entropy production " + std::to_string(out.min_entry));
    return out;
}

/// sum_k sum_i |k|^p w(x_i) m(k, x_i) dk with m = production / 2.
template <class Weight>
double weighted_p_moment(const entropy_production_field& field, double p, Weight&& w)
{
    std::vector<double> terms;
    terms.reserve(field.k.size());
    for (std::size_t m = 0; m < field.k.size(); ++m) {
        std::vector<double> cells(field.x.size());
        for (std::size_t i = 0; i < field.x.size(); ++i)
            cells[i] = w(point{field.x[i], 0.0}) * 0.5 * field.per_cell[m][i];
        const double kp = p == 0.0 ? 1.0 : std::pow(std::abs(field.k[m]), p);
        terms.push_back(kp * field.k_weight[m] * pairwise_sum(cells));
    }
    return pairwise_sum(terms);
}

inline double weighted_p_moment(const entropy_production_field& field, double p)
{
    return weighted_p_moment(field, p, [](const point&) { return 1.0; });
}

/// Histogram estimate of a two-scale Young measure: one probability vector
/// over xi-bins per y-bin of the period cell.
struct young_measure_histogram {
    double time = 0.0;
    std::size_t y_bins = 0;
    std::vector<double> xi_edges;
    /// [y-bin][xi-bin], each row sums to 1 (or is empty).
    std::vector<std::vector<double>> weights;
    /// Number of samples per y-bin.
    std::vector<std::size_t> counts;

    std::size_t xi_bins() const { return xi_edges.size() - 1; }
    double xi_center(std::size_t j) const { return 0.5 * (xi_edges[j] + xi_edges[j + 1]); }
};

/// int (rho - rho^2) dxi for the complementary cdf rho of each y-bin, where
/// each bin's mass sits at the xi-bin centre. Bins are weighted by their share
/// of the samples.
inline double rigidity_defect(const young_measure_histogram& h)
{
    std::size_t total = 0;
    for (auto c : h.counts)
        total += c;
    if (total == 0)
        return 0.0;
    std::vector<double> per_bin(h.weights.size(), 0.0);
    for (std::size_t b = 0; b < h.weights.size(); ++b) {
        if (h.counts[b] == 0)
            continue;
        const auto& p = h.weights[b];
        double tail = 1.0;
        double acc = 0.0;
        for (std::size_t j = 0; j + 1 < p.size(); ++j) {
            tail -= p[j];
            const double rho = std::clamp(tail, 0.0, 1.0);
            acc += (h.xi_center(j + 1) - h.xi_center(j)) * (rho - rho * rho);
        }
        per_bin[b] = acc * static_cast<double>(h.counts[b]) / static_cast<double>(total);
    }
    return pairwise_sum(per_bin);
}

} // namespace sclhom
