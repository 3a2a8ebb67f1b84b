#pragma once

// The ground state W and its rescalings, energies, and the variational
// estimates around the threshold E(W, 0).

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "critwave/radial_field.hpp"

namespace critwave {

struct GroundStateSpec {
    double scale = 1.0;
    int sign = +1;
};

/// (a * W_scale, 0) in u-form, with the analytic tail beyond R_max attached.
inline RadialState ground_state_multiple(double amplitude, double scale, const GridPtr& grid)
{
    if (!(scale > 0.0))
        throw ConfigError("ground-state scale must be positive");
    auto pos = RadialField::from_function(grid, [&](double r) { return amplitude * profile::w_scaled(r, scale); });
    TailModel tail;
    if (amplitude != 0.0)
        tail.add(amplitude, scale);
    return RadialState(std::move(pos), RadialField(grid, Form::u), 0.0, std::move(tail));
}

inline RadialState ground_state(const GroundStateSpec& spec, const GridPtr& grid)
{
    if (spec.sign != 1 && spec.sign != -1)
        throw ConfigError("ground-state sign must be +1 or -1");
    return ground_state_multiple(static_cast<double>(spec.sign), spec.scale, grid);
}

namespace detail {

// 4th-order second derivative; even reflection f(-r) = f(r) near the origin.
inline std::vector<double> second_derivative_even(const RadialGrid& grid, std::span<const double> f)
{
    const std::size_t n = grid.cells();
    const double h = grid.spacing();
    const double inv = 1.0 / (12.0 * h * h);
    auto at = [&](long k) { return f[static_cast<std::size_t>(std::abs(k))]; };
    std::vector<double> d(n + 1);
    for (std::size_t i = 0; i + 2 <= n; ++i) {
        const long k = static_cast<long>(i);
        d[i] = (-at(k - 2) + 16.0 * at(k - 1) - 30.0 * at(k) + 16.0 * at(k + 1) - at(k + 2)) * inv;
    }
    d[n - 1] = (f[n] - 2.0 * f[n - 1] + f[n - 2]) / (h * h);
    d[n] = (2.0 * f[n] - 5.0 * f[n - 1] + 4.0 * f[n - 2] - f[n - 3]) / (h * h);
    return d;
}

inline std::vector<double> first_derivative_even(const RadialGrid& grid, std::span<const double> f)
{
    auto d = derivative_samples(grid, f);
    const double inv = 1.0 / (12.0 * grid.spacing());
    d[0] = 0.0;
    d[1] = (f[1] - 8.0 * f[0] + 8.0 * f[2] - f[3]) * inv;
    return d;
}

} // namespace detail

/// -u_rr - (3/r) u_r - u^3 at every node; at r = 0 the radial Laplacian is 4 u_rr.
inline RadialField elliptic_residual(const RadialState& s)
{
    if (s.form() != Form::u)
        throw FormulationError("elliptic_residual expects a u-form state");
    const auto& grid = *s.grid();
    const auto u = s.position.values();
    const auto ur = detail::first_derivative_even(grid, u);
    const auto urr = detail::second_derivative_even(grid, u);
    std::vector<double> res(grid.size());
    res[0] = -4.0 * urr[0] - u[0] * u[0] * u[0];
    for (std::size_t i = 1; i < grid.size(); ++i)
        res[i] = -urr[i] - 3.0 / grid[i] * ur[i] - u[i] * u[i] * u[i];
    return RadialField(s.grid(), std::move(res), Form::u);
}

struct EnergyReport {
    double kinetic = 0.0;  ///< 1/2 int u_t^2 r^3
    double gradient = 0.0; ///< 1/2 int u_r^2 r^3
    double quartic = 0.0;  ///< -1/4 int u^4 r^3 (non-positive)
    double total = 0.0;
};

/// Localized energy E_a^b; the analytic tail is included when b reaches R_max.
inline EnergyReport energy(const RadialState& s, double a, double b)
{
    if (s.form() != Form::u)
        throw FormulationError("energy expects a u-form state");
    const auto& grid = *s.grid();
    detail::check_band(grid, a, b);
    const auto ur = derivative_samples(grid, s.position.values());
    const bool edge = detail::reaches_outer_edge(grid, b);
    EnergyReport e;
    e.kinetic = 0.5 * weighted_integral(grid, 3, a, b, [&](std::size_t i, double) {
        return s.velocity[i] * s.velocity[i];
    });
    e.gradient = 0.5 * (weighted_integral(grid, 3, a, b, [&](std::size_t i, double) { return ur[i] * ur[i]; }) +
                        (edge ? s.tail.grad_sq(grid.r_max()) : 0.0));
    e.quartic = -0.25 * (weighted_integral(grid, 3, a, b, [&](std::size_t i, double) {
                             const double u2 = s.position[i] * s.position[i];
                             return u2 * u2;
                         }) +
                         (edge ? s.tail.fourth(grid.r_max()) : 0.0));
    e.total = e.kinetic + e.gradient + e.quartic;
    return e;
}

inline EnergyReport energy(const RadialState& s) { return energy(s, 0.0, s.grid()->r_max()); }

/// ||grad f||^2 over the whole line, tail included.
inline double gradient_sq(const RadialField& f, const TailModel& tail = {})
{
    const auto& grid = *f.grid();
    const auto fr = derivative_samples(grid, f.values());
    return weighted_integral(grid, 3, 0.0, grid.r_max(), [&](std::size_t i, double) { return fr[i] * fr[i]; }) +
           tail.grad_sq(grid.r_max());
}

inline double l4_fourth(const RadialField& f, const TailModel& tail = {})
{
    const auto& grid = *f.grid();
    return weighted_integral(grid, 3, 0.0, grid.r_max(), [&](std::size_t i, double) {
               const double v2 = f[i] * f[i];
               return v2 * v2;
           }) +
           tail.fourth(grid.r_max());
}

/// ||f||_{L^4} / ||grad f||_{L^2}; W attains the maximum K(4,2) = (16/3)^{-1/4}.
inline double sobolev_ratio(const RadialField& f, const TailModel& tail = {})
{
    if (f.form() != Form::u)
        throw FormulationError("sobolev_ratio expects a u-form field");
    const double g = gradient_sq(f, tail);
    if (!(g > 0.0))
        throw DiagnosticError("sobolev_ratio of a zero field");
    return std::pow(l4_fourth(f, tail), 0.25) / std::sqrt(g);
}

struct VariationalReport {
    double gradient_sq = 0.0;
    double energy = 0.0;
    /// ||grad f||^2 <= ||grad W||^2 and E <= E(W): then 1/4 ||grad f||^2 <= E.
    bool trapped = false;
    bool trapped_bound_holds = true;
    /// ||grad f||^2 <= 2 ||grad W||^2: then E >= c min{G, 2 G_W - G} >= 0.
    bool coercive_applicable = false;
    bool coercive_bound_holds = true;
    double coercivity_ratio = std::numeric_limits<double>::infinity();
    double constant = 0.0;

    bool ok() const noexcept { return trapped_bound_holds && coercive_bound_holds; }
};

/// `constant` is the coercivity constant c (calibrated; see calibrate_coercivity).
inline VariationalReport variational_check(const RadialField& f, double constant, const TailModel& tail = {},
                                           double slack = 1e-9)
{
    if (f.form() != Form::u)
        throw FormulationError("variational_check expects a u-form field");
    VariationalReport rep;
    rep.constant = constant;
    rep.gradient_sq = gradient_sq(f, tail);
    rep.energy = 0.5 * rep.gradient_sq - 0.25 * l4_fourth(f, tail);
    const double gw = profile::kGradSq;
    const double tol = slack * std::max(1.0, rep.gradient_sq);

    rep.trapped = rep.gradient_sq <= gw && rep.energy <= profile::kEnergy;
    if (rep.trapped)
        rep.trapped_bound_holds = 0.25 * rep.gradient_sq <= rep.energy + tol;

    rep.coercive_applicable = rep.gradient_sq <= 2.0 * gw;
    if (rep.coercive_applicable) {
        const double m = std::min(rep.gradient_sq, 2.0 * gw - rep.gradient_sq);
        if (m > 0.0)
            rep.coercivity_ratio = rep.energy / m;
        rep.coercive_bound_holds = rep.energy >= constant * m - tol && rep.energy >= -tol;
    }
    return rep;
}

/// c := 0.9 * min E / min{G, 2 G_W - G} over a corpus of static fields.
inline double calibrate_coercivity(std::span<const RadialField> corpus)
{
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& f : corpus) {
        const auto rep = variational_check(f, 0.0);
        if (rep.coercive_applicable && std::isfinite(rep.coercivity_ratio))
            lo = std::min(lo, rep.coercivity_ratio);
    }
    if (!std::isfinite(lo))
        throw DiagnosticError("coercivity calibration corpus has no applicable member");
    return 0.9 * lo;
}

} // namespace critwave
