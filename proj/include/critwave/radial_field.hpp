#pragma once

// Radial grids, fields and states on [0, R_max], with the weighted quadrature,
// differentiation and interpolation every other module builds on.
//
// Volume integrals follow the r^3 dr convention (the 2 pi^2 of S^3 is dropped).
// All discrete operators use piecewise 4-point Lagrange cubics on the uniform
// grid, so quadrature, interpolation and the first derivative are 4th order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "critwave/errors.hpp"
#include "critwave/profile.hpp"

namespace critwave {

enum class Form { u, psi };

inline const char* to_string(Form f) noexcept { return f == Form::u ? "u" : "psi"; }

/// Uniform grid r_i = i*h, i = 0..N, r_N = R_max.
class RadialGrid {
public:
    RadialGrid(std::size_t cells, double r_max) : cells_(cells), r_max_(r_max)
    {
        if (cells < 4)
            throw ConfigError("RadialGrid needs at least 4 cells");
        if (!(r_max > 0.0) || !std::isfinite(r_max))
            throw ConfigError("RadialGrid needs a positive finite R_max");
        h_ = r_max / static_cast<double>(cells);
        nodes_.resize(cells + 1);
        for (std::size_t i = 0; i <= cells; ++i)
            nodes_[i] = static_cast<double>(i) * h_;
        nodes_.back() = r_max;
    }

    /// Grid with spacing as close as possible to h.
    static std::shared_ptr<const RadialGrid> with_spacing(double h, double r_max)
    {
        if (!(h > 0.0))
            throw ConfigError("grid spacing must be positive");
        const auto cells = static_cast<std::size_t>(std::llround(r_max / h));
        return std::make_shared<const RadialGrid>(cells, r_max);
    }

    std::size_t cells() const noexcept { return cells_; }
    std::size_t size() const noexcept { return cells_ + 1; }
    double spacing() const noexcept { return h_; }
    double r_max() const noexcept { return r_max_; }
    double operator[](std::size_t i) const noexcept { return nodes_[i]; }
    std::span<const double> nodes() const noexcept { return nodes_; }

    /// Largest i with r_i <= r (clamped to the last cell).
    std::size_t cell_of(double r) const noexcept
    {
        const auto i = static_cast<std::size_t>(std::max(0.0, std::floor(r / h_)));
        return std::min(i, cells_ - 1);
    }

    bool contains(double r) const noexcept
    {
        return r >= 0.0 && r <= r_max_ * (1.0 + 1e-14);
    }

private:
    std::size_t cells_;
    double r_max_;
    double h_;
    std::vector<double> nodes_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

/// Analytic continuation of a u-form field beyond R_max as a sum of static
/// ground-state copies sum_k a_k W_{l_k}. Used to account for the slow r^{-2}
/// tail of W when a grid truncates it.
struct TailTerm {
    double amplitude;
    double scale;
};

class TailModel {
public:
    TailModel() = default;
    explicit TailModel(std::vector<TailTerm> terms) : terms_(std::move(terms)) {}

    bool empty() const noexcept { return terms_.empty(); }
    const std::vector<TailTerm>& terms() const noexcept { return terms_; }

    void add(double amplitude, double scale) { terms_.push_back({amplitude, scale}); }

    TailModel scaled(double factor) const
    {
        TailModel out;
        for (const auto& t : terms_)
            out.add(t.amplitude * factor, t.scale);
        return out;
    }

    TailModel operator+(const TailModel& other) const
    {
        TailModel out = *this;
        for (const auto& t : other.terms_)
            out.add(t.amplitude, t.scale);
        return out;
    }

    double value(double r) const noexcept
    {
        double v = 0.0;
        for (const auto& t : terms_)
            v += t.amplitude * profile::w_scaled(r, t.scale);
        return v;
    }

    double derivative(double r) const noexcept
    {
        double v = 0.0;
        for (const auto& t : terms_)
            v += t.amplitude * profile::w_scaled_prime(r, t.scale);
        return v;
    }

    /// int_R^inf u_r^2 r^3 dr
    double grad_sq(double radius) const
    {
        return integrate_beyond(radius, [this](double r) {
            const double d = derivative(r);
            return d * d * r * r * r;
        });
    }

    /// int_R^inf u^4 r^3 dr
    double fourth(double radius) const
    {
        return integrate_beyond(radius, [this](double r) {
            const double v = value(r);
            return v * v * v * v * r * r * r;
        });
    }

    /// int_R^inf u^2 r dr
    double square_r1(double radius) const
    {
        return integrate_beyond(radius, [this](double r) {
            const double v = value(r);
            return v * v * r;
        });
    }

private:
    // r = R/s maps [R, inf) onto (0, 1]; every integrand above is O(s) there.
    template <class Fn>
    double integrate_beyond(double radius, Fn&& fn) const
    {
        if (terms_.empty())
            return 0.0;
        using boost::math::quadrature::gauss;
        auto mapped = [&](double s) {
            if (s <= 0.0)
                return 0.0;
            const double r = radius / s;
            return fn(r) * radius / (s * s);
        };
        double total = 0.0;
        constexpr int panels = 16;
        for (int p = 0; p < panels; ++p) {
            const double lo = static_cast<double>(p) / panels;
            const double hi = static_cast<double>(p + 1) / panels;
            total += gauss<double, 20>::integrate(mapped, lo, hi);
        }
        return total;
    }

    std::vector<TailTerm> terms_;
};

/// Samples of a radial function on a grid, tagged with its formulation.
class RadialField {
public:
    RadialField() = default;
    RadialField(GridPtr grid, std::vector<double> values, Form form)
        : grid_(std::move(grid)), values_(std::move(values)), form_(form)
    {
        if (!grid_)
            throw ConfigError("RadialField needs a grid");
        if (values_.size() != grid_->size())
            throw ConfigError("RadialField sample count must equal the node count");
    }

    RadialField(GridPtr grid, Form form) : RadialField(grid, std::vector<double>(grid->size(), 0.0), form) {}

    template <class Fn>
    static RadialField from_function(GridPtr grid, Fn&& fn, Form form = Form::u)
    {
        std::vector<double> v(grid->size());
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = fn((*grid)[i]);
        return RadialField(std::move(grid), std::move(v), form);
    }

    const GridPtr& grid() const noexcept { return grid_; }
    Form form() const noexcept { return form_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    std::vector<double>& mutable_values() noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double& operator[](std::size_t i) noexcept { return values_[i]; }

    double sup_abs() const noexcept
    {
        double m = 0.0;
        for (double v : values_)
            m = std::max(m, std::abs(v));
        return m;
    }

private:
    GridPtr grid_;
    std::vector<double> values_;
    Form form_ = Form::u;
};

/// (position, velocity) at time t. Both fields share one grid and one form.
struct RadialState {
    RadialField position;
    RadialField velocity;
    double time = 0.0;
    /// u-form continuation beyond R_max (static, zero velocity).
    TailModel tail;

    RadialState() = default;
    RadialState(RadialField pos, RadialField vel, double t, TailModel tail_model = {})
        : position(std::move(pos)), velocity(std::move(vel)), time(t), tail(std::move(tail_model))
    {
        if (position.grid() != velocity.grid() && position.grid()->size() != velocity.grid()->size())
            throw ConfigError("position and velocity must share one grid");
        if (position.form() != velocity.form())
            throw FormulationError("position and velocity must share one formulation");
    }

    Form form() const noexcept { return position.form(); }
    const GridPtr& grid() const noexcept { return position.grid(); }

    static RadialState zero(GridPtr grid, Form form, double t = 0.0)
    {
        return RadialState(RadialField(grid, form), RadialField(grid, form), t);
    }
};

namespace detail {

// Cubic through samples j..j+3 expressed in s = (r - r_j)/h.
struct LocalCubic {
    double c0, c1, c2, c3;

    LocalCubic(double y0, double y1, double y2, double y3) noexcept
    {
        const double d1 = y1 - y0;
        const double d2 = y2 - 2.0 * y1 + y0;
        const double d3 = y3 - 3.0 * y2 + 3.0 * y1 - y0;
        c0 = y0;
        c1 = d1 - d2 / 2.0 + d3 / 3.0;
        c2 = d2 / 2.0 - d3 / 2.0;
        c3 = d3 / 6.0;
    }

    double eval(double s) const noexcept { return c0 + s * (c1 + s * (c2 + s * c3)); }
    double slope(double s) const noexcept { return c1 + s * (2.0 * c2 + s * 3.0 * c3); }

    double antiderivative(double s) const noexcept
    {
        return s * (c0 + s * (c1 / 2.0 + s * (c2 / 3.0 + s * c3 / 4.0)));
    }
};

inline std::size_t stencil_start(std::size_t cell, std::size_t cells) noexcept
{
    if (cell == 0)
        return 0;
    return std::min(cell - 1, cells - 3);
}

inline void check_band(const RadialGrid& g, double a, double b)
{
    if (!(a >= 0.0) || !(b >= a) || !g.contains(b))
        throw DomainError("band [" + std::to_string(a) + ", " + std::to_string(b) +
                          "] outside grid [0, " + std::to_string(g.r_max()) + "]");
}

} // namespace detail

/// int_a^b g(r) dr for nodal samples g of an already-weighted integrand.
inline double integrate_samples(const RadialGrid& grid, std::span<const double> g, double a, double b)
{
    detail::check_band(grid, a, b);
    b = std::min(b, grid.r_max());
    if (b <= a)
        return 0.0;
    const double h = grid.spacing();
    const std::size_t first = grid.cell_of(a);
    const std::size_t last = grid.cell_of(b);
    double total = 0.0;
    for (std::size_t i = first; i <= last; ++i) {
        const double lo = std::max(a, grid[i]);
        const double hi = std::min(b, grid[i + 1]);
        if (hi <= lo)
            continue;
        const std::size_t j = detail::stencil_start(i, grid.cells());
        const detail::LocalCubic p(g[j], g[j + 1], g[j + 2], g[j + 3]);
        const double rj = grid[j];
        total += h * (p.antiderivative((hi - rj) / h) - p.antiderivative((lo - rj) / h));
    }
    return total;
}

/// Running integral C_i = int_0^{r_i} g dr at every node.
inline std::vector<double> cumulative_integral(const RadialGrid& grid, std::span<const double> g)
{
    std::vector<double> out(grid.size(), 0.0);
    const double h = grid.spacing();
    for (std::size_t i = 0; i < grid.cells(); ++i) {
        const std::size_t j = detail::stencil_start(i, grid.cells());
        const detail::LocalCubic p(g[j], g[j + 1], g[j + 2], g[j + 3]);
        const double s0 = static_cast<double>(i - j);
        out[i + 1] = out[i] + h * (p.antiderivative(s0 + 1.0) - p.antiderivative(s0));
    }
    return out;
}

/// int_a^b f(r) r^w dr.
inline double quadrature(const RadialField& f, int w, double a, double b)
{
    const auto& grid = *f.grid();
    std::vector<double> g(f.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = f[i] * std::pow(grid[i], w);
    return integrate_samples(grid, g, a, b);
}

/// Weighted integral of a nodal product, e.g. int (f_r^2) r^3 dr; the
/// callable receives (i, r_i) and returns the integrand without the weight.
template <class Fn>
double weighted_integral(const RadialGrid& grid, int w, double a, double b, Fn&& integrand)
{
    std::vector<double> g(grid.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = integrand(i, grid[i]) * std::pow(grid[i], w);
    return integrate_samples(grid, g, a, b);
}

/// Order of the derivative stencils below.
inline constexpr int kDerivativeOrder = 4;

/// First derivative: centered 5-point interior, shifted one-sided 5-point
/// stencils at the two nodes next to each end.
inline std::vector<double> derivative_samples(const RadialGrid& grid, std::span<const double> f)
{
    const std::size_t n = grid.cells();
    const double inv = 1.0 / (12.0 * grid.spacing());
    std::vector<double> d(n + 1);
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * inv;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * inv;
    for (std::size_t i = 2; i + 2 <= n; ++i)
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * inv;
    d[n - 1] = (3.0 * f[n] + 10.0 * f[n - 1] - 18.0 * f[n - 2] + 6.0 * f[n - 3] - f[n - 4]) * inv;
    d[n] = (25.0 * f[n] - 48.0 * f[n - 1] + 36.0 * f[n - 2] - 16.0 * f[n - 3] + 3.0 * f[n - 4]) * inv;
    return d;
}

inline RadialField derivative(const RadialField& f)
{
    return RadialField(f.grid(), derivative_samples(*f.grid(), f.values()), f.form());
}

/// Piecewise-cubic interpolation of nodal samples at r; exact at nodes.
inline double interpolate_samples(const RadialGrid& grid, std::span<const double> f, double r)
{
    if (!grid.contains(r))
        throw DomainError("interpolation radius " + std::to_string(r) + " outside grid");
    const double h = grid.spacing();
    const double pos = r / h;
    const double nearest = std::round(pos);
    if (std::abs(pos - nearest) < 1e-12) {
        const auto k = static_cast<std::size_t>(nearest);
        return f[std::min(k, grid.cells())];
    }
    const std::size_t i = grid.cell_of(r);
    const std::size_t j = detail::stencil_start(i, grid.cells());
    const detail::LocalCubic p(f[j], f[j + 1], f[j + 2], f[j + 3]);
    return p.eval((r - grid[j]) / h);
}

inline double interpolate(const RadialField& f, double r)
{
    return interpolate_samples(*f.grid(), f.values(), r);
}

/// psi = r u, psi_t = r u_t.
inline RadialState to_psi(const RadialState& s)
{
    if (s.form() != Form::u)
        throw FormulationError("to_psi expects a u-form state");
    const auto& grid = *s.grid();
    std::vector<double> p(grid.size()), v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        p[i] = grid[i] * s.position[i];
        v[i] = grid[i] * s.velocity[i];
    }
    return RadialState(RadialField(s.grid(), std::move(p), Form::psi),
                       RadialField(s.grid(), std::move(v), Form::psi), s.time, s.tail);
}

/// u = psi / r; the origin value is the quadratic extrapolation
/// 3 u_1 - 3 u_2 + u_3.
inline std::vector<double> divide_by_radius(const RadialGrid& grid, std::span<const double> psi)
{
    std::vector<double> u(grid.size());
    for (std::size_t i = 1; i < grid.size(); ++i)
        u[i] = psi[i] / grid[i];
    u[0] = 3.0 * u[1] - 3.0 * u[2] + u[3];
    return u;
}

inline RadialState to_u(const RadialState& s)
{
    if (s.form() != Form::psi)
        throw FormulationError("to_u expects a psi-form state");
    const auto& grid = *s.grid();
    return RadialState(RadialField(s.grid(), divide_by_radius(grid, s.position.values()), Form::u),
                       RadialField(s.grid(), divide_by_radius(grid, s.velocity.values()), Form::u),
                       s.time, s.tail);
}

inline RadialState as_u(const RadialState& s) { return s.form() == Form::u ? s : to_u(s); }
inline RadialState as_psi(const RadialState& s) { return s.form() == Form::psi ? s : to_psi(s); }

namespace detail {
inline bool reaches_outer_edge(const RadialGrid& g, double b) { return b >= g.r_max() * (1.0 - 1e-14); }
} // namespace detail

/// ||(u, u_t)||^2_{H(a<r<b)} = int_a^b (u_t^2 + u_r^2) r^3 dr. The analytic
/// tail is added when the band reaches R_max.
inline double h_norm_sq(const RadialState& s, double a, double b)
{
    if (s.form() != Form::u)
        throw FormulationError("h_norm_sq expects a u-form state");
    const auto& grid = *s.grid();
    detail::check_band(grid, a, b);
    const auto ur = derivative_samples(grid, s.position.values());
    const double inner = weighted_integral(grid, 3, a, b, [&](std::size_t i, double) {
        return s.velocity[i] * s.velocity[i] + ur[i] * ur[i];
    });
    return inner + (detail::reaches_outer_edge(grid, b) ? s.tail.grad_sq(grid.r_max()) : 0.0);
}

inline double h_norm_sq(const RadialState& s) { return h_norm_sq(s, 0.0, s.grid()->r_max()); }

/// Slack used when asserting analytic inequalities on discrete data:
/// 10 h^2 per unit band length.
inline double quadrature_slack(const RadialGrid& grid, double band_length)
{
    const double h = grid.spacing();
    return 10.0 * h * h * std::max(band_length, 1.0);
}

struct HardyReport {
    bool verifiable = true;
    // Worst (smallest) rhs - lhs over the checked nodes, per inequality:
    // pointwise |r f|^2 <= 1/2 int_r^inf f_r^2,
    // Hardy int_r^inf f^2 rho <= int_r^inf f_r^2 rho^3,
    // two-point difference bound, and the local sup bound.
    double margin_pointwise = 0.0;
    double margin_hardy = 0.0;
    double margin_two_point = 0.0;
    double margin_local_sup = 0.0;
    bool pointwise_holds = true;
    bool hardy_holds = true;
    bool two_point_holds = true;
    bool local_sup_holds = true;
    double slack = 0.0;

    bool all_hold() const noexcept
    {
        return verifiable && pointwise_holds && hardy_holds && two_point_holds && local_sup_holds;
    }
};

/// Checks the four localized Hardy-type bounds for a u-form field at every
/// node in [r_lo, r_hi]. Integrals to infinity are truncated at R_max unless
/// the field carries an analytic tail.
inline HardyReport hardy_suite(const RadialField& f, double r_lo, double r_hi, const TailModel& tail = {})
{
    if (f.form() != Form::u)
        throw FormulationError("hardy_suite expects a u-form field");
    const auto& grid = *f.grid();
    detail::check_band(grid, r_lo, r_hi);
    HardyReport rep;

    const double peak = f.sup_abs();
    if (tail.empty() && peak > 0.0) {
        // the last 5% of the domain must be numerically empty
        const std::size_t from = grid.size() - std::max<std::size_t>(grid.size() / 20, 4);
        double edge = 0.0;
        for (std::size_t i = from; i < grid.size(); ++i)
            edge = std::max(edge, std::abs(grid[i] * f[i]));
        if (edge > 1e-8 * std::max(1.0, peak * grid.r_max())) {
            rep.verifiable = false;
            return rep;
        }
    }

    const std::size_t n = grid.size();
    const auto fr = derivative_samples(grid, f.values());
    std::vector<double> grad_r3(n), sq_r1(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = grid[i];
        grad_r3[i] = fr[i] * fr[i] * r * r * r;
        sq_r1[i] = f[i] * f[i] * r;
        g[i] = r * r * f[i] * f[i];
    }
    const auto cum_grad = cumulative_integral(grid, grad_r3);
    const auto cum_sq = cumulative_integral(grid, sq_r1);
    const double total_grad = cum_grad.back() + tail.grad_sq(grid.r_max());
    const double total_sq = cum_sq.back() + tail.square_r1(grid.r_max());

    rep.slack = quadrature_slack(grid, grid.r_max());
    rep.margin_pointwise = rep.margin_hardy = rep.margin_two_point = rep.margin_local_sup =
        std::numeric_limits<double>::infinity();

    // A = C - g and B = C + g with C = int_0^r (3 f^2 rho + f_r^2 rho^3):
    // the two-point bound for s < r is min(A(r) - A(s), B(r) - B(s)) >= 0.
    double max_a = -std::numeric_limits<double>::infinity();
    double max_b = -std::numeric_limits<double>::infinity();
    double running_sup = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = grid[i];
        const double c = 3.0 * cum_sq[i] + cum_grad[i];
        running_sup = std::max(running_sup, g[i]);
        if (r < r_lo || r > r_hi * (1.0 + 1e-14)) {
            if (r < r_lo) {
                max_a = std::max(max_a, c - g[i]);
                max_b = std::max(max_b, c + g[i]);
            }
            continue;
        }
        const double grad_beyond = total_grad - cum_grad[i];
        const double sq_beyond = total_sq - cum_sq[i];
        rep.margin_pointwise = std::min(rep.margin_pointwise, 0.5 * grad_beyond - g[i]);
        rep.margin_hardy = std::min(rep.margin_hardy, grad_beyond - sq_beyond);
        if (i > 0 && std::isfinite(max_a)) {
            rep.margin_two_point = std::min(rep.margin_two_point, (c - g[i]) - max_a);
            rep.margin_two_point = std::min(rep.margin_two_point, (c + g[i]) - max_b);
        }
        rep.margin_local_sup = std::min(rep.margin_local_sup, c - running_sup);
        max_a = std::max(max_a, c - g[i]);
        max_b = std::max(max_b, c + g[i]);
    }
    auto settle = [&](double& m) {
        if (!std::isfinite(m))
            m = 0.0;
        return m >= -rep.slack;
    };
    rep.pointwise_holds = settle(rep.margin_pointwise);
    rep.hardy_holds = settle(rep.margin_hardy);
    rep.two_point_holds = settle(rep.margin_two_point);
    rep.local_sup_holds = settle(rep.margin_local_sup);
    return rep;
}

} // namespace critwave
