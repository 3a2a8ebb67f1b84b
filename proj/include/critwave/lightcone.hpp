#pragma once

// Null-coordinate and light-cone diagnostics in the 2d variable psi = r u.
//
//   e = (psi_t^2 + psi_r^2) / 2 + F(psi) / r^2      m = psi_t psi_r
//   L = (psi_r^2 - psi_t^2) / 2 + F / r^2 - (2/r) f(psi) psi_r
//   A^2 = r (e + m),  B^2 = r (e - m),  eta = t + r,  xi = t - r
//
// with f = psi - psi^3, F = psi^2/2 - psi^4/4 (cubic) or f = psi,
// F = psi^2/2 (linear).
//
// Flux conventions. Along the backward mantle r = T - t the cone energy
// E(t) = int_0^{T-t} e r dr loses exactly int B^2 dt. Written as a line
// integral c0 int [chi'^2/2 + F(chi)/rho^2] rho ds with ds = sqrt(2) dt,
// this fixes c0 = 1/sqrt(2). Along the forward mantle xi = const the flux is
// int A^2 d(eta); the interior of the cone gains half of it (d eta = 2 dt).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "critwave/evolution.hpp"
#include "critwave/radial_field.hpp"
#include "critwave/snapshot_io.hpp"

namespace critwave {

enum class Orientation { backward, forward };

inline const char* to_string(Orientation o) noexcept { return o == Orientation::backward ? "backward" : "forward"; }

/// Backward: band lambda (T - t) <= r <= T - t, mantle r = T - t.
/// Forward:  band lambda (t - T) <= r <= t - T - offset, mantle r = t - T - offset.
struct ConeSpec {
    double apex = 0.0;
    Orientation orientation = Orientation::backward;
    double lambda = 0.5;
    double offset = 0.0;

    void validate() const
    {
        if (!(lambda > 0.0 && lambda < 1.0))
            throw ConfigError("cone: lambda must lie in (0, 1)");
        if (!(offset >= 0.0))
            throw ConfigError("cone: offset must be non-negative");
        if (!std::isfinite(apex))
            throw ConfigError("cone: apex time must be finite");
    }

    /// Radius of the mantle at time t (negative outside the cone's time range).
    double mantle(double t) const noexcept
    {
        return orientation == Orientation::backward ? apex - t : t - apex - offset;
    }

    double band_lo(double t) const noexcept
    {
        return lambda * (orientation == Orientation::backward ? apex - t : t - apex);
    }
    double band_hi(double t) const noexcept { return mantle(t); }
};

/// f and F for the chosen nonlinearity.
struct Potential {
    Mode mode = Mode::cubic;

    double f(double p) const noexcept { return mode == Mode::cubic ? p - p * p * p : p; }
    double F(double p) const noexcept
    {
        const double p2 = p * p;
        return mode == Mode::cubic ? 0.5 * p2 - 0.25 * p2 * p2 : 0.5 * p2;
    }
};

/// Nodal null-frame quantities at one time. Index 0 (r = 0) is masked as NaN.
struct NullFields {
    double time = 0.0;
    std::vector<double> r, eta, xi;
    std::vector<double> e, m, L, a_sq, b_sq;
};

inline NullFields null_fields(const RadialState& s, Mode mode = Mode::cubic)
{
    if (s.form() != Form::psi)
        throw FormulationError("null_fields expects a psi-form state");
    const auto& g = *s.grid();
    const Potential pot{mode};
    const auto pr = derivative_samples(g, s.position.values());
    const std::size_t n = g.size();
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    NullFields nf;
    nf.time = s.time;
    nf.r.assign(g.nodes().begin(), g.nodes().end());
    nf.eta.resize(n);
    nf.xi.resize(n);
    nf.e.assign(n, nan);
    nf.m.assign(n, nan);
    nf.L.assign(n, nan);
    nf.a_sq.assign(n, nan);
    nf.b_sq.assign(n, nan);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g[i];
        nf.eta[i] = s.time + r;
        nf.xi[i] = s.time - r;
        if (i == 0)
            continue;
        const double p = s.position[i], pt = s.velocity[i], px = pr[i];
        const double Fr2 = pot.F(p) / (r * r);
        nf.e[i] = 0.5 * (pt * pt + px * px) + Fr2;
        nf.m[i] = pt * px;
        nf.L[i] = 0.5 * (px * px - pt * pt) + Fr2 - 2.0 / r * pot.f(p) * px;
        nf.a_sq[i] = r * (nf.e[i] + nf.m[i]);
        nf.b_sq[i] = r * (nf.e[i] - nf.m[i]);
    }
    return nf;
}

struct PointwiseReport {
    std::size_t checked = 0;
    /// Nodes with psi^2 > 1/2, excluded from every check.
    std::size_t skipped = 0;
    std::size_t chain_violations = 0;
    std::size_t bound_violations = 0;
    double factorization_error = 0.0; ///< max mismatch relative to e^2
    double max_ratio = 0.0;           ///< max L^2 r^2 / (A^2 B^2)
    double constant = 0.0;

    bool ok() const noexcept
    {
        return chain_violations == 0 && bound_violations == 0 && factorization_error <= 1e-12;
    }
};

namespace detail {

inline double pointwise_ratio(double L, double a_sq, double b_sq, double r)
{
    if (L == 0.0)
        return 0.0;
    if (!(a_sq > 0.0 && b_sq > 0.0))
        return std::numeric_limits<double>::infinity();
    // scaled to survive far-field values near the underflow threshold
    return (L * r / a_sq) * (L * r / b_sq);
}

} // namespace detail

/// Checks f^2 <= psi^2 <= 4F, the expansion
///   A^2 B^2 / r^2 = (psi_r^2 - psi_t^2)^2 / 4 + F^2 / r^4 + F (psi_t^2 + psi_r^2) / r^2
/// and L^2 <= C_L A^2 B^2 / r^2 at every node of [r_lo, r_hi] with psi^2 <= 1/2.
inline PointwiseReport pointwise_bound_check(const RadialState& s, double r_lo, double r_hi, double c_l,
                                             Mode mode = Mode::cubic)
{
    const auto& g = *s.grid();
    detail::check_band(g, r_lo, r_hi);
    const auto nf = null_fields(s, mode);
    const auto pr = derivative_samples(g, s.position.values());
    const Potential pot{mode};
    PointwiseReport rep;
    rep.constant = c_l;
    for (std::size_t i = 1; i < g.size(); ++i) {
        const double r = g[i];
        if (r < r_lo || r > r_hi)
            continue;
        const double p = s.position[i];
        if (p * p > 0.5) {
            ++rep.skipped;
            continue;
        }
        ++rep.checked;
        const double f = pot.f(p), F = pot.F(p);
        const double tol = 1e-14 * std::max(1.0, p * p);
        if (f * f > p * p + tol || p * p > 4.0 * F + tol)
            ++rep.chain_violations;

        const double pt = s.velocity[i], px = pr[i];
        const double lhs = nf.a_sq[i] * nf.b_sq[i] / (r * r);
        const double diff = px * px - pt * pt;
        const double rhs = 0.25 * diff * diff + F * F / (r * r * r * r) + F * (pt * pt + px * px) / (r * r);
        // e - m may cancel; round-off lives on the scale e^2
        const double scale = std::max(nf.e[i] * nf.e[i], std::numeric_limits<double>::min());
        rep.factorization_error = std::max(rep.factorization_error, std::abs(lhs - rhs) / scale);

        const double ratio = detail::pointwise_ratio(nf.L[i], nf.a_sq[i], nf.b_sq[i], r);
        rep.max_ratio = std::max(rep.max_ratio, ratio);
        if (ratio > c_l * (1.0 + 1e-12))
            ++rep.bound_violations;
    }
    return rep;
}

/// C_L := 1.1 * the largest L^2 r^2 / (A^2 B^2) over psi^2 <= 1/2 nodes of the corpus.
inline double calibrate_pointwise_constant(std::span<const RadialState> corpus, Mode mode = Mode::cubic)
{
    double hi = 0.0;
    for (const auto& s : corpus) {
        const auto& g = *s.grid();
        hi = std::max(hi, pointwise_bound_check(s, 0.0, g.r_max(), 0.0, mode).max_ratio);
    }
    if (!(hi > 0.0) || !std::isfinite(hi))
        throw DiagnosticError("pointwise calibration corpus is degenerate");
    return 1.1 * hi;
}

// ---------------------------------------------------------------------------
// Multiplier identities

struct SlabResidual {
    double time = 0.0;
    double en_id = 0.0;    ///< int |d_t(r e) - d_r(r m)| dr
    double psi_t_id = 0.0; ///< int |d_t(r^2 m) - d_r(r^2 e_0 - F) + r psi_t^2| dr
};

struct MultiplierReport {
    std::vector<SlabResidual> slabs;
    double max_en_id = 0.0;
    double max_psi_t_id = 0.0;
};

namespace detail {

// Three-point derivative at the middle of possibly unequal spacings.
inline double centered_time_derivative(double t0, double t1, double t2, double q0, double q1, double q2)
{
    const double a = t1 - t0, b = t2 - t1;
    return (-b / (a * (a + b))) * q0 + ((b - a) / (a * b)) * q1 + (a / (b * (a + b))) * q2;
}

} // namespace detail

/// L^1-in-space residuals over [r_lo, r_hi] at every interior snapshot.
/// Time derivatives use 5-point stencils (shifted next to the ends) where
/// the snapshots are equally spaced, 3-point centered ones otherwise. The potential follows the
/// trajectory's mode unless given.
inline MultiplierReport multiplier_residuals(const Trajectory& tr, double r_lo, double r_hi,
                                             std::optional<Mode> potential = std::nullopt)
{
    const std::size_t count = tr.snapshots.size();
    if (count < 3)
        throw DiagnosticError("multiplier_residuals needs at least three snapshots");
    const auto& g = *tr.front().grid();
    detail::check_band(g, r_lo, r_hi);
    const Potential pot{potential.value_or(tr.config.mode)};
    const std::size_t n = g.size();

    // per snapshot: r e, r^2 m, psi_r
    std::vector<std::vector<double>> re(count), r2m(count), pr(count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto& s = tr.snapshots[k];
        pr[k] = derivative_samples(g, s.position.values());
        re[k].resize(n);
        r2m[k].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = g[i], p = s.position[i], pt = s.velocity[i], px = pr[k][i];
            re[k][i] = i == 0 ? 0.0 : 0.5 * r * (pt * pt + px * px) + pot.F(p) / r;
            r2m[k][i] = r * r * pt * px;
        }
    }
    auto time = [&](std::size_t k) { return tr.snapshots[k].time; };
    // first index of a uniformly spaced window of five snapshots around k
    auto window5 = [&](std::size_t k) -> std::optional<std::size_t> {
        if (count < 5)
            return std::nullopt;
        const std::size_t j = std::clamp<std::size_t>(k, 2, count - 3) - 2;
        const double d = time(j + 1) - time(j);
        for (std::size_t m = j; m < j + 4; ++m)
            if (std::abs(time(m + 1) - time(m) - d) > 1e-9 * d)
                return std::nullopt;
        return j;
    };
    auto d_t = [&](const std::vector<std::vector<double>>& q, std::size_t k, std::size_t i) {
        if (const auto j = window5(k)) {
            const double inv = 1.0 / (12.0 * (time(*j + 1) - time(*j)));
            const auto f = [&](std::size_t m) { return q[*j + m][i]; };
            switch (k - *j) {
            case 1: return (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)) * inv;
            case 3: return (3.0 * f(4) + 10.0 * f(3) - 18.0 * f(2) + 6.0 * f(1) - f(0)) * inv;
            default: return (f(0) - 8.0 * f(1) + 8.0 * f(3) - f(4)) * inv;
            }
        }
        return detail::centered_time_derivative(time(k - 1), time(k), time(k + 1), q[k - 1][i], q[k][i],
                                                q[k + 1][i]);
    };

    MultiplierReport rep;
    std::vector<double> flux1(n), flux2(n), res1(n), res2(n);
    for (std::size_t k = 1; k + 1 < count; ++k) {
        const auto& s = tr.snapshots[k];
        for (std::size_t i = 0; i < n; ++i) {
            const double r = g[i], pt = s.velocity[i], px = pr[k][i];
            flux1[i] = r * pt * px;
            flux2[i] = 0.5 * r * r * (pt * pt + px * px) - pot.F(s.position[i]);
        }
        const auto d1 = derivative_samples(g, flux1);
        const auto d2 = derivative_samples(g, flux2);
        for (std::size_t i = 0; i < n; ++i) {
            const double pt = s.velocity[i];
            res1[i] = std::abs(d_t(re, k, i) - d1[i]);
            res2[i] = std::abs(d_t(r2m, k, i) - d2[i] + g[i] * pt * pt);
        }
        SlabResidual slab{s.time, integrate_samples(g, res1, r_lo, r_hi), integrate_samples(g, res2, r_lo, r_hi)};
        rep.max_en_id = std::max(rep.max_en_id, slab.en_id);
        rep.max_psi_t_id = std::max(rep.max_psi_t_id, slab.psi_t_id);
        rep.slabs.push_back(slab);
    }
    return rep;
}

inline MultiplierReport multiplier_residuals(const Trajectory& tr, std::optional<Mode> potential = std::nullopt)
{
    if (tr.empty())
        throw DiagnosticError("multiplier_residuals needs at least three snapshots");
    return multiplier_residuals(tr, 0.0, tr.front().grid()->r_max(), potential);
}

/// Observed orders log2(res_k / res_{k+1}) of the max residuals along a
/// family refined by halving; first = en id, second = psi t id.
inline std::vector<std::pair<double, double>> multiplier_orders(std::span<const MultiplierReport> family)
{
    std::vector<std::pair<double, double>> out;
    for (std::size_t k = 0; k + 1 < family.size(); ++k)
        out.emplace_back(std::log2(family[k].max_en_id / family[k + 1].max_en_id),
                         std::log2(family[k].max_psi_t_id / family[k + 1].max_psi_t_id));
    return out;
}

// ---------------------------------------------------------------------------
// Sampling a trajectory off the grid: cubic in r; cubic Hermite in t built
// from (psi, psi_t) and (psi_r, psi_tr) at the bracketing snapshots.

namespace detail {

class TrajectoryProbe {
public:
    struct Sample {
        double psi = 0.0, psi_t = 0.0, psi_r = 0.0;
    };

    explicit TrajectoryProbe(const Trajectory& tr) : tr_(tr), pr_(tr.snapshots.size()), ptr_(tr.snapshots.size())
    {
        if (tr.empty())
            throw DiagnosticError("empty trajectory");
    }

    double t_first() const { return tr_.front().time; }
    double t_last() const { return tr_.back().time; }

    Sample at(double t, double r)
    {
        const auto& snaps = tr_.snapshots;
        const double span = std::max(1.0, std::abs(t_last()));
        if (t < t_first() - 1e-12 * span || t > t_last() + 1e-12 * span)
            throw DomainError("cone time " + std::to_string(t) + " outside the trajectory");
        auto it = std::upper_bound(snaps.begin(), snaps.end(), t,
                                   [](double x, const RadialState& s) { return x < s.time; });
        const auto hi = static_cast<std::size_t>(it - snaps.begin());
        if (hi >= snaps.size())
            return node(snaps.size() - 1, r).value;
        if (hi == 0)
            return node(0, r).value;
        const std::size_t lo = hi - 1;
        const double dt = snaps[hi].time - snaps[lo].time;
        const double s = (t - snaps[lo].time) / dt;
        if (s <= 0.0)
            return node(lo, r).value;
        const auto a = node(lo, r), b = node(hi, r);
        const double s2 = s * s, s3 = s2 * s;
        const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
        const double d00 = 6 * s2 - 6 * s, d10 = 3 * s2 - 4 * s + 1, d01 = -d00, d11 = 3 * s2 - 2 * s;
        Sample out;
        out.psi = h00 * a.value.psi + h10 * dt * a.value.psi_t + h01 * b.value.psi + h11 * dt * b.value.psi_t;
        out.psi_t = (d00 * a.value.psi + d10 * dt * a.value.psi_t + d01 * b.value.psi + d11 * dt * b.value.psi_t) / dt;
        out.psi_r = h00 * a.value.psi_r + h10 * dt * a.psi_tr + h01 * b.value.psi_r + h11 * dt * b.psi_tr;
        return out;
    }

private:
    struct Node {
        Sample value;
        double psi_tr = 0.0;
    };

    Node node(std::size_t k, double r)
    {
        const auto& s = tr_.snapshots[k];
        const auto& g = *s.grid();
        if (!pr_[k]) {
            pr_[k] = derivative_samples(g, s.position.values());
            ptr_[k] = derivative_samples(g, s.velocity.values());
        }
        return {{interpolate_samples(g, s.position.values(), r), interpolate_samples(g, s.velocity.values(), r),
                 interpolate_samples(g, *pr_[k], r)},
                interpolate_samples(g, *ptr_[k], r)};
    }

    const Trajectory& tr_;
    std::vector<std::optional<std::vector<double>>> pr_, ptr_;
};

// Composite Simpson on [a, b] with steps no larger than `step`.
template <class Fn>
double simpson(double a, double b, double step, Fn&& fn)
{
    if (b <= a)
        return 0.0;
    auto n = static_cast<std::size_t>(std::ceil((b - a) / step));
    n = std::max<std::size_t>(2, n + (n % 2));
    const double h = (b - a) / static_cast<double>(n);
    double sum = fn(a) + fn(b);
    for (std::size_t i = 1; i < n; ++i)
        sum += (i % 2 ? 4.0 : 2.0) * fn(a + static_cast<double>(i) * h);
    return sum * h / 3.0;
}

} // namespace detail

/// c0 for the backward flux; see the header comment.
inline constexpr double kFluxConstant = std::numbers::sqrt2 / 2.0;

/// Backward: c0 * sqrt(2) * int_{t_from}^{t_to} B^2(t, T - t) dt.
/// Forward:  int A^2(eta, xi_0) d(eta) = 2 int A^2(t, t - xi_0) dt, truncated to [t_from, t_to].
/// Sampled every h/2 in t.
inline double flux_on_cone(const Trajectory& tr, const ConeSpec& cone, double t_from, double t_to,
                           double c0 = kFluxConstant, std::optional<Mode> potential = std::nullopt)
{
    cone.validate();
    if (!(t_to >= t_from))
        throw DomainError("flux interval reversed");
    detail::TrajectoryProbe probe(tr);
    const auto& g = *tr.front().grid();
    const Potential pot{potential.value_or(tr.config.mode)};
    const double eps = 1e-12 * std::max(1.0, std::abs(cone.apex));
    for (double t : {t_from, t_to}) {
        const double rho = cone.mantle(t);
        if (rho < -eps || rho > g.r_max() + eps)
            throw DomainError("cone mantle leaves the grid at t = " + std::to_string(t));
    }
    const bool backward = cone.orientation == Orientation::backward;
    auto density = [&](double t) {
        const double r = std::clamp(cone.mantle(t), 0.0, g.r_max());
        if (r <= 0.0)
            return 0.0;
        const auto v = probe.at(t, r);
        const double d = backward ? v.psi_t - v.psi_r : v.psi_t + v.psi_r;
        return 0.5 * r * d * d + pot.F(v.psi) / r;
    };
    const double integral = detail::simpson(t_from, t_to, 0.5 * g.spacing(), density);
    return backward ? c0 * std::numbers::sqrt2 * integral : 2.0 * integral;
}

/// int_0^radius [ (psi_t^2 + psi_r^2)/2 + F/r^2 ] r dr of a psi-form snapshot.
inline double cone_energy(const RadialState& s, double radius, Mode mode = Mode::cubic)
{
    if (s.form() != Form::psi)
        throw FormulationError("cone_energy expects a psi-form state");
    const auto& g = *s.grid();
    const Potential pot{mode};
    const auto pr = derivative_samples(g, s.position.values());
    std::vector<double> d(g.size(), 0.0);
    for (std::size_t i = 1; i < g.size(); ++i) {
        const double r = g[i], pt = s.velocity[i], px = pr[i];
        d[i] = 0.5 * r * (pt * pt + px * px) + pot.F(s.position[i]) / r;
    }
    return integrate_samples(g, d, 0.0, radius);
}

/// Recalibrated c0: the value that balances E(t_from) = E(t_to) + Flux on a
/// backward cone of a smooth trajectory (t_from, t_to snapshot times).
inline double calibrate_flux_constant(const Trajectory& tr, const ConeSpec& cone, double t_from, double t_to)
{
    if (cone.orientation != Orientation::backward)
        throw ConfigError("flux calibration uses a backward cone");
    const auto& a = tr.snapshots[tr.index_near(t_from)];
    const auto& b = tr.snapshots[tr.index_near(t_to)];
    const Mode mode = tr.config.mode;
    const double drop = cone_energy(a, cone.mantle(a.time), mode) - cone_energy(b, cone.mantle(b.time), mode);
    const double unit = flux_on_cone(tr, cone, a.time, b.time, 1.0);
    if (!(unit > 0.0))
        throw DiagnosticError("flux calibration: vanishing flux");
    return drop / unit;
}

/// int_band [u_t^2 + u_r^2 + u^2 / r^2] r^3 dr over the cone band at s.time.
inline double band_energy(const RadialState& s, const ConeSpec& cone)
{
    cone.validate();
    const double lo = cone.band_lo(s.time), hi = cone.band_hi(s.time);
    const auto& g = *s.grid();
    const double eps = 1e-12 * std::max(1.0, std::abs(hi));
    if (std::abs(hi - lo) <= eps && hi >= -eps)
        return 0.0;
    if (!(lo >= 0.0) || !(hi > lo))
        throw DomainError("empty cone band at t = " + std::to_string(s.time));
    if (hi > g.r_max())
        throw DomainError("cone band leaves the grid at t = " + std::to_string(s.time));
    const auto u = as_u(s);
    const auto ur = derivative_samples(g, u.position.values());
    return weighted_integral(g, 1, lo, hi, [&](std::size_t i, double r) {
        const double v = u.position[i];
        return r * r * (u.velocity[i] * u.velocity[i] + ur[i] * ur[i]) + v * v;
    });
}

struct MonotonicityPoint {
    double time = 0.0;
    double energy = 0.0;
    /// |psi| <= sqrt(2)/2 on the mantle at this time.
    bool hypothesis = false;
};

struct MonotonicityReport {
    std::vector<MonotonicityPoint> points;
    bool asserted = false;
    bool monotone = true;
    double worst_increase = 0.0;
};

/// Cone energy E(t) inside r <= T - t at every snapshot with 0 < T - t <= R_max.
/// Non-increase is asserted between consecutive snapshots where the mantle
/// hypothesis holds at both ends, within the quadrature slack.
inline MonotonicityReport monotonicity_probe(const Trajectory& tr, double apex,
                                             std::optional<Mode> potential = std::nullopt)
{
    MonotonicityReport rep;
    const Mode mode = potential.value_or(tr.config.mode);
    const double bound = std::numbers::sqrt2 / 2.0;
    for (const auto& s : tr.snapshots) {
        const auto& g = *s.grid();
        const double rho = apex - s.time;
        if (!(rho > 0.0) || rho > g.r_max())
            continue;
        MonotonicityPoint p;
        p.time = s.time;
        p.energy = cone_energy(s, rho, mode);
        p.hypothesis = std::abs(interpolate(s.position, rho)) <= bound;
        rep.points.push_back(p);
    }
    for (std::size_t k = 1; k < rep.points.size(); ++k) {
        const auto& a = rep.points[k - 1];
        const auto& b = rep.points[k];
        if (!(a.hypothesis && b.hypothesis))
            continue;
        rep.asserted = true;
        const double rise = b.energy - a.energy;
        rep.worst_increase = std::max(rep.worst_increase, rise);
        if (rise > quadrature_slack(*tr.front().grid(), apex - a.time))
            rep.monotone = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Diagnostic table

struct ConeRow {
    double t = 0.0;
    double band_lo = 0.0, band_hi = 0.0;
    double band_energy = 0.0;
    double flux = 0.0; ///< accumulated along the mantle from the first row
    double residual_en_id = 0.0;
    double residual_psi_t_id = 0.0;
};

/// One row per interior snapshot whose band lies inside the grid.
inline std::vector<ConeRow> cone_diagnostics(const Trajectory& tr, const ConeSpec& cone)
{
    cone.validate();
    std::vector<ConeRow> rows;
    if (tr.snapshots.size() < 3)
        return rows;
    const auto& g = *tr.front().grid();
    const auto res = multiplier_residuals(tr);
    double acc = 0.0;
    std::optional<double> prev_t;
    for (std::size_t k = 1; k + 1 < tr.snapshots.size(); ++k) {
        const auto& s = tr.snapshots[k];
        const double lo = cone.band_lo(s.time), hi = cone.band_hi(s.time);
        if (!(lo >= 0.0) || hi < lo || hi > g.r_max())
            continue;
        if (prev_t)
            acc += flux_on_cone(tr, cone, *prev_t, s.time);
        prev_t = s.time;
        ConeRow row;
        row.t = s.time;
        row.band_lo = lo;
        row.band_hi = hi;
        row.band_energy = band_energy(s, cone);
        row.flux = acc;
        row.residual_en_id = res.slabs[k - 1].en_id;
        row.residual_psi_t_id = res.slabs[k - 1].psi_t_id;
        rows.push_back(row);
    }
    return rows;
}

inline void write_cone_csv(std::ostream& os, std::span<const ConeRow> rows)
{
    os << "t,band_lo,band_hi,band_energy,flux,residual_en_id,residual_psi_t_id\n";
    for (const auto& r : rows)
        os << format_double(r.t) << ',' << format_double(r.band_lo) << ',' << format_double(r.band_hi) << ','
           << format_double(r.band_energy) << ',' << format_double(r.flux) << ','
           << format_double(r.residual_en_id) << ',' << format_double(r.residual_psi_t_id) << '\n';
}

} // namespace critwave
