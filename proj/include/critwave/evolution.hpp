#pragma once

// Explicit leapfrog evolution of the radial focusing cubic wave equation in
// R^{1+4}, carried out in the 2d variable psi = r u:
//
//   psi_tt = psi_rr + psi_r / r - (psi - psi^3) / r^2          (cubic mode)
//   psi_tt = psi_rr + psi_r / r - psi / r^2                    (linear mode)
//
// The linear part is discretized in the conservative form
// d_r( r^{-1} d_r (r psi) ) with 4th-order staggered differences, which is
// exact on psi = c r and needs no 1/r^2 at the first interior node. Time
// stepping is 2nd order. psi(t, 0) = 0 is imposed exactly; at R_max the
// value is held (frozen initial value, or a prescribed driver).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "critwave/ground_state.hpp"
#include "critwave/radial_field.hpp"

namespace critwave {

enum class Mode { cubic, linear };

inline const char* to_string(Mode m) noexcept { return m == Mode::cubic ? "cubic" : "linear"; }

/// Prescribed psi and psi_t at R_max as functions of time.
struct OuterDriver {
    std::function<double(double)> value;
    std::function<double(double)> velocity;
};

/// Largest dt / h for which leapfrog with the radial operator is stable
/// (spectral radius 49 / (9 h^2)).
inline constexpr double kStableCfl = 0.85;

struct SolverConfig {
    GridPtr grid;
    double dt = 0.0;
    Mode mode = Mode::cubic;
    double t_max = 1.0;
    /// Blow-up flag once sup|u| exceeds this multiple of sup|u_0|.
    double blowup_factor = 1e6;
    /// Time between stored snapshots; <= dt stores every step.
    double snapshot_interval = 0.0;
    bool keep_snapshots = true;
    double cfl_max = 0.9;
    /// Empty: psi(R_max) frozen at its initial value.
    std::optional<OuterDriver> outer;
    /// Width of the outer monitoring band and the psi drift there that
    /// counts as contamination, relative to sup|psi_0|. Only checked when
    /// the boundary is frozen.
    double buffer_width = 0.0;
    double contamination_rel = 1e-3;

    double cfl() const { return dt / grid->spacing(); }

    void validate() const
    {
        if (!grid)
            throw ConfigError("solver: grid missing");
        if (!(dt > 0.0))
            throw ConfigError("solver: dt must be positive");
        if (!(cfl_max <= 0.9))
            throw ConfigError("solver: CFL cap must not exceed 0.9");
        const double cap = std::min(cfl_max, kStableCfl);
        if (cfl() > cap * (1.0 + 1e-12))
            throw ConfigError("solver: CFL ratio dt/h = " + std::to_string(cfl()) + " exceeds " +
                              std::to_string(cap));
        if (!(t_max >= 0.0))
            throw ConfigError("solver: t_max must be non-negative");
        if (!(blowup_factor > 1.0))
            throw ConfigError("solver: blow-up factor must exceed 1");
    }

    std::size_t steps_per_snapshot() const
    {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(snapshot_interval / dt)));
    }
};

enum class Termination { reached_max_time, blowup, boundary_contamination };

inline const char* to_string(Termination t) noexcept
{
    switch (t) {
    case Termination::reached_max_time: return "reached-max-time";
    case Termination::blowup: return "blow-up-detected";
    case Termination::boundary_contamination: return "boundary-contamination";
    }
    return "?";
}

struct TerminationRecord {
    Termination kind = Termination::reached_max_time;
    /// Last time at which the state passed every check.
    double last_stable_time = 0.0;
    /// Time at which the run was stopped (T_est for blow-up).
    double flag_time = 0.0;
    std::size_t steps = 0;
};

/// psi-form snapshots in strictly increasing time.
struct Trajectory {
    std::vector<RadialState> snapshots;
    SolverConfig config;
    TerminationRecord termination;

    bool empty() const noexcept { return snapshots.empty(); }
    const RadialState& front() const { return snapshots.front(); }
    const RadialState& back() const { return snapshots.back(); }

    bool blew_up() const noexcept { return termination.kind == Termination::blowup; }

    /// Index of the snapshot closest to t.
    std::size_t index_near(double t) const
    {
        if (snapshots.empty())
            throw DiagnosticError("empty trajectory");
        std::size_t best = 0;
        for (std::size_t k = 1; k < snapshots.size(); ++k)
            if (std::abs(snapshots[k].time - t) < std::abs(snapshots[best].time - t))
                best = k;
        return best;
    }
};

using Observer = std::function<void(const RadialState&)>;

namespace detail {

// Lpsi = d_r( r^{-1} d_r (r psi) ) with 4th-order staggered differences;
// v = r psi is even in r, which supplies the values left of the origin. The
// two nodes next to R_max use the compact 2nd-order form.
struct RadialStencil {
    std::vector<double> inv_r_half;    // 1 / (24 h r_{j+1/2})
    std::vector<double> lower, diag, upper;
    std::vector<double> v, q;

    explicit RadialStencil(const RadialGrid& g)
        : inv_r_half(g.cells()), lower(g.size(), 0.0), diag(g.size(), 0.0), upper(g.size(), 0.0), v(g.size()),
          q(g.cells())
    {
        const double h = g.spacing();
        for (std::size_t j = 0; j < g.cells(); ++j)
            inv_r_half[j] = 1.0 / (24.0 * h * 0.5 * (g[j] + g[j + 1]));
        const double h2 = h * h;
        for (std::size_t i = 1; i < g.cells(); ++i) {
            const double rp = 0.5 * (g[i] + g[i + 1]);
            const double rm = 0.5 * (g[i] + g[i - 1]);
            upper[i] = g[i + 1] / rp / h2;
            diag[i] = -g[i] * (1.0 / rp + 1.0 / rm) / h2;
            lower[i] = g[i - 1] / rm / h2;
        }
    }
};

inline void acceleration(const RadialGrid& g, RadialStencil& st, Mode mode, std::span<const double> psi,
                         std::span<double> acc)
{
    const std::size_t n = g.cells();
    const double inv24h = 1.0 / (24.0 * g.spacing());
    for (std::size_t k = 0; k <= n; ++k)
        st.v[k] = g[k] * psi[k];
    const auto& v = st.v;
    auto& q = st.q;
    // q_j ~ r^{-1} (r psi)_r at r_{j+1/2}, j = 0 .. n-2
    q[0] = (v[1] - 27.0 * v[0] + 27.0 * v[1] - v[2]) * st.inv_r_half[0];
    for (std::size_t j = 1; j + 2 <= n; ++j)
        q[j] = (v[j - 1] - 27.0 * v[j] + 27.0 * v[j + 1] - v[j + 2]) * st.inv_r_half[j];
    auto q_at = [&](long j) { return q[static_cast<std::size_t>(j < 0 ? -j - 1 : j)]; };

    acc[0] = 0.0;
    acc[n] = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        double a;
        if (i + 3 <= n) {
            const long k = static_cast<long>(i);
            a = (q_at(k - 2) - 27.0 * q_at(k - 1) + 27.0 * q_at(k) - q_at(k + 1)) * inv24h;
        } else {
            a = st.lower[i] * psi[i - 1] + st.diag[i] * psi[i] + st.upper[i] * psi[i + 1];
        }
        if (mode == Mode::cubic)
            a += psi[i] * psi[i] * psi[i] / (g[i] * g[i]);
        acc[i] = a;
    }
}

/// sup_r |psi / r| including the extrapolated origin value; NaN if any
/// sample is not finite.
inline double sup_u(const RadialGrid& g, std::span<const double> psi)
{
    double m = 0.0;
    for (std::size_t i = 1; i < g.size(); ++i) {
        const double u = psi[i] / g[i];
        if (!std::isfinite(u))
            return std::numeric_limits<double>::quiet_NaN();
        m = std::max(m, std::abs(u));
    }
    const double u0 = 3.0 * psi[1] / g[1] - 3.0 * psi[2] / g[2] + psi[3] / g[3];
    return std::max(m, std::abs(u0));
}

} // namespace detail

/// Leapfrog (kick-drift-kick) integration from `initial` over a time span cfg.t_max.
/// The first half kick is the Taylor half-step from (psi, psi_t).
inline Trajectory evolve(const RadialState& initial, const SolverConfig& cfg,
                         std::span<const Observer> observers = {})
{
    cfg.validate();
    const auto& g = *cfg.grid;
    if (initial.grid()->size() != g.size() || initial.grid()->r_max() != g.r_max())
        throw ConfigError("evolve: initial data lives on a different grid");
    const RadialState start = as_psi(initial);

    Trajectory tr;
    tr.config = cfg;
    const std::size_t n = g.cells();
    std::vector<double> psi(start.position.values().begin(), start.position.values().end());
    std::vector<double> vel(start.velocity.values().begin(), start.velocity.values().end());
    std::vector<double> acc(g.size());
    psi[0] = 0.0;
    vel[0] = 0.0;

    const double t0 = start.time;
    const double dt = cfg.dt;
    const auto total_steps = static_cast<std::size_t>(std::llround(cfg.t_max / dt));
    const std::size_t every = cfg.steps_per_snapshot();
    detail::RadialStencil stencil(g);

    const double frozen_value = psi[n];
    auto outer_value = [&](double t) { return cfg.outer ? cfg.outer->value(t) : frozen_value; };
    auto outer_velocity = [&](double t) { return cfg.outer ? cfg.outer->velocity(t) : 0.0; };

    const double u0_sup = detail::sup_u(g, psi);
    const double blowup_level = cfg.blowup_factor * u0_sup;

    // contamination monitor over the outer band
    const double band = cfg.buffer_width > 0.0 ? cfg.buffer_width : 0.05 * g.r_max();
    const std::size_t band_from = g.cell_of(std::max(0.0, g.r_max() - band));
    const std::vector<double> band_ref(psi.begin() + static_cast<std::ptrdiff_t>(band_from), psi.end());
    double psi_scale = 0.0;
    for (double p : psi)
        psi_scale = std::max(psi_scale, std::abs(p));
    const bool monitor = !cfg.outer && psi_scale > 0.0;

    auto record = [&](double t) {
        RadialState s(RadialField(cfg.grid, psi, Form::psi), RadialField(cfg.grid, vel, Form::psi), t, start.tail);
        for (const auto& obs : observers)
            obs(s);
        if (cfg.keep_snapshots)
            tr.snapshots.push_back(std::move(s));
    };

    record(t0);
    detail::acceleration(g, stencil, cfg.mode, psi, acc);
    tr.termination.last_stable_time = t0;
    tr.termination.flag_time = t0;

    for (std::size_t step = 1; step <= total_steps; ++step) {
        const double t = t0 + static_cast<double>(step) * dt;
        for (std::size_t i = 1; i < n; ++i)
            vel[i] += 0.5 * dt * acc[i];
        for (std::size_t i = 1; i < n; ++i)
            psi[i] += dt * vel[i];
        psi[0] = 0.0;
        psi[n] = outer_value(t);
        detail::acceleration(g, stencil, cfg.mode, psi, acc);
        for (std::size_t i = 1; i < n; ++i)
            vel[i] += 0.5 * dt * acc[i];
        vel[n] = outer_velocity(t);
        tr.termination.steps = step;

        const double sup = detail::sup_u(g, psi);
        if (!std::isfinite(sup) || (u0_sup > 0.0 && sup > blowup_level)) {
            tr.termination.kind = Termination::blowup;
            tr.termination.flag_time = t;
            return tr;
        }
        if (monitor) {
            double drift = 0.0;
            for (std::size_t i = band_from; i < g.size(); ++i)
                drift = std::max(drift, std::abs(psi[i] - band_ref[i - band_from]));
            if (drift > cfg.contamination_rel * psi_scale) {
                tr.termination.kind = Termination::boundary_contamination;
                tr.termination.flag_time = t;
                return tr;
            }
        }
        tr.termination.last_stable_time = t;
        tr.termination.flag_time = t;
        if (step % every == 0 || step == total_steps)
            record(t);
    }
    return tr;
}

/// psi-form standing wave (cos(w t) J1(w r), -w sin(w t) J1(w r)), an exact
/// solution of the linear mode.
inline RadialState standing_wave_oracle(double omega, double t, const GridPtr& grid)
{
    if (!(omega > 0.0))
        throw ConfigError("standing wave frequency must be positive");
    std::vector<double> p(grid->size()), v(grid->size());
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const double j1 = std::cyl_bessel_j(1.0, omega * (*grid)[i]);
        p[i] = std::cos(omega * t) * j1;
        v[i] = -omega * std::sin(omega * t) * j1;
    }
    return RadialState(RadialField(grid, std::move(p), Form::psi), RadialField(grid, std::move(v), Form::psi), t);
}

/// Outer driver reproducing the standing wave at R_max.
inline OuterDriver standing_wave_driver(double omega, double r_max)
{
    const double j1 = std::cyl_bessel_j(1.0, omega * r_max);
    return OuterDriver{[=](double t) { return std::cos(omega * t) * j1; },
                       [=](double t) { return -omega * std::sin(omega * t) * j1; }};
}

/// Time-reversed copy (u, -u_t) at time `t`.
inline RadialState time_reversed(const RadialState& s, double t = 0.0)
{
    auto vel = s.velocity;
    for (std::size_t i = 0; i < vel.size(); ++i)
        vel[i] = -vel[i];
    return RadialState(s.position, std::move(vel), t, s.tail);
}

struct BlowupLog {
    std::optional<double> t_est;
    /// [last stable time, flag time] when the solver stopped on blow-up.
    double last_stable = 0.0;
    std::vector<double> times;
    std::vector<double> sup_u;
    std::vector<double> local_h_sq; ///< ||u(t)||^2_{H(r <= delta)}
};

/// Sup-norm and local energy growth log, with T_est from the solver's flag
/// or from the first snapshot above `threshold` (when positive).
inline BlowupLog detect_blowup(const Trajectory& tr, double delta = 0.5, double threshold = 0.0)
{
    BlowupLog log;
    for (const auto& s : tr.snapshots) {
        const auto& g = *s.grid();
        const double sup = detail::sup_u(g, s.position.values());
        log.times.push_back(s.time);
        log.sup_u.push_back(sup);
        log.local_h_sq.push_back(h_norm_sq(to_u(s), 0.0, std::min(delta, g.r_max())));
        if (!log.t_est && threshold > 0.0 && !(sup <= threshold))
            log.t_est = s.time;
    }
    if (tr.blew_up()) {
        log.t_est = tr.termination.flag_time;
        log.last_stable = tr.termination.last_stable_time;
    }
    return log;
}

/// ||u(t)||_{L^6}^6 = int u^6 r^3 dr of a psi-form snapshot.
inline double l6_sixth(const RadialState& s)
{
    const auto u = as_u(s);
    const auto& g = *s.grid();
    return weighted_integral(g, 3, 0.0, g.r_max(), [&](std::size_t i, double) {
        const double v = u.position[i];
        const double v2 = v * v;
        return v2 * v2 * v2;
    });
}

/// Running values of (int_0^t ||u||_{L^6}^3 dt')^{1/3} at every snapshot.
inline std::vector<double> strichartz_series(const Trajectory& tr)
{
    std::vector<double> out;
    double acc = 0.0;
    double prev_t = 0.0, prev_v = 0.0;
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        const double v = std::sqrt(l6_sixth(tr.snapshots[k])); // ||u||_{L^6}^3
        if (k > 0)
            acc += 0.5 * (v + prev_v) * (tr.snapshots[k].time - prev_t);
        prev_t = tr.snapshots[k].time;
        prev_v = v;
        out.push_back(std::cbrt(acc));
    }
    return out;
}

inline double strichartz_accumulator(const Trajectory& tr)
{
    const auto s = strichartz_series(tr);
    return s.empty() ? 0.0 : s.back();
}

enum class ScatterVerdict { consistent, inconsistent, not_applicable };

inline const char* to_string(ScatterVerdict v) noexcept
{
    switch (v) {
    case ScatterVerdict::consistent: return "scattering-consistent";
    case ScatterVerdict::inconsistent: return "not-scattering";
    case ScatterVerdict::not_applicable: return "not-applicable";
    }
    return "?";
}

struct ScatterReport {
    ScatterVerdict verdict = ScatterVerdict::not_applicable;
    std::vector<double> times;
    /// ||u(t) - S(t - T_probe) u(T_probe)||_H / ||u(T_probe)||_H
    std::vector<double> mismatch;
    double tolerance = 0.0;
};

/// Compares the trajectory on [T_probe, T_probe + window] with the free
/// evolution of its T_probe snapshot. Scattering-consistent means the
/// relative mismatch stays below `tolerance` and its growth decelerates
/// (second half of the window adds no more than the first).
inline ScatterReport scattering_detector(const Trajectory& tr, double t_probe, double window,
                                         double tolerance = 0.05)
{
    ScatterReport rep;
    rep.tolerance = tolerance;
    if (tr.blew_up())
        return rep;
    if (tr.empty() || tr.back().time < t_probe + window - 1e-9 * std::max(1.0, window))
        throw DiagnosticError("scattering_detector: trajectory too short for the probe window");

    const std::size_t k0 = tr.index_near(t_probe);
    const RadialState& probe = tr.snapshots[k0];
    SolverConfig lin = tr.config;
    lin.mode = Mode::linear;
    lin.t_max = window;
    const auto free = evolve(probe, lin);

    const double norm = std::sqrt(h_norm_sq(to_u(probe)));
    if (!(norm > 0.0)) {
        rep.verdict = ScatterVerdict::consistent;
        return rep;
    }
    std::size_t j = 0;
    for (std::size_t k = k0; k < tr.snapshots.size() && j < free.snapshots.size(); ++k) {
        const auto& s = tr.snapshots[k];
        while (j + 1 < free.snapshots.size() && free.snapshots[j].time < s.time - 0.5 * tr.config.dt)
            ++j;
        if (std::abs(free.snapshots[j].time - s.time) > 0.5 * tr.config.dt)
            continue;
        auto diff = to_u(s);
        const auto fv = to_u(free.snapshots[j]);
        for (std::size_t i = 0; i < diff.position.size(); ++i) {
            diff.position[i] -= fv.position[i];
            diff.velocity[i] -= fv.velocity[i];
        }
        diff.tail = {};
        rep.times.push_back(s.time);
        rep.mismatch.push_back(std::sqrt(h_norm_sq(diff)) / norm);
    }
    if (rep.mismatch.size() < 3) {
        rep.verdict = ScatterVerdict::not_applicable;
        return rep;
    }
    const double first = rep.mismatch.front();
    const double mid = rep.mismatch[rep.mismatch.size() / 2];
    const double last = rep.mismatch.back();
    const bool small = last < tolerance;
    const bool saturating = (last - mid) <= (mid - first) + 1e-12;
    rep.verdict = small && saturating ? ScatterVerdict::consistent : ScatterVerdict::inconsistent;
    return rep;
}

} // namespace critwave
