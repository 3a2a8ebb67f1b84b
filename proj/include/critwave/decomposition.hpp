#pragma once

// Bubble-and-radiation decomposition of radial states and trajectories:
// the cumulative-energy scale estimator, greedy extraction of rescaled
// ground states, the singular part of a blow-up solution, and the free
// radiation of a global one.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "critwave/evolution.hpp"
#include "critwave/ground_state.hpp"
#include "critwave/lightcone.hpp"
#include "critwave/parallel.hpp"

namespace critwave {

/// int_{r <= 1} W_r^2 r^3 dr = 16/3 - 16 (1/y - 1/y^2 + 1/(3 y^3)) at y = 9/8.
inline constexpr double kScaleThreshold = 16.0 / 2187.0;

/// Smooth radial cutoff: 0 for x <= 1 - 2 delta, 1 for x >= 1 - delta.
inline double cutoff(double x, double delta) noexcept
{
    const double s = (x - (1.0 - 2.0 * delta)) / delta;
    if (s <= 0.0)
        return 0.0;
    if (s >= 1.0)
        return 1.0;
    const double a = std::exp(-1.0 / s), b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

/// inf { mu : int_{r <= mu} (a_r^2 + a_t^2) r^3 dr >= kScaleThreshold }, or
/// nothing when the grid never reaches the threshold.
inline std::optional<double> scale_estimator(const RadialState& a)
{
    const RadialState u = as_u(a);
    const auto& g = *u.grid();
    const auto ur = derivative_samples(g, u.position.values());
    std::vector<double> dens(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        dens[i] = (ur[i] * ur[i] + u.velocity[i] * u.velocity[i]) * g[i] * g[i] * g[i];
    const auto cum = cumulative_integral(g, dens);
    const auto hit = std::find_if(cum.begin(), cum.end(), [](double c) { return c >= kScaleThreshold; });
    if (hit == cum.end())
        return std::nullopt;
    const auto i = static_cast<std::size_t>(hit - cum.begin());
    if (i == 0)
        return 0.0;
    double lo = g[i - 1], hi = g[i];
    const double base = cum[i - 1];
    for (int it = 0; it < 60 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (base + integrate_samples(g, dens, g[i - 1], mid) >= kScaleThreshold)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

struct Bubble {
    int sign = 1;
    double scale = 1.0;
    /// Scale from the estimator before the least-squares refinement.
    double estimate = 1.0;
    /// False when the last back-fitting pass ended on the bracket edge and kept the previous scale.
    bool refined = true;
};

struct ExtractOptions {
    std::size_t max_bubbles = 8;
    /// Stop once the residual H-norm^2 falls below this multiple of ||grad W||^2.
    double stop_fraction = 0.2;
    /// A bubble is only fitted while the residual still carries this multiple
    /// of ||grad W||^2 in its gradient.
    double min_bubble_fraction = 0.9;
    /// Scale ratio reported as "separated".
    double separation = 10.0;
    /// Refits of every scale against the others once the greedy pass ends.
    int backfit_sweeps = 3;
};

struct BubbleDecomposition {
    double time = 0.0;
    /// Ascending in scale.
    std::vector<Bubble> bubbles;
    RadialState residual;
    double residual_h_sq = 0.0;
    double state_energy = 0.0;
    /// J E(W, 0).
    double fitted_energy = 0.0;
    double residual_energy = 0.0;
    std::vector<std::string> flags;
    double separation = 10.0;

    bool separated() const
    {
        for (std::size_t j = 1; j < bubbles.size(); ++j)
            if (bubbles[j].scale < separation * bubbles[j - 1].scale)
                return false;
        return true;
    }

    double residual_fraction() const { return std::sqrt(residual_h_sq / profile::kGradSq); }
};

namespace detail {

inline double fit_objective(const RadialState& res, int sign, double mu)
{
    const auto& g = *res.grid();
    RadialField f = res.position;
    for (std::size_t i = 0; i < g.size(); ++i)
        f[i] -= sign * profile::w_scaled(g[i], mu);
    TailModel tail = res.tail;
    tail.add(-sign, mu);
    return gradient_sq(f, tail);
}

inline void subtract_bubble(RadialState& res, int sign, double mu)
{
    const auto& g = *res.grid();
    for (std::size_t i = 0; i < g.size(); ++i)
        res.position[i] -= sign * profile::w_scaled(g[i], mu);
    res.tail.add(-sign, mu);
}

// Golden-section search on log mu over [lo, hi].
template <class Fn>
double golden_minimize(Fn&& fn, double lo, double hi, int iterations = 48)
{
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::log(lo), b = std::log(hi);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = fn(std::exp(c)), fd = fn(std::exp(d));
    for (int it = 0; it < iterations; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = fn(std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = fn(std::exp(d));
        }
    }
    return std::exp(0.5 * (a + b));
}

} // namespace detail

/// Greedy extraction: estimate the scale, read the sign at scale * r_peak,
/// refine the scale by least squares in H^1 over [scale/2, 2 scale],
/// subtract, repeat.
inline BubbleDecomposition extract_bubbles(const RadialState& a, const ExtractOptions& opt = {})
{
    if (a.form() != Form::u)
        throw FormulationError("extract_bubbles expects a u-form state");
    if (!(opt.stop_fraction > 0.0) || !(opt.min_bubble_fraction > 0.0) || !(opt.separation > 1.0))
        throw ConfigError("extract_bubbles: fractions must be positive and the separation above 1");
    BubbleDecomposition dec;
    dec.time = a.time;
    dec.separation = opt.separation;
    dec.residual = a;
    dec.state_energy = energy(a).total;
    const double r_peak = profile::peak_radius();
    const double grad_w = profile::kGradSq;

    while (dec.bubbles.size() < opt.max_bubbles) {
        if (h_norm_sq(dec.residual) < opt.stop_fraction * grad_w)
            break;
        const double grad_res = gradient_sq(dec.residual.position, dec.residual.tail);
        if (grad_res < opt.min_bubble_fraction * grad_w)
            break;
        const auto estimate = scale_estimator(dec.residual);
        if (!estimate || !(*estimate > 0.0))
            break;
        const double lam = *estimate;
        if (!dec.residual.grid()->contains(lam * r_peak)) {
            dec.flags.push_back("scale beyond the grid at " + std::to_string(lam));
            break;
        }
        Bubble b;
        b.estimate = lam;
        b.scale = lam;
        b.refined = false;
        b.sign = interpolate(dec.residual.position, lam * r_peak) < 0.0 ? -1 : 1;
        if (!(detail::fit_objective(dec.residual, b.sign, lam) < grad_res)) {
            dec.flags.push_back("fit does not reduce the residual near " + std::to_string(lam));
            break;
        }
        detail::subtract_bubble(dec.residual, b.sign, b.scale);
        dec.bubbles.push_back(b);
    }
    // back-fitting: each scale is refitted by least squares with the other bubbles removed
    for (int sweep = 0; sweep < opt.backfit_sweeps; ++sweep)
        for (auto& b : dec.bubbles) {
            detail::subtract_bubble(dec.residual, -b.sign, b.scale);
            const RadialState& res = dec.residual;
            auto obj = [&](double mu) { return detail::fit_objective(res, b.sign, mu); };
            const double mu = detail::golden_minimize(obj, b.scale / 1.5, b.scale * 1.5);
            const bool on_edge = mu < b.scale / 1.5 * 1.001 || mu > b.scale * 1.5 / 1.001;
            if (on_edge || !(obj(mu) <= obj(b.scale))) {
                b.refined = false;
            } else {
                b.scale = mu;
                b.refined = true;
            }
            detail::subtract_bubble(dec.residual, b.sign, b.scale);
        }
    for (const auto& b : dec.bubbles)
        if (!b.refined)
            dec.flags.push_back("least squares did not converge near " + std::to_string(b.scale));
    std::sort(dec.bubbles.begin(), dec.bubbles.end(), [](const Bubble& x, const Bubble& y) { return x.scale < y.scale; });
    dec.residual_h_sq = h_norm_sq(dec.residual);
    dec.fitted_energy = static_cast<double>(dec.bubbles.size()) * profile::kEnergy;
    dec.residual_energy = energy(dec.residual).total;
    return dec;
}

// ---------------------------------------------------------------------------
// singular part of a blow-up solution

struct SingularPart {
    double time = 0.0;
    double t_plus = 0.0;
    double t_ref = 0.0;
    double delta = 0.0;
    bool retried = false;
    /// u-form singular part a = u - v and regular part v at `time`.
    RadialState singular;
    RadialState regular;
    /// ||a(t)||^2_{H(r >= T+ - t + 2h)}.
    double exterior_h_sq = 0.0;
    double tolerance = 0.0;

    bool ok() const noexcept { return exterior_h_sq <= tolerance; }
};

namespace detail {

inline const RadialState& snapshot_at(const Trajectory& tr, double t)
{
    const auto& s = tr.snapshots[tr.index_near(t)];
    if (std::abs(s.time - t) > 0.5 * tr.config.dt)
        throw DomainError("no snapshot at t = " + std::to_string(t));
    return s;
}

inline RadialState apply_cutoff(const RadialState& s, double radius, double delta)
{
    RadialState u = as_u(s);
    const auto& g = *u.grid();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double c = cutoff(g[i] / radius, delta);
        u.position[i] *= c;
        u.velocity[i] *= c;
    }
    return u;
}

// Evolves `s` from s.time to `target` (either direction) with the
// trajectory's solver settings in `mode`; observers see u-form states.
inline Trajectory evolve_to(const RadialState& s, double target, const SolverConfig& base, Mode mode,
                            std::span<const Observer> observers = {})
{
    SolverConfig cfg = base;
    cfg.mode = mode;
    cfg.keep_snapshots = false;
    cfg.outer.reset();
    const double span = std::abs(target - s.time);
    cfg.t_max = std::llround(span / cfg.dt) * cfg.dt;
    // with observers, report on the base snapshot cadence; otherwise only the end state
    cfg.snapshot_interval = observers.empty() ? cfg.t_max : base.snapshot_interval;
    const bool backward = target < s.time;
    const RadialState start = backward ? time_reversed(s, -s.time) : s;
    std::vector<Observer> wrapped;
    for (const auto& obs : observers)
        wrapped.push_back([&obs, backward](const RadialState& x) {
            obs(backward ? time_reversed(to_u(x), -x.time) : to_u(x));
        });
    std::optional<RadialState> last;
    wrapped.push_back([&last](const RadialState& x) { last = x; });
    Trajectory tr = evolve(start, cfg, wrapped);
    if (tr.termination.kind == Termination::boundary_contamination)
        throw DiagnosticError("auxiliary evolution reached the outer boundary at t = " +
                              std::to_string(backward ? -tr.termination.flag_time : tr.termination.flag_time) +
                              "; enlarge R_max");
    if (last) {
        RadialState end = to_u(*last);
        tr.snapshots.push_back(backward ? time_reversed(end, -end.time) : end);
    }
    return tr;
}

} // namespace detail

/// a(t) = u(t) - v(t), where v is the solution through the cut-off data
/// cutoff(r / (T+ - t_ref)) u(t_ref) evolved backwards from t_ref to t. Every
/// point outside the backward cone at time t depends only on data outside
/// the cone at t_ref, so u = v there.
inline SingularPart singular_part(const Trajectory& tr, double t, double t_plus, double delta,
                                  std::optional<double> t_ref = std::nullopt, double tolerance_rel = 1e-6)
{
    if (!std::isfinite(t_plus))
        throw ConfigError("singular_part: needs a finite blow-up time");
    if (!(t < t_plus))
        throw ConfigError("singular_part: t must precede T+");
    if (!(delta > 0.0 && delta < 0.5))
        throw ConfigError("singular_part: delta must lie in (0, 1/2)");
    const double h = tr.config.grid->spacing();
    const auto& ut = detail::snapshot_at(tr, t);

    double ref = ut.time;
    if (t_ref) {
        ref = detail::snapshot_at(tr, *t_ref).time;
    } else {
        for (const auto& s : tr.snapshots)
            if (s.time >= ut.time && delta * (t_plus - s.time) >= 20.0 * h)
                ref = std::max(ref, s.time);
    }
    if (ref < ut.time)
        throw ConfigError("singular_part: t_ref must not precede t");

    SingularPart out;
    out.time = ut.time;
    out.t_plus = t_plus;
    out.t_ref = ref;
    const RadialState& uref = detail::snapshot_at(tr, ref);
    for (int attempt = 0; attempt < 2; ++attempt) {
        out.delta = attempt == 0 ? delta : 0.5 * delta;
        out.retried = attempt == 1;
        const RadialState data = detail::apply_cutoff(uref, t_plus - ref, out.delta);
        const Trajectory v = detail::evolve_to(data, ut.time, tr.config, tr.config.mode);
        if (v.blew_up())
            continue;
        out.regular = v.snapshots.back();
        out.regular.time = ut.time;
        RadialState a = as_u(ut);
        for (std::size_t i = 0; i < a.position.size(); ++i) {
            a.position[i] -= out.regular.position[i];
            a.velocity[i] -= out.regular.velocity[i];
        }
        a.tail = {};
        out.singular = std::move(a);
        const auto& g = *ut.grid();
        const double from = std::min(t_plus - ut.time + 2.0 * h, g.r_max());
        out.exterior_h_sq = h_norm_sq(out.singular, from, g.r_max());
        out.tolerance = tolerance_rel * h_norm_sq(as_u(ut));
        return out;
    }
    throw DiagnosticError("singular_part: the regular part blew up before t = " + std::to_string(t));
}

// ---------------------------------------------------------------------------
// radiation of a global solution

struct RadiationExtract {
    double t_probe = 0.0;
    double delta = 0.0;
    /// Free data (v0, v1) at t = 0 and its H-norm^2.
    RadialState data;
    double data_h_sq = 0.0;
    std::vector<double> radii;
    std::vector<double> times;
    /// mismatch[k][j] = ||grad_{t,x}(u - v_L)(times[j])||^2 on r >= times[j] - radii[k].
    std::vector<std::vector<double>> mismatch;
    /// v_L at every entry of `times`.
    std::vector<RadialState> free_wave;

    bool decreasing(std::size_t k, double slack = 0.0) const
    {
        for (std::size_t j = 1; j < times.size(); ++j)
            if (mismatch[k][j] > mismatch[k][j - 1] + slack)
                return false;
        return true;
    }
};

/// v_L is the free wave through cutoff(r / T_probe) u(T_probe) at T_probe;
/// (v0, v1) is its value at t = 0. Mismatches are taken at every snapshot
/// time in [window_from, end of trajectory].
inline RadiationExtract radiation_extract(const Trajectory& tr, double t_probe, double delta,
                                          std::vector<double> radii = {5.0},
                                          std::optional<double> window_from = std::nullopt)
{
    if (tr.empty())
        throw DiagnosticError("radiation_extract: empty trajectory");
    if (tr.blew_up())
        throw ConfigError("radiation_extract: needs a global trajectory");
    if (!(delta > 0.0 && delta < 0.5))
        throw ConfigError("radiation_extract: delta must lie in (0, 1/2)");
    const double t_end = tr.back().time;
    if (!(t_probe > tr.front().time) || t_probe > t_end)
        throw DiagnosticError("radiation_extract: trajectory too short for T_probe = " + std::to_string(t_probe));
    const double from = window_from.value_or(t_end / 10.0);

    RadiationExtract out;
    out.t_probe = detail::snapshot_at(tr, t_probe).time;
    out.delta = delta;
    out.radii = std::move(radii);
    const RadialState probe = detail::apply_cutoff(detail::snapshot_at(tr, t_probe), out.t_probe, delta);

    std::vector<const RadialState*> wanted;
    for (const auto& s : tr.snapshots)
        if (s.time >= from - 1e-12)
            wanted.push_back(&s);
    std::vector<std::optional<RadialState>> v(wanted.size());
    const double dt = tr.config.dt;
    Observer pick = [&](const RadialState& x) {
        for (std::size_t j = 0; j < wanted.size(); ++j)
            if (!v[j] && std::abs(wanted[j]->time - x.time) <= 0.25 * dt)
                v[j] = x;
    };
    const Trajectory back = detail::evolve_to(probe, tr.front().time, tr.config, Mode::linear,
                                              std::span<const Observer>(&pick, 1));
    out.data = back.snapshots.back();
    out.data_h_sq = h_norm_sq(out.data);
    detail::evolve_to(probe, t_end, tr.config, Mode::linear, std::span<const Observer>(&pick, 1));

    out.mismatch.assign(out.radii.size(), {});
    for (std::size_t j = 0; j < wanted.size(); ++j) {
        if (!v[j])
            throw DiagnosticError("radiation_extract: missed the free wave at t = " + std::to_string(wanted[j]->time));
        RadialState diff = as_u(*wanted[j]);
        for (std::size_t i = 0; i < diff.position.size(); ++i) {
            diff.position[i] -= v[j]->position[i];
            diff.velocity[i] -= v[j]->velocity[i];
        }
        diff.tail = {};
        const double t = wanted[j]->time;
        const double r_max = diff.grid()->r_max();
        out.times.push_back(t);
        for (std::size_t k = 0; k < out.radii.size(); ++k)
            out.mismatch[k].push_back(h_norm_sq(diff, std::clamp(t - out.radii[k], 0.0, r_max), r_max));
        out.free_wave.push_back(std::move(*v[j]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// self-similar trend near blow-up

/// Blow-up time from the zero of 1/|u(t, 0)|, extrapolated by the secant
/// through the last two snapshots whose central value is resolved
/// (|u(0)| h <= 0.1). Exact for u(t, 0) = c / (T - t) with any c.
inline std::optional<double> secant_blowup_time(const Trajectory& tr)
{
    if (!tr.blew_up() || tr.snapshots.size() < 2)
        return std::nullopt;
    const double h = tr.front().grid()->spacing();
    std::optional<double> out;
    double prev_t = 0.0, prev_w = 0.0;
    bool have_prev = false;
    for (const auto& s : tr.snapshots) {
        const double u0 = std::abs(as_u(s).position[0]);
        if (!(u0 > 0.0) || u0 * h > 0.1)
            continue;
        const double w = 1.0 / u0;
        if (have_prev && prev_w > w)
            out = s.time + w * (s.time - prev_t) / (prev_w - w);
        prev_t = s.time;
        prev_w = w;
        have_prev = true;
    }
    return out;
}

struct SelfSimilarTrend {
    double t_plus = 0.0;
    double lambda = 0.5;
    /// Resolvable window in tau = T+ - t.
    double tau_lo = 0.0, tau_hi = 0.0;
    std::vector<double> times, tau, band, scale_ratio;

    static bool non_increasing(const std::vector<double>& v, double slack)
    {
        for (std::size_t j = 1; j < v.size(); ++j)
            if (v[j] > v[j - 1] + slack)
                return false;
        return true;
    }
    bool band_non_increasing(double slack = 0.0) const { return non_increasing(band, slack); }
    bool ratio_non_increasing(double slack = 0.0) const { return non_increasing(scale_ratio, slack); }
    /// Largest rise between consecutive samples (0 when monotone).
    static double worst_rise(const std::vector<double>& v)
    {
        double w = 0.0;
        for (std::size_t j = 1; j < v.size(); ++j)
            w = std::max(w, v[j] - v[j - 1]);
        return w;
    }
};

/// Backward-cone band energy and lambda_hat / (T+ - t) over the decade
/// tau in [tau_lo, 10 tau_lo], tau_lo = resolve h / lambda, in time order.
inline SelfSimilarTrend self_similar_trend(const Trajectory& tr, double t_plus, double lambda = 0.5,
                                           double resolve = 10.0)
{
    if (!std::isfinite(t_plus))
        throw ConfigError("self_similar_trend: needs a finite blow-up time");
    SelfSimilarTrend out;
    out.t_plus = t_plus;
    out.lambda = lambda;
    const auto& g = *tr.front().grid();
    out.tau_lo = resolve * g.spacing() / lambda;
    out.tau_hi = std::min(10.0 * out.tau_lo, t_plus - tr.front().time);
    const ConeSpec cone{t_plus, Orientation::backward, lambda, 0.0};
    for (const auto& s : tr.snapshots) {
        const double tau = t_plus - s.time;
        if (tau < out.tau_lo || tau > out.tau_hi || tau > g.r_max())
            continue;
        const auto lam = scale_estimator(s);
        if (!lam)
            continue;
        out.times.push_back(s.time);
        out.tau.push_back(tau);
        out.band.push_back(band_energy(s, cone));
        out.scale_ratio.push_back(*lam / tau);
    }
    return out;
}

// ---------------------------------------------------------------------------
// report

struct DecompositionEntry {
    BubbleDecomposition bubbles;
    double cone_radius = 0.0;
    double cone_energy = 0.0;
    double quantization_expected = 0.0;
    double radiation_h_sq = 0.0;
    /// Gradient norm^2 of the decomposed state inside the cone.
    double cone_grad_sq = 0.0;
    /// Below 2 ||grad W||^2 at most one bubble may be present.
    bool single_bubble_rule = true;
    std::string branch;
};

struct DecompositionReport {
    std::vector<DecompositionEntry> entries;
    std::optional<double> t_plus;
};

struct ReportOptions {
    ExtractOptions extract;
    double delta = 0.25;
    /// Margin subtracted from 2 ||grad W||^2 in the single-bubble rule.
    double margin = 0.25;
};

/// Blow-up runs: the singular part at each time, cone radius T+ - t.
/// Global runs: u - v_L with T_probe the last snapshot, cone radius t.
inline DecompositionReport decomposition_report(const Trajectory& tr, const std::vector<double>& times,
                                                const ReportOptions& opt = {}, unsigned workers = 1)
{
    DecompositionReport rep;
    if (tr.empty() || times.empty())
        return rep;
    std::optional<RadiationExtract> rad;
    if (tr.blew_up()) {
        rep.t_plus = secant_blowup_time(tr).value_or(tr.termination.flag_time);
    } else {
        rad = radiation_extract(tr, tr.back().time, opt.delta, {0.0},
                                *std::min_element(times.begin(), times.end()) - tr.config.dt);
    }
    rep.entries.resize(times.size());
    parallel_for(times.size(), workers, [&](std::size_t k) {
        auto& e = rep.entries[k];
        RadialState state;
        if (rep.t_plus) {
            const auto sp = singular_part(tr, times[k], *rep.t_plus, opt.delta);
            state = sp.singular;
            e.cone_radius = *rep.t_plus - sp.time;
            e.branch = "blow-up";
        } else {
            const auto& u = detail::snapshot_at(tr, times[k]);
            std::size_t j = 0;
            while (std::abs(rad->times[j] - u.time) > 0.25 * tr.config.dt)
                ++j;
            state = as_u(u);
            for (std::size_t i = 0; i < state.position.size(); ++i) {
                state.position[i] -= rad->free_wave[j].position[i];
                state.velocity[i] -= rad->free_wave[j].velocity[i];
            }
            e.radiation_h_sq = h_norm_sq(rad->free_wave[j]);
            e.cone_radius = std::min(u.time, state.grid()->r_max());
        }
        e.bubbles = extract_bubbles(state, opt.extract);
        const double r_cone = std::min(e.cone_radius, state.grid()->r_max());
        e.cone_energy = energy(state, 0.0, r_cone).total;
        const auto ur = derivative_samples(*state.grid(), state.position.values());
        e.cone_grad_sq = weighted_integral(*state.grid(), 3, 0.0, r_cone,
                                           [&](std::size_t i, double) { return ur[i] * ur[i]; });
        e.quantization_expected = static_cast<double>(e.bubbles.bubbles.size()) * profile::kEnergy;
        if (e.cone_grad_sq < 2.0 * profile::kGradSq - opt.margin)
            e.single_bubble_rule = e.bubbles.bubbles.size() <= 1;
        if (!rep.t_plus)
            e.branch = e.bubbles.bubbles.empty() ? "scatter" : "bubble";
    });
    return rep;
}

inline nlohmann::json to_json(const DecompositionEntry& e)
{
    nlohmann::json j;
    j["time"] = e.bubbles.time;
    auto& bs = j["bubbles"] = nlohmann::json::array();
    for (const auto& b : e.bubbles.bubbles)
        bs.push_back({{"sign", b.sign}, {"scale", b.scale}});
    j["residual_H"] = std::sqrt(e.bubbles.residual_h_sq);
    j["cone_energy"] = e.cone_energy;
    j["quantization_expected"] = e.quantization_expected;
    j["radiation_H"] = std::sqrt(e.radiation_h_sq);
    j["branch"] = e.branch;
    return j;
}

inline nlohmann::json to_json(const DecompositionReport& rep)
{
    auto j = nlohmann::json::array();
    for (const auto& e : rep.entries)
        j.push_back(to_json(e));
    return j;
}

} // namespace critwave
