#pragma once

// Exterior energy of free radial waves in R^{1+4}.
//
// phi(t) = ||S(t)(f, g)||^2_{H(r >= t)} / ||(f, g)||^2_H. For (f, 0) data it
// stays bounded below; for (0, g) data it can be made arbitrarily small, but
// only through data spread over many decades of scale: asymptotically
// phi = (1 - E[sech(pi w)]) / 2 where w is the log-scale frequency of g.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "critwave/corpus.hpp"
#include "critwave/evolution.hpp"
#include "critwave/parallel.hpp"
#include "critwave/snapshot_io.hpp"

namespace critwave {

enum class DataClass { f_zero, zero_g, mixed };

inline const char* to_string(DataClass c) noexcept
{
    switch (c) {
    case DataClass::f_zero: return "(f,0)";
    case DataClass::zero_g: return "(0,g)";
    case DataClass::mixed: return "mixed";
    }
    return "?";
}

inline DataClass classify(const RadialState& s)
{
    auto zero = [](const RadialField& f) {
        return std::all_of(f.values().begin(), f.values().end(), [](double v) { return v == 0.0; });
    };
    if (zero(s.velocity))
        return DataClass::f_zero;
    if (zero(s.position))
        return DataClass::zero_g;
    return DataClass::mixed;
}

struct ChannelReport {
    std::string descriptor;
    DataClass data_class = DataClass::mixed;
    std::vector<double> times;
    std::vector<double> exterior_h_sq;
    std::vector<double> total_h_sq;
    std::vector<double> fraction;
    double initial_norm_sq = 0.0;
    /// Mean of phi over the last quarter of the observed horizon.
    double asymptotic_fraction = 0.0;
    /// Minimum of phi over the same window.
    double late_minimum = 0.0;
    double horizon = 0.0;
    TerminationRecord termination;

    bool contaminated() const noexcept { return termination.kind == Termination::boundary_contamination; }
};

namespace detail {

inline void require_linear(const SolverConfig& cfg, const char* who)
{
    if (cfg.mode != Mode::linear)
        throw ConfigError(std::string(who) + ": free waves need linear mode");
}

inline void late_window(const std::vector<double>& times, const std::vector<double>& values, double& mean,
                        double& minimum)
{
    const double from = 0.75 * times.back();
    double sum = 0.0;
    std::size_t count = 0;
    minimum = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < times.size(); ++k)
        if (times[k] >= from) {
            sum += values[k];
            minimum = std::min(minimum, values[k]);
            ++count;
        }
    mean = sum / static_cast<double>(count);
}

inline SolverConfig with_horizon(SolverConfig cfg, double t_max)
{
    cfg.t_max = t_max;
    cfg.keep_snapshots = false;
    if (!(cfg.snapshot_interval > 0.0))
        cfg.snapshot_interval = t_max / 200.0;
    return cfg;
}

} // namespace detail

/// Evolves `data` freely and records phi(t) at every snapshot. The exterior
/// band [t, R_max] starts exactly at r = t, not at the next node.
inline ChannelReport exterior_fraction_series(const RadialState& data, const SolverConfig& cfg, double t_max,
                                              std::string descriptor = {})
{
    detail::require_linear(cfg, "exterior_fraction_series");
    const RadialState u0 = as_u(data);
    ChannelReport rep;
    rep.descriptor = std::move(descriptor);
    rep.data_class = classify(u0);
    if (!(h_norm_sq(u0) > 0.0))
        throw DiagnosticError("exterior_fraction_series: data has zero energy norm");

    const double r_max = cfg.grid->r_max();
    const double t0 = u0.time;
    Observer obs = [&](const RadialState& s) {
        const RadialState u = to_u(s);
        const double t = s.time - t0;
        const double ext = t < r_max ? h_norm_sq(u, std::abs(t), r_max) : 0.0;
        if (rep.times.empty())
            rep.initial_norm_sq = ext;
        rep.times.push_back(t);
        rep.exterior_h_sq.push_back(ext);
        rep.total_h_sq.push_back(h_norm_sq(u));
        rep.fraction.push_back(ext / rep.initial_norm_sq);
    };
    rep.termination = evolve(u0, detail::with_horizon(cfg, t_max), std::span<const Observer>(&obs, 1)).termination;
    rep.horizon = rep.times.back();
    detail::late_window(rep.times, rep.fraction, rep.asymptotic_fraction, rep.late_minimum);
    return rep;
}

inline void write_channel_csv(std::ostream& os, const ChannelReport& rep)
{
    os << "t,exterior_H_sq,total_H_sq,fraction\n";
    for (std::size_t k = 0; k < rep.times.size(); ++k)
        os << format_double(rep.times[k]) << ',' << format_double(rep.exterior_h_sq[k]) << ','
           << format_double(rep.total_h_sq[k]) << ',' << format_double(rep.fraction[k]) << '\n';
}

// ---------------------------------------------------------------------------
// far-cone vanishing

struct FarConeProfile {
    std::vector<double> ladder;
    /// max over t >= late_from of the energy in ||x| - t| >= T.
    std::vector<double> energy;
    double late_from = 0.0;
    double horizon = 0.0;
    TerminationRecord termination;

    bool non_increasing(double slack = 0.0) const
    {
        for (std::size_t k = 1; k < energy.size(); ++k)
            if (energy[k] > energy[k - 1] + slack)
                return false;
        return true;
    }
};

inline FarConeProfile far_cone_vanishing(const RadialState& data, const SolverConfig& cfg,
                                         std::vector<double> ladder, double t_max, double late_from)
{
    detail::require_linear(cfg, "far_cone_vanishing");
    if (ladder.empty() || !std::is_sorted(ladder.begin(), ladder.end()) || ladder.front() < 0.0)
        throw ConfigError("far_cone_vanishing: ladder must be non-empty, ascending and non-negative");
    if (!(late_from >= 0.0 && late_from <= t_max))
        throw ConfigError("far_cone_vanishing: late_from must lie in [0, t_max]");
    FarConeProfile prof;
    prof.ladder = std::move(ladder);
    prof.energy.assign(prof.ladder.size(), 0.0);
    prof.late_from = late_from;
    const double r_max = cfg.grid->r_max();
    const RadialState u0 = as_u(data);
    Observer obs = [&](const RadialState& s) {
        const double t = s.time - u0.time;
        prof.horizon = t;
        if (t < late_from)
            return;
        const RadialState u = to_u(s);
        for (std::size_t k = 0; k < prof.ladder.size(); ++k) {
            const double T = prof.ladder[k];
            double e = 0.0;
            if (t - T > 0.0)
                e += h_norm_sq(u, 0.0, std::min(t - T, r_max));
            if (t + T < r_max)
                e += h_norm_sq(u, t + T, r_max);
            prof.energy[k] = std::max(prof.energy[k], e);
        }
    };
    prof.termination = evolve(u0, detail::with_horizon(cfg, t_max), std::span<const Observer>(&obs, 1)).termination;
    return prof;
}

// ---------------------------------------------------------------------------
// dispersive decay

struct DecayReport {
    std::vector<double> times;
    std::vector<double> sup_u;
    std::vector<double> sup_psi; ///< sup_r |r u|
    double fit_from = 0.0;
    double exponent = 0.0;
    double std_error = 0.0;
    /// exponent -+ 2 std_error
    double band_lo = 0.0;
    double band_hi = 0.0;
    /// max over the fit window of t^{3/2} sup|u|.
    double constant = 0.0;
    TerminationRecord termination;
};

/// Least-squares slope of log sup|u| against log t over the last decade.
/// Zero data gives zero series and no fit.
inline DecayReport dispersive_decay_probe(const RadialState& data, const SolverConfig& cfg, double t_max)
{
    detail::require_linear(cfg, "dispersive_decay_probe");
    DecayReport rep;
    const RadialState u0 = as_u(data);
    Observer obs = [&](const RadialState& s) {
        const RadialState u = to_u(s);
        double su = 0.0, sp = 0.0;
        for (std::size_t i = 0; i < u.position.size(); ++i) {
            su = std::max(su, std::abs(u.position[i]));
            sp = std::max(sp, std::abs(s.position[i]));
        }
        rep.times.push_back(s.time - u0.time);
        rep.sup_u.push_back(su);
        rep.sup_psi.push_back(sp);
    };
    rep.termination = evolve(u0, detail::with_horizon(cfg, t_max), std::span<const Observer>(&obs, 1)).termination;

    if (std::all_of(rep.sup_u.begin(), rep.sup_u.end(), [](double v) { return v == 0.0; }))
        return rep;
    const double t_end = rep.times.back();
    rep.fit_from = t_end / 10.0;
    std::vector<double> x, y;
    for (std::size_t k = 0; k < rep.times.size(); ++k)
        if (rep.times[k] >= rep.fit_from && rep.times[k] > 0.0) {
            if (rep.sup_u[k] == 0.0)
                continue;
            x.push_back(std::log(rep.times[k]));
            y.push_back(std::log(rep.sup_u[k]));
            rep.constant = std::max(rep.constant, std::pow(rep.times[k], 1.5) * rep.sup_u[k]);
        }
    if (x.size() < 8 || rep.fit_from <= 0.0)
        throw DiagnosticError("dispersive_decay_probe: insufficient time range for a fit (" +
                              std::to_string(x.size()) + " samples in the last decade)");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    rep.exponent = sxy / sxx;
    double sse = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double e = y[k] - my - rep.exponent * (x[k] - mx);
        sse += e * e;
    }
    rep.std_error = std::sqrt(sse / (n - 2.0) / sxx);
    rep.band_lo = rep.exponent - 2.0 * rep.std_error;
    rep.band_hi = rep.exponent + 2.0 * rep.std_error;
    return rep;
}

// ---------------------------------------------------------------------------
// corpora, calibration and the (0, g) search

/// g(r) = cos(k r / a) exp(-(r / b)^2) / (1 + (r / a)^2): a 1/r^2 profile
/// between the inner scale a and the outer scale b.
struct ScaleBridge {
    double inner = 0.1;
    double outer = 10.0;
    double oscillation = 0.0;

    double operator()(double r) const noexcept
    {
        const double x = r / inner, y = r / outer;
        return std::cos(oscillation * x) * std::exp(-y * y) / (1.0 + x * x);
    }
};

/// A candidate radial profile with the radii that size its run.
struct ProfileSpec {
    std::string label;
    std::map<std::string, double> params;
    std::function<double(double)> shape;
    /// Radius outside which the profile is negligible.
    double extent = 1.0;
    /// Largest length scale in the profile.
    double scale = 1.0;
};

inline ProfileSpec bump_profile(const BumpSpec& b, std::string label)
{
    ProfileSpec p;
    p.label = std::move(label);
    for (std::size_t k = 0; k < b.shells.size(); ++k) {
        const std::string s = "shell" + std::to_string(k) + ".";
        p.params[s + "amplitude"] = b.shells[k].amplitude;
        p.params[s + "center"] = b.shells[k].center;
        p.params[s + "width"] = b.shells[k].width;
    }
    p.params["oscillation"] = b.oscillation;
    p.shape = b;
    p.extent = b.support_radius();
    p.scale = p.extent;
    return p;
}

inline ProfileSpec bridge_profile(const ScaleBridge& b)
{
    ProfileSpec p;
    p.label = "bridge(a=" + format_double(b.inner) + ",b=" + format_double(b.outer) +
              ",k=" + format_double(b.oscillation) + ")";
    p.params = {{"inner", b.inner}, {"outer", b.outer}, {"oscillation", b.oscillation}};
    p.shape = b;
    p.extent = 4.0 * b.outer;
    p.scale = b.outer;
    return p;
}

/// Single shells over a (center, width, oscillation) grid.
inline std::vector<ProfileSpec> shell_family(const std::vector<double>& centers, const std::vector<double>& widths,
                                             const std::vector<double>& oscillations)
{
    std::vector<ProfileSpec> out;
    for (double c : centers)
        for (double w : widths)
            for (double k : oscillations) {
                BumpSpec b;
                b.shells.push_back({1.0, c, w});
                b.oscillation = k;
                auto p = bump_profile(b, "shell(c=" + format_double(c) + ",w=" + format_double(w) +
                                             ",k=" + format_double(k) + ")");
                out.push_back(std::move(p));
            }
    return out;
}

/// ScaleBridge profiles over an (inner, outer, oscillation) grid.
inline std::vector<ProfileSpec> bridge_family(const std::vector<double>& inners, const std::vector<double>& outers,
                                              const std::vector<double>& oscillations)
{
    std::vector<ProfileSpec> out;
    for (double a : inners)
        for (double b : outers)
            for (double k : oscillations)
                if (b > a)
                    out.push_back(bridge_profile({a, b, k}));
    return out;
}

enum class Slot { position, velocity };

struct ChannelRun {
    SolverConfig config;
    double t_max = 0.0;
};

/// Grid and horizon for a profile: the run lasts 8 scales plus 10, and the
/// wall sits far enough out that nothing reaches the monitor band.
inline ChannelRun channel_run(const ProfileSpec& p, double h, double cfl = 0.5)
{
    ChannelRun run;
    run.t_max = 8.0 * p.scale + 10.0;
    const double buffer = 2.0;
    const double r_max = std::ceil((run.t_max + p.extent + 2.0 * buffer) / h) * h;
    run.config.grid = RadialGrid::with_spacing(h, r_max);
    run.config.dt = cfl * h;
    run.config.mode = Mode::linear;
    run.config.buffer_width = buffer;
    run.config.snapshot_interval = run.t_max / 200.0;
    return run;
}

inline RadialState profile_data(const GridPtr& grid, const ProfileSpec& p, Slot slot)
{
    auto f = RadialField::from_function(grid, p.shape, Form::u);
    RadialField zero(grid, Form::u);
    return slot == Slot::position ? RadialState(std::move(f), std::move(zero), 0.0)
                                  : RadialState(std::move(zero), std::move(f), 0.0);
}

inline ChannelReport profile_fraction(const ProfileSpec& p, Slot slot, double h)
{
    const ChannelRun run = channel_run(p, h);
    return exterior_fraction_series(profile_data(run.config.grid, p, slot), run.config, run.t_max, p.label);
}

struct CorpusEntry {
    ProfileSpec profile;
    double coarse = 0.0;
    double fine = 0.0;
    double late_minimum = 0.0;
    bool contaminated = false;
};

struct Alpha0Calibration {
    double coarse_h = 0.0;
    double fine_h = 0.0;
    std::vector<CorpusEntry> members;
    /// Minimum asymptotic fraction on the coarse and the refined grid.
    double alpha_coarse = 0.0;
    double alpha_fine = 0.0;

    double alpha() const noexcept { return alpha_fine; }
    double relative_change() const { return std::abs(alpha_fine - alpha_coarse) / alpha_fine; }
    bool stable(double tol = 0.1) const { return relative_change() <= tol; }
};

/// Runs every (f, 0) member on h and h/2; the refined minimum is alpha_0.
inline Alpha0Calibration calibrate_alpha0(const std::vector<ProfileSpec>& corpus, double h,
                                          unsigned workers = worker_count())
{
    if (corpus.empty())
        throw ConfigError("calibrate_alpha0: empty corpus");
    Alpha0Calibration cal;
    cal.coarse_h = h;
    cal.fine_h = h / 2.0;
    cal.members.resize(corpus.size());
    parallel_for(2 * corpus.size(), workers, [&](std::size_t job) {
        const std::size_t k = job / 2;
        const bool fine = job % 2 == 1;
        const auto rep = profile_fraction(corpus[k], Slot::position, fine ? cal.fine_h : cal.coarse_h);
        auto& m = cal.members[k];
        if (fine) {
            m.fine = rep.asymptotic_fraction;
            m.late_minimum = rep.late_minimum;
            m.contaminated = rep.contaminated();
        } else {
            m.coarse = rep.asymptotic_fraction;
        }
    });
    for (std::size_t k = 0; k < corpus.size(); ++k) {
        cal.members[k].profile = corpus[k];
        if (cal.members[k].contaminated)
            throw DiagnosticError("calibrate_alpha0: member " + corpus[k].label + " reached the wall");
    }
    auto by = [&](double CorpusEntry::*field) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& e : cal.members)
            m = std::min(m, e.*field);
        return m;
    };
    cal.alpha_coarse = by(&CorpusEntry::coarse);
    cal.alpha_fine = by(&CorpusEntry::fine);
    return cal;
}

/// Seeded (f, 0) corpus of random shell superpositions inside r <= 6.
inline std::vector<ProfileSpec> default_f_corpus(std::uint64_t seed = 1, std::size_t count = 20)
{
    std::vector<ProfileSpec> out;
    const auto bumps = random_bumps(seed, count, 6.0);
    for (std::size_t k = 0; k < bumps.size(); ++k)
        out.push_back(bump_profile(bumps[k], "f" + std::to_string(k)));
    return out;
}

struct SearchCandidate {
    ProfileSpec profile;
    double fraction = 0.0;
};

struct AdversarialSearch {
    double h = 0.0;
    /// Sorted by asymptotic fraction, smallest first.
    std::vector<SearchCandidate> candidates;

    const SearchCandidate& best() const
    {
        if (candidates.empty())
            throw DiagnosticError("adversarial search has no candidates");
        return candidates.front();
    }
};

/// Grid search for (0, g) data with the smallest asymptotic fraction.
inline AdversarialSearch adversarial_search(const std::vector<ProfileSpec>& family, double h,
                                            unsigned workers = worker_count())
{
    AdversarialSearch out;
    out.h = h;
    out.candidates.resize(family.size());
    parallel_for(family.size(), workers, [&](std::size_t k) {
        const auto rep = profile_fraction(family[k], Slot::velocity, h);
        if (rep.contaminated())
            throw DiagnosticError("adversarial_search: candidate " + family[k].label + " reached the wall");
        out.candidates[k] = {family[k], rep.asymptotic_fraction};
    });
    std::stable_sort(out.candidates.begin(), out.candidates.end(),
                     [](const auto& a, const auto& b) { return a.fraction < b.fraction; });
    return out;
}

/// Predicted asymptotic fraction of (0, g) data whose log-scale profile is a
/// box of length `ell` in log r: (1 - <sech(pi w)>) / 2, evaluated by
/// quadrature of the kernel sech(y / 2) / 2 over the box.
inline double bridge_fraction_prediction(double ell, int n = 400)
{
    if (!(ell > 0.0))
        throw ConfigError("bridge_fraction_prediction: ell must be positive");
    const double dx = ell / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            total += 0.5 / std::cosh(0.5 * dx * (i - j));
    total *= dx * dx / ell;
    return 0.5 - total / (2.0 * std::numbers::pi);
}

inline nlohmann::json to_json(const ProfileSpec& p)
{
    nlohmann::json j;
    j["label"] = p.label;
    j["params"] = p.params;
    j["extent"] = p.extent;
    j["scale"] = p.scale;
    return j;
}

inline nlohmann::json corpus_manifest(const Alpha0Calibration& cal, const AdversarialSearch* search = nullptr)
{
    nlohmann::json j;
    j["coarse_h"] = cal.coarse_h;
    j["fine_h"] = cal.fine_h;
    j["alpha0_coarse"] = cal.alpha_coarse;
    j["alpha0"] = cal.alpha_fine;
    j["alpha0_relative_change"] = cal.relative_change();
    auto& members = j["f_corpus"] = nlohmann::json::array();
    for (const auto& m : cal.members) {
        auto e = to_json(m.profile);
        e["fraction_coarse"] = m.coarse;
        e["fraction_fine"] = m.fine;
        e["late_minimum"] = m.late_minimum;
        members.push_back(std::move(e));
    }
    if (search) {
        j["search_h"] = search->h;
        auto& cands = j["g_search"] = nlohmann::json::array();
        for (const auto& c : search->candidates) {
            auto e = to_json(c.profile);
            e["fraction"] = c.fraction;
            cands.push_back(std::move(e));
        }
    }
    return j;
}

} // namespace critwave
