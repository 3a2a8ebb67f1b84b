#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "critwave/channels.hpp"
#include "critwave/corpus.hpp"
#include "critwave/decomposition.hpp"
#include "critwave/evolution.hpp"
#include "critwave/ground_state.hpp"
#include "critwave/lab/config.hpp"
#include "critwave/lab/manifest.hpp"
#include "critwave/lightcone.hpp"
#include "critwave/parallel.hpp"
#include "critwave/snapshot_io.hpp"

namespace critwave::lab {

// ---------------------------------------------------------------------------
// shared building blocks

inline SolverConfig solver_config(const ScenarioConfig& cfg)
{
    SolverConfig c;
    c.grid = RadialGrid::with_spacing(cfg.real("solver.h"), cfg.real("solver.r_max"));
    c.dt = cfg.real("solver.cfl") * cfg.real("solver.h");
    c.mode = cfg.text("solver.mode") == "linear" ? Mode::linear : Mode::cubic;
    c.t_max = cfg.real("solver.t_max");
    c.snapshot_interval = cfg.real("solver.snapshot_interval");
    c.blowup_factor = cfg.real("solver.blowup_factor");
    return c;
}

inline BumpSpec parse_shells(const ScenarioConfig& cfg)
{
    BumpSpec b;
    for (const auto& s : detail::split(cfg.text("data.shells"), ',')) {
        const auto p = detail::split(s, ':');
        b.shells.push_back({*detail::parse_real(p[0]), *detail::parse_real(p[1]), *detail::parse_real(p[2])});
    }
    b.oscillation = cfg.real("data.oscillation");
    return b;
}

struct BubbleSpec {
    int sign = 1;
    double scale = 1.0;
};

inline std::vector<BubbleSpec> parse_bubbles(const ScenarioConfig& cfg)
{
    std::vector<BubbleSpec> out;
    for (const auto& s : detail::split(cfg.text("data.bubbles"), ',')) {
        const auto p = detail::split(s, ':');
        out.push_back({*detail::parse_real(p[0]) > 0.0 ? 1 : -1, *detail::parse_real(p[1])});
    }
    return out;
}

inline RadialState add_states(RadialState a, const RadialState& b)
{
    a = as_u(a);
    const auto v = as_u(b);
    for (std::size_t i = 0; i < a.position.size(); ++i) {
        a.position[i] += v.position[i];
        a.velocity[i] += v.velocity[i];
    }
    a.tail = a.tail + v.tail;
    return a;
}

/// u-form initial data described by the data.* keys.
inline RadialState initial_data(const ScenarioConfig& cfg, const GridPtr& g)
{
    const auto& kind = cfg.text("data.kind");
    if (kind == "ground-state")
        return ground_state_multiple(cfg.real("data.amplitude"), cfg.real("data.scale"), g);
    if (kind == "bump") {
        RadialField f = make_bump(g, parse_shells(cfg));
        RadialField zero(g, Form::u);
        return cfg.text("data.slot") == "position" ? RadialState(std::move(f), std::move(zero), 0.0)
                                                   : RadialState(std::move(zero), std::move(f), 0.0);
    }
    if (kind == "superposition") {
        RadialState s = RadialState::zero(g, Form::u);
        for (const auto& b : parse_bubbles(cfg))
            s = add_states(s, ground_state_multiple(b.sign, b.scale, g));
        return s;
    }
    RadialState s = as_u(read_snapshot(cfg.text("data.file")));
    if (s.grid()->cells() != g->cells() || s.grid()->r_max() != g->r_max())
        throw ConfigIssues({"data.file: grid N=" + std::to_string(s.grid()->cells()) + " Rmax=" +
                            format_double(s.grid()->r_max()) + " does not match solver.h / solver.r_max"});
    auto values = [](const RadialField& f) { return std::vector<double>(f.values().begin(), f.values().end()); };
    return RadialState(RadialField(g, values(s.position), Form::u), RadialField(g, values(s.velocity), Form::u), 0.0,
                       s.tail);
}

/// Conserved energy of the evolution mode.
inline double mode_energy(const RadialState& s, Mode mode)
{
    const auto e = energy(as_u(s));
    return mode == Mode::cubic ? e.total : e.kinetic + e.gradient;
}

struct EnergySeries {
    std::vector<std::vector<double>> rows; ///< t, E
    double max_rel_drift = 0.0;
};

inline EnergySeries energy_series(const Trajectory& tr)
{
    EnergySeries out;
    if (tr.empty())
        return out;
    const double e0 = mode_energy(tr.front(), tr.config.mode);
    for (const auto& s : tr.snapshots) {
        const double e = mode_energy(s, tr.config.mode);
        out.rows.push_back({s.time, e});
        const double rel = e0 != 0.0 ? std::abs(e - e0) / std::abs(e0) : std::abs(e);
        out.max_rel_drift = std::max(out.max_rel_drift, rel);
    }
    return out;
}

inline double h_distance(const RadialState& a, const RadialState& b)
{
    auto d = as_u(a);
    const auto v = as_u(b);
    for (std::size_t i = 0; i < d.position.size(); ++i) {
        d.position[i] -= v.position[i];
        d.velocity[i] -= v.velocity[i];
    }
    d.tail = {};
    return std::sqrt(h_norm_sq(d));
}

/// Bump fields rescaled to ||grad f||^2 uniform in (0.01, 1.99) ||grad W||^2.
inline std::vector<RadialField> trapped_corpus(const GridPtr& g, std::uint64_t seed, std::size_t count)
{
    std::vector<RadialField> out;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& spec : random_bumps(seed, count, 15.0)) {
        auto f = make_bump(g, spec);
        const double target = (0.01 + 1.98 * unit(rng)) * profile::kGradSq;
        const double scale = std::sqrt(target / gradient_sq(f));
        for (std::size_t i = 0; i < f.size(); ++i)
            f[i] *= scale;
        out.push_back(std::move(f));
    }
    return out;
}

/// psi-form states with sup |psi| = 0.7 < sqrt(1/2).
inline std::vector<RadialState> sub_threshold_corpus(const GridPtr& g, std::uint64_t seed, std::size_t count)
{
    const auto pos = random_bumps(seed, count, 12.0);
    const auto vel = random_bumps(seed + 1000, count, 12.0);
    std::vector<RadialState> out;
    for (std::size_t k = 0; k < count; ++k) {
        auto s = to_psi(RadialState(make_bump(g, pos[k]), make_bump(g, vel[k]), 0.0));
        const double scale = 0.7 / std::max(s.position.sup_abs(), 1e-300);
        for (std::size_t i = 0; i < g->size(); ++i)
            s.position.mutable_values()[i] *= scale;
        out.push_back(std::move(s));
    }
    return out;
}

inline std::string fmt(double x) { return format_double(x); }

/// Predicted trichotomy branch of (u0, u1) from E and ||grad u0||^2.
inline std::string trichotomy_prediction(const RadialState& u)
{
    const auto e = energy(as_u(u));
    const double grad = 2.0 * e.gradient;
    if (e.total < profile::kEnergy && grad < profile::kGradSq)
        return "scatter";
    if (e.total < profile::kEnergy && grad > profile::kGradSq)
        return "blow-up";
    return "undetermined";
}

inline void write_checkpoint(const ScenarioConfig& cfg, ArtifactSink& out, const std::string& name,
                             const Trajectory& tr)
{
    if (cfg.flag("output.checkpoint") && !tr.empty())
        out.snapshot(name, tr.back());
}

// ---------------------------------------------------------------------------
// scenarios

inline void scenario_static_w(const ScenarioConfig& cfg, ArtifactSink& out, RunManifest& m, unsigned)
{
    const auto c = solver_config(cfg);
    const auto w = ground_state_multiple(1.0, cfg.real("data.scale"), c.grid);
    const double grad = h_norm_sq(w), e = energy(w).total;
    m.check("ground-state |grad W|^2 - 16/3", std::abs(grad - profile::kGradSq) <= 1e-4, grad - profile::kGradSq, 1e-4);
    m.check("ground-state E(W, 0) - 4/3", std::abs(e - profile::kEnergy) <= 1e-4, e - profile::kEnergy, 1e-4);
    m.summary["grad_sq"] = fmt(grad);
    m.summary["energy"] = fmt(e);

    const auto u0 = initial_data(cfg, c.grid);
    const auto tr = evolve(u0, c);
    m.record("static", tr);
    const auto es = energy_series(tr);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k)
        rows.push_back({es.rows[k][0], es.rows[k][1], h_distance(tr.snapshots[k], u0)});
    out.csv("static.csv", {"t", "energy", "H_distance"}, rows);
    write_checkpoint(cfg, out, "final.snap", tr);

    const double dist = rows.back()[2];
    m.summary["H_distance"] = fmt(dist);
    m.summary["energy_drift"] = fmt(es.max_rel_drift);
    m.check("run reaches t_max", tr.termination.kind == Termination::reached_max_time, tr.back().time,
            c.t_max, to_string(tr.termination.kind));
    m.check("energy conservation", es.max_rel_drift <= cfg.real("checks.energy_rel"), es.max_rel_drift,
            cfg.real("checks.energy_rel"));
    const bool is_w = cfg.text("data.kind") == "ground-state" && std::abs(cfg.real("data.amplitude")) == 1.0;
    if (is_w) {
        const double bound = cfg.real("checks.static_rel") * std::sqrt(profile::kGradSq);
        m.check("static solution stays put", dist <= bound, dist, bound);
        auto fine = c;
        fine.grid = RadialGrid::with_spacing(0.5 * c.grid->spacing(), c.grid->r_max());
        fine.dt = 0.5 * c.dt;
        const auto u_fine = initial_data(cfg, fine.grid);
        const auto tr_fine = evolve(u_fine, fine);
        m.record("static h/2", tr_fine);
        const double dist_fine = h_distance(tr_fine.back(), u_fine);
        const double order = std::log2(dist / dist_fine);
        m.summary["H_distance_half_h"] = fmt(dist_fine);
        m.summary["distance_order"] = fmt(order);
        m.check("distance order under h -> h/2", order >= cfg.real("checks.min_order"), order,
                cfg.real("checks.min_order"));
    }
}

inline void scenario_trichotomy(const ScenarioConfig& cfg, ArtifactSink& out, RunManifest& m, unsigned workers)
{
    const auto c = solver_config(cfg);
    const auto amps = cfg.reals("trichotomy.amplitudes");
    struct Member {
        Trajectory tr;
        std::string predicted, branch;
        double grad = 0.0, e = 0.0, drift = 0.0;
        std::optional<double> t_est;
    };
    std::vector<Member> runs(amps.size());
    const double window = cfg.real("trichotomy.window") * c.t_max;
    parallel_for(amps.size(), workers, [&](std::size_t k) {
        auto& r = runs[k];
        const auto u0 = ground_state_multiple(amps[k], cfg.real("data.scale"), c.grid);
        r.grad = h_norm_sq(u0);
        r.e = energy(u0).total;
        r.predicted = trichotomy_prediction(u0);
        r.tr = evolve(u0, c);
        if (r.tr.blew_up()) {
            r.branch = "blow-up";
            r.t_est = detect_blowup(r.tr).t_est;
        } else if (r.tr.termination.kind == Termination::boundary_contamination) {
            r.branch = "contaminated";
        } else {
            r.drift = energy_series(r.tr).max_rel_drift;
            const auto sc = scattering_detector(r.tr, c.t_max - window, window);
            r.branch = sc.verdict == ScatterVerdict::consistent ? "scatter" : "global-nonscattering";
        }
    });

    std::vector<std::vector<double>> table;
    std::string branches, predictions;
    for (std::size_t k = 0; k < amps.size(); ++k) {
        const auto& r = runs[k];
        m.record("a=" + fmt(amps[k]), r.tr);
        const auto log = detect_blowup(r.tr);
        std::vector<std::vector<double>> rows;
        for (std::size_t j = 0; j < log.times.size(); ++j)
            rows.push_back({log.times[j], log.sup_u[j], log.local_h_sq[j]});
        out.csv("run_" + std::to_string(k) + ".csv", {"t", "sup_u", "local_H_sq"}, rows);
        write_checkpoint(cfg, out, "final_" + std::to_string(k) + ".snap", r.tr);
        auto code = [](const std::string& b) {
            return b == "scatter" ? 0.0 : b == "blow-up" ? 1.0 : b == "global-nonscattering" ? 2.0 : -1.0;
        };
        table.push_back({amps[k], r.grad, r.e, code(r.predicted), code(r.branch), r.t_est.value_or(NAN), r.drift});
        branches += (k ? ";" : "") + r.branch;
        predictions += (k ? ";" : "") + r.predicted;

        const std::string tag = "a=" + fmt(amps[k]);
        if (r.predicted != "undetermined")
            m.check(tag + ": branch matches the trichotomy hypotheses", r.branch == r.predicted, code(r.branch),
                    code(r.predicted), r.branch + " vs predicted " + r.predicted);
        if (r.branch != "blow-up")
            m.check(tag + ": energy conservation", r.drift <= cfg.real("checks.energy_rel"), r.drift,
                    cfg.real("checks.energy_rel"));
        m.check(tag + ": no boundary contamination", r.branch != "contaminated", 0.0, 0.0);
    }
    // branch codes: 0 scatter, 1 blow-up, 2 global-nonscattering, -1 undetermined/contaminated
    out.csv("trichotomy.csv", {"amplitude", "grad_sq", "energy", "predicted", "branch", "t_est", "energy_drift"},
            table);
    m.summary["branch"] = branches;
    m.summary["predicted"] = predictions;
    if (amps.size() == 1 && runs[0].t_est)
        m.summary["t_est"] = fmt(*runs[0].t_est);
}

inline void scenario_standing_wave(const ScenarioConfig& cfg, ArtifactSink& out, RunManifest& m, unsigned workers)
{
    const double w = cfg.real("standing.omega"), r_max = cfg.real("standing.r_max");
    const auto hs = cfg.reals("standing.h_list");
    const double t_oracle = cfg.real("standing.periods") * 2.0 * std::numbers::pi / w;
    std::vector<double> err(hs.size());
    std::vector<MultiplierReport> fam(hs.size());
    std::vector<TerminationRecord> terms(2 * hs.size());
    parallel_for(2 * hs.size(), workers, [&](std::size_t job) {
        const std::size_t k = job / 2;
        const auto g = RadialGrid::with_spacing(hs[k], r_max);
        SolverConfig c;
        c.grid = g;
        c.mode = Mode::linear;
        c.outer = standing_wave_driver(w, r_max);
        if (job % 2 == 0) {
            c.dt = cfg.real("solver.cfl") * hs[k];
            c.t_max = t_oracle;
            c.snapshot_interval = t_oracle;
            const auto tr = evolve(standing_wave_oracle(w, 0.0, g), c);
            terms[job] = tr.termination;
            const auto exact = standing_wave_oracle(w, tr.back().time, g);
            err[k] = std::sqrt(weighted_integral(*g, 1, 0.0, r_max, [&](std::size_t i, double) {
                const double e = tr.back().position[i] - exact.position[i];
                return e * e;
            }));
        } else {
            c.dt = cfg.real("standing.multiplier_cfl") * hs[k];
            c.t_max = cfg.real("standing.multiplier_t_max");
            c.snapshot_interval = 0.0;
            const auto tr = evolve(standing_wave_oracle(w, 0.0, g), c);
            terms[job] = tr.termination;
            fam[k] = multiplier_residuals(tr);
        }
    });
    for (std::size_t j = 0; j < terms.size(); ++j) {
        m.steps += terms[j].steps;
        m.terminations.push_back({(j % 2 ? "multiplier h=" : "oracle h=") + fmt(hs[j / 2]), terms[j]});
    }
    std::vector<std::vector<double>> rows, orders;
    for (std::size_t k = 0; k < hs.size(); ++k)
        rows.push_back({hs[k], err[k], fam[k].max_en_id, fam[k].max_psi_t_id});
    out.csv("convergence.csv", {"h", "L2_error", "en_id_residual", "psi_t_id_residual"}, rows);
    const auto mo = multiplier_orders(fam);
    const double floor = cfg.real("checks.min_order");
    for (std::size_t k = 0; k + 1 < hs.size(); ++k) {
        const double p = std::log(err[k] / err[k + 1]) / std::log(hs[k] / hs[k + 1]);
        const double scale = std::log2(hs[k] / hs[k + 1]);
        const double pe = mo[k].first / scale, pp = mo[k].second / scale;
        orders.push_back({hs[k], hs[k + 1], p, pe, pp});
        const std::string tag = " h=" + fmt(hs[k]) + "->" + fmt(hs[k + 1]);
        m.check("L2 oracle order" + tag, p >= floor, p, floor);
        m.check("energy identity order" + tag, pe >= floor, pe, floor);
        m.check("psi_t identity order" + tag, pp >= floor, pp, floor);
    }
    out.csv("orders.csv", {"h_coarse", "h_fine", "L2_order", "en_id_order", "psi_t_id_order"}, orders);
    const double bound = cfg.real("checks.slab_residual");
    const double worst = std::max(fam.back().max_en_id, fam.back().max_psi_t_id);
    m.check("slab residual on the finest grid", worst <= bound, worst, bound);
    m.summary["L2_error_finest"] = fmt(err.back());
    m.summary["L2_order_last"] = fmt(orders.back()[2]);
    m.summary["slab_residual_finest"] = fmt(worst);
}

inline void scenario_channels(const ScenarioConfig& cfg, ArtifactSink& out, RunManifest& m, unsigned workers)
{
    const auto corpus = default_f_corpus(cfg.seed(), static_cast<std::size_t>(cfg.integer("channels.corpus_size")));
    const auto cal = calibrate_alpha0(corpus, cfg.real("channels.h"), workers);
    const auto osc = cfg.reals("channels.oscillations");
    auto family = shell_family(cfg.reals("channels.shell_centers"), cfg.reals("channels.shell_widths"), osc);
    for (auto& p : bridge_family(cfg.reals("channels.bridge_inner"), cfg.reals("channels.bridge_outer"), osc))
        family.push_back(std::move(p));
    if (family.empty())
        throw ConfigIssues({"channels: the (0, g) search family is empty"});
    const auto search = adversarial_search(family, cfg.real("channels.search_h"), workers);
    out.json("corpus.json", corpus_manifest(cal, &search));

    const auto weakest = std::min_element(cal.members.begin(), cal.members.end(),
                                          [](const auto& a, const auto& b) { return a.fine < b.fine; });
    {
        auto os = out.open("channel_alpha0_member.csv");
        write_channel_csv(os, profile_fraction(weakest->profile, Slot::position, cal.fine_h));
    }
    {
        auto os = out.open("channel_best_g.csv");
        write_channel_csv(os, profile_fraction(search.best().profile, Slot::velocity, search.h));
    }

    const double a0 = cal.alpha(), best = search.best().fraction;
    m.alpha0 = {a0, "min asymptotic exterior fraction over the " + std::to_string(corpus.size()) +
                        "-member (f,0) corpus, seed " + std::to_string(cfg.seed()) + ", h = " + fmt(cal.fine_h)};
    m.summary["alpha0"] = fmt(a0);
    m.summary["alpha0_coarse"] = fmt(cal.alpha_coarse);
    m.summary["alpha0_relative_change"] = fmt(cal.relative_change());
    m.summary["best_g_fraction"] = fmt(best);
    m.summary["best_g_profile"] = search.best().profile.label;
    m.check("alpha_0 positive", a0 > 0.0, a0, 0.0);
    m.check("alpha_0 stable under refinement", cal.stable(cfg.real("channels.stability")), cal.relative_change(),
            cfg.real("channels.stability"));
    m.check("(0,g) exhibit below alpha_0", best < a0, best, a0);
    const double target = a0 / cfg.real("channels.target_ratio");
    m.check("(0,g) exhibit below alpha_0 / ratio", best < target, best, target, search.best().profile.label);
}

inline void scenario_self_similar(const ScenarioConfig& cfg, ArtifactSink& out, RunManifest& m, unsigned)
{
    auto c = solver_config(cfg);
    c.mode = Mode::cubic;
    const auto tr = evolve(ground_state_multiple(cfg.real("selfsim.amplitude"), cfg.real("data.scale"), c.grid), c);
    m.record("blow-up run", tr);
    const auto log = detect_blowup(tr);
    std::vector<std::vector<double>> rows;
    for (std::size_t j = 0; j < log.times.size(); ++j)
        rows.push_back({log.times[j], log.sup_u[j], log.local_h_sq[j]});
    out.csv("blowup.csv", {"t", "sup_u", "local_H_sq"}, rows);
    m.check("blow-up flagged", tr.blew_up(), tr.termination.flag_time, c.t_max);
    if (!tr.blew_up())
        return;
    const auto t_plus = secant_blowup_time(tr);
    if (!t_plus)
        throw DiagnosticError("self-similar probe: no resolved snapshots near blow-up");
    const auto st = self_similar_trend(tr, *t_plus, cfg.real("selfsim.lambda"), cfg.real("selfsim.resolve"));
    rows.clear();
    for (std::size_t j = 0; j < st.times.size(); ++j)
        rows.push_back({st.times[j], st.tau[j], st.band[j], st.scale_ratio[j]});
    out.csv("selfsim.csv", {"t", "tau", "band_energy", "scale_ratio"}, rows);
    m.summary["t_plus"] = fmt(*t_plus);
    m.summary["flag_time"] = fmt(tr.termination.flag_time);
    m.summary["tau_window"] = fmt(st.tau_lo) + ":" + fmt(st.tau_hi);
    m.check("window has samples", st.times.size() >= 5, static_cast<double>(st.times.size()), 5.0);
    if (st.times.size() < 2)
        return;
    const double band_rise = SelfSimilarTrend::worst_rise(st.band);
    const double ratio_rise = SelfSimilarTrend::worst_rise(st.scale_ratio);
    m.summary["band_first"] = fmt(st.band.front());
    m.summary["band_min"] = fmt(*std::min_element(st.band.begin(), st.band.end()));
    m.summary["band_last"] = fmt(st.band.back());
    m.summary["band_worst_rise"] = fmt(band_rise);
    m.summary["ratio_first"] = fmt(st.scale_ratio.front());
    m.summary["ratio_last"] = fmt(st.scale_ratio.back());
    m.summary["ratio_worst_rise"] = fmt(ratio_rise);
    m.check("lambda_hat / (T+ - t) non-increasing", st.ratio_non_increasing(), ratio_rise, 0.0);
    m.check("band energy non-increasing", st.band_non_increasing(), band_rise, 0.0);
}

inline ExtractOptions extract_options(const ScenarioConfig& cfg)
{
    ExtractOptions o;
    o.max_bubbles = static_cast<std::size_t>(cfg.integer("decomposition.max_bubbles"));
    o.stop_fraction = cfg.real("decomposition.stop_fraction");
    o.separation = cfg.real("decomposition.separation");
    return o;
}

inline void scenario_global_bubble(const ScenarioConfig& cfg, ArtifactSink& out, RunManifest& m, unsigned workers)
{
    const auto c = solver_config(cfg);
    const auto u0 = initial_data(cfg, c.grid);
    const double norm0 = h_norm_sq(u0);
    const std::string predicted = trichotomy_prediction(u0);
    const auto tr = evolve(u0, c);
    m.record("global run", tr);
    m.check("run is global", tr.termination.kind == Termination::reached_max_time, tr.back().time, c.t_max,
            to_string(tr.termination.kind));
    if (tr.termination.kind != Termination::reached_max_time)
        return;
    const auto es = energy_series(tr);
    out.csv("energy.csv", {"t", "energy"}, es.rows);
    m.check("energy conservation", es.max_rel_drift <= cfg.real("checks.energy_rel"), es.max_rel_drift,
            cfg.real("checks.energy_rel"));

    const double t_end = tr.back().time;
    const double t_probe = cfg.real("radiation.t_probe") > 0.0 ? cfg.real("radiation.t_probe") : t_end;
    const auto rad = radiation_extract(tr, t_probe, cfg.real("radiation.delta"), {cfg.real("radiation.radius")},
                                       t_probe / 10.0);
    std::vector<std::vector<double>> rows;
    for (std::size_t j = 0; j < rad.times.size(); ++j)
        rows.push_back({rad.times[j], rad.mismatch[0][j]});
    out.csv("radiation.csv", {"t", "mismatch"}, rows);
    if (cfg.flag("output.checkpoint"))
        out.snapshot("radiation_data.snap", rad.data);
    const double last = rad.mismatch[0].back();
    const double bound = cfg.real("radiation.tolerance") * norm0;
    m.summary["radiation_H_sq"] = fmt(rad.data_h_sq);
    m.summary["data_H_sq"] = fmt(norm0);
    m.summary["mismatch_final"] = fmt(last);
    m.summary["mismatch_over_norm"] = fmt(norm0 > 0.0 ? last / norm0 : 0.0);
    m.check("mismatch decreasing over the final decade", rad.decreasing(0), rad.mismatch[0].front(), last);
    m.check("final mismatch small", last <= bound, last, bound);

    std::vector<double> times;
    for (double t : cfg.reals("decomposition.times"))
        if (t > 0.0 && t < t_end)
            times.push_back(t);
    if (times.empty())
        return;
    ReportOptions ro;
    ro.extract = extract_options(cfg);
    ro.delta = cfg.real("radiation.delta");
    const auto rep = decomposition_report(tr, times, ro, workers);
    out.json("decomposition.json", to_json(rep));
    const auto& lastentry = rep.entries.back();
    m.summary["branch"] = lastentry.branch;
    m.summary["bubbles"] = std::to_string(lastentry.bubbles.bubbles.size());
    if (predicted == "scatter")
        for (const auto& e : rep.entries)
            m.check("t=" + fmt(e.bubbles.time) + ": sub-threshold data scatters", e.branch == "scatter",
                    static_cast<double>(e.bubbles.bubbles.size()), 0.0, e.branch);
    for (const auto& e : rep.entries)
        m.check("t=" + fmt(e.bubbles.time) + ": single-bubble rule", e.single_bubble_rule, e.cone_grad_sq,
                2.0 * profile::kGradSq);
}

inline void scenario_decomposition(const ScenarioConfig& cfg, ArtifactSink& out, RunManifest& m, unsigned workers)
{
    const auto c = solver_config(cfg);
    const auto u0 = initial_data(cfg, c.grid);
    const auto opt = extract_options(cfg);
    const auto d = extract_bubbles(u0, opt);
    nlohmann::json j;
    auto& bs = j["bubbles"] = nlohmann::json::array();
    for (const auto& b : d.bubbles)
        bs.push_back({{"sign", b.sign}, {"scale", b.scale}, {"estimate", b.estimate}, {"refined", b.refined}});
    j["residual_H"] = std::sqrt(d.residual_h_sq);
    j["state_energy"] = d.state_energy;
    j["fitted_energy"] = d.fitted_energy;
    j["flags"] = d.flags;
    j["separated"] = d.separated();
    out.json("bubbles.json", j);
    m.summary["bubbles"] = std::to_string(d.bubbles.size());
    m.summary["residual_fraction"] = fmt(d.residual_fraction());
    m.summary["state_energy"] = fmt(d.state_energy);

    std::vector<BubbleSpec> expected;
    if (cfg.text("data.kind") == "superposition")
        expected = parse_bubbles(cfg);
    else if (cfg.text("data.kind") == "ground-state" && std::abs(cfg.real("data.amplitude")) == 1.0)
        expected = {{cfg.real("data.amplitude") > 0.0 ? 1 : -1, cfg.real("data.scale")}};
    if (!expected.empty()) {
        std::sort(expected.begin(), expected.end(), [](auto& a, auto& b) { return a.scale < b.scale; });
        m.check("bubble count", d.bubbles.size() == expected.size(), static_cast<double>(d.bubbles.size()),
                static_cast<double>(expected.size()));
        const double tol = cfg.real("decomposition.scale_tol");
        for (std::size_t k = 0; k < std::min(expected.size(), d.bubbles.size()); ++k) {
            const double rel = std::abs(d.bubbles[k].scale / expected[k].scale - 1.0);
            m.check("bubble " + std::to_string(k) + " sign", d.bubbles[k].sign == expected[k].sign,
                    d.bubbles[k].sign, expected[k].sign);
            m.check("bubble " + std::to_string(k) + " scale", rel <= tol, rel, tol);
        }
        const double rtol = cfg.real("decomposition.residual_tol");
        m.check("residual small", d.residual_fraction() <= rtol, d.residual_fraction(), rtol);
        const double quant = static_cast<double>(expected.size()) * profile::kEnergy;
        const double rel = std::abs(d.state_energy / quant - 1.0);
        m.check("energy quantization J E(W)", rel <= cfg.real("decomposition.energy_tol"), rel,
                cfg.real("decomposition.energy_tol"));
        if (expected.size() > 1)
            m.check("bubbles separated", d.separated(), 0.0, opt.separation);
    }

    const double a = cfg.real("decomposition.blowup_amplitude");
    if (a <= 0.0)
        return;
    SolverConfig bc = c;
    bc.grid = RadialGrid::with_spacing(c.grid->spacing(), std::min(c.grid->r_max(), 30.0));
    bc.mode = Mode::cubic;
    bc.t_max = std::max(c.t_max, 20.0);
    bc.snapshot_interval = std::min(c.snapshot_interval, 0.01);
    const auto tr = evolve(ground_state_multiple(a, 1.0, bc.grid), bc);
    m.record("blow-up run a=" + fmt(a), tr);
    m.check("blow-up run flags blow-up", tr.blew_up(), tr.termination.flag_time, bc.t_max);
    if (!tr.blew_up())
        return;
    const double t_plus = secant_blowup_time(tr).value_or(tr.termination.flag_time);
    std::vector<double> times;
    for (double t : cfg.reals("decomposition.times"))
        if (t > 0.0 && t < t_plus)
            times.push_back(t);
    if (times.empty())
        return;
    ReportOptions ro;
    ro.extract = opt;
    ro.delta = cfg.real("decomposition.delta");
    const auto rep = decomposition_report(tr, times, ro, workers);
    out.json("blowup_decomposition.json", to_json(rep));
    m.summary["t_plus"] = fmt(t_plus);
    std::vector<SingularPart> parts(times.size());
    parallel_for(times.size(), workers,
                 [&](std::size_t k) { parts[k] = singular_part(tr, times[k], t_plus, ro.delta); });
    for (std::size_t k = 0; k < times.size(); ++k) {
        const std::string tag = "t=" + fmt(times[k]);
        m.check(tag + ": singular part supported in the cone", parts[k].ok(), parts[k].exterior_h_sq,
                parts[k].tolerance);
        m.check(tag + ": single-bubble rule", rep.entries[k].single_bubble_rule, rep.entries[k].cone_grad_sq,
                2.0 * profile::kGradSq);
    }
}

inline void scenario_lemma_suite(const ScenarioConfig& cfg, ArtifactSink& out, RunManifest& m, unsigned workers)
{
    const auto g = RadialGrid::with_spacing(cfg.real("lemma.h"), cfg.real("lemma.r_max"));
    const std::uint64_t seed = cfg.seed();
    const auto fresh = static_cast<std::size_t>(cfg.integer("lemma.fresh"));

    // Hardy-type inequalities on the bump corpus plus W
    const auto bumps = random_bumps(seed, static_cast<std::size_t>(cfg.integer("lemma.hardy_corpus")), 15.0);
    std::vector<HardyReport> hardy(bumps.size() + 1);
    parallel_for(hardy.size(), workers, [&](std::size_t k) {
        if (k < bumps.size()) {
            hardy[k] = hardy_suite(make_bump(g, bumps[k]), 0.0, g->r_max());
        } else {
            const auto w = ground_state_multiple(1.0, 1.0, g);
            hardy[k] = hardy_suite(w.position, 0.0, g->r_max(), w.tail);
        }
    });
    std::vector<std::vector<double>> rows;
    std::size_t failures = 0;
    for (std::size_t k = 0; k < hardy.size(); ++k) {
        const auto& h = hardy[k];
        failures += h.all_hold() ? 0 : 1;
        rows.push_back({static_cast<double>(k), h.margin_pointwise, h.margin_hardy, h.margin_two_point,
                        h.margin_local_sup, h.slack, h.all_hold() ? 1.0 : 0.0});
    }
    out.csv("hardy.csv", {"member", "margin_pointwise", "margin_hardy", "margin_two_point", "margin_local_sup", "slack",
                          "holds"},
            rows);
    m.summary["hardy_failures"] = std::to_string(failures);
    m.check("Hardy suite: zero failures (last member is W)", failures == 0, static_cast<double>(failures), 0.0);

    // pointwise constant C_L
    const auto calib = sub_threshold_corpus(g, seed + 1, static_cast<std::size_t>(cfg.integer("lemma.pointwise_corpus")));
    const double c_l = calibrate_pointwise_constant(calib);
    std::size_t pointwise_bad = 0;
    for (const auto& s : sub_threshold_corpus(g, seed + 2, fresh))
        pointwise_bad += pointwise_bound_check(s, 0.0, g->r_max(), c_l).ok() ? 0 : 1;
    m.c_l = {c_l, "1.1 x max ratio over " + std::to_string(calib.size()) + " sub-threshold states, seed " +
                      std::to_string(seed + 1)};
    m.check("pointwise bound with C_L on fresh states", pointwise_bad == 0, static_cast<double>(pointwise_bad), 0.0);

    // coercivity constant c
    const auto trapped =
        trapped_corpus(g, seed + 3, static_cast<std::size_t>(cfg.integer("lemma.coercivity_corpus")));
    const double c = calibrate_coercivity(trapped);
    std::size_t coercive_bad = 0;
    for (const auto& f : trapped_corpus(g, seed + 4, fresh))
        coercive_bad += variational_check(f, c).ok() ? 0 : 1;
    m.c = {c, "0.9 x min coercivity ratio over " + std::to_string(trapped.size()) + " trapped fields, seed " +
                  std::to_string(seed + 3)};
    m.check("variational bounds with c on fresh fields", coercive_bad == 0, static_cast<double>(coercive_bad), 0.0);

    // flux constant c0 on the static ground state
    SolverConfig sc;
    sc.grid = g;
    sc.dt = 0.5 * g->spacing();
    sc.t_max = 5.0;
    sc.snapshot_interval = 0.5;
    const auto tr = evolve(ground_state_multiple(1.0, 1.0, g), sc);
    m.record("flux calibration", tr);
    const double c0 = calibrate_flux_constant(tr, {6.0, Orientation::backward, 0.5, 0.0}, 0.0, 5.0);
    m.c0 = {c0, "recalibrated on static W, backward cone apex 6, t in [0, 5]"};
    m.check("flux constant c0 = 1/sqrt(2)", std::abs(c0 - kFluxConstant) <= 1e-4, c0, kFluxConstant);

    nlohmann::json j;
    j["C_L"] = c_l;
    j["c"] = c;
    j["c0"] = c0;
    j["hardy_failures"] = failures;
    j["pointwise_violations"] = pointwise_bad;
    j["variational_violations"] = coercive_bad;
    out.json("constants.json", j);
}

// ---------------------------------------------------------------------------
// driver

/// Runs one scenario into cfg's output.dir. Config problems found before
/// any compute throw ConfigIssues; later failures are recorded in the
/// manifest, whose artifacts so far are kept.
inline RunManifest run_scenario(const ScenarioConfig& cfg, unsigned workers = worker_count())
{
    RunManifest m;
    m.scenario = cfg.scenario();
    m.seed = cfg.seed();
    m.config = cfg.values();
    if (cfg.text("data.kind") == "file" && !std::filesystem::exists(cfg.text("data.file")))
        throw ConfigIssues({"data.file: '" + cfg.text("data.file") + "' does not exist"});

    const std::filesystem::path dir = cfg.text("output.dir");
    ArtifactSink out(dir, m);
    {
        auto os = out.open("config.ini");
        os << cfg.echo(false);
    }
    const auto start = std::chrono::steady_clock::now();
    try {
        const auto& s = m.scenario;
        if (s == "static-w")
            scenario_static_w(cfg, out, m, workers);
        else if (s == "trichotomy")
            scenario_trichotomy(cfg, out, m, workers);
        else if (s == "standing-wave-convergence")
            scenario_standing_wave(cfg, out, m, workers);
        else if (s == "channels")
            scenario_channels(cfg, out, m, workers);
        else if (s == "self-similar-probe")
            scenario_self_similar(cfg, out, m, workers);
        else if (s == "global-bubble")
            scenario_global_bubble(cfg, out, m, workers);
        else if (s == "decomposition-demo")
            scenario_decomposition(cfg, out, m, workers);
        else
            scenario_lemma_suite(cfg, out, m, workers);
        m.status = m.all_passed() ? RunStatus::ok : RunStatus::invariant_failure;
    } catch (const ConfigIssues&) {
        throw;
    } catch (const std::exception& e) {
        m.status = RunStatus::runtime_failure;
        m.error = e.what();
    }
    m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(dir, m);
    return m;
}

} // namespace critwave::lab
