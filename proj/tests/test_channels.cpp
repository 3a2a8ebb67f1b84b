#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "critwave/channels.hpp"

using namespace critwave;

namespace {

SolverConfig linear_config(double h, double r_max)
{
    SolverConfig c;
    c.grid = RadialGrid::with_spacing(h, r_max);
    c.dt = 0.5 * h;
    c.mode = Mode::linear;
    c.buffer_width = 2.0;
    return c;
}

ProfileSpec gaussian(double width)
{
    return shell_family({0.0}, {width}, {0.0}).front();
}

// Asymptotic exterior fraction of the free wave with data (e^{-r^2}, 0) or
// (0, e^{-r^2}) from its Hankel transform: with B(k) = k^p e^{-k^2/4}
// (p = 5/2 for (f,0), 3/2 for (0,g)) the outgoing radiation profile gives
// 1/2 +- (1/2) int int B(k) B(q) / (k + q) / (pi int B^2).
double hankel_fraction(double p, double sign)
{
    using boost::math::quadrature::gauss_kronrod;
    auto b = [p](double k) { return std::pow(k, p) * std::exp(-k * k / 4.0); };
    const double num = gauss_kronrod<double, 61>::integrate(
        [&](double k) {
            return b(k) * gauss_kronrod<double, 61>::integrate([&](double q) { return b(q) / (k + q); }, 0.0, 20.0,
                                                               10, 1e-13);
        },
        0.0, 20.0, 10, 1e-12);
    const double den = gauss_kronrod<double, 61>::integrate([&](double k) { return b(k) * b(k); }, 0.0, 20.0, 10, 1e-13);
    return 0.5 + sign * 0.5 * num / (std::numbers::pi * den);
}

} // namespace

TEST(ExteriorFraction, ZeroDataHasNoFraction)
{
    auto cfg = linear_config(0.05, 20.0);
    RadialState zero(RadialField(cfg.grid, Form::u), RadialField(cfg.grid, Form::u), 0.0);
    EXPECT_THROW(exterior_fraction_series(zero, cfg, 5.0), DiagnosticError);
}

TEST(ExteriorFraction, RequiresLinearMode)
{
    auto cfg = linear_config(0.05, 20.0);
    cfg.mode = Mode::cubic;
    const auto data = profile_data(cfg.grid, gaussian(1.0), Slot::position);
    EXPECT_THROW(exterior_fraction_series(data, cfg, 5.0), ConfigError);
    EXPECT_THROW(dispersive_decay_probe(data, cfg, 5.0), ConfigError);
    EXPECT_THROW(far_cone_vanishing(data, cfg, {1.0}, 5.0, 0.0), ConfigError);
}

TEST(ExteriorFraction, ClassifiesData)
{
    const auto g = RadialGrid::with_spacing(0.1, 10.0);
    const auto p = gaussian(1.0);
    EXPECT_EQ(classify(profile_data(g, p, Slot::position)), DataClass::f_zero);
    EXPECT_EQ(classify(profile_data(g, p, Slot::velocity)), DataClass::zero_g);
    auto both = profile_data(g, p, Slot::position);
    both.velocity = both.position;
    EXPECT_EQ(classify(both), DataClass::mixed);
    EXPECT_STREQ(to_string(DataClass::zero_g), "(0,g)");
}

TEST(ExteriorFraction, SeriesInvariants)
{
    for (double h : {0.04, 0.02}) {
        const auto p = random_bumps(7, 1, 6.0).front();
        const auto run = channel_run(bump_profile(p, "b"), h);
        const auto rep = exterior_fraction_series(profile_data(run.config.grid, bump_profile(p, "b"), Slot::position),
                                                  run.config, run.t_max);
        ASSERT_FALSE(rep.contaminated());
        EXPECT_EQ(rep.data_class, DataClass::f_zero);
        EXPECT_DOUBLE_EQ(rep.fraction.front(), 1.0);
        const double slack = quadrature_slack(*run.config.grid, run.config.grid->r_max());
        for (std::size_t k = 0; k < rep.times.size(); ++k) {
            EXPECT_GE(rep.fraction[k], 0.0);
            EXPECT_LE(rep.fraction[k], 1.0 + slack);
            // free-wave norm conservation within 0.2 h^2 (1 + t)
            EXPECT_NEAR(rep.total_h_sq[k] / rep.initial_norm_sq, 1.0, 0.2 * h * h * (1.0 + rep.times[k]));
        }
        EXPECT_NEAR(rep.horizon, run.t_max, run.config.dt);
    }
}

TEST(ExteriorFraction, GaussianFractionsMatchHankelOracle)
{
    const double f_oracle = hankel_fraction(2.5, +1.0);
    const double g_oracle = hankel_fraction(1.5, -1.0);
    EXPECT_GT(f_oracle, 0.5);
    EXPECT_LT(g_oracle, 0.5);
    const auto p = gaussian(1.0);
    const auto f = profile_fraction(p, Slot::position, 0.02);
    const auto g = profile_fraction(p, Slot::velocity, 0.02);
    EXPECT_EQ(g.data_class, DataClass::zero_g);
    // the horizon t ~ 58 leaves an O(1/t) approach of about 0.005
    EXPECT_NEAR(f.asymptotic_fraction, f_oracle, 0.01);
    EXPECT_NEAR(g.asymptotic_fraction, g_oracle, 0.01);
}

TEST(ExteriorFraction, FZeroCorpusStaysAboveHalf)
{
    for (const auto& p : default_f_corpus(3, 6)) {
        const auto rep = profile_fraction(p, Slot::position, 0.04);
        ASSERT_FALSE(rep.contaminated()) << p.label;
        EXPECT_GT(rep.asymptotic_fraction, 0.495) << p.label;
        EXPECT_GT(rep.late_minimum, 0.49) << p.label;
    }
}

TEST(ExteriorFraction, CalibrationIsStableUnderRefinement)
{
    const auto cal = calibrate_alpha0(default_f_corpus(11, 3), 0.04, 1);
    ASSERT_EQ(cal.members.size(), 3u);
    EXPECT_GT(cal.alpha(), 0.0);
    EXPECT_TRUE(cal.stable());
    for (const auto& m : cal.members)
        EXPECT_GE(m.fine, cal.alpha());
    const auto j = corpus_manifest(cal);
    EXPECT_DOUBLE_EQ(j["alpha0"].get<double>(), cal.alpha());
    EXPECT_EQ(j["f_corpus"].size(), 3u);
    EXPECT_TRUE(j["f_corpus"][0]["params"].contains("shell0.center"));
}

TEST(ExteriorFraction, BridgeProfilesBeatSingleShells)
{
    const auto shells = adversarial_search(shell_family({0.0, 3.0}, {1.0}, {0.0}), 0.04, 1);
    const auto bridges = adversarial_search(bridge_family({0.2}, {5.0, 10.0}, {0.0}), 0.02, 1);
    EXPECT_LT(bridges.best().fraction, shells.best().fraction);
    EXPECT_EQ(bridges.best().profile.params.at("outer"), 10.0);
    // the inner scale needs about ten nodes
    EXPECT_NEAR(bridges.best().fraction, bridge_fraction_prediction(std::log(10.0 / 0.2)), 0.03);
    for (std::size_t k = 1; k < shells.candidates.size(); ++k)
        EXPECT_LE(shells.candidates[k - 1].fraction, shells.candidates[k].fraction);
}

TEST(ExteriorFraction, BoxPredictionLimits)
{
    EXPECT_NEAR(bridge_fraction_prediction(1e-3), 0.5, 1e-3);
    double prev = 0.5;
    for (double ell : {1.0, 2.0, 4.0, 8.0, 16.0}) {
        const double v = bridge_fraction_prediction(ell);
        EXPECT_LT(v, prev);
        prev = v;
    }
    // large boxes lose (int |y| sech(y/2) / 2 dy) / ell = 8G / ell, G Catalan's constant
    const double catalan = 0.915965594177219015;
    EXPECT_NEAR(bridge_fraction_prediction(40.0, 2000), 8.0 * catalan / (2.0 * std::numbers::pi * 40.0), 2e-3);
    EXPECT_THROW(bridge_fraction_prediction(0.0), ConfigError);
}

TEST(ExteriorFraction, ContaminationAbortsTheSeries)
{
    auto cfg = linear_config(0.05, 12.0);
    cfg.buffer_width = 1.0;
    const auto rep = exterior_fraction_series(profile_data(cfg.grid, gaussian(1.0), Slot::position), cfg, 30.0);
    EXPECT_TRUE(rep.contaminated());
    EXPECT_LT(rep.horizon, 12.0);
    EXPECT_EQ(rep.times.size(), rep.fraction.size());
}

TEST(ExteriorFraction, CsvLayout)
{
    auto cfg = linear_config(0.1, 20.0);
    const auto rep = exterior_fraction_series(profile_data(cfg.grid, gaussian(1.0), Slot::velocity), cfg, 2.0);
    std::ostringstream os;
    write_channel_csv(os, rep);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,exterior_H_sq,total_H_sq,fraction");
    std::size_t rows = 0;
    while (std::getline(is, line))
        ++rows;
    EXPECT_EQ(rows, rep.times.size());
}

TEST(FarCone, ZeroDataGivesZero)
{
    auto cfg = linear_config(0.05, 20.0);
    RadialState zero(RadialField(cfg.grid, Form::u), RadialField(cfg.grid, Form::u), 0.0);
    const auto prof = far_cone_vanishing(zero, cfg, {0.0, 1.0}, 5.0, 2.0);
    for (double e : prof.energy)
        EXPECT_EQ(e, 0.0);
}

TEST(FarCone, ProfileDecreasesAndVanishesBeyondSupport)
{
    auto cfg = linear_config(0.02, 70.0);
    cfg.snapshot_interval = 0.5;
    const auto p = shell_family({2.0}, {0.5}, {0.0}).front();
    const auto prof = far_cone_vanishing(profile_data(cfg.grid, p, Slot::position), cfg,
                                         {0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0}, 60.0, 30.0);
    EXPECT_NE(prof.termination.kind, Termination::boundary_contamination);
    EXPECT_TRUE(prof.non_increasing());
    const double slack = quadrature_slack(*cfg.grid, cfg.grid->r_max());
    for (std::size_t k = 0; k < prof.ladder.size(); ++k)
        if (prof.ladder[k] > p.extent + 2.0 * cfg.grid->spacing())
            EXPECT_LE(prof.energy[k], slack);
    EXPECT_LT(prof.energy.back(), 1e-3 * prof.energy.front());
    EXPECT_THROW(far_cone_vanishing(profile_data(cfg.grid, p, Slot::position), cfg, {2.0, 1.0}, 5.0, 0.0),
                 ConfigError);
}

TEST(DispersiveDecay, ZeroDataStaysZero)
{
    auto cfg = linear_config(0.05, 20.0);
    RadialState zero(RadialField(cfg.grid, Form::u), RadialField(cfg.grid, Form::u), 0.0);
    const auto rep = dispersive_decay_probe(zero, cfg, 5.0);
    for (double v : rep.sup_u)
        EXPECT_EQ(v, 0.0);
}

TEST(DispersiveDecay, BumpDecaysLikeThreeHalves)
{
    auto cfg = linear_config(0.02, 110.0);
    cfg.snapshot_interval = 0.5;
    const auto p = shell_family({2.0}, {0.5}, {0.0}).front();
    const auto rep = dispersive_decay_probe(profile_data(cfg.grid, p, Slot::position), cfg, 100.0);
    EXPECT_NEAR(rep.exponent, -1.5, 0.2);
    EXPECT_LT(rep.band_lo, rep.exponent);
    EXPECT_GT(rep.band_hi, rep.exponent);
    // r u = psi -> 0 as well
    EXPECT_LT(rep.sup_psi.back(), 0.2 * rep.sup_psi.front());
}

TEST(DispersiveDecay, ShortHorizonIsRejected)
{
    auto cfg = linear_config(0.05, 20.0);
    cfg.snapshot_interval = 1.0;
    const auto p = shell_family({2.0}, {0.5}, {0.0}).front();
    EXPECT_THROW(dispersive_decay_probe(profile_data(cfg.grid, p, Slot::position), cfg, 4.0), DiagnosticError);
}

TEST(Workers, ParallelForRunsEveryIndexAndRethrows)
{
    std::vector<int> hits(50, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits)
        EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                     if (i == 7)
                         throw DiagnosticError("boom");
                 }),
                 DiagnosticError);
}
