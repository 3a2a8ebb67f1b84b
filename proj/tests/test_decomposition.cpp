#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <gtest/gtest.h>

#include "critwave/corpus.hpp"
#include "critwave/decomposition.hpp"

using namespace critwave;

namespace {

using boost::math::quadrature::gauss_kronrod;

double quad(auto f, double a, double b)
{
    return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

RadialState superpose(RadialState a, const RadialState& b)
{
    for (std::size_t i = 0; i < a.position.size(); ++i) {
        a.position[i] += b.position[i];
        a.velocity[i] += b.velocity[i];
    }
    a.tail = a.tail + b.tail;
    return a;
}

/// f(r) = 2 (1 + r) e^{-r^2}, g(r) = r e^{-r^2}, rescaled to (f_mu, g_mu).
RadialState test_profile(const GridPtr& g, double mu)
{
    RadialField f(g, Form::u), v(g, Form::u);
    for (std::size_t i = 0; i < g->size(); ++i) {
        const double x = (*g)[i] / mu;
        f[i] = 2.0 * (1.0 + x) * std::exp(-x * x) / mu;
        v[i] = x * std::exp(-x * x) / (mu * mu);
    }
    return RadialState(f, v, 0.0);
}

RadialState scaled_bump(const GridPtr& g, double center, double width, double h_norm)
{
    BumpSpec b;
    b.shells.push_back({1.0, center, width});
    RadialState s(make_bump(g, b), RadialField(g, Form::u), 0.0);
    const double k = h_norm / std::sqrt(h_norm_sq(s));
    for (std::size_t i = 0; i < g->size(); ++i)
        s.position[i] *= k;
    return s;
}

SolverConfig solver(double h, double r_max, Mode mode, double t_max)
{
    SolverConfig c;
    c.grid = RadialGrid::with_spacing(h, r_max);
    c.dt = 0.5 * h;
    c.mode = mode;
    c.t_max = t_max;
    c.snapshot_interval = 0.5;
    return c;
}

} // namespace

TEST(ScaleEstimator, ThresholdMatchesQuadrature)
{
    const double oracle = quad([](double r) { return std::pow(profile::w_prime(r), 2) * r * r * r; }, 0.0, 1.0);
    EXPECT_NEAR(kScaleThreshold, oracle, 1e-14);
}

TEST(ScaleEstimator, PeakRadiusMaximizesGradientMass)
{
    const auto [r, v] = boost::math::tools::brent_find_minima(
        [](double x) { return -std::pow(profile::w_prime(x), 2) * x * x * x; }, 0.5, 20.0, 50);
    EXPECT_NEAR(profile::peak_radius(), r, 1e-7);
    (void)v;
}

TEST(ScaleEstimator, RecoversGroundStateScale)
{
    const auto g = RadialGrid::with_spacing(0.0025, 200.0);
    for (double lam : {0.05, 0.2, 1.0, 5.0}) {
        const auto est = scale_estimator(ground_state_multiple(1.0, lam, g));
        ASSERT_TRUE(est);
        EXPECT_NEAR(*est / lam, 1.0, 1e-3) << lam;
    }
}

TEST(ScaleEstimator, SignInvariant)
{
    const auto g = RadialGrid::with_spacing(0.01, 50.0);
    auto a = test_profile(g, 1.0);
    const auto plus = scale_estimator(a);
    for (std::size_t i = 0; i < g->size(); ++i) {
        a.position[i] = -a.position[i];
        a.velocity[i] = -a.velocity[i];
    }
    const auto minus = scale_estimator(a);
    ASSERT_TRUE(plus && minus);
    EXPECT_EQ(*plus, *minus);
}

TEST(ScaleEstimator, ScalingEquivariant)
{
    const auto g = RadialGrid::with_spacing(0.004, 60.0);
    const auto base = scale_estimator(test_profile(g, 1.0));
    ASSERT_TRUE(base);
    for (double mu : {0.25, 0.5, 2.0, 4.0}) {
        const auto est = scale_estimator(test_profile(g, mu));
        ASSERT_TRUE(est);
        EXPECT_NEAR(*est / (mu * *base), 1.0, 0.01) << mu;
    }
}

TEST(ScaleEstimator, SmallPerturbation)
{
    const auto g = RadialGrid::with_spacing(0.005, 100.0);
    const auto w = ground_state_multiple(1.0, 1.0, g);
    const auto bump = scaled_bump(g, 3.0, 1.0, 0.045 * std::sqrt(profile::kGradSq));
    const auto est = scale_estimator(superpose(w, bump));
    ASSERT_TRUE(est);
    EXPECT_NEAR(*est, 1.0, 0.02);
}

TEST(ScaleEstimator, InsufficientNormHasNoScale)
{
    const auto g = RadialGrid::with_spacing(0.01, 20.0);
    EXPECT_FALSE(scale_estimator(scaled_bump(g, 0.0, 1.0, 0.05)));
    EXPECT_FALSE(scale_estimator(RadialState(RadialField(g, Form::u), RadialField(g, Form::u), 0.0)));
}

TEST(Cutoff, Profile)
{
    EXPECT_EQ(cutoff(0.4, 0.25), 0.0);
    EXPECT_EQ(cutoff(0.5, 0.25), 0.0);
    EXPECT_EQ(cutoff(0.75, 0.25), 1.0);
    EXPECT_EQ(cutoff(2.0, 0.25), 1.0);
    double prev = 0.0;
    for (double x = 0.5; x <= 0.75; x += 0.005) {
        const double c = cutoff(x, 0.25);
        EXPECT_GE(c, prev);
        EXPECT_LE(c, 1.0);
        prev = c;
    }
}

TEST(ExtractBubbles, SingleSignedBubbles)
{
    const auto g = RadialGrid::with_spacing(0.0025, 200.0);
    for (double lam : {0.05, 0.2, 1.0, 5.0})
        for (int sign : {1, -1}) {
            const auto d = extract_bubbles(ground_state_multiple(sign, lam, g));
            ASSERT_EQ(d.bubbles.size(), 1u) << lam;
            EXPECT_EQ(d.bubbles[0].sign, sign);
            EXPECT_NEAR(d.bubbles[0].scale / lam, 1.0, 0.02);
            EXPECT_LE(d.residual_fraction(), 0.03);
        }
}

TEST(ExtractBubbles, ZeroStateHasNoBubbles)
{
    const auto g = RadialGrid::with_spacing(0.01, 20.0);
    const auto d = extract_bubbles(RadialState(RadialField(g, Form::u), RadialField(g, Form::u), 0.0));
    EXPECT_TRUE(d.bubbles.empty());
    EXPECT_EQ(d.residual_h_sq, 0.0);
}

TEST(ExtractBubbles, TwoSeparatedOppositeBubbles)
{
    const auto g = RadialGrid::with_spacing(0.0025, 200.0);
    const auto a = superpose(ground_state_multiple(1.0, 0.05, g), ground_state_multiple(-1.0, 5.0, g));
    const auto d = extract_bubbles(a);
    ASSERT_EQ(d.bubbles.size(), 2u);
    EXPECT_EQ(d.bubbles[0].sign, 1);
    EXPECT_EQ(d.bubbles[1].sign, -1);
    EXPECT_NEAR(d.bubbles[0].scale / 0.05, 1.0, 0.02);
    EXPECT_NEAR(d.bubbles[1].scale / 5.0, 1.0, 0.02);
    EXPECT_TRUE(d.separated());
    EXPECT_LE(d.residual_fraction(), 0.03);
    EXPECT_NEAR(energy(a).total / (2.0 * profile::kEnergy), 1.0, 0.05);
}

TEST(ExtractBubbles, OverlappingOppositeBubblesAreRecovered)
{
    const auto g = RadialGrid::with_spacing(0.01, 200.0);
    const auto a = superpose(ground_state_multiple(1.0, 0.2, g), ground_state_multiple(-1.0, 5.0, g));
    const auto d = extract_bubbles(a);
    ASSERT_EQ(d.bubbles.size(), 2u);
    EXPECT_NEAR(d.bubbles[0].scale / 0.2, 1.0, 1e-3);
    EXPECT_NEAR(d.bubbles[1].scale / 5.0, 1.0, 1e-3);
    EXPECT_TRUE(d.bubbles[0].refined && d.bubbles[1].refined);
    EXPECT_LE(d.residual_fraction(), 1e-3);
}

TEST(ExtractBubbles, TwoBubbleEnergyMatchesCrossTermOracle)
{
    // E(A - B) with A = W_a, B = W_b: 2 E(W) - int A'B' r^3
    //   + int (A^3 B + A B^3 - 3/2 A^2 B^2) r^3.
    const double a = 0.05, b = 5.0;
    auto A = [&](double r) { return profile::w_scaled(r, a); };
    auto B = [&](double r) { return profile::w_scaled(r, b); };
    auto cross = [&](auto f) { return quad(f, 0.0, 1.0) + quad(f, 1.0, 50.0) + quad(f, 50.0, 1e5); };
    const double grad = cross([&](double r) {
        return profile::w_scaled_prime(r, a) * profile::w_scaled_prime(r, b) * r * r * r;
    });
    const double quart = cross([&](double r) {
        const double x = A(r), y = B(r);
        return (x * x * x * y + x * y * y * y - 1.5 * x * x * y * y) * r * r * r;
    });
    const double oracle = 2.0 * profile::kEnergy - grad + quart;

    const auto g = RadialGrid::with_spacing(0.0025, 200.0);
    const auto s = superpose(ground_state_multiple(1.0, a, g), ground_state_multiple(-1.0, b, g));
    EXPECT_NEAR(energy(s).total, oracle, 2e-3 * oracle);
    EXPECT_GT(quart, 0.0);
}

TEST(ExtractBubbles, SingleBubbleRuleBelowTwiceGroundGradient)
{
    const auto g = RadialGrid::with_spacing(0.005, 100.0);
    const auto w = ground_state_multiple(1.0, 1.0, g);
    for (double frac : {0.2, 0.5, 0.8}) {
        const auto s = superpose(w, scaled_bump(g, 8.0, 1.5, std::sqrt(frac * profile::kGradSq)));
        const auto d = extract_bubbles(s);
        EXPECT_LE(d.bubbles.size(), 1u) << frac;
    }
}

TEST(ExtractBubbles, SubThresholdResidualStops)
{
    const auto g = RadialGrid::with_spacing(0.01, 30.0);
    const auto d = extract_bubbles(scaled_bump(g, 0.0, 1.0, std::sqrt(0.15 * profile::kGradSq)));
    EXPECT_TRUE(d.bubbles.empty());
}

TEST(ExtractBubbles, ScalesAscending)
{
    const auto g = RadialGrid::with_spacing(0.0025, 200.0);
    const auto a = superpose(ground_state_multiple(-1.0, 2.0, g), ground_state_multiple(1.0, 0.02, g));
    const auto d = extract_bubbles(a);
    ASSERT_EQ(d.bubbles.size(), 2u);
    EXPECT_LT(d.bubbles[0].scale, d.bubbles[1].scale);
    EXPECT_EQ(d.bubbles[0].sign, 1);
}

TEST(SingularPart, LinearTrajectoryHasNoExterior)
{
    auto c = solver(0.02, 30.0, Mode::linear, 4.0);
    const auto tr = evolve(scaled_bump(c.grid, 3.0, 1.0, 1.0), c);
    const auto sp = singular_part(tr, 2.0, 6.0, 0.25);
    EXPECT_TRUE(sp.ok());
    EXPECT_LE(sp.exterior_h_sq, 1e-20);
}

TEST(SingularPart, NeedsFiniteBlowupTime)
{
    auto c = solver(0.02, 20.0, Mode::cubic, 1.0);
    const auto tr = evolve(ground_state_multiple(1.0, 1.0, c.grid), c);
    EXPECT_THROW(singular_part(tr, 0.5, std::numeric_limits<double>::infinity(), 0.25), ConfigError);
    EXPECT_THROW(singular_part(tr, 0.5, 2.0, 0.75), ConfigError);
}

TEST(SingularPart, BlowupRunLocalizesInsideCone)
{
    auto c = solver(0.01, 30.0, Mode::cubic, 20.0);
    c.snapshot_interval = 0.01;
    const auto tr = evolve(ground_state_multiple(1.2, 1.0, c.grid), c);
    ASSERT_TRUE(tr.blew_up());
    const auto t_plus = secant_blowup_time(tr);
    ASSERT_TRUE(t_plus);
    for (double t : {1.0, 2.0, 2.3}) {
        const auto sp = singular_part(tr, t, *t_plus, 0.25);
        EXPECT_TRUE(sp.ok()) << t << ": " << sp.exterior_h_sq << " > " << sp.tolerance;
        EXPECT_GT(h_norm_sq(sp.singular), 0.0);
    }
}

TEST(SelfSimilar, SecantBlowupTimeIsExactForInversePower)
{
    auto c = solver(0.01, 5.0, Mode::cubic, 1.0);
    Trajectory tr;
    tr.config = c;
    tr.termination.kind = Termination::blowup;
    for (double t : {0.0, 0.5, 0.8, 0.9}) {
        RadialField f(c.grid, Form::u);
        for (std::size_t i = 0; i < c.grid->size(); ++i)
            f[i] = 1.3 / (1.0 - t);
        tr.snapshots.emplace_back(f, RadialField(c.grid, Form::u), t);
    }
    const auto t_plus = secant_blowup_time(tr);
    ASSERT_TRUE(t_plus);
    EXPECT_NEAR(*t_plus, 1.0, 1e-12);
}

TEST(SelfSimilar, ScaleRatioDecreasesOnBlowupRun)
{
    auto c = solver(0.005, 30.0, Mode::cubic, 20.0);
    c.snapshot_interval = 0.01;
    const auto tr = evolve(ground_state_multiple(1.2, 1.0, c.grid), c);
    const auto t_plus = secant_blowup_time(tr);
    ASSERT_TRUE(t_plus);
    EXPECT_NEAR(*t_plus, 2.338, 0.003);
    const auto st = self_similar_trend(tr, *t_plus);
    ASSERT_GE(st.times.size(), 20u);
    EXPECT_TRUE(st.ratio_non_increasing());
    // band energy of u = sqrt(2) / (T - t) on [tau/2, tau]
    EXPECT_NEAR(st.band.back(), 39.0 / 32.0, 0.06);
}

TEST(Radiation, ZeroTrajectoryHasNoRadiation)
{
    auto c = solver(0.05, 20.0, Mode::cubic, 5.0);
    const auto tr = evolve(RadialState(RadialField(c.grid, Form::u), RadialField(c.grid, Form::u), 0.0), c);
    const auto rad = radiation_extract(tr, 5.0, 0.25);
    EXPECT_EQ(rad.data_h_sq, 0.0);
    for (double m : rad.mismatch[0])
        EXPECT_EQ(m, 0.0);
}

TEST(Radiation, LinearTrajectoryIsItsOwnRadiation)
{
    auto c = solver(0.02, 70.0, Mode::linear, 30.0);
    const auto data = scaled_bump(c.grid, 0.0, 1.0, 1.0);
    const auto tr = evolve(data, c);
    const auto rad = radiation_extract(tr, 30.0, 0.2, {5.0});
    // u - v_L is the free wave through the truncated interior, which carries
    // only the 4d tail and leaves r >= t - 5 before T_probe
    EXPECT_NEAR(rad.data_h_sq, 1.0, 0.01);
    EXPECT_TRUE(rad.decreasing(0, 1e-3 * rad.mismatch[0].front()));
    EXPECT_LE(rad.mismatch[0].front(), 0.01);
    EXPECT_LE(rad.mismatch[0].back(), 1e-12);
}

TEST(Radiation, SmallDataMismatchDecays)
{
    auto c = solver(0.02, 70.0, Mode::cubic, 50.0);
    BumpSpec b;
    b.shells.push_back({0.5, 0.0, 1.0});
    const RadialState u0(make_bump(c.grid, b), RadialField(c.grid, Form::u), 0.0);
    const auto tr = evolve(u0, c);
    ASSERT_FALSE(tr.blew_up());
    const auto rad = radiation_extract(tr, 50.0, 0.2, {5.0}, 5.0);
    EXPECT_TRUE(rad.decreasing(0));
    EXPECT_LT(rad.mismatch[0].back(), 1e-2 * h_norm_sq(u0));
    EXPECT_LE(rad.data_h_sq, 1.01 * h_norm_sq(u0));
}

TEST(Radiation, SmallGridIsReported)
{
    auto c = solver(0.02, 50.0, Mode::linear, 30.0);
    const auto tr = evolve(scaled_bump(c.grid, 0.0, 1.0, 1.0), c);
    EXPECT_THROW(radiation_extract(tr, 30.0, 0.05), DiagnosticError);
}

TEST(Radiation, NeedsLongEnoughTrajectory)
{
    auto c = solver(0.05, 20.0, Mode::linear, 2.0);
    const auto tr = evolve(scaled_bump(c.grid, 0.0, 1.0, 0.5), c);
    EXPECT_THROW(radiation_extract(tr, 5.0, 0.25), DiagnosticError);
}

TEST(Report, ZeroTrajectoryGivesEmptyReport)
{
    Trajectory tr;
    EXPECT_TRUE(decomposition_report(tr, {1.0}).entries.empty());
}

TEST(Report, SubThresholdRunScatters)
{
    auto c = solver(0.02, 70.0, Mode::cubic, 40.0);
    const auto tr = evolve(scaled_bump(c.grid, 0.0, 1.0, 0.7), c);
    const auto rep = decomposition_report(tr, {10.0, 20.0, 30.0});
    ASSERT_EQ(rep.entries.size(), 3u);
    EXPECT_FALSE(rep.t_plus);
    for (const auto& e : rep.entries) {
        EXPECT_EQ(e.branch, "scatter");
        EXPECT_TRUE(e.bubbles.bubbles.empty());
        EXPECT_EQ(e.quantization_expected, 0.0);
    }
}

TEST(Report, StaticBubblePlusOutgoingWave)
{
    auto c = solver(0.02, 170.0, Mode::linear, 80.0);
    c.snapshot_interval = 1.0;
    const auto wave = evolve(scaled_bump(c.grid, 0.0, 1.0, 1.0), c);
    const auto w = ground_state_multiple(1.0, 1.0, c.grid);
    Trajectory tr = wave;
    for (auto& s : tr.snapshots) {
        const double t = s.time;
        s = superpose(as_u(s), w);
        s.time = t;
    }
    ReportOptions opt;
    opt.delta = 0.05;
    // the cut-off tail of W is carried into v_L as well and bounds the
    // interaction error
    const double interaction = h_norm_sq(detail::apply_cutoff(w, 80.0, opt.delta));
    EXPECT_LT(interaction, 0.4);
    const auto rep = decomposition_report(tr, {20.0, 30.0, 40.0}, opt);
    ASSERT_EQ(rep.entries.size(), 3u);
    for (const auto& e : rep.entries) {
        ASSERT_EQ(e.bubbles.bubbles.size(), 1u);
        EXPECT_EQ(e.branch, "bubble");
        EXPECT_NEAR(e.bubbles.bubbles[0].scale, 1.0, 0.02);
        EXPECT_NEAR(e.cone_energy, energy(w, 0.0, e.cone_radius).total, interaction);
        EXPECT_NEAR(e.radiation_h_sq, 1.0 + interaction, 0.02);
        EXPECT_EQ(e.quantization_expected, profile::kEnergy);
        EXPECT_TRUE(e.single_bubble_rule);
    }
    const auto j = to_json(rep);
    ASSERT_EQ(j.size(), 3u);
    for (const char* key : {"time", "bubbles", "residual_H", "cone_energy", "quantization_expected", "radiation_H", "branch"})
        EXPECT_TRUE(j[0].contains(key)) << key;
    EXPECT_EQ(j[0]["bubbles"][0]["sign"], 1);
}

TEST(Report, BlowupRunUsesSingularPart)
{
    auto c = solver(0.01, 30.0, Mode::cubic, 20.0);
    c.snapshot_interval = 0.01;
    const auto tr = evolve(ground_state_multiple(1.2, 1.0, c.grid), c);
    const auto rep = decomposition_report(tr, {1.0, 2.0}, {}, 2);
    ASSERT_TRUE(rep.t_plus);
    ASSERT_EQ(rep.entries.size(), 2u);
    for (const auto& e : rep.entries) {
        EXPECT_EQ(e.branch, "blow-up");
        EXPECT_NEAR(e.cone_radius, *rep.t_plus - e.bubbles.time, 1e-9);
        EXPECT_TRUE(e.single_bubble_rule);
    }
}
