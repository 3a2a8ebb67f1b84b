#pragma once

// Seeded families of smooth radial bumps used as test corpora.
//
// A shell A [exp(-((r-c)/w)^2) + exp(-((r+c)/w)^2)] is even in r, hence a
// smooth radial function on R^4 for every center c >= 0.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "critwave/radial_field.hpp"

namespace critwave {

struct Shell {
    double amplitude = 1.0;
    double center = 0.0;
    double width = 1.0;
};

struct BumpSpec {
    std::vector<Shell> shells;
    /// Multiplies the sum of shells by cos(k r).
    double oscillation = 0.0;

    double operator()(double r) const noexcept
    {
        double v = 0.0;
        for (const auto& s : shells) {
            const double a = (r - s.center) / s.width;
            const double b = (r + s.center) / s.width;
            v += s.amplitude * (std::exp(-a * a) + std::exp(-b * b));
        }
        return oscillation != 0.0 ? v * std::cos(oscillation * r) : v;
    }

    /// Radius beyond which every shell is below e^{-36}.
    double support_radius() const noexcept
    {
        double r = 0.0;
        for (const auto& s : shells)
            r = std::max(r, s.center + 6.0 * s.width);
        return r;
    }
};

inline RadialField make_bump(const GridPtr& grid, const BumpSpec& spec, Form form = Form::u)
{
    auto f = RadialField::from_function(grid, spec, Form::u);
    if (form == Form::psi) {
        for (std::size_t i = 0; i < f.size(); ++i)
            f[i] *= (*grid)[i];
        return RadialField(grid, std::vector<double>(f.values().begin(), f.values().end()), Form::psi);
    }
    return f;
}

/// Random superpositions of one to three shells kept inside r <= extent.
inline std::vector<BumpSpec> random_bumps(std::uint64_t seed, std::size_t count, double extent)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<BumpSpec> out;
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        BumpSpec spec;
        const int shells = 1 + static_cast<int>(unit(rng) * 3.0) % 3;
        for (int k = 0; k < shells; ++k) {
            Shell s;
            s.width = 0.3 + 1.2 * unit(rng);
            s.center = unit(rng) * std::max(0.0, extent - 6.0 * s.width);
            s.amplitude = 2.0 * unit(rng) - 1.0;
            if (std::abs(s.amplitude) < 0.05)
                s.amplitude = 0.05;
            spec.shells.push_back(s);
        }
        if (unit(rng) < 0.3)
            spec.oscillation = 3.0 * unit(rng);
        out.push_back(std::move(spec));
    }
    return out;
}

} // namespace critwave
