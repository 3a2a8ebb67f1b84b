#pragma once

// Closed-form Aubin-Talenti profile W(r) = (1 + r^2/8)^{-1} and its rescalings
// W_l(r) = l^{-1} W(r/l). Integrals use the r^3 dr convention (the |S^3|
// factor is dropped everywhere in this library).

#include <cmath>

namespace critwave::profile {

inline double w(double r) noexcept { return 1.0 / (1.0 + r * r / 8.0); }

inline double w_prime(double r) noexcept
{
    const double d = 1.0 + r * r / 8.0;
    return -(r / 4.0) / (d * d);
}

inline double w_second(double r) noexcept
{
    const double d = 1.0 + r * r / 8.0;
    return -0.25 / (d * d) + (r * r / 8.0) / (d * d * d);
}

inline double w_scaled(double r, double scale) noexcept { return w(r / scale) / scale; }

inline double w_scaled_prime(double r, double scale) noexcept
{
    return w_prime(r / scale) / (scale * scale);
}

/// ||grad W||^2 = ||W||_{L^4}^4 = 16/3.
inline constexpr double kGradSq = 16.0 / 3.0;
/// E(W, 0) = kGradSq / 4.
inline constexpr double kEnergy = 4.0 / 3.0;

// With x = s^2/8 the integrals reduce to Beta-type integrals in y = 1 + x.

/// int_R^inf (W_l')^2 r^3 dr.
inline double grad_sq_tail(double radius, double scale = 1.0) noexcept
{
    const double y = 1.0 + (radius / scale) * (radius / scale) / 8.0;
    return 16.0 * (1.0 / y - 1.0 / (y * y) + 1.0 / (3.0 * y * y * y));
}

/// int_R^inf W_l^4 r^3 dr.
inline double fourth_tail(double radius, double scale = 1.0) noexcept
{
    const double y = 1.0 + (radius / scale) * (radius / scale) / 8.0;
    return 32.0 * (1.0 / (2.0 * y * y) - 1.0 / (3.0 * y * y * y));
}

/// int_0^R (W_l')^2 r^3 dr.
inline double grad_sq_inside(double radius, double scale = 1.0) noexcept
{
    return kGradSq - grad_sq_tail(radius, scale);
}

/// Radius maximizing r^3 (W')^2, i.e. sqrt(40/3).
inline double peak_radius() noexcept { return std::sqrt(40.0 / 3.0); }

} // namespace critwave::profile
