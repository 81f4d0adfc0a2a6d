#ifndef CUSPLAB_GEOMETRY_HPP
#define CUSPLAB_GEOMETRY_HPP

#include <cmath>
#include <optional>
#include <string>

#include "errors.hpp"

namespace cusplab {

/// Gap between the rough body and the flat wall near the contact point.
///
/// The lower body surface is x3 = h + r^(1+alpha) for r <= 2 r0. A gap height
/// h is admissible when h + r0^(1+alpha) <= d0 < r0; only then does the test
/// field vanish on the container wall.
struct CuspGeometry {
    double alpha = 0.5;
    double r0 = 0.5;
    double d0 = 0.4;

    static CuspGeometry make(double alpha, double r0, double d0)
    {
        CuspGeometry g{alpha, r0, d0};
        g.validate();
        return g;
    }

    void validate() const
    {
        detail::require(std::isfinite(alpha) && alpha > 0.0 && alpha <= 1.0,
                        "geometry.alpha must lie in (0, 1]");
        detail::require(std::isfinite(r0) && r0 > 0.0 && r0 < 1.0, "geometry.r0 must lie in (0, 1)");
        detail::require(std::isfinite(d0) && d0 > 0.0, "geometry.d0 must be positive");
        detail::require(d0 < r0, "geometry.d0 must be smaller than geometry.r0");
        detail::require(max_admissible_h() > 0.0,
                        "geometry admits no gap height: r0^(1+alpha) >= d0");
    }

    double exponent() const noexcept { return 1.0 + alpha; }

    /// Largest h with h + r0^(1+alpha) <= d0.
    double max_admissible_h() const noexcept { return d0 - std::pow(r0, exponent()); }

    bool admits(double h) const noexcept
    {
        return std::isfinite(h) && h > 0.0 && h + std::pow(r0, exponent()) <= d0;
    }

    void require_admissible(double h) const
    {
        if (!admits(h)) {
            throw ValidationError("gap height h=" + std::to_string(h) +
                                  " is not admissible (need 0 < h <= " +
                                  std::to_string(max_admissible_h()) + ")");
        }
    }
};

/// Meridian-plane point (r, x3) of the axisymmetric gap.
struct GapPoint {
    double r = 0.0;
    double x3 = 0.0;
};

/// psi(r) = h + r^(1+alpha) with its first two derivatives.
///
/// For alpha < 1 the second derivative blows up at r = 0; it is then left
/// empty. r * psi''(r) = alpha (1+alpha) r^alpha is always finite and is what
/// the field formulas consume.
struct Profile {
    double value = 0.0;
    double first = 0.0;
    std::optional<double> second;
    double r_second = 0.0;

    bool second_singular() const noexcept { return !second.has_value(); }
};

namespace detail {

// Unchecked evaluation; callers validate.
inline Profile profile(double r, double h, double alpha) noexcept
{
    Profile p;
    const double ra = std::pow(r, alpha);  // r^alpha, 0 at r = 0
    p.value = h + r * ra;
    p.first = (1.0 + alpha) * ra;
    p.r_second = alpha * (1.0 + alpha) * ra;
    if (r > 0.0) {
        p.second = alpha * (1.0 + alpha) * ra / r;
    } else if (alpha == 1.0) {
        p.second = 2.0;
    }
    return p;
}

} // namespace detail

inline Profile psi(double r, double h, const CuspGeometry& geom)
{
    detail::require(std::isfinite(r) && r >= 0.0, "psi: r must be non-negative");
    detail::require(std::isfinite(h) && h >= 0.0, "psi: h must be non-negative");
    return detail::profile(r, h, geom.alpha);
}

/// Membership in the cusp region: 0 <= r < r0 and 0 <= x3 <= h + r^(1+alpha).
inline bool in_cusp(GapPoint p, double h, const CuspGeometry& geom)
{
    geom.require_admissible(h);
    if (!(p.r >= 0.0 && p.r < geom.r0)) return false;
    if (!(p.x3 >= 0.0)) return false;
    return p.x3 <= h + std::pow(p.r, geom.exponent());
}

} // namespace cusplab

#endif // CUSPLAB_GEOMETRY_HPP
