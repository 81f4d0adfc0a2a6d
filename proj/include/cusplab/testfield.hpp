#ifndef CUSPLAB_TESTFIELD_HPP
#define CUSPLAB_TESTFIELD_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "errors.hpp"
#include "geometry.hpp"

namespace cusplab {

/// Phi(t) = t^2 (3 - 2t) with its first two derivatives.
struct ShapeCubic {
    double value = 0.0;
    double first = 0.0;
    double second = 0.0;
};

constexpr ShapeCubic phi_shape(double t) noexcept
{
    return {t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t), 6.0 - 12.0 * t};
}

/// Test field w_h = curl(phi_h e_theta) at one point, in cylindrical components.
///
/// The nine gradient entries are the non-trivial entries of grad w for an
/// axisymmetric swirl-free field; wr_over_r is the (theta, theta) entry.
struct FieldSample {
    double w_r = 0.0;
    double w_3 = 0.0;
    double dr_wr = 0.0;
    double d3_wr = 0.0;
    double dr_w3 = 0.0;
    double d3_w3 = 0.0;
    double wr_over_r = 0.0;
    double dh_wr = 0.0;
    double dh_w3 = 0.0;

    double divergence() const noexcept { return dr_wr + wr_over_r + d3_w3; }

    /// Magnitude scale of the three divergence terms, for relative checks.
    double divergence_scale() const noexcept
    {
        return std::abs(dr_wr) + std::abs(wr_over_r) + std::abs(d3_w3);
    }

    double magnitude() const noexcept { return std::hypot(w_r, w_3); }

    /// Frobenius norm of grad w.
    double gradient_norm() const noexcept
    {
        return std::sqrt(dr_wr * dr_wr + d3_wr * d3_wr + dr_w3 * dr_w3 + d3_w3 * d3_w3 +
                         wr_over_r * wr_over_r);
    }

    double dh_magnitude() const noexcept { return std::hypot(dh_wr, dh_w3); }
};

/// Stream-function jet: phi = (r/2) A(r, x3; h) and the derivatives of A the
/// field needs. rA_rr carries r * A_rr so that r * psi'' (finite at r = 0)
/// never has to be split.
struct StreamJet {
    double A = 0.0;
    double A_r = 0.0;
    double A_3 = 0.0;
    double rA_rr = 0.0;
    double A_33 = 0.0;
    double A_r3 = 0.0;
    double A_h = 0.0;
    double A_rh = 0.0;
    double A_3h = 0.0;
};

/// w_r = -(r/2) A_3, w_3 = (1/r) d_r(r^2 A / 2) = A + (r/2) A_r.
inline FieldSample field_from_stream(double r, const StreamJet& j) noexcept
{
    const double hr = 0.5 * r;
    FieldSample s;
    s.w_r = -hr * j.A_3;
    s.w_3 = j.A + hr * j.A_r;
    s.dr_wr = -0.5 * j.A_3 - hr * j.A_r3;
    s.d3_wr = -hr * j.A_33;
    s.wr_over_r = -0.5 * j.A_3;
    s.dr_w3 = 1.5 * j.A_r + 0.5 * j.rA_rr;
    s.d3_w3 = j.A_3 + hr * j.A_r3;
    s.dh_wr = -hr * j.A_3h;
    s.dh_w3 = j.A_h + hr * j.A_rh;
    return s;
}

namespace detail {

/// Jet of G = Phi(x3 / psi(r)) with psi = h + r^(1+alpha). No domain checks.
inline StreamJet cusp_jet(double r, double x3, double h, double alpha) noexcept
{
    const Profile pr = profile(r, h, alpha);
    const double psi = pr.value;
    const double dpsi = pr.first;
    const double t = x3 / psi;
    const ShapeCubic phi = phi_shape(t);

    const double t_r = -t * dpsi / psi;
    const double t_3 = 1.0 / psi;
    const double r_t_rr = -t * (pr.r_second / psi - 2.0 * r * dpsi * dpsi / (psi * psi));
    const double t_r3 = -dpsi / (psi * psi);
    const double t_h = -t / psi;
    const double t_3h = -1.0 / (psi * psi);
    const double t_rh = 2.0 * t * dpsi / (psi * psi);

    StreamJet j;
    j.A = phi.value;
    j.A_r = phi.first * t_r;
    j.A_3 = phi.first * t_3;
    j.rA_rr = phi.second * r * t_r * t_r + phi.first * r_t_rr;
    j.A_33 = phi.second * t_3 * t_3;
    j.A_r3 = phi.second * t_r * t_3 + phi.first * t_r3;
    j.A_h = phi.first * t_h;
    j.A_rh = phi.second * t_h * t_r + phi.first * t_rh;
    j.A_3h = phi.second * t_h * t_3 + phi.first * t_3h;
    return j;
}

// Closed cusp region with a few ulps of slack on the upper boundary.
inline bool in_cusp_closure(GapPoint p, double h, const CuspGeometry& geom) noexcept
{
    if (!(p.r >= 0.0 && p.r <= geom.r0 && p.x3 >= 0.0)) return false;
    const double top = h + std::pow(p.r, geom.exponent());
    return p.x3 <= top * (1.0 + 4.0 * std::numeric_limits<double>::epsilon());
}

} // namespace detail

/// Analytic test field inside the cusp region (closure included), where the
/// stream function is (r/2) Phi(x3 / psi(r)).
inline FieldSample eval_cusp_field(GapPoint p, double h, const CuspGeometry& geom)
{
    geom.require_admissible(h);
    if (!detail::in_cusp_closure(p, h, geom)) {
        throw ValidationError("eval_cusp_field: point (r=" + std::to_string(p.r) +
                              ", x3=" + std::to_string(p.x3) + ") is outside the cusp region");
    }
    return field_from_stream(p.r, detail::cusp_jet(p.r, p.x3, h, geom.alpha));
}

/// Quintic smoothstep S(u) = 6u^5 - 15u^4 + 10u^3 clamped to [0, 1], with derivatives.
struct Smoothstep {
    double value = 0.0;
    double first = 0.0;
    double second = 0.0;
};

constexpr Smoothstep smoothstep(double u) noexcept
{
    if (u <= 0.0) return {0.0, 0.0, 0.0};
    if (u >= 1.0) return {1.0, 0.0, 0.0};
    const double u2 = u * u;
    return {u2 * u * (10.0 - 15.0 * u + 6.0 * u2), 30.0 * u2 * (1.0 - u) * (1.0 - u),
            60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)};
}

/// Transition bands of the two cutoffs. chi is 1 below chi_inner and 0 above
/// chi_outer in each of r and x3; eta is 1 within eta_inner of the body and 0
/// beyond eta_outer.
struct CutoffConfig {
    double chi_inner = 0.0;
    double chi_outer = 0.0;
    double eta_inner = 0.0;
    double eta_outer = 0.0;
    double hessian_step = 0.0;  // finite-difference step on the distance gradient

    static CutoffConfig standard(const CuspGeometry& geom) noexcept
    {
        return {geom.r0, 2.0 * geom.r0, 0.5 * geom.d0, geom.d0, 1e-5 * geom.d0};
    }

    void validate() const
    {
        detail::require(chi_inner > 0.0 && chi_outer > chi_inner, "cutoffs: need 0 < chi_inner < chi_outer");
        detail::require(eta_inner > 0.0 && eta_outer > eta_inner, "cutoffs: need 0 < eta_inner < eta_outer");
        detail::require(hessian_step > 0.0 && hessian_step < 0.1 * (eta_outer - eta_inner),
                        "cutoffs: hessian_step must be positive and small against the eta band");
    }
};

/// The body with its tip at the origin: cusp profile z = r^(1+alpha) for
/// r <= 2 r0, closed by the sphere tangent to the profile at r = 2 r0.
/// The union is convex, so the exterior distance is the minimum of the
/// distance to the ball and to the profile graph.
class ReferenceBody {
public:
    explicit ReferenceBody(const CuspGeometry& geom)
        : alpha_(geom.alpha), r1_(2.0 * geom.r0)
    {
        const double z1 = std::pow(r1_, 1.0 + alpha_);
        const double slope = (1.0 + alpha_) * std::pow(r1_, alpha_);
        radius_ = r1_ * std::sqrt(1.0 + 1.0 / (slope * slope));
        center_z_ = z1 + r1_ / slope;
    }

    double join_radius() const noexcept { return r1_; }
    double sphere_radius() const noexcept { return radius_; }
    double sphere_center() const noexcept { return center_z_; }

    double profile(double r) const noexcept { return std::pow(r, 1.0 + alpha_); }

    bool contains(double r, double z) const noexcept
    {
        r = std::abs(r);
        const double dz = z - center_z_;
        if (r * r + dz * dz <= radius_ * radius_) return true;
        if (r > r1_ || z < profile(r)) return false;
        return z <= center_z_ + std::sqrt(std::max(0.0, radius_ * radius_ - r * r));
    }

    struct Distance {
        double value = 0.0;
        double d_r = 0.0;
        double d_z = 0.0;
    };

    /// Distance to the body and its gradient; zero inside. Accepts r < 0 as the
    /// mirrored meridian point.
    Distance distance(double r, double z) const noexcept
    {
        const double sign = r < 0.0 ? -1.0 : 1.0;
        r = std::abs(r);
        if (contains(r, z)) return {};

        const double dz_ball = z - center_z_;
        const double to_center = std::hypot(r, dz_ball);
        Distance best{to_center - radius_, r / to_center, dz_ball / to_center};

        const double s = nearest_on_profile(r, z);
        const double er = r - s;
        const double ez = z - profile(s);
        const double dg = std::hypot(er, ez);
        if (dg < best.value && dg > 0.0) best = {dg, er / dg, ez / dg};
        best.d_r *= sign;
        return best;
    }

private:
    double squared_gap(double s, double r, double z) const noexcept
    {
        const double er = r - s;
        const double ez = z - profile(s);
        return er * er + ez * ez;
    }

    // Stationarity of the squared gap: (s - r) + (s^(1+a) - z)(1+a) s^a.
    double gap_slope(double s, double r, double z) const noexcept
    {
        return (s - r) + (profile(s) - z) * (1.0 + alpha_) * std::pow(s, alpha_);
    }

    // Coarse scan, golden section down to a small bracket, then safeguarded
    // Newton on the stationarity condition. The nearest point has to be
    // accurate to rounding: the distance gradient is built from it and is
    // differenced again for the Hessian.
    double nearest_on_profile(double r, double z) const noexcept
    {
        constexpr int samples = 64;
        int best = 0;
        double best_val = squared_gap(0.0, r, z);
        for (int i = 1; i <= samples; ++i) {
            const double v = squared_gap(r1_ * i / samples, r, z);
            if (v < best_val) {
                best_val = v;
                best = i;
            }
        }
        double lo = r1_ * std::max(0, best - 1) / samples;
        double hi = r1_ * std::min(samples, best + 1) / samples;
        constexpr double inv_phi = 0.6180339887498949;
        double a = hi - inv_phi * (hi - lo);
        double b = lo + inv_phi * (hi - lo);
        double fa = squared_gap(a, r, z);
        double fb = squared_gap(b, r, z);
        while (hi - lo > 1e-6 * r1_) {
            if (fa < fb) {
                hi = b;
                b = a;
                fb = fa;
                a = hi - inv_phi * (hi - lo);
                fa = squared_gap(a, r, z);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + inv_phi * (hi - lo);
                fb = squared_gap(b, r, z);
            }
        }

        // Widen to a sign change of the slope if the minimum sits in the bracket.
        lo = std::max(0.0, lo - 1e-6 * r1_);
        hi = std::min(r1_, hi + 1e-6 * r1_);
        double g_lo = gap_slope(lo, r, z);
        double g_hi = gap_slope(hi, r, z);
        if (!(g_lo < 0.0 && g_hi > 0.0)) {
            return squared_gap(lo, r, z) < squared_gap(hi, r, z) ? lo : hi;
        }
        double s = 0.5 * (lo + hi);
        for (int it = 0; it < 100; ++it) {
            const double gs = gap_slope(s, r, z);
            if (gs == 0.0) return s;
            if (gs < 0.0) lo = s; else hi = s;
            const double p1 = (1.0 + alpha_) * std::pow(s, alpha_);
            const double p2 = s > 0.0 ? alpha_ * p1 / s : 0.0;
            const double dg = 1.0 + p1 * p1 + (profile(s) - z) * p2;
            double next = s - gs / dg;
            if (!(dg > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - s) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(s, 1e-300)) {
                return next;
            }
            s = next;
        }
        return s;
    }

    double alpha_;
    double r1_;
    double radius_ = 0.0;
    double center_z_ = 0.0;
};

namespace detail {

struct CutoffJet {
    double v = 0.0, r = 0.0, z = 0.0, rr = 0.0, zz = 0.0, rz = 0.0;
};

// chi(r, x3) = P(r) P(x3) with P = 1 - S((u - inner) / (outer - inner)).
inline CutoffJet chi_jet(double r, double x3, const CutoffConfig& c) noexcept
{
    const double w = c.chi_outer - c.chi_inner;
    const Smoothstep sr = smoothstep((r - c.chi_inner) / w);
    const Smoothstep sz = smoothstep((x3 - c.chi_inner) / w);
    const double pr = 1.0 - sr.value, pr1 = -sr.first / w, pr2 = -sr.second / (w * w);
    const double pz = 1.0 - sz.value, pz1 = -sz.first / w, pz2 = -sz.second / (w * w);
    return {pr * pz, pr1 * pz, pr * pz1, pr2 * pz, pr * pz2, pr1 * pz1};
}

// eta = 1 - S((dist - inner) / (outer - inner)) of the distance to the body
// with tip at height h. Hessian of the distance by central differences of its
// analytic gradient.
inline CutoffJet eta_jet(double r, double x3, double h, const ReferenceBody& body,
                         const CutoffConfig& c) noexcept
{
    const double z = x3 - h;
    const auto d = body.distance(r, z);
    const double w = c.eta_outer - c.eta_inner;
    const Smoothstep s = smoothstep((d.value - c.eta_inner) / w);
    CutoffJet j;
    j.v = 1.0 - s.value;
    if (s.first == 0.0 && s.second == 0.0) return j;

    const double step = c.hessian_step;
    const auto rp = body.distance(r + step, z);
    const auto rm = body.distance(r - step, z);
    const auto zp = body.distance(r, z + step);
    const auto zm = body.distance(r, z - step);
    const double d_rr = (rp.d_r - rm.d_r) / (2.0 * step);
    const double d_zz = (zp.d_z - zm.d_z) / (2.0 * step);
    const double d_rz = 0.5 * ((zp.d_r - zm.d_r) + (rp.d_z - rm.d_z)) / (2.0 * step);

    const double e1 = -s.first / w;
    const double e2 = -s.second / (w * w);
    j.r = e1 * d.d_r;
    j.z = e1 * d.d_z;
    j.rr = e2 * d.d_r * d.d_r + e1 * d_rr;
    j.zz = e2 * d.d_z * d.d_z + e1 * d_zz;
    j.rz = e2 * d.d_r * d.d_z + e1 * d_rz;
    return j;
}

} // namespace detail

/// Test field on the whole fluid half-space x3 >= 0, from the blended stream
/// function (r/2) [(1 - chi) eta + chi Phi(x3 / psi)]. Inside the body the
/// field is the rigid translation e3. Where chi = 1 inside the cusp the result
/// is exactly eval_cusp_field.
inline FieldSample eval_global_field(GapPoint p, double h, const CuspGeometry& geom,
                                     const CutoffConfig& cutoffs)
{
    geom.require_admissible(h);
    cutoffs.validate();
    detail::require(std::isfinite(p.r) && std::isfinite(p.x3) && p.r >= 0.0 && p.x3 >= 0.0,
                    "eval_global_field: point must satisfy r >= 0 and x3 >= 0");

    const ReferenceBody body(geom);
    if (body.contains(p.r, p.x3 - h)) {
        FieldSample rigid;
        rigid.w_3 = 1.0;
        return rigid;
    }

    const double top = h + std::pow(p.r, geom.exponent());
    const bool below_profile = p.x3 <= top;
    if (p.r <= cutoffs.chi_inner && p.x3 <= cutoffs.chi_inner && below_profile) {
        return field_from_stream(p.r, detail::cusp_jet(p.r, p.x3, h, geom.alpha));
    }

    const detail::CutoffJet chi = detail::chi_jet(p.r, p.x3, cutoffs);
    const detail::CutoffJet eta = detail::eta_jet(p.r, p.x3, h, body, cutoffs);

    // Above the body the cubic is continued by its boundary value Phi(1) = 1.
    StreamJet g;
    if (p.r < cutoffs.chi_outer && p.x3 < cutoffs.chi_outer) {
        if (below_profile) {
            g = detail::cusp_jet(p.r, p.x3, h, geom.alpha);
        } else {
            g.A = 1.0;
        }
    }

    // eta depends on h only through x3 - h.
    const double eta_h = -eta.z;
    const double eta_rh = -eta.rz;
    const double eta_3h = -eta.zz;

    const double D = g.A - eta.v;
    const double D_r = g.A_r - eta.r;
    const double D_3 = g.A_3 - eta.z;
    const double rD_rr = g.rA_rr - p.r * eta.rr;
    const double D_33 = g.A_33 - eta.zz;
    const double D_r3 = g.A_r3 - eta.rz;
    const double D_h = g.A_h - eta_h;
    const double D_rh = g.A_rh - eta_rh;
    const double D_3h = g.A_3h - eta_3h;

    StreamJet a;
    a.A = eta.v + chi.v * D;
    a.A_r = eta.r + chi.r * D + chi.v * D_r;
    a.A_3 = eta.z + chi.z * D + chi.v * D_3;
    a.rA_rr = p.r * (eta.rr + chi.rr * D + 2.0 * chi.r * D_r) + chi.v * rD_rr;
    a.A_33 = eta.zz + chi.zz * D + 2.0 * chi.z * D_3 + chi.v * D_33;
    a.A_r3 = eta.rz + chi.rz * D + chi.r * D_3 + chi.z * D_r + chi.v * D_r3;
    a.A_h = eta_h + chi.v * D_h;
    a.A_rh = eta_rh + chi.r * D_h + chi.v * D_rh;
    a.A_3h = eta_3h + chi.z * D_h + chi.v * D_3h;
    return field_from_stream(p.r, a);
}

} // namespace cusplab

#endif // CUSPLAB_TESTFIELD_HPP
