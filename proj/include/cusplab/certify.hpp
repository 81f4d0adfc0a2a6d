#ifndef CUSPLAB_CERTIFY_HPP
#define CUSPLAB_CERTIFY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "geometry.hpp"
#include "quadrature.hpp"

namespace cusplab {

struct PhysicalParams {
    double gamma = 6.0;
    double mu = 1.0;
    double lambda = 0.0;
    double g = 1.0;
    double rho_s = 1.0;
    double m = 1.0;
    double diam_omega = 1.0;

    void validate() const
    {
        detail::require(gamma > 1.5, "physics.gamma must exceed 3/2");
        detail::require(mu > 0.0, "physics.mu must be positive");
        detail::require(2.0 * mu + 3.0 * lambda >= 0.0, "physics: need 2 mu + 3 lambda >= 0");
        detail::require(g > 0.0, "physics.g must be positive");
        detail::require(rho_s > 0.0, "physics.rho_s must be positive");
        detail::require(m > 0.0, "physics.m must be positive");
        detail::require(diam_omega > 0.0, "physics.diam_omega must be positive");
    }
};

/// Fluid energies of the initial state and the solid's initial vertical speed.
struct InitialData {
    double kinetic_fluid = 0.0;       ///< int |q0|^2 / (2 rho0) over F(0)
    double pressure_potential = 0.0;  ///< int rho0^gamma / (gamma - 1) over F(0)
    double v0 = 0.0;                  ///< |V0|

    void validate() const
    {
        detail::require(kinetic_fluid >= 0.0, "initial.kinetic_fluid must be non-negative");
        detail::require(pressure_potential >= 0.0, "initial.pressure_potential must be non-negative");
        detail::require(v0 >= 0.0, "initial.v0 must be non-negative");
    }
};

/// C(gamma) = 2^(1/(gamma-1)) (2 - 2/gamma)^(gamma/(gamma-1)), evaluated in
/// log space so that gamma close to 1 neither overflows nor yields inf * 0.
inline double c_gamma(double gamma)
{
    detail::require(std::isfinite(gamma) && gamma > 1.0, "c_gamma: gamma must exceed 1");
    const double k = 1.0 / (gamma - 1.0);
    const double log_c = k * std::numbers::ln2 + gamma * k * std::log(2.0 - 2.0 / gamma);
    const double c = std::exp(log_c);
    if (!(c <= 3.0)) throw NumericalError("c_gamma: bound C(gamma) <= 3 violated");
    return c;
}

/// L(g, gamma, Omega) = C(gamma) g^(gamma/(gamma-1)) diam^(gamma/(gamma-1) + 3).
inline double l_const(double g, double gamma, double diam_omega)
{
    detail::require(g > 0.0 && diam_omega > 0.0, "l_const: g and diam must be positive");
    const double e = gamma / (gamma - 1.0);
    return c_gamma(gamma) * std::pow(g, e) * std::pow(diam_omega, e + 3.0);
}

inline double initial_energy(const InitialData& data, double m)
{
    data.validate();
    detail::require(m > 0.0, "initial_energy: m must be positive");
    return data.kinetic_fluid + data.pressure_potential + 0.5 * m * data.v0 * data.v0;
}

/// sup |h'| <= sqrt(2 (E0 + L) / m).
inline double hdot_bound(double m, double e0, double l)
{
    detail::require(m > 0.0, "hdot_bound: m must be positive");
    detail::require(e0 + l >= 0.0, "hdot_bound: E0 + L must be non-negative");
    return std::sqrt(2.0 * (e0 + l) / m);
}

/// Admissible alpha per momentum term. Each bound is the alpha below which
/// the Lebesgue exponent that term needs stays under the integrability
/// threshold of the test field.
struct TermThresholds {
    double i1 = 0.0;  ///< convective:  3(gamma-3)/(4 gamma+3)
    double i2 = 0.0;  ///< time derivative:  (3 gamma-3)/(gamma+1)
    double i3 = 0.0;  ///< h-derivative:  9(gamma-2)/(7 gamma+6)
    double i4 = 0.0;  ///< viscous:  1/3
    double i5 = 0.0;  ///< gravity on the fluid:  3 - 3/gamma

    double min() const noexcept { return std::min({i1, i2, i3, i4, i5}); }
};

inline TermThresholds term_thresholds(double gamma)
{
    detail::require(gamma > 1.5, "term_thresholds: gamma must exceed 3/2");
    return {3.0 * (gamma - 3.0) / (4.0 * gamma + 3.0), (3.0 * gamma - 3.0) / (gamma + 1.0),
            9.0 * (gamma - 2.0) / (7.0 * gamma + 6.0), 1.0 / 3.0, 3.0 - 3.0 / gamma};
}

/// min{1/3, 3(gamma-3)/(4 gamma+3)} for gamma > 3, and 0 otherwise.
inline double alpha_max(double gamma)
{
    detail::require(std::isfinite(gamma) && gamma > 1.5, "alpha_max: gamma must exceed 3/2");
    if (gamma <= 3.0) return 0.0;
    const TermThresholds t = term_thresholds(gamma);
    const double a = std::min(t.i4, t.i1);
    if (a > t.min()) throw NumericalError("alpha_max: exceeds one of the term thresholds");
    return a;
}

struct CollisionCertificate {
    TermThresholds thresholds;
    double alpha = 0.0;
    double alpha_max = 0.0;
    double e0 = 0.0;
    double l_const = 0.0;
    double c_gamma = 0.0;
    double c0 = 1.0;
    double lhs = 0.0;
    bool applicable = false;  ///< gamma > 3 and alpha < alpha_max
    bool satisfied = false;   ///< lhs < g
    std::optional<double> time_bound;
    std::string note;
};

/// Evaluates the sufficient collision inequality
///   C0 (m^-1 + m^-1/2 + m^-3/2)(1 + (E0+L)^(1+1/gamma) + g (E0+L)^(1/gamma)) < g.
/// When it holds, g T <= K (1 + T) with K = lhs gives the contact-time bound
/// T <= K / (g - K).
inline CollisionCertificate final_inequality(const PhysicalParams& params, const InitialData& data,
                                             double c0, double alpha)
{
    params.validate();
    data.validate();
    detail::require(std::isfinite(c0) && c0 > 0.0, "final_inequality: c0 must be positive");
    detail::require(alpha > 0.0 && alpha <= 1.0, "final_inequality: alpha must lie in (0, 1]");

    CollisionCertificate cert;
    const double gamma = params.gamma;
    cert.thresholds = term_thresholds(gamma);
    cert.alpha = alpha;
    cert.alpha_max = alpha_max(gamma);
    cert.c_gamma = c_gamma(gamma);
    cert.l_const = l_const(params.g, gamma, params.diam_omega);
    cert.e0 = initial_energy(data, params.m);
    cert.c0 = c0;

    const double m = params.m;
    const double energy = cert.e0 + cert.l_const;
    const double mass_factor = 1.0 / m + 1.0 / std::sqrt(m) + 1.0 / (m * std::sqrt(m));
    const double energy_factor =
        1.0 + std::pow(energy, 1.0 + 1.0 / gamma) + params.g * std::pow(energy, 1.0 / gamma);
    cert.lhs = c0 * mass_factor * energy_factor;
    cert.satisfied = cert.lhs < params.g;
    if (cert.satisfied) cert.time_bound = cert.lhs / (params.g - cert.lhs);

    cert.applicable = gamma > 3.0 && alpha < cert.alpha_max;
    if (!cert.applicable) {
        cert.note = gamma <= 3.0 ? "inapplicable: gamma <= 3" : "inapplicable: alpha >= alpha_max(gamma)";
    } else if (!cert.satisfied) {
        cert.note = "inequality not satisfied: increase m or decrease E0";
    } else {
        cert.note = "collision certified; time_bound is derived from g T <= K (1 + T)";
    }
    return cert;
}

struct MassThreshold {
    double m_star = 0.0;
    double lhs_at_m_star = 0.0;
    bool found = false;
};

/// Smallest mass in [1e-6, 1e12] satisfying the inequality when the initial
/// speed follows v0 = v0_coefficient m^-1/2 (solid kinetic energy fixed at
/// v0_coefficient^2 / 2). Bisection in log m to relative 1e-12.
inline MassThreshold mass_threshold(PhysicalParams params, const InitialData& fluid_data,
                                    double v0_coefficient, double c0, double alpha)
{
    detail::require(v0_coefficient >= 0.0, "mass_threshold: v0 coefficient must be non-negative");
    auto lhs_at = [&](double m) {
        params.m = m;
        InitialData d = fluid_data;
        d.v0 = v0_coefficient / std::sqrt(m);
        return final_inequality(params, d, c0, alpha).lhs;
    };

    constexpr double m_lo = 1e-6, m_hi = 1e12;
    MassThreshold out;
    const double g = params.g;
    const double at_hi = lhs_at(m_hi);
    if (!(at_hi < g)) {
        out.m_star = m_hi;
        out.lhs_at_m_star = at_hi;
        return out;
    }
    const double at_lo = lhs_at(m_lo);
    if (!(at_lo > at_hi)) throw NumericalError("mass_threshold: lhs is not decreasing in m");
    out.found = true;
    if (at_lo < g) {
        out.m_star = m_lo;
        out.lhs_at_m_star = at_lo;
        return out;
    }
    double lo = std::log(m_lo), hi = std::log(m_hi);
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (lhs_at(std::exp(mid)) < g) hi = mid; else lo = mid;
    }
    out.m_star = std::exp(hi);
    out.lhs_at_m_star = lhs_at(out.m_star);
    return out;
}

/// Proxy for C0 built from the test-field norms each momentum term uses,
/// evaluated at a reference gap height: the sum of
/// ||w||_{2g/(g-1)}, ||d_h w||_{6g/(5g-6)}, ||grad w||_2, ||w||_{g/(g-1)}, ||grad w||_{3g/(2g-3)}.
inline double empirical_c0(const CuspGeometry& geom, double gamma, double h_ref,
                           const QuadratureConfig& cfg = {})
{
    detail::require(gamma > 1.5, "empirical_c0: gamma must exceed 3/2");
    const double g = gamma;
    double sum = lp_norm(Quantity::Field, 2.0 * g / (g - 1.0), h_ref, geom, cfg);
    sum += lp_norm(Quantity::HDerivative, 6.0 * g / (5.0 * g - 6.0), h_ref, geom, cfg);
    sum += lp_norm(Quantity::Gradient, 2.0, h_ref, geom, cfg);
    sum += lp_norm(Quantity::Field, g / (g - 1.0), h_ref, geom, cfg);
    sum += lp_norm(Quantity::Gradient, 3.0 * g / (2.0 * g - 3.0), h_ref, geom, cfg);
    return sum;
}

struct PdGuarantee {
    double displacement_bound = 0.0;  ///< sqrt(2 C e_init / k_p)
    std::optional<double> epsilon;    ///< dist(G(t), wall) >= 1 + epsilon when present
};

/// No-collision margin under PD feedback: the energy estimate bounds
/// |G1 - G(t)| by sqrt(2 C e_init / k_p); the triangle inequality then keeps
/// the centre at distance >= dist_g1 - that bound from the wall.
inline PdGuarantee pd_guarantee(double e_init, double k_p, double k_d, double dist_g1, double c_energy = 1.0)
{
    detail::require(e_init >= 0.0, "pd: e_init must be non-negative");
    detail::require(k_p > 0.0, "pd: k_p must be positive");
    detail::require(k_d >= 0.0, "pd: k_d must be non-negative");
    detail::require(dist_g1 > 1.0, "pd: dist_g1 must exceed 1");
    detail::require(c_energy > 0.0, "pd: c_energy must be positive");
    PdGuarantee out;
    out.displacement_bound = std::sqrt(2.0 * c_energy * e_init / k_p);
    const double eps = dist_g1 - 1.0 - out.displacement_bound;
    if (eps > 0.0) out.epsilon = eps;
    return out;
}

} // namespace cusplab

#endif // CUSPLAB_CERTIFY_HPP
