#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "cusplab/testfield.hpp"

using namespace cusplab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Central-difference oracle for every entry of a sample, built only from the
// velocity components the evaluator returns.
template <class Eval>
FieldSample finite_difference(Eval&& eval, double r, double x3, double h, double step, double dh)
{
    const FieldSample rp = eval(r + step, x3, h), rm = eval(r - step, x3, h);
    const FieldSample zp = eval(r, x3 + step, h), zm = eval(r, x3 - step, h);
    const FieldSample hp = eval(r, x3, h + dh), hm = eval(r, x3, h - dh);
    const FieldSample c = eval(r, x3, h);
    FieldSample fd = c;
    fd.dr_wr = (rp.w_r - rm.w_r) / (2 * step);
    fd.d3_wr = (zp.w_r - zm.w_r) / (2 * step);
    fd.dr_w3 = (rp.w_3 - rm.w_3) / (2 * step);
    fd.d3_w3 = (zp.w_3 - zm.w_3) / (2 * step);
    fd.wr_over_r = c.w_r / r;
    fd.dh_wr = (hp.w_r - hm.w_r) / (2 * dh);
    fd.dh_w3 = (hp.w_3 - hm.w_3) / (2 * dh);
    return fd;
}

double worst_gradient_mismatch(const FieldSample& a, const FieldSample& b)
{
    const double scale = std::max(1.0, a.gradient_norm());
    return std::max({std::abs(a.dr_wr - b.dr_wr), std::abs(a.d3_wr - b.d3_wr), std::abs(a.dr_w3 - b.dr_w3),
                     std::abs(a.d3_w3 - b.d3_w3), std::abs(a.wr_over_r - b.wr_over_r)}) /
           scale;
}

// Relative mismatch of the h-derivative. The difference quotient cannot
// resolve better than ~eps |w| / dh, which dominates where w barely depends
// on h (r^(1+alpha) >> h); that floor is added to the denominator's scale.
double worst_dh_mismatch(const FieldSample& a, const FieldSample& b, double dh)
{
    const double floor = 1e-15 * std::max(1.0, a.magnitude()) / dh / 1e-5;
    const double scale = std::max({1.0, a.dh_magnitude(), floor});
    return std::max(std::abs(a.dh_wr - b.dh_wr), std::abs(a.dh_w3 - b.dh_w3)) / scale;
}

} // namespace

TEST_CASE("shape cubic", "[testfield]")
{
    auto check = [](double t, double v, double d1, double d2) {
        const ShapeCubic s = phi_shape(t);
        CHECK_THAT(s.value, WithinAbs(v, 1e-15));
        CHECK_THAT(s.first, WithinAbs(d1, 1e-15));
        CHECK_THAT(s.second, WithinAbs(d2, 1e-15));
    };
    check(0.0, 0.0, 0.0, 6.0);
    check(1.0, 1.0, 0.0, -6.0);
    check(0.5, 0.5, 1.5, 0.0);
    static_assert(phi_shape(1.0).value == 1.0);
}

TEST_CASE("cusp field at a reference point", "[testfield]")
{
    const CuspGeometry g{0.3, 0.5, 0.45};
    const double h = 1e-3, r = 0.01;
    const double psi_r = h + std::pow(r, 1.3);
    const FieldSample s = eval_cusp_field({r, 0.5 * psi_r}, h, g);
    CHECK(std::abs(s.divergence()) <= 1e-12 * s.divergence_scale());

    auto eval = [&](double rr, double zz, double hh) {
        return field_from_stream(rr, detail::cusp_jet(rr, zz, hh, g.alpha));
    };
    const double step = 1e-6 * psi_r;
    const FieldSample fd = finite_difference(eval, r, 0.5 * psi_r, h, step, 1e-6 * h);
    // Phi''(1/2) = 0 makes d3_wr vanish here, so entries are compared on the
    // scale of their group.
    const double gs = s.gradient_norm(), hs = s.dh_magnitude();
    CHECK(std::abs(s.d3_wr) < 1e-12 * gs);
    CHECK(std::abs(fd.dr_wr - s.dr_wr) < 1e-5 * gs);
    CHECK(std::abs(fd.d3_wr - s.d3_wr) < 1e-5 * gs);
    CHECK(std::abs(fd.dr_w3 - s.dr_w3) < 1e-5 * gs);
    CHECK(std::abs(fd.d3_w3 - s.d3_w3) < 1e-5 * gs);
    CHECK_THAT(fd.wr_over_r, WithinRel(s.wr_over_r, 1e-12));
    CHECK(std::abs(fd.dh_wr - s.dh_wr) < 1e-5 * hs);
    CHECK(std::abs(fd.dh_w3 - s.dh_w3) < 1e-5 * hs);
}

TEST_CASE("cusp field boundary traces", "[testfield]")
{
    for (double alpha : {0.1, 0.3, 0.5, 1.0}) {
        const CuspGeometry g{alpha, 0.5, 0.49};
        const double h = std::min(1e-2, 0.5 * g.max_admissible_h());
        for (int i = 0; i <= 1000; ++i) {
            const double r = g.r0 * i / 1000.0;
            const double top = h + std::pow(r, g.exponent());
            const FieldSample up = eval_cusp_field({r, top}, h, g);
            CHECK_THAT(up.w_r, WithinAbs(0.0, 1e-12));
            CHECK_THAT(up.w_3, WithinAbs(1.0, 1e-12));
            const FieldSample wall = eval_cusp_field({r, 0.0}, h, g);
            CHECK(wall.w_r == 0.0);
            CHECK(wall.w_3 == 0.0);
            CHECK(wall.d3_w3 == 0.0);
        }
    }
}

TEST_CASE("cusp field at the axis uses the analytic limit", "[testfield]")
{
    const CuspGeometry g{0.4, 0.5, 0.45};
    const double h = 1e-2;
    const FieldSample s = eval_cusp_field({0.0, 0.3 * h}, h, g);
    CHECK(s.w_r == 0.0);
    CHECK(std::isfinite(s.wr_over_r));
    CHECK_THAT(s.wr_over_r, WithinRel(-0.5 * phi_shape(0.3).first / h, 1e-14));
    CHECK(std::abs(s.divergence()) <= 1e-12 * s.divergence_scale());
    const FieldSample near = eval_cusp_field({1e-9, 0.3 * h}, h, g);
    CHECK_THAT(near.wr_over_r, WithinRel(s.wr_over_r, 1e-6));
}

TEST_CASE("cusp field rejects bad input", "[testfield]")
{
    const CuspGeometry g{0.5, 0.5, 0.4};
    CHECK_THROWS_AS(eval_cusp_field({0.1, 0.0}, 0.3, g), ValidationError);
    CHECK_THROWS_AS(eval_cusp_field({0.1, 0.5}, 0.01, g), ValidationError);
    CHECK_THROWS_AS(eval_cusp_field({0.6, 0.0}, 0.01, g), ValidationError);
}

TEST_CASE("cusp field identities on random points", "[testfield]")
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int i = 0; i < 10000; ++i) {
        const double alpha = 0.05 + 0.95 * u(rng);
        const CuspGeometry g{alpha, 0.5, 0.49};
        const double h = std::pow(10.0, -6.0 + 5.0 * u(rng)) * std::min(1.0, g.max_admissible_h() / 0.1);
        const double r = g.r0 * (0.001 + 0.998 * u(rng));
        const double top = h + std::pow(r, g.exponent());
        const double x3 = top * (0.01 + 0.98 * u(rng));
        const FieldSample s = eval_cusp_field({r, x3}, h, g);
        REQUIRE(std::abs(s.divergence()) <= 1e-12 * s.divergence_scale());

        auto eval = [&](double rr, double zz, double hh) {
            return field_from_stream(rr, detail::cusp_jet(rr, zz, hh, alpha));
        };
        const double step = 1e-6 * std::min(top, r);
        const FieldSample fd = finite_difference(eval, r, x3, h, step, 1e-6 * h);
        CHECK(std::abs(fd.divergence()) <= 1e-5 * std::max(1.0, fd.divergence_scale()));
        CHECK(worst_gradient_mismatch(s, fd) < 1e-5);
        CHECK(worst_dh_mismatch(s, fd, 1e-6 * h) < 1e-5);
        ++checked;
    }
    CHECK(checked == 10000);
}

TEST_CASE("pointwise bounds hold with an h-independent constant", "[testfield]")
{
    const CuspGeometry g{0.5, 0.5, 0.49};
    std::vector<double> c_dh, c_grad;
    for (int k = 0; k <= 10; ++k) {
        const double h = std::pow(10.0, -1.0 - 0.5 * k);
        double worst_dh = 0.0, worst_grad = 0.0;
        for (int i = 0; i <= 400; ++i) {
            // Log-spaced radii resolve the boundary layer r ~ h^(1/(1+alpha)).
            const double r = g.r0 * std::pow(10.0, -8.0 * (1.0 - i / 400.0));
            const Profile p = psi(r, h, g);
            for (int j = 0; j <= 40; ++j) {
                const FieldSample s = eval_cusp_field({r, p.value * j / 40.0}, h, g);
                const double dh_scale = 1.0 / p.value + r / (p.value * p.value);
                worst_dh = std::max(worst_dh, s.dh_magnitude() / dh_scale);
                worst_grad = std::max(worst_grad, s.gradient_norm() / (dh_scale + p.first / p.value));
            }
        }
        c_dh.push_back(worst_dh);
        c_grad.push_back(worst_grad);
    }
    for (const auto* cs : {&c_dh, &c_grad}) {
        const auto [lo, hi] = std::minmax_element(cs->begin(), cs->end());
        CHECK(std::isfinite(*hi));
        CHECK(*hi < 10.0);
        CHECK(*hi / *lo < 1.5);
    }
}

TEST_CASE("global field", "[testfield]")
{
    const CuspGeometry g{0.5, 0.3, 0.2};
    const CutoffConfig cut = CutoffConfig::standard(g);
    const double h = 0.01;

    SECTION("identical to the cusp field where the blend is inactive")
    {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 2000; ++i) {
            const double r = g.r0 * u(rng) * 0.999;
            const double top = std::min(g.r0, h + std::pow(r, g.exponent()));
            const double x3 = top * u(rng);
            const FieldSample a = eval_global_field({r, x3}, h, g, cut);
            const FieldSample b = eval_cusp_field({r, x3}, h, g);
            CHECK(a.w_r == b.w_r);
            CHECK(a.w_3 == b.w_3);
            CHECK(a.dr_wr == b.dr_wr);
            CHECK(a.d3_w3 == b.d3_w3);
            CHECK(a.dh_w3 == b.dh_w3);
        }
    }

    SECTION("zero far from the body and outside the cutoff support")
    {
        for (double r : {0.7, 1.0, 2.0}) {
            for (double x3 : {0.0, 0.05, 0.7, 3.0}) {
                const ReferenceBody body(g);
                if (body.distance(r, x3 - h).value <= g.d0) continue;
                const FieldSample s = eval_global_field({r, x3}, h, g, cut);
                CHECK(s.magnitude() == 0.0);
                CHECK(s.gradient_norm() == 0.0);
                CHECK(s.dh_magnitude() == 0.0);
            }
        }
        // The wall beyond the cusp carries no flow either.
        CHECK(eval_global_field({0.9, 0.0}, h, g, cut).magnitude() == 0.0);
    }

    SECTION("rigid translation inside the body")
    {
        const FieldSample s = eval_global_field({0.0, h + 0.05}, h, g, cut);
        CHECK(s.w_3 == 1.0);
        CHECK(s.w_r == 0.0);
    }

    SECTION("divergence free on random global points")
    {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 10000; ++i) {
            const double r = 1.5 * u(rng);
            const double x3 = 1.5 * u(rng);
            const FieldSample s = eval_global_field({r, x3}, h, g, cut);
            REQUIRE(std::abs(s.divergence()) <= 1e-10 * std::max(1.0, s.divergence_scale()));
        }
    }

    SECTION("blend gradient against finite differences")
    {
        auto eval = [&](double rr, double zz, double hh) { return eval_global_field({rr, zz}, hh, g, cut); };
        const ReferenceBody body(g);
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        int checked = 0;
        while (checked < 300) {
            const double r = 0.05 + 0.8 * u(rng);
            const double x3 = 0.01 + 0.8 * u(rng);
            const double dist = body.distance(r, x3 - h).value;
            if (dist < 0.01) continue;  // stay clear of the rigid/fluid interface
            const double top = h + std::pow(r, g.exponent());
            if (r < 2 * g.r0 && std::abs(x3 - top) < 0.01) continue;  // stream function kinks at the profile
            const FieldSample s = eval(r, x3, h);
            const FieldSample fd = finite_difference(eval, r, x3, h, 1e-6, 1e-6 * h);
            CHECK(worst_gradient_mismatch(s, fd) < 1e-4);
            CHECK(worst_dh_mismatch(s, fd, 1e-6 * h) < 1e-4);
            ++checked;
        }
    }
}
