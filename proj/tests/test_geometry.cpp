#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "cusplab/geometry.hpp"

using namespace cusplab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("psi closed form", "[geometry]")
{
    const auto half = CuspGeometry{0.5, 0.5, 0.4};
    const auto one = CuspGeometry{1.0, 0.5, 0.4};

    SECTION("tip value is the gap")
    {
        const Profile p = psi(0.0, 0.1, half);
        CHECK(p.value == 0.1);
        CHECK(p.first == 0.0);
        CHECK(p.second_singular());
        CHECK(p.r_second == 0.0);
    }
    SECTION("unit radius without gap")
    {
        const Profile p = psi(1.0, 0.0, half);
        CHECK_THAT(p.value, WithinAbs(1.0, 1e-15));
        CHECK_THAT(p.first, WithinAbs(1.5, 1e-15));
    }
    SECTION("linear roughness exponent")
    {
        const Profile p = psi(0.25, 0.01, one);
        CHECK_THAT(p.value, WithinAbs(0.0725, 1e-15));
        CHECK_THAT(p.first, WithinAbs(0.5, 1e-15));
        REQUIRE(p.second.has_value());
        CHECK_THAT(*p.second, WithinAbs(2.0, 1e-15));
        CHECK(psi(0.0, 0.01, one).second == 2.0);
    }
    SECTION("domain errors")
    {
        CHECK_THROWS_AS(psi(-1e-3, 0.1, half), ValidationError);
        CHECK_THROWS_AS(psi(0.1, -1e-3, half), ValidationError);
    }
}

TEST_CASE("psi monotonicity and scaling facts", "[geometry]")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ua(0.05, 1.0), ur(1e-6, 1.0), uh(1e-7, 0.1);
    for (int i = 0; i < 2000; ++i) {
        const CuspGeometry g{ua(rng), 0.9, 0.85};
        const double r = g.r0 * ur(rng);
        const double h = uh(rng);
        const Profile p = psi(r, h, g);
        CHECK(psi(r * 1.001, h, g).value > p.value);
        CHECK(psi(r, h * 1.001, g).value > p.value);
        CHECK(r * *p.second <= (1.0 + g.alpha) * p.first * (1.0 + 1e-14));
        CHECK(r * p.first <= (1.0 + g.alpha) * p.value);
        CHECK_THAT(p.r_second, WithinRel(r * *p.second, 1e-13));
    }
}

TEST_CASE("psi derivatives against central differences", "[geometry]")
{
    for (double alpha : {0.1, 0.3, 0.5, 0.8, 1.0}) {
        const CuspGeometry g{alpha, 0.5, 0.4};
        for (double r : {1e-3, 0.01, 0.1, 0.3, 0.5}) {
            const double h = 1e-3;
            const double step = 1e-7 * std::max(r, 1.0);
            const Profile p = psi(r, h, g);
            const Profile hi = psi(r + step, h, g), lo = psi(r - step, h, g);
            CHECK_THAT((hi.value - lo.value) / (2 * step), WithinRel(p.first, 1e-6));
            CHECK_THAT((hi.first - lo.first) / (2 * step), WithinRel(*p.second, 1e-6));
        }
    }
}

TEST_CASE("cusp membership", "[geometry]")
{
    const CuspGeometry g{0.5, 0.5, 0.49};
    const double h = 0.1;
    CHECK(in_cusp({0.0, 0.0}, h, g));
    CHECK_FALSE(in_cusp({g.r0, 0.0}, h, g));
    const double r = 0.5 * g.r0;
    CHECK_FALSE(in_cusp({r, h + std::pow(r, 1.5) + 1e-9}, h, g));
    CHECK(in_cusp({r, h + std::pow(r, 1.5)}, h, g));
    CHECK_FALSE(in_cusp({r, -1e-12}, h, g));
    CHECK_THROWS_AS(in_cusp({0.0, 0.0}, 0.2, g), ValidationError);
    CHECK_THROWS_AS(in_cusp({0.0, 0.0}, 0.0, g), ValidationError);
}

TEST_CASE("geometry validation", "[geometry]")
{
    CHECK_NOTHROW(CuspGeometry::make(0.5, 0.5, 0.4));
    CHECK_THROWS_AS(CuspGeometry::make(0.0, 0.5, 0.4), ValidationError);
    CHECK_THROWS_AS(CuspGeometry::make(1.1, 0.5, 0.4), ValidationError);
    CHECK_THROWS_AS(CuspGeometry::make(0.5, -0.5, 0.4), ValidationError);
    CHECK_THROWS_AS(CuspGeometry::make(0.5, 1.0, 0.4), ValidationError);
    CHECK_THROWS_AS(CuspGeometry::make(0.5, 0.5, 0.6), ValidationError);
    // r0^(1+alpha) = 0.5^1.1 > 0.4 leaves no admissible gap
    CHECK_THROWS_AS(CuspGeometry::make(0.1, 0.5, 0.4), ValidationError);

    const CuspGeometry g{0.5, 0.5, 0.4};
    CHECK_THAT(g.max_admissible_h(), WithinRel(0.4 - std::pow(0.5, 1.5), 1e-15));
    CHECK(g.admits(g.max_admissible_h()));
    CHECK_FALSE(g.admits(std::nextafter(g.max_admissible_h(), 1.0) + 1e-15));
}
