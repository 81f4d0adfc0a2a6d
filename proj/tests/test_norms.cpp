#include <catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "cusplab/quadrature.hpp"

using namespace cusplab;
using Catch::Matchers::WithinAbs;

namespace {

// Largest r0 (with d0 just below it) that still admits the whole default grid.
CuspGeometry sweep_geometry(double alpha)
{
    for (double r0 : {0.5, 0.4, 0.3, 0.25, 0.2, 0.15, 0.1}) {
        const CuspGeometry g{alpha, r0, 0.98 * r0};
        if (g.max_admissible_h() > 0.0) return g;
    }
    return {alpha, 0.05, 0.049};
}

} // namespace

TEST_CASE("reference sweeps", "[norms]")
{
    struct Case { Quantity q; double p, alpha; Verdict expected; };
    for (const Case c : {Case{Quantity::Field, 4, 0.5, Verdict::Bounded},
                         Case{Quantity::Gradient, 2, 0.2, Verdict::Bounded},
                         Case{Quantity::HDerivative, 2, 0.2, Verdict::Bounded},
                         Case{Quantity::Gradient, 2, 0.6, Verdict::Divergent},
                         Case{Quantity::Gradient, 3, 0.5, Verdict::Divergent}}) {
        const CuspGeometry g = sweep_geometry(c.alpha);
        const NormSweep s = norm_sweep(c.q, c.p, g, admissible_h_grid(g));
        INFO(to_string(c.q) << " p=" << c.p << " alpha=" << c.alpha << " fitted=" << s.fitted_exponent);
        CHECK(s.verdict == c.expected);
        CHECK(s.monotone);
        if (c.expected == Verdict::Divergent) {
            CHECK_THAT(s.fitted_exponent, WithinAbs(norm_predicted_exponent(c.q, c.p, c.alpha).exponent, 0.05));
        }
    }
}

TEST_CASE("gradient norms at alpha = 0.2 stay within a factor 2", "[norms]")
{
    const CuspGeometry g = sweep_geometry(0.2);
    const NormSweep s = norm_sweep(Quantity::Gradient, 2, g, admissible_h_grid(g));
    const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
    CHECK(*hi / *lo < 2.0);
}

TEST_CASE("threshold fidelity", "[norms]")
{
    int cases = 0;
    for (Quantity q : {Quantity::Field, Quantity::Gradient, Quantity::HDerivative}) {
        for (double alpha : {0.2, 0.5, 1.0}) {
            const CuspGeometry g = sweep_geometry(alpha);
            const auto grid = admissible_h_grid(g);
            for (double p : {1.5, 2.0, 3.0, 4.0, 6.0}) {
                const double pc = critical_exponent(q, alpha);
                if (std::abs(p - pc) < 0.15) continue;
                const Verdict expected = p < pc ? Verdict::Bounded : Verdict::Divergent;
                const NormSweep s = norm_sweep(q, p, g, grid);
                INFO(to_string(q) << " p=" << p << " alpha=" << alpha << " fitted=" << s.fitted_exponent
                                  << " predicted=" << norm_predicted_exponent(q, p, alpha).exponent);
                CHECK(s.verdict == expected);
                if (q != Quantity::Field) CHECK(s.monotone);
                ++cases;
            }
        }
    }
    CHECK(cases >= 40);
}
