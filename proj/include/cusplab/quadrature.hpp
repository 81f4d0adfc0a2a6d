#ifndef CUSPLAB_QUADRATURE_HPP
#define CUSPLAB_QUADRATURE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "parallel.hpp"
#include "testfield.hpp"

namespace cusplab {

enum class Verdict { Bounded, Divergent, Marginal };
enum class Quantity { Field, Gradient, HDerivative };

constexpr std::string_view to_string(Verdict v) noexcept
{
    switch (v) {
    case Verdict::Bounded: return "BOUNDED";
    case Verdict::Divergent: return "DIVERGENT";
    case Verdict::Marginal: return "MARGINAL";
    }
    return "?";
}

constexpr std::string_view to_string(Quantity q) noexcept
{
    switch (q) {
    case Quantity::Field: return "FIELD";
    case Quantity::Gradient: return "GRADIENT";
    case Quantity::HDerivative: return "H_DERIVATIVE";
    }
    return "?";
}

inline Quantity parse_quantity(std::string_view s)
{
    if (s == "FIELD") return Quantity::Field;
    if (s == "GRADIENT") return Quantity::Gradient;
    if (s == "H_DERIVATIVE") return Quantity::HDerivative;
    throw ValidationError("unknown quantity '" + std::string(s) +
                          "' (expected FIELD, GRADIENT or H_DERIVATIVE)");
}

struct QuadratureConfig {
    double rel_tol = 1e-8;
    std::size_t max_subdivisions = 1'000'000;
    bool substitution = true;

    void validate() const
    {
        detail::require(rel_tol > 0.0 && rel_tol <= 1e-2, "quadrature.rel_tol must lie in (0, 1e-2]");
        detail::require(max_subdivisions >= 1000, "quadrature.max_subdivisions must be at least 1000");
    }
};

/// Adaptive refinement ran out of cells before reaching the tolerance.
class QuadratureError : public NumericalError {
public:
    QuadratureError(const std::string& what, double cell_lo, double cell_hi, double cell_error)
        : NumericalError(what), cell_lo_(cell_lo), cell_hi_(cell_hi), cell_error_(cell_error)
    {
    }

    double cell_lo() const noexcept { return cell_lo_; }
    double cell_hi() const noexcept { return cell_hi_; }
    double cell_error() const noexcept { return cell_error_; }

private:
    double cell_lo_;
    double cell_hi_;
    double cell_error_;
};

struct Integral {
    double value = 0.0;
    double abs_error = 0.0;
    std::size_t cells = 0;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> kronrod_nodes{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_weights{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss_weights{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Cell {
    double a = 0.0;
    double b = 0.0;
    double value = 0.0;
    double error = 0.0;
};

template <class F>
Cell gauss_kronrod(F& f, double a, double b)
{
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * kronrod_weights[7];
    double gauss = fc * gauss_weights[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kronrod_nodes[j];
        const double sum = f(center - dx) + f(center + dx);
        kronrod += kronrod_weights[j] * sum;
        if (j % 2 == 1) gauss += gauss_weights[j / 2] * sum;
    }
    return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

} // namespace detail

/// Globally adaptive Gauss-Kronrod integration of f over [a, b]: the cell with
/// the largest error estimate is bisected until the summed estimate is below
/// max(rel_tol |I|, abs_floor). The final sum runs over cells in position order.
template <class F>
Integral integrate_adaptive(F&& f, double a, double b, double rel_tol, std::size_t max_cells,
                            double abs_floor = 0.0)
{
    if (a == b) return {};
    std::vector<detail::Cell> cells;
    cells.reserve(64);
    auto by_error = [&cells](std::size_t i, std::size_t j) {
        if (cells[i].error != cells[j].error) return cells[i].error < cells[j].error;
        return cells[i].a > cells[j].a;
    };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_error)> heap(by_error);

    cells.push_back(detail::gauss_kronrod(f, a, b));
    heap.push(0);
    double total = cells[0].value;
    double total_err = cells[0].error;

    while (total_err > std::max(rel_tol * std::abs(total), abs_floor)) {
        const std::size_t worst = heap.top();
        const detail::Cell c = cells[worst];
        const double mid = 0.5 * (c.a + c.b);
        const bool unresolvable = !(mid > c.a && mid < c.b);
        if (cells.size() + 1 > max_cells || unresolvable) {
            std::ostringstream msg;
            msg << "adaptive quadrature did not reach rel_tol=" << rel_tol << " within " << cells.size()
                << " cells; worst cell [" << c.a << ", " << c.b << "] error " << c.error;
            throw QuadratureError(msg.str(), c.a, c.b, c.error);
        }
        heap.pop();
        const detail::Cell left = detail::gauss_kronrod(f, c.a, mid);
        const detail::Cell right = detail::gauss_kronrod(f, mid, c.b);
        total += left.value + right.value - c.value;
        total_err += left.error + right.error - c.error;
        cells[worst] = left;
        cells.push_back(right);
        heap.push(worst);
        heap.push(cells.size() - 1);
    }

    std::sort(cells.begin(), cells.end(),
              [](const detail::Cell& x, const detail::Cell& y) { return x.a < y.a; });
    Integral out;
    out.cells = cells.size();
    for (const auto& c : cells) {
        out.value += c.value;
        out.abs_error += c.error;
    }
    return out;
}

/// Gauss-Legendre nodes and weights on [0, 1].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int n)
    {
        detail::require(n >= 1 && n <= 64, "Gauss-Legendre order must be in [1, 64]");
        nodes.resize(n);
        weights.resize(n);
        for (int i = 0; i < n; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            nodes[i] = 0.5 * (1.0 - x);
            weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

// ---------------------------------------------------------------------------
// Kernel integral  int_0^r0 r^p / (h + r^(1+alpha))^q dr
// ---------------------------------------------------------------------------

struct KernelPrediction {
    double exponent = 0.0;
    Verdict classification = Verdict::Bounded;
};

/// Bounded iff p + 1 > q (1 + alpha); otherwise the integral grows like
/// h^-(q - (p+1)/(1+alpha)). Exact equality is the logarithmic case.
inline KernelPrediction kernel_predicted_exponent(double p, double q, double alpha)
{
    detail::require(p > 0.0 && q >= 0.0 && alpha > 0.0, "kernel: need p > 0, q >= 0, alpha > 0");
    const double lhs = p + 1.0;
    const double rhs = q * (1.0 + alpha);
    if (std::abs(lhs - rhs) <= 1e-12 * std::max(lhs, rhs)) return {0.0, Verdict::Marginal};
    if (lhs > rhs) return {0.0, Verdict::Bounded};
    return {q - lhs / (1.0 + alpha), Verdict::Divergent};
}

inline Integral kernel_integral_detailed(double p, double q, double alpha, double h, double r0,
                                         const QuadratureConfig& cfg)
{
    detail::require(p > 0.0 && q >= 0.0 && alpha > 0.0, "kernel: need p > 0, q >= 0, alpha > 0");
    detail::require(std::isfinite(h) && h > 0.0, "kernel: h must be positive");
    detail::require(std::isfinite(r0) && r0 > 0.0, "kernel: r0 must be positive");
    cfg.validate();

    const double e = 1.0 + alpha;
    auto denom = [&](double r) { return std::pow(h + std::pow(r, e), -q); };

    if (!cfg.substitution) {
        auto f = [&](double r) { return std::pow(r, p) * denom(r); };
        return integrate_adaptive(f, 0.0, r0, cfg.rel_tol, cfg.max_subdivisions);
    }

    // Boundary-layer scale r_c = h^(1/(1+alpha)). Below it r = r_c v^(1/(p+1))
    // absorbs the r^p weight; above it r = exp(u).
    const double split = std::min(std::pow(h, 1.0 / e), r0);
    const double inner_scale = std::pow(split, p + 1.0) / (p + 1.0);
    auto inner = [&](double v) { return denom(split * std::pow(v, 1.0 / (p + 1.0))); };
    Integral lo = integrate_adaptive(inner, 0.0, 1.0, cfg.rel_tol, cfg.max_subdivisions);
    lo.value *= inner_scale;
    lo.abs_error *= inner_scale;
    if (split >= r0) return lo;

    auto outer = [&](double u) {
        const double r = std::exp(u);
        return std::pow(r, p + 1.0) * denom(r);
    };
    const Integral hi =
        integrate_adaptive(outer, std::log(split), std::log(r0), cfg.rel_tol, cfg.max_subdivisions);
    return {lo.value + hi.value, lo.abs_error + hi.abs_error, lo.cells + hi.cells};
}

inline double kernel_integral(double p, double q, double alpha, double h, double r0,
                              const QuadratureConfig& cfg = {})
{
    return kernel_integral_detailed(p, q, alpha, h, r0, cfg).value;
}

// ---------------------------------------------------------------------------
// Power-law fitting
// ---------------------------------------------------------------------------

struct PowerLawFit {
    double exponent = 0.0;        ///< growth exponent max(0, model_exponent)
    double model_exponent = 0.0;  ///< e in value ~ scale h^-e + offset
    double scale = 0.0;
    double offset = 0.0;
    double loglog_slope = 0.0;    ///< plain least-squares slope of log value vs log h
    double rms_residual = 0.0;    ///< relative residual of the offset model
};

/// Least-squares slope of log(values) against log(h).
inline double loglog_slope(std::span<const double> h, std::span<const double> values)
{
    detail::require(h.size() == values.size() && h.size() >= 2, "fit: need at least two points");
    double sx = 0.0, sy = 0.0;
    const auto n = static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        detail::require(h[i] > 0.0 && values[i] > 0.0, "fit: h and values must be positive");
        sx += std::log(h[i]);
        sy += std::log(values[i]);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double dx = std::log(h[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(values[i]) - my);
    }
    return sxy / sxx;
}

namespace detail {

struct OffsetSolve {
    double scale = 0.0;
    double offset = 0.0;
    double residual = 0.0;
};

// For fixed e, least squares of (scale h^-e + offset) / v - 1 in (scale, offset).
inline OffsetSolve solve_offset_model(double e, std::span<const double> h, std::span<const double> v)
{
    double s11 = 0.0, s12 = 0.0, s22 = 0.0, b1 = 0.0, b2 = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double x1 = std::pow(h[i], -e) / v[i];
        const double x2 = 1.0 / v[i];
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        b1 += x1;
        b2 += x2;
    }
    OffsetSolve out;
    const double det = s11 * s22 - s12 * s12;
    if (std::abs(det) <= 1e-13 * s11 * s22) {
        out.scale = b1 / s11;  // columns collinear: a single power term
    } else {
        out.scale = (b1 * s22 - b2 * s12) / det;
        out.offset = (s11 * b2 - s12 * b1) / det;
    }
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double r = (out.scale * std::pow(h[i], -e) + out.offset) / v[i] - 1.0;
        out.residual += r * r;
    }
    return out;
}

} // namespace detail

/// Fits values ~ scale h^-e + offset by variable projection: linear least
/// squares in (scale, offset) for each e, scanned on [-4, 6] and refined by
/// golden section. The offset absorbs the O(1) part that biases a plain
/// log-log slope over a finite grid.
inline PowerLawFit fit_power_law(std::span<const double> h, std::span<const double> values)
{
    detail::require(h.size() == values.size() && h.size() >= 3, "fit: need at least three points");
    PowerLawFit fit;
    fit.loglog_slope = loglog_slope(h, values);

    const auto [vmin, vmax] = std::minmax_element(values.begin(), values.end());
    if (*vmax - *vmin <= 1e-10 * std::abs(*vmax)) {
        double mean = 0.0;
        for (double v : values) mean += v;
        fit.offset = mean / static_cast<double>(values.size());
        return fit;
    }

    constexpr double e_lo = -4.0, e_hi = 6.0, step = 0.01;
    constexpr int n = static_cast<int>((e_hi - e_lo) / step + 0.5);
    int best = 0;
    double best_res = detail::solve_offset_model(e_lo, h, values).residual;
    for (int i = 1; i <= n; ++i) {
        const double r = detail::solve_offset_model(e_lo + i * step, h, values).residual;
        if (r < best_res) {
            best_res = r;
            best = i;
        }
    }
    double lo = e_lo + std::max(0, best - 1) * step;
    double hi = e_lo + std::min(n, best + 1) * step;
    constexpr double inv_phi = 0.6180339887498949;
    double a = hi - inv_phi * (hi - lo), b = lo + inv_phi * (hi - lo);
    double fa = detail::solve_offset_model(a, h, values).residual;
    double fb = detail::solve_offset_model(b, h, values).residual;
    for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
        if (fa < fb) {
            hi = b; b = a; fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = detail::solve_offset_model(a, h, values).residual;
        } else {
            lo = a; a = b; fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = detail::solve_offset_model(b, h, values).residual;
        }
    }
    const double e = 0.5 * (lo + hi);
    const auto sol = detail::solve_offset_model(e, h, values);
    fit.model_exponent = e;
    fit.exponent = std::max(0.0, e);
    fit.scale = sol.scale;
    fit.offset = sol.offset;
    fit.rms_residual = std::sqrt(sol.residual / static_cast<double>(h.size()));
    return fit;
}

/// BOUNDED iff |e| <= 0.05, DIVERGENT iff e >= 0.1, MARGINAL otherwise.
constexpr Verdict classify_exponent(double e) noexcept
{
    if (std::abs(e) <= 0.05) return Verdict::Bounded;
    if (e >= 0.1) return Verdict::Divergent;
    return Verdict::Marginal;
}

// ---------------------------------------------------------------------------
// L^p norms over the cusp region
// ---------------------------------------------------------------------------

/// Geometric grid 10^-1, 10^-1.5, ..., 10^-6.
inline std::vector<double> default_h_grid()
{
    std::vector<double> grid;
    for (int k = 0; k <= 10; ++k) grid.push_back(std::pow(10.0, -1.0 - 0.5 * k));
    return grid;
}

/// The default grid restricted to gap heights the geometry admits.
inline std::vector<double> admissible_h_grid(const CuspGeometry& geom)
{
    std::vector<double> grid;
    for (double h : default_h_grid()) {
        if (geom.admits(h)) grid.push_back(h);
    }
    return grid;
}

namespace detail {

inline double quantity_magnitude(Quantity q, const FieldSample& s) noexcept
{
    switch (q) {
    case Quantity::Field: return s.magnitude();
    case Quantity::Gradient: return s.gradient_norm();
    case Quantity::HDerivative: return s.dh_magnitude();
    }
    return 0.0;
}

// Even integer exponents make |Q|^p a polynomial of degree 3p in x3/psi.
inline int exact_inner_order(double p) noexcept
{
    if (p != std::round(p) || static_cast<long>(p) % 2 != 0 || p > 32.0) return 0;
    return static_cast<int>(std::ceil((3.0 * p + 1.0) / 2.0));
}

} // namespace detail

/// int over the cusp region of |Q|^p, with dx = 2 pi r dr dx3.
///
/// The inner integral over x3 = psi(r) t, t in [0, 1], is exact Gauss-Legendre
/// for even integer p and adaptive otherwise. The outer integral in r splits at
/// the boundary-layer scale h^(1/(1+alpha)) and runs in log r above it.
inline Integral lp_integral(Quantity quantity, double p, double h, const CuspGeometry& geom,
                            const QuadratureConfig& cfg = {})
{
    geom.validate();
    geom.require_admissible(h);
    cfg.validate();
    detail::require(std::isfinite(p) && p > 0.0, "lp_norm: p must be positive");

    const int order = detail::exact_inner_order(p);
    const GaussLegendre rule(order > 0 ? order : 1);
    const double alpha = geom.alpha;

    auto slice = [&](double r) {
        const double psi = h + std::pow(r, 1.0 + alpha);
        auto at = [&](double t) {
            const FieldSample s = field_from_stream(r, detail::cusp_jet(r, psi * t, h, alpha));
            return std::pow(detail::quantity_magnitude(quantity, s), p);
        };
        double inner = 0.0;
        if (order > 0) {
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) inner += rule.weights[i] * at(rule.nodes[i]);
        } else {
            inner = integrate_adaptive(at, 0.0, 1.0, 0.1 * cfg.rel_tol, cfg.max_subdivisions).value;
        }
        return 2.0 * std::numbers::pi * r * psi * inner;
    };

    if (!cfg.substitution) {
        return integrate_adaptive(slice, 0.0, geom.r0, cfg.rel_tol, cfg.max_subdivisions);
    }
    const double split = std::min(std::pow(h, 1.0 / (1.0 + alpha)), geom.r0);
    const Integral lo = integrate_adaptive(slice, 0.0, split, cfg.rel_tol, cfg.max_subdivisions);
    if (split >= geom.r0) return lo;
    auto outer = [&](double u) {
        const double r = std::exp(u);
        return r * slice(r);
    };
    const Integral hi =
        integrate_adaptive(outer, std::log(split), std::log(geom.r0), cfg.rel_tol, cfg.max_subdivisions);
    return {lo.value + hi.value, lo.abs_error + hi.abs_error, lo.cells + hi.cells};
}

/// (int over the cusp region of |Q|^p)^(1/p).
inline double lp_norm(Quantity quantity, double p, double h, const CuspGeometry& geom,
                      const QuadratureConfig& cfg = {})
{
    return std::pow(lp_integral(quantity, p, h, geom, cfg).value, 1.0 / p);
}

/// Predicted growth of the L^p norm from its most singular pointwise term,
/// as a kernel integral over the cusp (the measure contributes r psi dr):
///   FIELD:                 r / psi         -> int r^(p+1) / psi^(p-1)
///   GRADIENT, H_DERIVATIVE: r / psi^2      -> int r^(p+1) / psi^(2p-1)
/// The norm exponent is the kernel exponent divided by p. The bounded ranges
/// are p < 1 + 3/alpha and p < (3+alpha)/(1+2 alpha) respectively.
inline KernelPrediction norm_predicted_exponent(Quantity quantity, double p, double alpha)
{
    detail::require(p > 0.0 && alpha > 0.0, "norm prediction: need p > 0, alpha > 0");
    const double q = quantity == Quantity::Field ? p - 1.0 : 2.0 * p - 1.0;
    if (q <= 0.0) return {0.0, Verdict::Bounded};
    KernelPrediction k = kernel_predicted_exponent(p + 1.0, q, alpha);
    k.exponent /= p;
    return k;
}

inline double critical_exponent(Quantity quantity, double alpha)
{
    detail::require(alpha > 0.0, "critical exponent: alpha must be positive");
    return quantity == Quantity::Field ? 1.0 + 3.0 / alpha : (3.0 + alpha) / (1.0 + 2.0 * alpha);
}

struct NormSweep {
    Quantity quantity = Quantity::Field;
    double p = 2.0;
    std::vector<double> h_grid;
    std::vector<double> values;     ///< L^p norms
    std::vector<double> integrals;  ///< values^p
    PowerLawFit integral_fit;       ///< offset power-law fit of the integrals
    double fitted_exponent = 0.0;   ///< growth exponent of the norm: integral exponent / p
    double loglog_slope = 0.0;      ///< plain log-log slope of the norms
    Verdict verdict = Verdict::Bounded;
    bool monotone = true;           ///< norms nondecreasing as h shrinks, to tolerance
};

inline void validate_h_grid(std::span<const double> grid, const CuspGeometry& geom)
{
    detail::require(grid.size() >= 3, "h grid needs at least three points");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        geom.require_admissible(grid[i]);
        if (i > 0) detail::require(grid[i] < grid[i - 1], "h grid must be strictly decreasing");
    }
}

inline NormSweep norm_sweep(Quantity quantity, double p, const CuspGeometry& geom,
                            std::span<const double> h_grid, const QuadratureConfig& cfg = {},
                            unsigned workers = 1)
{
    geom.validate();
    cfg.validate();
    validate_h_grid(h_grid, geom);
    detail::require(std::isfinite(p) && p > 0.0, "norm_sweep: p must be positive");

    NormSweep out;
    out.quantity = quantity;
    out.p = p;
    out.h_grid.assign(h_grid.begin(), h_grid.end());
    out.integrals.resize(h_grid.size());
    out.values.resize(h_grid.size());
    parallel_for(h_grid.size(), workers, [&](std::size_t i) {
        out.integrals[i] = lp_integral(quantity, p, h_grid[i], geom, cfg).value;
    });
    for (std::size_t i = 0; i < h_grid.size(); ++i) out.values[i] = std::pow(out.integrals[i], 1.0 / p);

    out.integral_fit = fit_power_law(out.h_grid, out.integrals);
    out.fitted_exponent = out.integral_fit.exponent / p;
    out.loglog_slope = loglog_slope(out.h_grid, out.values);
    out.verdict = classify_exponent(out.fitted_exponent);
    for (std::size_t i = 1; i < out.values.size(); ++i) {
        if (out.values[i] < out.values[i - 1] * (1.0 - 10.0 * cfg.rel_tol)) out.monotone = false;
    }
    return out;
}

} // namespace cusplab

#endif // CUSPLAB_QUADRATURE_HPP
