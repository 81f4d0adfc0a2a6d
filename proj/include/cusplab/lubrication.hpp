#ifndef CUSPLAB_LUBRICATION_HPP
#define CUSPLAB_LUBRICATION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"

namespace cusplab {

/// Drag exponent of the two-dimensional lubrication preset, 3 alpha / (1 + alpha).
inline double beta_of_alpha(double alpha)
{
    detail::require(std::isfinite(alpha) && alpha > 0.0, "beta_of_alpha: alpha must be positive");
    return 3.0 * alpha / (1.0 + alpha);
}

enum class FallMode { FullInertial, QuasiStatic };

constexpr std::string_view to_string(FallMode m) noexcept
{
    return m == FallMode::FullInertial ? "FULL_INERTIAL" : "QUASI_STATIC";
}

inline FallMode parse_fall_mode(std::string_view s)
{
    if (s == "FULL_INERTIAL") return FallMode::FullInertial;
    if (s == "QUASI_STATIC") return FallMode::QuasiStatic;
    throw ValidationError("unknown fall mode '" + std::string(s) + "'");
}

/// Reduced gap dynamics with power-law lubrication drag D = c_d h^-beta.
///   FULL_INERTIAL:  m v' = -m g - c_d h^-beta v,  h' = v
///   QUASI_STATIC:   h' = -(m g / c_d) h^beta
struct FallConfig {
    double m = 1.0;
    double g = 1.0;
    double c_d = 1.0;
    double beta = 0.5;
    double h0 = 1.0;
    double v0 = 0.0;
    FallMode mode = FallMode::QuasiStatic;
    double h_stop = 1e-12;
    double t_max = 10.0;
    double tol = 1e-9;
    double max_step = 0.0;              ///< 0 selects t_max / 500
    std::size_t max_steps = 5'000'000;

    void validate() const
    {
        detail::require(m > 0.0 && g > 0.0, "fall: m and g must be positive");
        detail::require(c_d > 0.0, "fall.c_d must be positive");
        detail::require(std::isfinite(beta) && beta >= 0.0, "fall.beta must be non-negative");
        detail::require(h_stop > 0.0 && h0 > h_stop, "fall: need h0 > h_stop > 0");
        detail::require(std::isfinite(v0), "fall.v0 must be finite");
        detail::require(std::isfinite(t_max) && t_max > 0.0, "fall.t_max must be positive");
        detail::require(tol > 0.0 && tol < 1e-2, "fall.tol must lie in (0, 1e-2)");
        detail::require(max_step >= 0.0, "fall.max_step must be non-negative");
        detail::require(max_steps >= 100, "fall.max_steps must be at least 100");
    }

    double kappa() const noexcept { return m * g / c_d; }
    double step_limit() const noexcept { return max_step > 0.0 ? max_step : t_max / 500.0; }
};

struct FallSample {
    double t = 0.0;
    double h = 0.0;
    double hdot = 0.0;
};

enum class FallVerdict { Contact, NoContactByHorizon };

constexpr std::string_view to_string(FallVerdict v) noexcept
{
    return v == FallVerdict::Contact ? "CONTACT" : "NO_CONTACT_BY_HORIZON";
}

struct FallTrajectory {
    std::vector<FallSample> samples;
    std::optional<double> contact_time;
    FallVerdict verdict = FallVerdict::NoContactByHorizon;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
};

namespace detail {

// State (log h, v); v is unused in quasi-static mode.
using FallState = std::array<double, 2>;

struct FallRhs {
    const FallConfig& cfg;

    FallState operator()(const FallState& s) const noexcept
    {
        const double y = s[0];
        if (cfg.mode == FallMode::QuasiStatic) {
            return {-cfg.kappa() * std::exp((cfg.beta - 1.0) * y), 0.0};
        }
        const double v = s[1];
        return {v * std::exp(-y), -cfg.g - (cfg.c_d / cfg.m) * std::exp(-cfg.beta * y) * v};
    }

    double hdot(const FallState& s) const noexcept
    {
        if (cfg.mode == FallMode::QuasiStatic) return -cfg.kappa() * std::exp(cfg.beta * s[0]);
        return s[1];
    }

    // d rhs / d state, used by the implicit stepper.
    std::array<FallState, 2> jacobian(const FallState& s) const noexcept
    {
        const double e = std::exp(-s[0]);
        const double damp = (cfg.c_d / cfg.m) * std::exp(-cfg.beta * s[0]);
        return {FallState{-s[1] * e, e}, FallState{cfg.beta * damp * s[1], -damp}};
    }
};

struct TrialStep {
    FallState next{};
    FallState error{};
};

// Dormand-Prince 5(4); quasi-static gaps are non-stiff in log h.
inline TrialStep dopri_step(const FallRhs& rhs, const FallState& s, double dt) noexcept
{
    constexpr double a21 = 1.0 / 5.0;
    constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                     a54 = -212.0 / 729.0;
    constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                     a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                     b6 = 11.0 / 84.0;
    constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                     e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

    auto stage = [&](std::initializer_list<std::pair<double, const FallState*>> terms) {
        FallState out = s;
        for (const auto& [c, k] : terms) {
            out[0] += dt * c * (*k)[0];
            out[1] += dt * c * (*k)[1];
        }
        return out;
    };
    const FallState k1 = rhs(s);
    const FallState k2 = rhs(stage({{a21, &k1}}));
    const FallState k3 = rhs(stage({{a31, &k1}, {a32, &k2}}));
    const FallState k4 = rhs(stage({{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const FallState k5 = rhs(stage({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const FallState k6 = rhs(stage({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    TrialStep out;
    out.next = stage({{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    const FallState k7 = rhs(out.next);
    for (int i = 0; i < 2; ++i) {
        out.error[i] = dt * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    }
    return out;
}

// Linearly implicit Rosenbrock 2(3) pair (the L-stable scheme behind
// MATLAB's ode23s). The drag relaxation time m h^beta / c_d collapses as the
// gap closes, which stalls any explicit method.
inline TrialStep rosenbrock_step(const FallRhs& rhs, const FallState& s, double dt) noexcept
{
    const double d = 1.0 / (2.0 + std::numbers::sqrt2);
    const double e32 = 6.0 + std::numbers::sqrt2;
    const auto J = rhs.jacobian(s);
    // W = I - dt d J, solved by Cramer's rule.
    const double w00 = 1.0 - dt * d * J[0][0], w01 = -dt * d * J[0][1];
    const double w10 = -dt * d * J[1][0], w11 = 1.0 - dt * d * J[1][1];
    const double det = w00 * w11 - w01 * w10;
    auto solve = [&](const FallState& b) {
        return FallState{(b[0] * w11 - w01 * b[1]) / det, (w00 * b[1] - w10 * b[0]) / det};
    };

    const FallState f0 = rhs(s);
    const FallState k1 = solve(f0);
    const FallState f1 = rhs({s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1]});
    FallState k2 = solve({f1[0] - k1[0], f1[1] - k1[1]});
    k2 = {k2[0] + k1[0], k2[1] + k1[1]};
    TrialStep out;
    out.next = {s[0] + dt * k2[0], s[1] + dt * k2[1]};
    const FallState f2 = rhs(out.next);
    const FallState k3 = solve({f2[0] - e32 * (k2[0] - f1[0]) - 2.0 * (k1[0] - f0[0]),
                                f2[1] - e32 * (k2[1] - f1[1]) - 2.0 * (k1[1] - f0[1])});
    for (int i = 0; i < 2; ++i) out.error[i] = dt / 6.0 * (k1[i] - 2.0 * k2[i] + k3[i]);
    return out;
}

} // namespace detail

/// Integrates the gap in log h with adaptive steps: Dormand-Prince 5(4) for
/// the quasi-static law and a Rosenbrock 2(3) pair for the stiff inertial
/// system. Local error is held below tol (absolute in log h, mixed in v) and
/// each step is capped at 0.5 h / |h'| so the gap cannot close inside one
/// step. Contact is declared once h <= h_stop while closing with beta < 1;
/// the remaining time is the analytic tail of the local power law
/// |h'| ~ h^beta, h / ((1 - beta) |h'|). For beta >= 1 that tail is infinite
/// and integration continues to t_max.
inline FallTrajectory simulate_fall(const FallConfig& cfg)
{
    cfg.validate();
    using S = detail::FallState;
    const detail::FallRhs rhs{cfg};
    const bool inertial = cfg.mode == FallMode::FullInertial;
    const double order_exp = inertial ? -1.0 / 3.0 : -1.0 / 5.0;

    FallTrajectory traj;
    S state{std::log(cfg.h0), inertial ? cfg.v0 : 0.0};
    double t = 0.0;
    traj.samples.push_back({t, cfg.h0, rhs.hdot(state)});

    const double dt_min = 1e-18 * cfg.t_max;
    const double step_limit = std::min(cfg.step_limit(), cfg.t_max);
    auto closing_cap = [&](const S& s) {
        const double h = std::exp(s[0]);
        const double rate = std::abs(rhs.hdot(s));
        return rate > 0.0 ? 0.5 * h / rate : step_limit;
    };
    double dt = std::min({step_limit, closing_cap(state), 1e-3 * cfg.t_max});

    while (t < cfg.t_max) {
        if (traj.accepted_steps + traj.rejected_steps >= cfg.max_steps) {
            throw NumericalError("simulate_fall: step budget of " + std::to_string(cfg.max_steps) +
                                 " exhausted at t=" + std::to_string(t));
        }
        dt = std::min({dt, step_limit, closing_cap(state), cfg.t_max - t});
        if (dt < dt_min) {
            throw NumericalError("simulate_fall: step size underflow at t=" + std::to_string(t));
        }

        const detail::TrialStep trial =
            inertial ? detail::rosenbrock_step(rhs, state, dt) : detail::dopri_step(rhs, state, dt);
        // Local errors are aimed a decade under tol: near contact the log-gap
        // dynamics is expansive and amplifies what each step leaves behind.
        const double target = 0.1 * cfg.tol;
        double err = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double scale =
                i == 0 ? target : target * (1.0 + std::max(std::abs(state[i]), std::abs(trial.next[i])));
            err = std::max(err, std::abs(trial.error[i]) / scale);
        }
        if (!std::isfinite(err) || !std::isfinite(trial.next[0]) || err > 1.0) {
            ++traj.rejected_steps;
            const double shrink = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, order_exp)) : 0.2;
            dt *= shrink;
            continue;
        }

        ++traj.accepted_steps;
        // The last step lands exactly on the horizon.
        t = dt == cfg.t_max - t ? cfg.t_max : t + dt;
        state = trial.next;
        const double h = std::exp(state[0]);
        if (!(h > 0.0)) throw NumericalError("simulate_fall: gap underflowed to zero at t=" + std::to_string(t));
        const double hdot = rhs.hdot(state);
        traj.samples.push_back({t, h, hdot});

        if (h <= cfg.h_stop && hdot < 0.0 && cfg.beta < 1.0) {
            traj.verdict = FallVerdict::Contact;
            traj.contact_time = t + h / ((1.0 - cfg.beta) * std::abs(hdot));
            return traj;
        }
        const double grow = err > 0.0 ? std::min(5.0, 0.9 * std::pow(err, order_exp)) : 5.0;
        dt *= grow;
    }
    return traj;
}

enum class Growth { Linear, Sublinear, Superlinear };

constexpr std::string_view to_string(Growth g) noexcept
{
    switch (g) {
    case Growth::Linear: return "LINEAR";
    case Growth::Sublinear: return "SUBLINEAR";
    case Growth::Superlinear: return "SUPERLINEAR";
    }
    return "?";
}

struct LogLawFit {
    double slope = 0.0;
    double residual = 0.0;  ///< RMS residual of the linear fit
    double curvature = 0.0; ///< quadratic coefficient of |log h| in t over the window
    Growth growth = Growth::Linear;
    std::size_t window_samples = 0;
};

/// Least-squares line |log h| = a + slope t over the trailing half of the run,
/// plus a quadratic fit classifying the growth of |log h|.
inline LogLawFit log_law_check(const FallTrajectory& traj, const FallConfig& cfg)
{
    detail::require(cfg.beta >= 1.0, "log_law_check: requires beta >= 1");
    detail::require(traj.verdict == FallVerdict::NoContactByHorizon,
                    "log_law_check: trajectory must not end in contact");
    detail::require(traj.samples.size() >= 10, "log_law_check: trajectory too short to fit (< 10 samples)");

    const double t_end = traj.samples.back().t;
    std::vector<double> ts, ys;
    for (const auto& s : traj.samples) {
        if (s.t >= 0.5 * t_end) {
            ts.push_back(s.t);
            ys.push_back(std::abs(std::log(s.h)));
        }
    }
    detail::require(ts.size() >= 10, "log_law_check: trailing window has fewer than 10 samples");

    const auto n = static_cast<double>(ts.size());
    double mt = 0.0, my = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        mt += ts[i];
        my += ys[i];
    }
    mt /= n;
    my /= n;

    // Centered, scaled abscissa keeps the quadratic normal equations well conditioned.
    const double half_width = std::max(0.5 * (ts.back() - ts.front()), 1e-300);
    double s2 = 0.0, s3 = 0.0, s4 = 0.0, sy1 = 0.0, sy2 = 0.0, sy0 = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double x = (ts[i] - mt) / half_width;
        const double y = ys[i] - my;
        s2 += x * x;
        s3 += x * x * x;
        s4 += x * x * x * x;
        sy1 += x * y;
        sy2 += x * x * y;
        sy0 += y;
    }
    LogLawFit fit;
    fit.window_samples = ts.size();
    fit.slope = sy1 / s2 / half_width;
    double rss = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double r = ys[i] - my - fit.slope * (ts[i] - mt);
        rss += r * r;
    }
    fit.residual = std::sqrt(rss / n);

    // y ~ c0 + c1 x + c2 (x^2 - s2/n), orthogonal to the constant.
    const double q_ss = s4 - s2 * s2 / n;
    const double q_xy = s3;
    const double q_y = sy2 - s2 * sy0 / n;
    const double det = s2 * q_ss - q_xy * q_xy;
    const double c2 = det != 0.0 ? (s2 * q_y - q_xy * sy1) / det : 0.0;
    fit.curvature = c2 / (half_width * half_width);
    const double bend = std::abs(c2);
    const double rise = std::abs(sy1 / s2) + 1e-300;
    if (bend <= 1e-6 * rise) {
        fit.growth = Growth::Linear;
    } else {
        fit.growth = c2 < 0.0 ? Growth::Sublinear : Growth::Superlinear;
    }
    return fit;
}

/// 20 alpha values in (0, 1] avoiding the critical band [0.48, 0.52]:
/// 0.046 k and 0.52 + 0.048 k for k = 1..10.
inline std::vector<double> dichotomy_alpha_grid()
{
    std::vector<double> grid;
    for (int k = 1; k <= 10; ++k) grid.push_back(0.046 * k);
    for (int k = 1; k <= 10; ++k) grid.push_back(0.52 + 0.048 * k);
    return grid;
}

struct DichotomyRow {
    double alpha = 0.0;
    double beta = 0.0;
    FallVerdict verdict = FallVerdict::NoContactByHorizon;
    std::optional<double> contact_time;
    bool matches = false;  ///< verdict agrees with "contact iff beta < 1"
};

/// Quasi-static fall for each alpha with beta = 3 alpha / (1 + alpha).
inline std::vector<DichotomyRow> contact_dichotomy(std::span<const double> alpha_grid,
                                                   const FallConfig& tmpl, unsigned workers = 1)
{
    for (double a : alpha_grid) {
        detail::require(a > 0.0 && a <= 1.0, "dichotomy: alpha values must lie in (0, 1]");
        detail::require(a < 0.48 || a > 0.52, "dichotomy: alpha grid must exclude the band [0.48, 0.52]");
    }
    std::vector<DichotomyRow> rows(alpha_grid.size());
    parallel_for(alpha_grid.size(), workers, [&](std::size_t i) {
        FallConfig cfg = tmpl;
        cfg.mode = FallMode::QuasiStatic;
        cfg.beta = beta_of_alpha(alpha_grid[i]);
        const FallTrajectory traj = simulate_fall(cfg);
        DichotomyRow& row = rows[i];
        row.alpha = alpha_grid[i];
        row.beta = cfg.beta;
        row.verdict = traj.verdict;
        row.contact_time = traj.contact_time;
        row.matches = (traj.verdict == FallVerdict::Contact) == (cfg.beta < 1.0);
    });
    return rows;
}

} // namespace cusplab

#endif // CUSPLAB_LUBRICATION_HPP
