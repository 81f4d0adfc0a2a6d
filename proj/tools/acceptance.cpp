// Acceptance run: one PASS/FAIL line per criterion with its runtime.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "cusplab/certify.hpp"
#include "cusplab/lubrication.hpp"
#include "cusplab/quadrature.hpp"
#include "cusplab/testfield.hpp"

using namespace cusplab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok && pass) detail << "first violation: " << what << "; ";
        pass = pass && ok;
    }
};

// ---------------------------------------------------------------------------

Outcome threshold_table()
{
    Outcome o;
    o.require(alpha_max(6.0) == 1.0 / 3.0, "alpha_max(6) != 1/3");
    double worst = 0.0;
    for (int i = 1; i < 1000; ++i) {
        const double gamma = 3.0 + 3.0 * i / 1000.0;
        const double expected = 3.0 * (gamma - 3.0) / (4.0 * gamma + 3.0);
        const double got = alpha_max(gamma);
        worst = std::max(worst, std::abs(got - expected) / expected);
        o.require(got < 1.0 / 3.0, "alpha_max not below 1/3 at gamma=" + std::to_string(gamma));
    }
    o.require(worst <= 1e-15, "closed form mismatch");
    for (int i = 0; i < 200; ++i) {
        const double gamma = 3.0 + 47.0 * i / 199.0;
        const TermThresholds t = term_thresholds(gamma);
        o.require(t.i1 <= std::min({t.i2, t.i3, t.i5}), "I1 not minimal at gamma=" + std::to_string(gamma));
        // The viscous bound 1/3 takes over exactly from gamma = 6 on.
        o.require((t.i1 <= t.i4) == (gamma <= 6.0), "I1 vs I4 ordering at gamma=" + std::to_string(gamma));
        o.require(alpha_max(gamma) == std::min(t.i1, t.i4), "alpha_max at gamma=" + std::to_string(gamma));
    }
    o.detail << "alpha_max(6)=" << alpha_max(6.0) << ", closed-form rel err " << worst << " on (3,6), 200 gamma in [3,50]";
    return o;
}

Outcome constant_c_gamma()
{
    Outcome o;
    double worst = 0.0;
    for (int i = 1; i <= 10000; ++i) {
        const double gamma = 1.0 + std::pow(10.0, -6.0 + (6.0 + std::log10(1e6 - 1.0)) * i / 10000.0);
        worst = std::max(worst, c_gamma(gamma));
    }
    o.require(worst <= 3.0, "C(gamma) exceeds 3");
    const double err = std::abs(c_gamma(2.0) - 2.0);
    o.require(err <= 1e-12, "C(2) != 2");
    o.detail << "max C = " << worst << " over 1e4 gamma in (1, 1e6], |C(2)-2| = " << err;
    return o;
}

Outcome kernel_criterion()
{
    Outcome o;
    const std::vector<double> grid = default_h_grid();
    int cases = 0;
    double worst = 0.0;
    for (double p : {0.25, 0.5, 1.0, 2.0, 3.0}) {
        for (double q : {0.5, 1.0, 2.0, 3.0, 4.0}) {
            for (double alpha : {0.1, 0.25, 0.5, 0.75, 1.0}) {
                if (std::abs(p + 1.0 - q * (1.0 + alpha)) < 0.15) continue;
                std::vector<double> v;
                for (double h : grid) v.push_back(kernel_integral(p, q, alpha, h, 1.0));
                const PowerLawFit fit = fit_power_law(grid, v);
                const KernelPrediction pred = kernel_predicted_exponent(p, q, alpha);
                const Verdict expected = p + 1.0 > q * (1.0 + alpha) ? Verdict::Bounded : Verdict::Divergent;
                const std::string label = "p=" + std::to_string(p) + " q=" + std::to_string(q) +
                                          " alpha=" + std::to_string(alpha);
                worst = std::max(worst, std::abs(fit.exponent - pred.exponent));
                o.require(std::abs(fit.exponent - pred.exponent) <= 0.05, "exponent off at " + label);
                o.require(classify_exponent(fit.exponent) == expected, "verdict wrong at " + label);
                ++cases;
            }
        }
    }
    o.detail << cases << " cases, worst exponent error " << worst;
    return o;
}

// Largest r0 (with d0 just below it) that admits the whole default grid.
CuspGeometry sweep_geometry(double alpha)
{
    for (double r0 : {0.5, 0.4, 0.3, 0.25, 0.2, 0.15, 0.1}) {
        const CuspGeometry g{alpha, r0, 0.98 * r0};
        if (g.max_admissible_h() > 0.0) return g;
    }
    return {alpha, 0.05, 0.049};
}

Outcome norm_sweeps()
{
    Outcome o;
    struct Case {
        Quantity q;
        double p, alpha;
        Verdict expected;
    };
    const Case cases[] = {{Quantity::Field, 4, 0.5, Verdict::Bounded},
                          {Quantity::Gradient, 2, 0.2, Verdict::Bounded},
                          {Quantity::HDerivative, 2, 0.2, Verdict::Bounded},
                          {Quantity::Gradient, 2, 0.6, Verdict::Divergent},
                          {Quantity::Gradient, 3, 0.5, Verdict::Divergent}};
    QuadratureConfig cfg;
    cfg.rel_tol = 1e-8;
    for (const Case& c : cases) {
        const CuspGeometry g = sweep_geometry(c.alpha);
        const NormSweep s = norm_sweep(c.q, c.p, g, admissible_h_grid(g), cfg, workers_from_env());
        o.require(s.verdict == c.expected, std::string(to_string(c.q)) + " p=" + std::to_string(c.p) +
                                               " alpha=" + std::to_string(c.alpha) + " gave " +
                                               std::string(to_string(s.verdict)));
        o.detail << to_string(c.q) << "(p=" << c.p << ",a=" << c.alpha << ")=" << to_string(s.verdict) << " e="
                 << s.fitted_exponent << " ";
    }
    return o;
}

FieldSample fd_oracle(double alpha, double r, double x3, double h, double step, double dh)
{
    auto eval = [&](double rr, double zz, double hh) { return field_from_stream(rr, detail::cusp_jet(rr, zz, hh, alpha)); };
    const FieldSample rp = eval(r + step, x3, h), rm = eval(r - step, x3, h);
    const FieldSample zp = eval(r, x3 + step, h), zm = eval(r, x3 - step, h);
    const FieldSample hp = eval(r, x3, h + dh), hm = eval(r, x3, h - dh);
    FieldSample fd = eval(r, x3, h);
    fd.dr_wr = (rp.w_r - rm.w_r) / (2 * step);
    fd.d3_wr = (zp.w_r - zm.w_r) / (2 * step);
    fd.dr_w3 = (rp.w_3 - rm.w_3) / (2 * step);
    fd.d3_w3 = (zp.w_3 - zm.w_3) / (2 * step);
    fd.wr_over_r = fd.w_r / r;
    fd.dh_wr = (hp.w_r - hm.w_r) / (2 * dh);
    fd.dh_w3 = (hp.w_3 - hm.w_3) / (2 * dh);
    return fd;
}

Outcome field_identities()
{
    Outcome o;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_div = 0.0, worst_fd_div = 0.0, worst_dh = 0.0, worst_trace = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double alpha = 0.05 + 0.95 * u(rng);
        const CuspGeometry g{alpha, 0.5, 0.49};
        const double h = std::pow(10.0, -6.0 + 5.0 * u(rng)) * std::min(1.0, g.max_admissible_h() / 0.1);
        const double r = g.r0 * (0.001 + 0.998 * u(rng));
        const double top = h + std::pow(r, g.exponent());
        const double x3 = top * (0.01 + 0.98 * u(rng));
        const FieldSample s = eval_cusp_field({r, x3}, h, g);
        worst_div = std::max(worst_div, std::abs(s.divergence()) / s.divergence_scale());

        const double dh = 1e-6 * h;
        const FieldSample fd = fd_oracle(alpha, r, x3, h, 1e-6 * std::min(top, r), dh);
        worst_fd_div = std::max(worst_fd_div, std::abs(fd.divergence()) / std::max(1.0, fd.divergence_scale()));
        // A difference quotient cannot resolve below ~eps |w| / dh.
        const double floor = 1e-15 * std::max(1.0, s.magnitude()) / dh / 1e-5;
        const double scale = std::max({1.0, s.dh_magnitude(), floor});
        worst_dh = std::max(worst_dh, std::max(std::abs(s.dh_wr - fd.dh_wr), std::abs(s.dh_w3 - fd.dh_w3)) / scale);
    }
    for (double alpha : {0.1, 0.3, 0.5, 1.0}) {
        const CuspGeometry g{alpha, 0.5, 0.49};
        const double h = std::min(1e-2, 0.5 * g.max_admissible_h());
        for (int i = 0; i <= 1000; ++i) {
            const double r = g.r0 * i / 1000.0;
            const FieldSample up = eval_cusp_field({r, h + std::pow(r, g.exponent())}, h, g);
            const FieldSample wall = eval_cusp_field({r, 0.0}, h, g);
            worst_trace = std::max({worst_trace, std::abs(up.w_r), std::abs(up.w_3 - 1.0), std::abs(wall.w_r),
                                    std::abs(wall.w_3)});
        }
    }
    o.require(worst_div <= 1e-12, "analytic divergence");
    o.require(worst_fd_div <= 1e-5, "finite-difference divergence");
    o.require(worst_trace <= 1e-12, "boundary trace");
    o.require(worst_dh <= 1e-5, "h-derivative");
    o.detail << "div " << worst_div << ", fd div " << worst_fd_div << ", traces " << worst_trace << ", d_h " << worst_dh;
    return o;
}

Outcome lubrication_oracles()
{
    Outcome o;
    FallConfig qs;
    qs.beta = 0.5;
    const FallTrajectory contact = simulate_fall(qs);
    const double t_err = contact.contact_time ? std::abs(*contact.contact_time - 2.0) : INFINITY;
    o.require(t_err <= 1e-6, "square-root drag contact time");

    FallConfig lin;
    lin.beta = 1.0;
    lin.m = 2.0;
    lin.g = 3.0;
    lin.c_d = 1.5;
    lin.t_max = 5.0;
    const FallTrajectory decay = simulate_fall(lin);
    double st = 0, sy = 0, stt = 0, sty = 0;
    const double n = static_cast<double>(decay.samples.size());
    for (const auto& s : decay.samples) {
        st += s.t;
        sy += std::log(s.h);
        stt += s.t * s.t;
        sty += s.t * std::log(s.h);
    }
    const double rate = -(n * sty - st * sy) / (n * stt - st * st);
    const double expected = lin.m * lin.g / lin.c_d;
    const double rate_err = std::abs(rate - expected) / expected;
    o.require(decay.verdict == FallVerdict::NoContactByHorizon, "linear drag made contact");
    o.require(rate_err <= 1e-3, "decay rate");

    FallConfig tmpl;
    tmpl.t_max = 100.0;
    const auto rows = contact_dichotomy(dichotomy_alpha_grid(), tmpl, workers_from_env());
    const auto matched = std::count_if(rows.begin(), rows.end(), [](const DichotomyRow& r) { return r.matches; });
    o.require(rows.size() == 20 && matched == 20, "dichotomy mismatch");
    o.detail << "|T-2| = " << t_err << ", decay rate " << rate << " vs " << expected << ", dichotomy " << matched
             << "/" << rows.size();
    return o;
}

Outcome certificate_algebra()
{
    Outcome o;
    PhysicalParams params;
    params.gamma = 6.0;
    params.g = 1.0;
    params.m = 50.0;
    const InitialData data{0.1, 0.2, 0.05};
    const double unit = final_inequality(params, data, 1.0, 0.2).lhs;
    const CollisionCertificate half = final_inequality(params, data, 0.5 / unit, 0.2);
    const double t_err = half.time_bound ? std::abs(*half.time_bound - 1.0) : INFINITY;
    o.require(std::abs(half.lhs - 0.5) <= 1e-15 && t_err <= 1e-12, "unit time bound");

    const double coefficient = 0.3;
    InitialData fluid{0.1, 0.2, 0.0};
    double previous = INFINITY;
    for (int i = 0; i < 20; ++i) {
        params.m = std::pow(10.0, -1.0 + 4.0 * i / 19.0);
        InitialData d = fluid;
        d.v0 = coefficient / std::sqrt(params.m);
        const double lhs = final_inequality(params, d, 1.0, 0.2).lhs;
        o.require(lhs < previous, "lhs not strictly decreasing at m=" + std::to_string(params.m));
        previous = lhs;
    }

    params.m = 1.0;
    const MassThreshold mt = mass_threshold(params, fluid, coefficient, 1.0, 0.2);
    double rel = INFINITY;
    if (mt.found) {
        params.m = mt.m_star;
        InitialData d = fluid;
        d.v0 = coefficient / std::sqrt(mt.m_star);
        rel = std::abs(final_inequality(params, d, 1.0, 0.2).lhs - params.g) / params.g;
    }
    o.require(rel <= 1e-5, "mass threshold");
    o.detail << "|T-1| = " << t_err << ", lhs decreasing on 20 masses, m* = " << mt.m_star << " with rel gap " << rel;
    return o;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> dir_contents(const fs::path& dir)
{
    std::map<std::string, std::string> files;
    if (!fs::exists(dir)) return files;
    for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = slurp(e.path());
    return files;
}

Outcome determinism()
{
    Outcome o;
    const fs::path scratch = fs::temp_directory_path() / ("cusplab_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(scratch);
    fs::create_directories(scratch);
    const std::string config = std::string(CUSPLAB_SOURCE_DIR) + "/configs/example.json";
    int files = 0;
    for (const char* cmd : {"field", "kernel", "norms", "certify", "fall", "dichotomy", "pd"}) {
        std::vector<std::map<std::string, std::string>> runs;
        for (const char* workers : {"1", "1", "8", "8"}) {
            const fs::path out = scratch / (std::string(cmd) + "_" + std::to_string(runs.size()));
            const std::string line = std::string("WORKERS=") + workers + " '" + CUSPLAB_CLI_PATH + "' " + cmd +
                                     " --config '" + config + "' --out '" + out.string() + "' >/dev/null 2>&1";
            const int status = std::system(line.c_str());
            o.require(WIFEXITED(status) && WEXITSTATUS(status) == 0, std::string(cmd) + " did not exit 0");
            runs.push_back(dir_contents(out));
        }
        o.require(!runs[0].empty(), std::string(cmd) + " wrote nothing");
        for (std::size_t i = 1; i < runs.size(); ++i) {
            o.require(runs[i] == runs[0], std::string(cmd) + " output differs between runs");
        }
        files += static_cast<int>(runs[0].size());
    }
    fs::remove_all(scratch);
    o.detail << "7 commands x 4 runs (WORKERS=1,1,8,8), " << files << " files byte-identical";
    return o;
}

} // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        double limit_seconds;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "threshold table", 1.0, threshold_table},
        {2, "C(gamma) bound", 1.0, constant_c_gamma},
        {3, "kernel exponents", 30.0, kernel_criterion},
        {4, "norm sweeps", 300.0, norm_sweeps},
        {5, "field identities", 10.0, field_identities},
        {6, "lubrication oracles", 30.0, lubrication_oracles},
        {7, "certificate algebra", 1.0, certificate_algebra},
        {8, "determinism", 300.0, determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (seconds > c.limit_seconds) {
            o.pass = false;
            o.detail << " runtime over " << c.limit_seconds << " s";
        }
        failures += o.pass ? 0 : 1;
        std::printf("criterion %d %s  %s: %s [%.3f s, limit %g s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                    o.detail.str().c_str(), seconds, c.limit_seconds);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
