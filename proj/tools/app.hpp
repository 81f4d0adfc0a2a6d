#ifndef CUSPLAB_TOOLS_APP_HPP
#define CUSPLAB_TOOLS_APP_HPP

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <openssl/evp.h>
#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "cusplab/certify.hpp"
#include "cusplab/lubrication.hpp"
#include "cusplab/parallel.hpp"
#include "cusplab/quadrature.hpp"
#include "cusplab/testfield.hpp"

#ifndef CUSPLAB_VERSION
#define CUSPLAB_VERSION "0.0.0"
#endif

namespace cusplab::app {

using json = nlohmann::json;

inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 2;
inline constexpr int exit_failure = 3;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct FieldStudy {
    double h = 1e-3;
    std::string region = "cusp";  // cusp: r in [0, r0], x3 = t psi(r); global: box [0, r_max] x [0, x3_max]
    int nr = 21;
    int nx3 = 11;
    double r_max = 1.0;
    double x3_max = 1.0;
};

struct KernelStudy {
    double p = 1.0;
    double q = 2.0;
    double alpha = 0.5;
    double r0 = 1.0;
    std::vector<double> h_grid = default_h_grid();
};

struct NormStudy {
    Quantity quantity = Quantity::Gradient;
    double p = 2.0;
    std::vector<double> h_grid;  // empty: admissible part of the default grid
};

struct CertifyStudy {
    std::string c0_mode = "fixed";  // fixed | empirical
    double c0 = 1.0;
    double h_ref = 1e-3;
};

struct DichotomyStudy {
    std::vector<double> alpha_grid = dichotomy_alpha_grid();
    double t_max = 100.0;
};

struct PdStudy {
    double e_init = 0.02;
    double k_p = 1.0;
    double k_d = 0.0;
    double dist_g1 = 1.5;
    double c_energy = 1.0;
};

struct RunConfig {
    CuspGeometry geometry;
    PhysicalParams physics;
    InitialData initial;
    std::optional<double> v0_coefficient;  // v0 = coefficient m^-1/2
    QuadratureConfig quadrature;
    FallConfig fall;
    FieldStudy field;
    KernelStudy kernel;
    NormStudy norms;
    CertifyStudy certify;
    DichotomyStudy dichotomy;
    PdStudy pd;
    std::string out_dir = "out";
    json effective;  // the document after overrides, echoed into reports
};

namespace detail {

// Reads one JSON object, remembering which keys were consumed so that the
// rest can be rejected as unknown.
class Section {
public:
    Section(const json& doc, std::string path) : path_(std::move(path))
    {
        if (!doc.is_object()) throw ValidationError(path_ + ": expected an object");
        obj_ = &doc;
    }

    double number(const std::string& key, double fallback)
    {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_number()) throw ValidationError(where(key) + ": expected a number");
        return v->get<double>();
    }

    std::optional<double> optional_number(const std::string& key)
    {
        const json* v = take(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) throw ValidationError(where(key) + ": expected a number");
        return v->get<double>();
    }

    long integer(const std::string& key, long fallback)
    {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) throw ValidationError(where(key) + ": expected an integer");
        return v->get<long>();
    }

    bool boolean(const std::string& key, bool fallback)
    {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_boolean()) throw ValidationError(where(key) + ": expected true or false");
        return v->get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback)
    {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_string()) throw ValidationError(where(key) + ": expected a string");
        return v->get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback)
    {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_array()) throw ValidationError(where(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number()) throw ValidationError(where(key) + ": expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    void finish() const
    {
        for (const auto& [key, value] : obj_->items()) {
            if (!seen_.count(key)) throw ValidationError(where(key) + ": unknown key");
        }
    }

private:
    const json* take(const std::string& key)
    {
        seen_.insert(key);
        const auto it = obj_->find(key);
        return it == obj_->end() ? nullptr : &*it;
    }

    std::string where(const std::string& key) const { return path_ + "." + key; }

    const json* obj_ = nullptr;
    std::string path_;
    std::set<std::string> seen_;
};

inline std::size_t to_count(long v, const std::string& what)
{
    if (v < 0) throw ValidationError(what + " must be non-negative");
    return static_cast<std::size_t>(v);
}

inline void require_decreasing(const std::vector<double>& grid, const std::string& what)
{
    cusplab::detail::require(grid.size() >= 3, what + " needs at least three points");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        cusplab::detail::require(std::isfinite(grid[i]) && grid[i] > 0.0, what + " entries must be positive");
        if (i > 0) cusplab::detail::require(grid[i] < grid[i - 1], what + " must be strictly decreasing");
    }
}

} // namespace detail

/// Applies "a.b.c=value" to the document. The value is parsed as JSON when
/// possible and taken as a plain string otherwise.
inline void apply_override(json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError("override '" + assignment + "' must have the form key=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ValidationError("override '" + assignment + "' has an empty key");
        if (!node->is_object()) throw ValidationError("override '" + path + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

inline RunConfig parse_config(const json& doc)
{
    RunConfig cfg;
    cfg.effective = doc;
    if (!doc.is_object()) throw ValidationError("config: top level must be an object");
    static const std::set<std::string> known{"geometry", "physics", "initial", "quadrature", "fall", "field",
                                             "kernel", "norms", "certify", "dichotomy", "pd", "output"};
    for (const auto& [key, value] : doc.items()) {
        if (!known.count(key)) throw ValidationError("config." + key + ": unknown key");
    }
    auto sub = [&](const char* name) -> std::optional<detail::Section> {
        const auto it = doc.find(name);
        if (it == doc.end()) return std::nullopt;
        return detail::Section(*it, name);
    };

    if (auto s = sub("geometry")) {
        cfg.geometry.alpha = s->number("alpha", cfg.geometry.alpha);
        cfg.geometry.r0 = s->number("r0", cfg.geometry.r0);
        cfg.geometry.d0 = s->number("d0", cfg.geometry.d0);
        s->finish();
    }
    cfg.geometry.validate();

    if (auto s = sub("physics")) {
        auto& p = cfg.physics;
        p.gamma = s->number("gamma", p.gamma);
        p.mu = s->number("mu", p.mu);
        p.lambda = s->number("lambda", p.lambda);
        p.g = s->number("g", p.g);
        p.rho_s = s->number("rho_s", p.rho_s);
        p.m = s->number("m", p.m);
        p.diam_omega = s->number("diam_omega", p.diam_omega);
        s->finish();
    }
    cfg.physics.validate();

    if (auto s = sub("initial")) {
        auto& d = cfg.initial;
        d.kinetic_fluid = s->number("kinetic_fluid", d.kinetic_fluid);
        d.pressure_potential = s->number("pressure_potential", d.pressure_potential);
        const auto v0 = s->optional_number("v0");
        cfg.v0_coefficient = s->optional_number("v0_coefficient");
        s->finish();
        if (v0 && cfg.v0_coefficient) throw ValidationError("initial: give either v0 or v0_coefficient, not both");
        if (v0) d.v0 = *v0;
        if (cfg.v0_coefficient) {
            cusplab::detail::require(*cfg.v0_coefficient >= 0.0, "initial.v0_coefficient must be non-negative");
            d.v0 = *cfg.v0_coefficient / std::sqrt(cfg.physics.m);
        }
    }
    cfg.initial.validate();

    if (auto s = sub("quadrature")) {
        auto& q = cfg.quadrature;
        q.rel_tol = s->number("rel_tol", q.rel_tol);
        q.max_subdivisions = detail::to_count(s->integer("max_subdivisions", static_cast<long>(q.max_subdivisions)),
                                              "quadrature.max_subdivisions");
        q.substitution = s->boolean("substitution", q.substitution);
        s->finish();
    }
    cfg.quadrature.validate();

    if (auto s = sub("fall")) {
        auto& f = cfg.fall;
        f.m = s->number("m", f.m);
        f.g = s->number("g", f.g);
        f.c_d = s->number("c_d", f.c_d);
        f.beta = s->number("beta", f.beta);
        f.h0 = s->number("h0", f.h0);
        f.v0 = s->number("v0", f.v0);
        f.mode = parse_fall_mode(s->string("mode", std::string(to_string(f.mode))));
        f.h_stop = s->number("h_stop", f.h_stop);
        f.t_max = s->number("t_max", f.t_max);
        f.tol = s->number("tol", f.tol);
        f.max_step = s->number("max_step", f.max_step);
        f.max_steps = detail::to_count(s->integer("max_steps", static_cast<long>(f.max_steps)), "fall.max_steps");
        s->finish();
    }
    cfg.fall.validate();

    if (auto s = sub("field")) {
        auto& f = cfg.field;
        f.h = s->number("h", f.h);
        f.region = s->string("region", f.region);
        f.nr = static_cast<int>(s->integer("nr", f.nr));
        f.nx3 = static_cast<int>(s->integer("nx3", f.nx3));
        f.r_max = s->number("r_max", f.r_max);
        f.x3_max = s->number("x3_max", f.x3_max);
        s->finish();
    }
    cfg.geometry.require_admissible(cfg.field.h);
    cusplab::detail::require(cfg.field.region == "cusp" || cfg.field.region == "global",
                             "field.region must be 'cusp' or 'global'");
    cusplab::detail::require(cfg.field.nr >= 2 && cfg.field.nr <= 10000 && cfg.field.nx3 >= 2 &&
                                 cfg.field.nx3 <= 10000,
                             "field.nr and field.nx3 must lie in [2, 10000]");
    cusplab::detail::require(cfg.field.r_max > 0.0 && cfg.field.x3_max > 0.0,
                             "field.r_max and field.x3_max must be positive");

    if (auto s = sub("kernel")) {
        auto& k = cfg.kernel;
        k.p = s->number("p", k.p);
        k.q = s->number("q", k.q);
        k.alpha = s->number("alpha", k.alpha);
        k.r0 = s->number("r0", k.r0);
        k.h_grid = s->numbers("h_grid", k.h_grid);
        s->finish();
    }
    cusplab::detail::require(cfg.kernel.p > 0.0 && cfg.kernel.q >= 0.0 && cfg.kernel.alpha > 0.0 &&
                                 cfg.kernel.r0 > 0.0,
                             "kernel: need p > 0, q >= 0, alpha > 0, r0 > 0");
    detail::require_decreasing(cfg.kernel.h_grid, "kernel.h_grid");

    if (auto s = sub("norms")) {
        auto& n = cfg.norms;
        n.quantity = parse_quantity(s->string("quantity", std::string(to_string(n.quantity))));
        n.p = s->number("p", n.p);
        n.h_grid = s->numbers("h_grid", n.h_grid);
        s->finish();
    }
    cusplab::detail::require(std::isfinite(cfg.norms.p) && cfg.norms.p > 0.0, "norms.p must be positive");
    if (cfg.norms.h_grid.empty()) cfg.norms.h_grid = admissible_h_grid(cfg.geometry);
    validate_h_grid(cfg.norms.h_grid, cfg.geometry);

    if (auto s = sub("certify")) {
        auto& c = cfg.certify;
        c.c0_mode = s->string("c0_mode", c.c0_mode);
        c.c0 = s->number("c0", c.c0);
        c.h_ref = s->number("h_ref", c.h_ref);
        s->finish();
    }
    cusplab::detail::require(cfg.certify.c0_mode == "fixed" || cfg.certify.c0_mode == "empirical",
                             "certify.c0_mode must be 'fixed' or 'empirical'");
    cusplab::detail::require(cfg.certify.c0 > 0.0, "certify.c0 must be positive");
    if (cfg.certify.c0_mode == "empirical") cfg.geometry.require_admissible(cfg.certify.h_ref);

    if (auto s = sub("dichotomy")) {
        auto& d = cfg.dichotomy;
        d.alpha_grid = s->numbers("alpha_grid", d.alpha_grid);
        d.t_max = s->number("t_max", d.t_max);
        s->finish();
    }
    cusplab::detail::require(!cfg.dichotomy.alpha_grid.empty(), "dichotomy.alpha_grid must not be empty");
    for (double a : cfg.dichotomy.alpha_grid) {
        cusplab::detail::require(a > 0.0 && a <= 1.0, "dichotomy.alpha_grid values must lie in (0, 1]");
        cusplab::detail::require(a < 0.48 || a > 0.52, "dichotomy.alpha_grid must exclude [0.48, 0.52]");
    }
    cusplab::detail::require(cfg.dichotomy.t_max > 0.0, "dichotomy.t_max must be positive");

    if (auto s = sub("pd")) {
        auto& p = cfg.pd;
        p.e_init = s->number("e_init", p.e_init);
        p.k_p = s->number("k_p", p.k_p);
        p.k_d = s->number("k_d", p.k_d);
        p.dist_g1 = s->number("dist_g1", p.dist_g1);
        p.c_energy = s->number("c_energy", p.c_energy);
        s->finish();
    }
    cusplab::detail::require(cfg.pd.e_init >= 0.0 && cfg.pd.k_p > 0.0 && cfg.pd.k_d >= 0.0 &&
                                 cfg.pd.dist_g1 > 1.0 && cfg.pd.c_energy > 0.0,
                             "pd: need e_init >= 0, k_p > 0, k_d >= 0, dist_g1 > 1, c_energy > 0");

    if (auto s = sub("output")) {
        cfg.out_dir = s->string("dir", cfg.out_dir);
        s->finish();
    }
    cusplab::detail::require(!cfg.out_dir.empty(), "output.dir must not be empty");
    return cfg;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

/// Shortest decimal that round-trips; non-finite values become "nan"/"inf".
inline std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) v = 0.0;  // drop the sign of negative zero
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline json number_or_null(std::optional<double> v)
{
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}

inline std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw NumericalError("sha256: digest computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

/// Writes through a uniquely named temporary in the target directory, then
/// renames over the destination.
inline void write_atomic(const std::filesystem::path& path, const std::string& content)
{
    static std::atomic<unsigned> counter{0};
    const auto tmp = path.parent_path() /
                     ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()) + "." +
                      std::to_string(counter++));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename onto '" + path.string() + "': " + ec.message());
    }
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : columns_(header.size())
    {
        append_row(header);
    }

    void row(const std::vector<std::string>& cells)
    {
        if (cells.size() != columns_) throw std::logic_error("csv row width mismatch");
        append_row(cells);
    }

    const std::string& text() const noexcept { return text_; }

private:
    void append_row(const std::vector<std::string>& cells)
    {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += cells[i];
        }
        text_ += '\n';
    }

    std::size_t columns_;
    std::string text_;
};

struct Report {
    std::string command;
    std::string input_digest;
    json result;
    std::vector<std::pair<std::string, std::string>> csv_files;  // file name, content
};

inline void emit_report(const Report& report, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

    json doc;
    doc["schema"] = "cusplab." + report.command + ".v1";
    doc["command"] = report.command;
    doc["tool_version"] = CUSPLAB_VERSION;
    doc["input_digest"] = "sha256:" + report.input_digest;
    doc["result"] = report.result;
    for (const auto& [name, content] : report.csv_files) write_atomic(dir / name, content);
    write_atomic(dir / (report.command + ".json"), doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline Report run_field(const RunConfig& cfg)
{
    const auto& f = cfg.field;
    const CutoffConfig cutoffs = CutoffConfig::standard(cfg.geometry);
    CsvTable csv({"r", "x3", "w_r", "w_3", "div", "dr_wr", "d3_wr", "dr_w3", "d3_w3", "wr_over_r", "dh_wr", "dh_w3"});
    double max_div = 0.0, max_rel_div = 0.0;
    std::size_t points = 0;
    for (int i = 0; i < f.nr; ++i) {
        for (int j = 0; j < f.nx3; ++j) {
            GapPoint p;
            FieldSample s;
            if (f.region == "cusp") {
                p.r = cfg.geometry.r0 * i / (f.nr - 1);
                p.x3 = (f.h + std::pow(p.r, cfg.geometry.exponent())) * j / (f.nx3 - 1);
                s = eval_cusp_field(p, f.h, cfg.geometry);
            } else {
                p.r = f.r_max * i / (f.nr - 1);
                p.x3 = f.x3_max * j / (f.nx3 - 1);
                s = eval_global_field(p, f.h, cfg.geometry, cutoffs);
            }
            const double div = s.divergence();
            max_div = std::max(max_div, std::abs(div));
            if (s.divergence_scale() > 0.0) max_rel_div = std::max(max_rel_div, std::abs(div) / s.divergence_scale());
            csv.row({format_double(p.r), format_double(p.x3), format_double(s.w_r), format_double(s.w_3),
                     format_double(div), format_double(s.dr_wr), format_double(s.d3_wr), format_double(s.dr_w3),
                     format_double(s.d3_w3), format_double(s.wr_over_r), format_double(s.dh_wr),
                     format_double(s.dh_w3)});
            ++points;
        }
    }
    Report r;
    r.command = "field";
    r.result = {{"h", f.h},
                {"region", f.region},
                {"points", points},
                {"max_abs_divergence", max_div},
                {"max_relative_divergence", max_rel_div},
                {"csv", "field.csv"}};
    r.csv_files.emplace_back("field.csv", csv.text());
    return r;
}

inline Report run_kernel(const RunConfig& cfg, unsigned workers)
{
    const auto& k = cfg.kernel;
    std::vector<Integral> values(k.h_grid.size());
    parallel_for(k.h_grid.size(), workers, [&](std::size_t i) {
        values[i] = kernel_integral_detailed(k.p, k.q, k.alpha, k.h_grid[i], k.r0, cfg.quadrature);
    });
    std::vector<double> v;
    CsvTable csv({"h", "value", "abs_error"});
    for (std::size_t i = 0; i < values.size(); ++i) {
        v.push_back(values[i].value);
        csv.row({format_double(k.h_grid[i]), format_double(values[i].value), format_double(values[i].abs_error)});
    }
    const PowerLawFit fit = fit_power_law(k.h_grid, v);
    const KernelPrediction pred = kernel_predicted_exponent(k.p, k.q, k.alpha);
    const Verdict verdict = classify_exponent(fit.exponent);

    Report r;
    r.command = "kernel";
    r.result = {{"p", k.p},
                {"q", k.q},
                {"alpha", k.alpha},
                {"r0", k.r0},
                {"h_grid", k.h_grid},
                {"fitted_exponent", fit.exponent},
                {"fitted_slope", -fit.model_exponent},
                {"loglog_slope", fit.loglog_slope},
                {"fit_offset", fit.offset},
                {"fit_rms_residual", fit.rms_residual},
                {"verdict", to_string(verdict)},
                {"predicted_exponent", pred.exponent},
                {"predicted_classification", to_string(pred.classification)},
                {"csv", "kernel.csv"}};
    r.csv_files.emplace_back("kernel.csv", csv.text());
    return r;
}

inline Report run_norms(const RunConfig& cfg, unsigned workers)
{
    const auto& n = cfg.norms;
    const NormSweep s = norm_sweep(n.quantity, n.p, cfg.geometry, n.h_grid, cfg.quadrature, workers);
    const KernelPrediction pred = norm_predicted_exponent(n.quantity, n.p, cfg.geometry.alpha);
    CsvTable csv({"h", "norm", "integral"});
    for (std::size_t i = 0; i < s.h_grid.size(); ++i) {
        csv.row({format_double(s.h_grid[i]), format_double(s.values[i]), format_double(s.integrals[i])});
    }
    Report r;
    r.command = "norms";
    r.result = {{"quantity", to_string(s.quantity)},
                {"p", s.p},
                {"alpha", cfg.geometry.alpha},
                {"h_grid", s.h_grid},
                {"fitted_exponent", s.fitted_exponent},
                {"loglog_slope", s.loglog_slope},
                {"verdict", to_string(s.verdict)},
                {"monotone", s.monotone},
                {"critical_p", critical_exponent(s.quantity, cfg.geometry.alpha)},
                {"predicted_exponent", pred.exponent},
                {"predicted_classification", to_string(pred.classification)},
                {"csv", "norms.csv"}};
    r.csv_files.emplace_back("norms.csv", csv.text());
    return r;
}

inline Report run_certify(const RunConfig& cfg)
{
    double c0 = cfg.certify.c0;
    if (cfg.certify.c0_mode == "empirical") {
        c0 = empirical_c0(cfg.geometry, cfg.physics.gamma, cfg.certify.h_ref, cfg.quadrature);
    }
    const CollisionCertificate cert = final_inequality(cfg.physics, cfg.initial, c0, cfg.geometry.alpha);
    json mass = nullptr;
    if (cfg.v0_coefficient) {
        InitialData fluid = cfg.initial;
        fluid.v0 = 0.0;
        const MassThreshold mt = mass_threshold(cfg.physics, fluid, *cfg.v0_coefficient, c0, cfg.geometry.alpha);
        mass = {{"found", mt.found}, {"m_star", mt.m_star}, {"lhs_at_m_star", mt.lhs_at_m_star}};
    }
    Report r;
    r.command = "certify";
    r.result = {{"thresholds",
                 {{"I1", cert.thresholds.i1},
                  {"I2", cert.thresholds.i2},
                  {"I3", cert.thresholds.i3},
                  {"I4", cert.thresholds.i4},
                  {"I5", cert.thresholds.i5}}},
                {"gamma", cfg.physics.gamma},
                {"alpha", cert.alpha},
                {"alpha_max", cert.alpha_max},
                {"e0", cert.e0},
                {"l_const", cert.l_const},
                {"c_gamma", cert.c_gamma},
                {"c0", cert.c0},
                {"c0_mode", cfg.certify.c0_mode},
                {"hdot_bound", hdot_bound(cfg.physics.m, cert.e0, cert.l_const)},
                {"lhs", cert.lhs},
                {"g", cfg.physics.g},
                {"applicable", cert.applicable},
                {"satisfied", cert.satisfied},
                {"time_bound", number_or_null(cert.time_bound)},
                {"note", cert.note},
                {"mass_threshold", mass}};
    return r;
}

inline Report run_fall(const RunConfig& cfg)
{
    const FallTrajectory traj = simulate_fall(cfg.fall);
    CsvTable csv({"t", "h", "hdot"});
    for (const auto& s : traj.samples) csv.row({format_double(s.t), format_double(s.h), format_double(s.hdot)});
    json log_law = nullptr;
    if (cfg.fall.beta >= 1.0 && traj.verdict == FallVerdict::NoContactByHorizon && traj.samples.size() >= 10) {
        try {
            const LogLawFit fit = log_law_check(traj, cfg.fall);
            log_law = {{"slope", fit.slope},
                       {"residual", fit.residual},
                       {"curvature", fit.curvature},
                       {"growth", to_string(fit.growth)},
                       {"window_samples", fit.window_samples}};
        } catch (const ValidationError&) {
            log_law = nullptr;  // trailing window too short
        }
    }
    Report r;
    r.command = "fall";
    r.result = {{"mode", to_string(cfg.fall.mode)},
                {"beta", cfg.fall.beta},
                {"kappa", cfg.fall.kappa()},
                {"verdict", to_string(traj.verdict)},
                {"contact_time", number_or_null(traj.contact_time)},
                {"samples", traj.samples.size()},
                {"accepted_steps", traj.accepted_steps},
                {"rejected_steps", traj.rejected_steps},
                {"final_t", traj.samples.back().t},
                {"final_h", traj.samples.back().h},
                {"log_law", log_law},
                {"csv", "fall.csv"}};
    r.csv_files.emplace_back("fall.csv", csv.text());
    return r;
}

inline Report run_dichotomy(const RunConfig& cfg, unsigned workers)
{
    FallConfig tmpl = cfg.fall;
    tmpl.t_max = cfg.dichotomy.t_max;
    const auto rows = contact_dichotomy(cfg.dichotomy.alpha_grid, tmpl, workers);
    CsvTable csv({"alpha", "beta", "verdict", "contact_time", "matches"});
    json table = json::array();
    bool all_match = true;
    for (const auto& row : rows) {
        all_match = all_match && row.matches;
        csv.row({format_double(row.alpha), format_double(row.beta), std::string(to_string(row.verdict)),
                 row.contact_time ? format_double(*row.contact_time) : "", row.matches ? "true" : "false"});
        table.push_back({{"alpha", row.alpha},
                         {"beta", row.beta},
                         {"verdict", to_string(row.verdict)},
                         {"contact_time", number_or_null(row.contact_time)},
                         {"matches", row.matches}});
    }
    Report r;
    r.command = "dichotomy";
    r.result = {{"t_max", tmpl.t_max}, {"rows", table}, {"all_match", all_match}, {"csv", "dichotomy.csv"}};
    r.csv_files.emplace_back("dichotomy.csv", csv.text());
    return r;
}

inline Report run_pd(const RunConfig& cfg)
{
    const auto& p = cfg.pd;
    const PdGuarantee g = pd_guarantee(p.e_init, p.k_p, p.k_d, p.dist_g1, p.c_energy);
    Report r;
    r.command = "pd";
    r.result = {{"e_init", p.e_init},
                {"k_p", p.k_p},
                {"k_d", p.k_d},
                {"dist_g1", p.dist_g1},
                {"c_energy", p.c_energy},
                {"displacement_bound", g.displacement_bound},
                {"epsilon", number_or_null(g.epsilon)},
                {"guaranteed", g.epsilon.has_value()}};
    return r;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{"field", "kernel", "norms", "certify", "fall", "dichotomy", "pd"};
    return names;
}

inline void diagnose(std::ostream& err, int code, std::string_view kind, const std::string& message)
{
    err << "cusplab: error code=" << code << " kind=" << kind << " message=" << json(message).dump() << "\n";
}

/// Runs one command. args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App cli{"cusplab: cusp test-field and collision laboratory", "cusplab"};
    std::string command, config_path, out_dir;
    std::vector<std::string> overrides;
    cli.add_option("command", command, "field | kernel | norms | certify | fall | dichotomy | pd")
        ->required()
        ->check(CLI::IsMember(command_names()));
    cli.add_option("--config", config_path, "JSON configuration file")->required();
    cli.add_option("--out", out_dir, "output directory (overrides output.dir)");
    cli.add_option("--override", overrides, "key=value applied to the configuration, e.g. geometry.alpha=0.3")
        ->allow_extra_args(false);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        cli.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << cli.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        diagnose(err, exit_validation, "usage", e.what());
        return exit_validation;
    }

    const auto started = std::chrono::steady_clock::now();
    RunConfig cfg;
    unsigned workers = 1;
    try {
        std::ifstream in(config_path);
        if (!in) throw ValidationError("cannot read config file '" + config_path + "'");
        json doc = json::parse(in, nullptr, false);
        if (doc.is_discarded()) throw ValidationError("config file '" + config_path + "' is not valid JSON");
        if (!doc.is_object()) throw ValidationError("config: top level must be an object");
        for (const auto& o : overrides) apply_override(doc, o);
        if (!out_dir.empty()) doc["output"]["dir"] = out_dir;
        cfg = parse_config(doc);
        workers = workers_from_env();
    } catch (const ValidationError& e) {
        diagnose(err, exit_validation, "validation", e.what());
        return exit_validation;
    } catch (const std::exception& e) {
        diagnose(err, exit_validation, "validation", e.what());
        return exit_validation;
    }

    try {
        Report report;
        if (command == "field") report = run_field(cfg);
        else if (command == "kernel") report = run_kernel(cfg, workers);
        else if (command == "norms") report = run_norms(cfg, workers);
        else if (command == "certify") report = run_certify(cfg);
        else if (command == "fall") report = run_fall(cfg);
        else if (command == "dichotomy") report = run_dichotomy(cfg, workers);
        else report = run_pd(cfg);

        // The output location is not an input: it is left out of the echo
        // and the digest so that reports from different directories agree.
        json echo = cfg.effective;
        echo.erase("output");
        report.input_digest = sha256_hex(json{{"command", command}, {"config", echo}}.dump());
        report.result["config"] = echo;
        emit_report(report, cfg.out_dir);

        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        out << "cusplab " << command << ": wrote " << (std::filesystem::path(cfg.out_dir) / (command + ".json")).string()
            << " in " << format_double(std::round(seconds * 1e3) / 1e3) << " s\n";

        if (command == "dichotomy" && !report.result["all_match"].get<bool>()) {
            diagnose(err, exit_failure, "numerical", "dichotomy verdict mismatch: see dichotomy.csv");
            return exit_failure;
        }
        return exit_ok;
    } catch (const ValidationError& e) {
        diagnose(err, exit_validation, "validation", e.what());
        return exit_validation;
    } catch (const IoError& e) {
        diagnose(err, exit_failure, "io", e.what());
        return exit_failure;
    } catch (const std::exception& e) {
        diagnose(err, exit_failure, "numerical", e.what());
        return exit_failure;
    }
}

} // namespace cusplab::app

#endif // CUSPLAB_TOOLS_APP_HPP
