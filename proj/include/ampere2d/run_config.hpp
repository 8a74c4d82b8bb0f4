#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "ampere2d/exterior.hpp"
#include "ampere2d/global_iteration.hpp"
#include "ampere2d/ma_oracle.hpp"
#include "ampere2d/version.hpp"

namespace ampere2d {

using nlohmann::json;

/// Problem definition parsed from a JSON config file: source family (or
/// tabulated samples), affine data, exterior data, grid and tolerances.
struct RunConfig {
    json raw;
    std::string config_hash;

    SourceField source;
    AffineData affine = AffineData::identity();
    std::optional<ExteriorSpec> exterior;
    GridSpec grid;
    double tol = 1e-10;
    double eps0_threshold = 0.1;
    double residual_tol = 5e-6;
    std::uint64_t seed = 0;

    // command-specific blocks
    Vec2 probe_point{12.0, 0.0};
    StencilScheme oracle_scheme;
    double oracle_tolerance = 5e-3;
    std::string report_solution;  // field dump consumed by `report`
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::vector<std::pair<Vec2, double>> load_source_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open tabulated source " + path);
    std::vector<std::pair<Vec2, double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first && line.find("x1") != std::string::npos) {
            first = false;
            continue;
        }
        first = false;
        std::istringstream ls(line);
        double x, y, v;
        char comma;
        if (!(ls >> x >> comma >> y >> comma >> v))
            throw ConfigError("malformed source row: " + line);
        rows.push_back({{x, y}, v});
    }
    if (rows.empty()) throw ConfigError("tabulated source " + path + " is empty");
    return rows;
}

inline std::function<double(double)> load_boundary_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open boundary data " + path);
    std::vector<double> vals;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.find("theta") != std::string::npos) continue;
        std::istringstream ls(line);
        double t, v;
        char comma;
        if (!(ls >> t >> comma >> v)) throw ConfigError("malformed boundary row: " + line);
        vals.push_back(v);
    }
    if (vals.size() < 4) throw ConfigError("boundary data " + path + " needs >= 4 samples");
    // uniform theta assumed; linear interpolation between samples
    return [vals](double theta) {
        const int n = static_cast<int>(vals.size());
        double t = theta / (2.0 * std::numbers::pi) * n;
        t -= std::floor(t / n) * n;
        int k = static_cast<int>(std::floor(t)) % n;
        double frac = t - std::floor(t);
        return vals[k] * (1.0 - frac) + vals[(k + 1) % n] * frac;
    };
}

inline SourceField parse_source(const json& j) {
    std::string kind = j.value("kind", "constant");
    if (kind == "constant") return make_constant_source();
    if (kind == "rational")
        return make_rational_source(j.value("eps", 0.1), j.value("power", 2.0));
    if (kind == "gaussian")
        return make_gaussian_source(j.value("eps", 0.1), j.value("beta", 6.0));
    if (kind == "angular")
        return make_angular_source(j.value("eps", 0.1), j.value("power", 2.0),
                                   j.value("amplitude", 0.5), j.value("mode", 2));
    if (kind == "tabulated") {
        auto rows = load_source_csv(j.at("path").get<std::string>());
        std::vector<Vec2> pts;
        std::vector<double> vals;
        for (auto& [p, v] : rows) {
            pts.push_back(p);
            vals.push_back(v);
        }
        return make_tabulated_source(std::move(pts), std::move(vals), j.value("c0", 4.0),
                                     j.value("beta", 4.0));
    }
    throw ConfigError("unknown source kind '" + kind + "'");
}

inline std::function<double(double)> parse_boundary(const json& j) {
    std::string kind = j.value("kind", "zero");
    if (kind == "zero") return [](double) { return 0.0; };
    if (kind == "constant") {
        double v = j.value("value", 0.0);
        return [v](double) { return v; };
    }
    if (kind == "cosine") {
        double amp = j.value("amplitude", 0.01);
        int mode = j.value("mode", 1);
        double phase = j.value("phase", 0.0);
        return [amp, mode, phase](double t) { return amp * std::cos(mode * t + phase); };
    }
    if (kind == "sqrt_abs_sin") {
        double amp = j.value("amplitude", 0.01);
        return [amp](double t) { return amp * std::sqrt(std::abs(std::sin(t))); };
    }
    if (kind == "csv") return load_boundary_csv(j.at("path").get<std::string>());
    throw ConfigError("unknown boundary kind '" + kind + "'");
}

}  // namespace detail

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig cfg;
    try {
        cfg.raw = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a(cfg.raw.dump())));
    cfg.config_hash = hash;
    try {
        const json& j = cfg.raw;
        cfg.source = detail::parse_source(j.value("source", json{{"kind", "constant"}}));
        if (j.contains("source")) {
            const json& js = j["source"];
            if (js.contains("c0")) cfg.source.c0 = js["c0"].get<double>();
            if (js.contains("beta")) cfg.source.beta = js["beta"].get<double>();
        }
        if (j.contains("affine")) {
            const json& ja = j["affine"];
            SymMat2 A{1, 0, 1};
            if (ja.contains("A")) {
                auto a = ja["A"];
                A = SymMat2{a.at(0).at(0), a.at(0).at(1), a.at(1).at(1)};
            }
            Vec2 b{0, 0};
            if (ja.contains("b")) b = {ja["b"].at(0), ja["b"].at(1)};
            cfg.affine = AffineData::make(A, b, ja.value("c", 0.0));
        }
        if (j.contains("exterior")) {
            const json& je = j["exterior"];
            ExteriorSpec spec;
            spec.r0 = je.value("r0", 1.0);
            spec.d_target = je.value("d_target", 0.0);
            spec.alpha = je.value("alpha", 0.5);
            spec.boundary_data =
                detail::parse_boundary(je.value("boundary", json{{"kind", "zero"}}));
            cfg.exterior = spec;
        }
        if (j.contains("grid")) {
            const json& jg = j["grid"];
            cfg.grid.n_r = jg.value("nr", 256);
            cfg.grid.n_theta = jg.value("ntheta", 64);
            cfg.grid.r_max = jg.value("rmax", 64.0);
        }
        cfg.tol = j.value("tol", 1e-10);
        cfg.eps0_threshold = j.value("eps0_threshold", 0.1);
        cfg.residual_tol = j.value("residual_tol", 5e-6);
        cfg.seed = j.value("seed", 0ull);
        if (j.contains("probe")) {
            cfg.probe_point = {j["probe"]["x"].at(0), j["probe"]["x"].at(1)};
        }
        if (j.contains("oracle")) {
            const json& jo = j["oracle"];
            cfg.oracle_scheme.n = jo.value("n", 129);
            cfg.oracle_scheme.width = jo.value("width", 2);
            cfg.oracle_scheme.radius = jo.value("radius", 4.0);
            cfg.oracle_tolerance = jo.value("tolerance", 5e-3);
        }
        if (j.contains("report")) cfg.report_solution = j["report"].value("solution", "");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// artifact writers

inline void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot open " + path);
    out << j.dump(2) << '\n';
}

inline json validation_json(const ValidationReport& rep) {
    return json{{"c0_fit", rep.c0_fit},   {"beta_fit", rep.beta_fit},
                {"beta1", rep.beta1},     {"eps0_fit", rep.eps0_fit},
                {"eps1_fit", rep.eps1_fit}, {"passed", rep.passed},
                {"violations", rep.violations}};
}

inline json fit_json(const AsymptoticFit& fit) {
    json j{{"d_fit", fit.d_fit},
           {"c_fit", fit.c_fit},
           {"sigma_fit", std::isfinite(fit.sigma_fit) ? fit.sigma_fit : 1e308},
           {"window", {fit.r_lo, fit.r_hi}},
           {"max_residual", fit.max_residual}};
    return j;
}

inline void write_history_csv(const std::vector<IterationHistoryEntry>& hist,
                              const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot open " + path);
    out << "l,sup_psi,weighted_sup,residual,min_eig\n";
    out.precision(17);
    for (const auto& h : hist)
        out << h.level << ',' << h.sup_psi << ',' << h.weighted_sup << ',' << h.residual << ','
            << h.min_eig << '\n';
}

inline void write_profile_csv(const RadialProfile& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot open " + path);
    out << "r,ftilde,U,Uprime,Usecond,F1,F2\n";
    out.precision(17);
    for (std::size_t i = 0; i < p.r.size(); ++i)
        out << p.r[i] << ',' << p.ftilde[i] << ',' << p.U[i] << ',' << p.Uprime[i] << ','
            << p.Usecond[i] << ',' << p.F1[i] << ',' << p.F2[i] << '\n';
}

inline void write_profile_sidecar(const RadialProfile& p, const std::string& path) {
    write_json(json{{"d", p.d},
                    {"c_d", p.c_d},
                    {"tail_error", p.d_tail_error},
                    {"cd_tail_error", p.cd_tail_error},
                    {"cd_domain_warning", p.cd_domain_warning}},
               path);
}

inline json green_json(const GreenProbe& probe) {
    json table = json::array();
    for (const auto& e : probe.refinement_table)
        table.push_back(json{{"n_r", e.n_r},
                             {"n_theta", e.n_theta},
                             {"c2_fit", e.c2_fit},
                             {"grad_bound_fit", e.grad_bound_fit}});
    return json{{"x", {probe.x.x, probe.x.y}},
                {"c2_fit", probe.c2_fit},
                {"grad_bound_fit", probe.grad_bound_fit},
                {"r0_empirical", probe.r0_empirical},
                {"refinement_table", table}};
}

inline void write_manifest(const RunConfig& cfg, const std::string& command,
                           const std::string& path) {
    auto now = std::chrono::system_clock::now().time_since_epoch();
    write_json(json{{"command", command},
                    {"config_hash", cfg.config_hash},
                    {"library_version", kVersion},
                    {"seed", cfg.seed},
                    {"timestamp_ms",
                     std::chrono::duration_cast<std::chrono::milliseconds>(now).count()}},
               path);
}

}  // namespace ampere2d
