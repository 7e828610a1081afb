#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "iwatsuka/errors.hpp"
#include "iwatsuka/fiber.hpp"
#include "iwatsuka/field.hpp"
#include "iwatsuka/potential.hpp"
#include "iwatsuka/quasimode.hpp"
#include "iwatsuka/spectral_density.hpp"
#include "iwatsuka/threshold.hpp"

namespace iwatsuka {

inline constexpr const char* tool_version = "0.3.0";
inline constexpr int config_schema_version = 1;

// Malformed or inconsistent experiment configuration (usage error).
class config_error : public std::invalid_argument {
public:
    explicit config_error(const std::string& what) : std::invalid_argument(what) {}
};

using json = nlohmann::json;

struct ExperimentConfig {
    std::string experiment;
    json document;  // resolved config, echoed into every output
    ProfileSpec profile;
    std::optional<Potential> potential;
    json parameters = json::object();
    std::string output_path;
    std::string format = "csv";
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"bands", "quasimode", "asympt", "current",
                                                "localize", "volume", "counting", "gap"};
    return names;
}

namespace detail {

inline double number(const json& j, const char* key) {
    if (!j.contains(key)) throw config_error(std::string("missing field '") + key + "'");
    if (!j.at(key).is_number()) throw config_error(std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

inline double number_or(const json& j, const char* key, double fallback) {
    return j.contains(key) ? number(j, key) : fallback;
}

inline int integer_or(const json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) throw config_error(std::string("field '") + key + "' must be an integer");
    return j.at(key).get<int>();
}

inline std::vector<double> number_list(const json& j, const char* key) {
    if (!j.contains(key)) throw config_error(std::string("missing field '") + key + "'");
    const json& a = j.at(key);
    if (a.is_number()) return {a.get<double>()};
    if (!a.is_array() || a.empty()) throw config_error(std::string("field '") + key + "' must be a nonempty array");
    std::vector<double> out;
    for (const auto& v : a) {
        if (!v.is_number()) throw config_error(std::string("field '") + key + "' must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

inline ProfileSpec parse_profile(const json& p) {
    if (!p.is_object()) throw config_error("profile block must be an object");
    const std::string kind = p.value("kind", "");
    ProfileSpec s;
    if (kind == "constant") {
        s.kind = ProfileKind::Constant;
        s.b_minus = s.b_plus = p.contains("b") ? number(p, "b") : number(p, "b_minus");
    } else if (kind == "model" || kind == "table") {
        s.kind = kind == "model" ? ProfileKind::ModelPowerTail : ProfileKind::UserTable;
        s.b_minus = number(p, "b_minus");
        s.b_plus = number(p, "b_plus");
        s.M = number(p, "M");
        s.c = number_or(p, "c", 1.0);
        s.x0 = number(p, "x0");
        if (p.contains("bridge_start")) s.bridge_start = number(p, "bridge_start");
        if (kind == "table") {
            if (!p.contains("knots") || !p.at("knots").is_array()) throw config_error("table profile needs knots");
            for (const auto& k : p.at("knots")) {
                if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number())
                    throw config_error("each knot must be [x, b]");
                s.knots.push_back({k[0].get<double>(), k[1].get<double>()});
            }
        }
    } else {
        throw config_error("profile kind must be constant, model or table");
    }
    return s;
}

inline Profile1D parse_profile1d(const json& j) {
    Profile1D c;
    const std::string shape = j.value("shape", "gaussian");
    if (shape == "gaussian") {
        c.shape = Profile1D::Shape::Gaussian;
    } else if (shape == "bracket") {
        c.shape = Profile1D::Shape::Bracket;
        c.power = number(j, "power");
    } else {
        throw config_error("1D profile shape must be gaussian or bracket");
    }
    c.width = number_or(j, "width", 1.0);
    return c;
}

inline Potential parse_potential(const json& p) {
    if (!p.is_object()) throw config_error("potential block must be an object");
    const std::string kind = p.value("kind", "");
    if (kind == "zero") return Potential::zero();
    if (kind == "radial") return Potential::radial(number(p, "amplitude"), number(p, "m"), number_or(p, "scale", 1.0));
    if (kind == "separable") {
        if (!p.contains("x_profile") || !p.contains("y_profile")) throw config_error("separable potential needs x_profile and y_profile");
        return Potential::separable(number(p, "amplitude"), parse_profile1d(p.at("x_profile")),
                                    parse_profile1d(p.at("y_profile")), number(p, "m"));
    }
    if (kind == "grid") return Potential::user_grid(number_list(p, "x"), number_list(p, "y"), number_list(p, "values"), number(p, "m"));
    throw config_error("potential kind must be zero, radial, separable or grid");
}

// k grid from {"k": [..]} or {"k_from", "k_to", "k_count", "k_spacing": "log" | "linear"}.
inline std::vector<double> k_grid(const json& p) {
    if (p.contains("k")) return number_list(p, "k");
    const double lo = number(p, "k_from"), hi = number(p, "k_to");
    const int count = integer_or(p, "k_count", 16);
    const std::string spacing = p.value("k_spacing", "linear");
    if (count < 1) throw config_error("k_count must be positive");
    if (count == 1) return {lo};
    if (!(hi > lo)) throw config_error("k_to must exceed k_from");
    std::vector<double> ks(count);
    for (int i = 0; i < count; ++i) {
        const double f = static_cast<double>(i) / (count - 1);
        if (spacing == "log") {
            if (!(lo > 0.0)) throw config_error("log spacing needs k_from > 0");
            ks[i] = lo * std::pow(hi / lo, f);
        } else if (spacing == "linear") {
            ks[i] = lo + (hi - lo) * f;
        } else {
            throw config_error("k_spacing must be log or linear");
        }
    }
    return ks;
}

inline std::vector<int> band_list(const json& p) {
    std::vector<int> out;
    if (!p.contains("n")) return {1};
    const json& n = p.at("n");
    if (n.is_number_integer()) return {n.get<int>()};
    if (!n.is_array()) throw config_error("n must be an integer or an array of integers");
    for (const auto& v : n) {
        if (!v.is_number_integer()) throw config_error("n must hold integers");
        out.push_back(v.get<int>());
    }
    for (int b : out)
        if (b < 1) throw config_error("band index starts at 1");
    return out;
}

inline FiberOptions fiber_options(const json& p) {
    FiberOptions o;
    o.tol = number_or(p, "tol", o.tol);
    o.spacing = number_or(p, "fiber_spacing", o.spacing);
    o.levels = integer_or(p, "fiber_levels", o.levels);
    o.half_width = number_or(p, "fiber_half_width", o.half_width);
    if (!(o.tol > 0.0)) throw config_error("tol must be positive");
    return o;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline const Potential& require_potential(const ExperimentConfig& c) {
    if (!c.potential) throw config_error("experiment '" + c.experiment + "' needs a potential block");
    return *c.potential;
}

}  // namespace detail

// Builds the resolved config from a parsed document; `experiment` overrides the document's field.
inline ExperimentConfig parse_config(json doc, const std::string& experiment) {
    if (!doc.is_object()) throw config_error("config must be a JSON object");
    if (doc.contains("version") && doc.at("version") != config_schema_version)
        throw config_error("unsupported config version");
    doc["version"] = config_schema_version;
    ExperimentConfig c;
    c.experiment = experiment.empty() ? doc.value("experiment", "") : experiment;
    if (c.experiment == "asymptotics") c.experiment = "asympt";
    bool known = false;
    for (const auto& n : experiment_names()) known = known || n == c.experiment;
    if (!known) throw config_error("unknown experiment '" + c.experiment + "'");
    doc["experiment"] = c.experiment;
    if (!doc.contains("profile")) throw config_error("missing profile block");
    c.profile = detail::parse_profile(doc.at("profile"));
    MagneticProfile{c.profile};  // rejects inconsistent profiles before any work starts
    if (doc.contains("potential") && !doc.at("potential").is_null()) c.potential = detail::parse_potential(doc.at("potential"));
    if (doc.contains("parameters")) {
        if (!doc.at("parameters").is_object()) throw config_error("parameters block must be an object");
        c.parameters = doc.at("parameters");
    }
    if (doc.contains("output")) {
        const json& o = doc.at("output");
        if (!o.is_object()) throw config_error("output block must be an object");
        c.output_path = o.value("path", "");
        c.format = o.value("format", "csv");
    }
    if (c.format != "csv" && c.format != "json") throw config_error("output format must be csv or json");
    c.document = std::move(doc);
    return c;
}

// The output destination is excluded; everything that shapes the bytes is included.
inline std::string config_hash(const ExperimentConfig& c) {
    json doc = c.document;
    if (doc.contains("output") && doc["output"].is_object()) {
        doc["output"].erase("path");
        if (doc["output"].empty()) doc.erase("output");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a64(doc.dump())));
    return buf;
}

inline Table run_experiment(const ExperimentConfig& c, int threads = 0) {
    const MagneticProfile profile(c.profile);
    const json& p = c.parameters;
    const FiberOptions fopt = detail::fiber_options(p);
    Table t;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    if (c.experiment == "bands") {
        t.columns = {"n", "k", "E", "dE", "d2E", "grid_points", "half_width"};
        const bool second = p.value("second_derivative", true);
        const auto ks = detail::k_grid(p);
        for (int n : detail::band_list(p)) {
            const auto bt = band_table(profile, n, ks, fopt, second, threads);
            for (std::size_t i = 0; i < ks.size(); ++i)
                t.rows.push_back({double(n), ks[i], bt.energies[i], bt.fh_derivatives[i],
                                  second ? bt.second_derivatives[i] : nan, double(bt.grid_points[i]), bt.half_widths[i]});
        }
    } else if (c.experiment == "quasimode") {
        t.columns = {"n", "k", "mu0", "mu2", "alpha1", "alpha2", "E", "E_qm", "eta", "eps", "proximity"};
        const auto ks = detail::k_grid(p);
        for (int n : detail::band_list(p)) {
            std::vector<std::vector<double>> rows(ks.size());
            parallel_for(ks.size(), [&](std::size_t i) {
                const auto q = build_quasimode(profile, n, ks[i]);
                const auto pair = solve_band(profile, n, ks[i], fopt);
                rows[i] = {double(n), ks[i], q.mu0, q.mu2, q.alpha1, q.alpha2, pair.energy, q.energy(),
                           quasimode_residual(profile, q), epsilon_bound(profile, ks[i]).epsilon_k, proximity(q, pair)};
            }, threads);
            for (auto& r : rows) t.rows.push_back(std::move(r));
        }
    } else if (c.experiment == "asympt") {
        t.columns = {"k", "E", "r0", "r1", "dE_rem", "d2E_rem", "eps", "ratio"};
        const int n = detail::integer_or(p, "n", 1);
        const auto rep = verify_expansion(profile, n, detail::k_grid(p), fopt, threads);
        for (const auto& r : rep.rows) t.rows.push_back({r.k, r.E, r.r0, r.r1, r.dE_rem, r.d2E_rem, r.eps, r.ratio});
    } else if (c.experiment == "current") {
        t.columns = {"delta1", "delta2", "k_lo", "k_hi", "lower", "upper"};
        const int n = detail::integer_or(p, "n", 1);
        const auto d2 = detail::number_list(p, "delta2");
        std::vector<double> d1;
        if (p.contains("delta1")) {
            d1 = detail::number_list(p, "delta1");
            if (d1.size() != d2.size()) throw config_error("delta1 and delta2 must have equal length");
        } else {
            const double ratio = detail::number_or(p, "ratio", 2.0);
            for (double d : d2) d1.push_back(ratio * d);
        }
        for (std::size_t i = 0; i < d2.size(); ++i) {
            const auto cb = current_bounds(profile, EnergyWindow{n, d1[i], d2[i]}, fopt, threads);
            t.rows.push_back({d1[i], d2[i], cb.k_lo, cb.k_hi, cb.lower, cb.upper});
        }
    } else if (c.experiment == "localize") {
        t.columns = {"delta", "k_minus", "x_delta", "r_n", "mass_left", "current_lo", "current_hi"};
        const int n = detail::integer_or(p, "n", 1);
        const double nu = detail::number_or(p, "nu", 1.5);
        for (double d : detail::number_list(p, "delta")) {
            const auto r = localization_mass(profile, n, d, nu, fopt, threads);
            t.rows.push_back({r.delta, r.k_minus, r.x_delta, r.r_n, r.mass_left, r.current_lo, r.current_hi});
        }
    } else if (c.experiment == "volume") {
        t.columns = {"lambda", "N0", "weighted_vol"};
        const Potential& V = detail::require_potential(c);
        for (double l : detail::number_list(p, "lambda")) t.rows.push_back({l, volume_N0(V, l), weighted_volume(V, profile, l)});
    } else if (c.experiment == "counting") {
        t.columns = {"lambda", "N0", "weighted_vol", "count_eff", "count_gap", "kernel_dim", "k_step"};
        const Potential& V = detail::require_potential(c);
        const int n = detail::integer_or(p, "n", 1);
        KernelOptions ko;
        ko.fiber = fopt;
        ko.threads = threads;
        GapCountOptions go;
        go.kernel = ko;
        go.kernel.k_spacing = detail::number_or(p, "k_step", go.kernel.k_spacing);
        go.band_count = detail::integer_or(p, "bands", go.band_count);
        for (double l : detail::number_list(p, "lambda")) {
            // default spacing keeps the y-periodized images of V below 1e-3 lambda inside {V > lambda / 4}
            ko.k_spacing = p.contains("k_step") ? detail::number(p, "k_step")
                                                : std::min(0.2, alias_free_spacing(V, 0.25 * l, 1e-3 * l));
            const auto ek = build_effective_kernel(profile, V, n, counting_window(profile, V, n, l, fopt), ko);
            const double E = profile.upper_threshold(n) + l;
            const double gap = in_spectral_gap(profile, E) ? double(gap_count(profile, V, n, l, PerturbationSign::Plus, go)) : nan;
            t.rows.push_back({l, volume_N0(V, l), weighted_volume(V, profile, l), double(count_above(ek, l)), gap,
                              double(ek.dimension()), ko.k_spacing});
        }
    } else if (c.experiment == "gap") {
        t.columns = {"lambda", "E", "sign", "count", "bands"};
        const Potential& V = detail::require_potential(c);
        const int n = detail::integer_or(p, "n", 1);
        const std::string s = p.value("sign", "plus");
        if (s != "plus" && s != "minus") throw config_error("sign must be plus or minus");
        GapCountOptions go;
        go.kernel.fiber = fopt;
        go.kernel.threads = threads;
        go.kernel.k_spacing = detail::number_or(p, "k_step", go.kernel.k_spacing);
        go.band_count = detail::integer_or(p, "bands", go.band_count);
        const auto sign = s == "plus" ? PerturbationSign::Plus : PerturbationSign::Minus;
        for (double l : detail::number_list(p, "lambda"))
            t.rows.push_back({l, profile.upper_threshold(n) + l, s == "plus" ? 1.0 : -1.0,
                              double(gap_count(profile, V, n, l, sign, go)), double(go.band_count)});
    }
    return t;
}

namespace detail {

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.0f", v);
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// Metadata line: tool version, config hash and the fiber settings that shape every number.
inline std::string metadata_line(const ExperimentConfig& c) {
    const FiberOptions f = detail::fiber_options(c.parameters);
    std::ostringstream os;
    os << "iwatsuka-cli version=" << tool_version << " experiment=" << c.experiment << " config_hash=" << config_hash(c)
       << " fiber_levels=" << f.levels << " fiber_spacing=" << detail::format_number(f.spacing)
       << " fiber_half_width=" << detail::format_number(f.half_width) << " tol=" << detail::format_number(f.tol);
    return os.str();
}

inline void write_csv(std::ostream& os, const ExperimentConfig& c, const Table& t) {
    os << "# " << metadata_line(c) << '\n';
    os << "# config=" << c.document.dump() << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << detail::format_number(r[i]);
        os << '\n';
    }
}

inline void write_json(std::ostream& os, const ExperimentConfig& c, const Table& t) {
    json out;
    const FiberOptions f = detail::fiber_options(c.parameters);
    out["meta"] = {{"tool", "iwatsuka-cli"},        {"version", tool_version},  {"experiment", c.experiment},
                   {"config_hash", config_hash(c)}, {"fiber_levels", f.levels}, {"fiber_spacing", f.spacing},
                   {"fiber_half_width", f.half_width}, {"tol", f.tol}};
    out["config"] = c.document;
    out["columns"] = t.columns;
    json rows = json::array();
    for (const auto& r : t.rows) {
        json row = json::array();
        for (double v : r) {
            if (std::isnan(v)) row.push_back(nullptr); else row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    out["rows"] = std::move(rows);
    os << out.dump(2) << '\n';
}

}  // namespace iwatsuka
