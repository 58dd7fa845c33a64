#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include "../error.hpp"
#include "../fv_engine.hpp"
#include "../model_catalog.hpp"
#include "../models.hpp"

// Sectioned key = value configuration. JSON input uses the same schema:
// one object per section, scalar values (arrays become comma lists).

namespace sclhom::runner {

using json = nlohmann::json;

inline const std::map<std::string, std::set<std::string>>& config_schema()
{
    static const std::map<std::string, std::set<std::string>> s{
        {"problem", {"kind", "dim", "eps", "T", "initial", "amplitude", "offset", "alpha"}},
        {"flux", {"f1", "f1_stiff", "f2", "slope", "delta0", "u_min", "u_max"}},
        {"noise", {"kappa0", "sigma"}},
        {"oscillation", {"V", "amplitude", "frequency", "velocity", "a0", "a1", "shear"}},
        {"grid", {"n", "L", "boundary"}},
        {"scheme", {"flux", "cfl", "viscosity", "well_balanced", "level"}},
        {"sweep",
         {"eps", "seed", "seeds", "paths", "times", "resolution", "path_level", "nodes", "y_bins", "xi_bins",
          "points", "xi_step", "weight_N", "viscosity_c"}},
        {"output", {"fields", "path"}},
    };
    return s;
}

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string unquote(std::string s)
{
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
        return s.substr(1, s.size() - 2);
    return s;
}

inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string join_keys(const std::set<std::string>& keys)
{
    std::string out;
    for (const auto& k : keys)
        out += (out.empty() ? "" : ", ") + k;
    return out;
}

} // namespace detail

class config {
public:
    struct entry {
        std::string value;
        int line = 0;
    };

    static config parse_ini(std::string_view text)
    {
        config c;
        std::vector<std::string> errors;
        std::string section;
        bool section_ok = false;
        std::istringstream in{std::string(text)};
        std::string raw;
        int line = 0;
        while (std::getline(in, raw)) {
            ++line;
            std::string s = detail::trim(raw);
            if (s.empty() || s[0] == '#' || s[0] == ';')
                continue;
            const auto at = [&](const std::string& msg) { errors.push_back("line " + std::to_string(line) + ": " + msg); };
            if (s[0] == '[') {
                if (s.back() != ']') {
                    at("unterminated section header");
                    section_ok = false;
                    continue;
                }
                section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
                section_ok = config_schema().count(section) > 0;
                if (!section_ok)
                    at("unknown section [" + section + "]");
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                at("expected key = value");
                continue;
            }
            const std::string key = detail::trim(std::string_view(s).substr(0, eq));
            std::string value = detail::trim(std::string_view(s).substr(eq + 1));
            // inline comment after whitespace
            for (const char* mark : {" #", " ;", "\t#", "\t;"})
                if (const auto p = value.find(mark); p != std::string::npos)
                    value = detail::trim(std::string_view(value).substr(0, p));
            value = detail::unquote(value);
            if (section.empty()) {
                at("key '" + key + "' outside any section");
                continue;
            }
            if (!section_ok)
                continue;
            const auto& keys = config_schema().at(section);
            if (!keys.count(key)) {
                at("unknown key '" + key + "' in [" + section + "] (valid: " + detail::join_keys(keys) + ")");
                continue;
            }
            auto& sec = c.data_[section];
            if (auto it = sec.find(key); it != sec.end()) {
                at("duplicate key '" + key + "' in [" + section + "], first set on line " +
                   std::to_string(it->second.line));
                continue;
            }
            sec[key] = {value, line};
        }
        if (!errors.empty()) {
            std::string msg;
            for (const auto& e : errors)
                msg += (msg.empty() ? "" : "\n") + e;
            fail(errc::parse_error, msg);
        }
        return c;
    }

    static config parse_json(std::string_view text)
    {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            fail(errc::parse_error, e.what());
        }
        if (!j.is_object())
            fail(errc::parse_error, "top level must be an object of sections");
        config c;
        std::vector<std::string> errors;
        for (const auto& [section, body] : j.items()) {
            if (!config_schema().count(section)) {
                errors.push_back("unknown section [" + section + "]");
                continue;
            }
            if (!body.is_object()) {
                errors.push_back("section [" + section + "] must be an object");
                continue;
            }
            const auto& keys = config_schema().at(section);
            for (const auto& [key, v] : body.items()) {
                if (!keys.count(key)) {
                    errors.push_back("unknown key '" + key + "' in [" + section + "]");
                    continue;
                }
                c.data_[section][key] = {scalar_text(v), 0};
            }
        }
        if (!errors.empty()) {
            std::string msg;
            for (const auto& e : errors)
                msg += (msg.empty() ? "" : "\n") + e;
            fail(errc::parse_error, msg);
        }
        return c;
    }

    /// JSON when the first non-blank character is '{', INI otherwise.
    static config parse(std::string_view text)
    {
        const auto p = text.find_first_not_of(" \t\r\n");
        if (p != std::string_view::npos && text[p] == '{')
            return parse_json(text);
        return parse_ini(text);
    }

    static config load(const std::string& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            fail(errc::io_error, "cannot read config '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    /// Entries of `over` replace ours.
    void merge(const config& over)
    {
        for (const auto& [s, body] : over.data_)
            for (const auto& [k, e] : body)
                data_[s][k] = e;
    }

    void set(const std::string& section, const std::string& key, const std::string& value)
    {
        if (!config_schema().count(section) || !config_schema().at(section).count(key))
            fail(errc::parse_error, "unknown key [" + section + "] " + key);
        data_[section][key] = {value, 0};
    }

    bool has(const std::string& section, const std::string& key) const
    {
        const auto it = data_.find(section);
        return it != data_.end() && it->second.count(key);
    }

    std::string str(const std::string& section, const std::string& key) const
    {
        if (!has(section, key))
            fail(errc::validation_error, "missing [" + section + "] " + key);
        return data_.at(section).at(key).value;
    }

    std::string str(const std::string& section, const std::string& key, const std::string& fallback) const
    {
        return has(section, key) ? str(section, key) : fallback;
    }

    double num(const std::string& section, const std::string& key) const
    {
        return to_number(str(section, key), section, key);
    }

    double num(const std::string& section, const std::string& key, double fallback) const
    {
        return has(section, key) ? num(section, key) : fallback;
    }

    long integer(const std::string& section, const std::string& key, long fallback) const
    {
        if (!has(section, key))
            return fallback;
        const double v = num(section, key);
        if (v != std::floor(v))
            fail(errc::validation_error, "[" + section + "] " + key + " must be an integer");
        return static_cast<long>(v);
    }

    bool flag(const std::string& section, const std::string& key, bool fallback) const
    {
        if (!has(section, key))
            return fallback;
        const auto v = str(section, key);
        if (v == "true" || v == "1" || v == "yes" || v == "on")
            return true;
        if (v == "false" || v == "0" || v == "no" || v == "off")
            return false;
        fail(errc::validation_error, "[" + section + "] " + key + " must be a boolean, got '" + v + "'");
    }

    std::vector<double> list(const std::string& section, const std::string& key) const
    {
        std::vector<double> out;
        std::string item;
        std::istringstream in(str(section, key));
        while (std::getline(in, item, ','))
            if (auto t = detail::trim(item); !t.empty())
                out.push_back(to_number(t, section, key));
        if (out.empty())
            fail(errc::validation_error, "[" + section + "] " + key + " is an empty list");
        return out;
    }

    /// Sorted sections and keys; the echo written to manifests.
    json canonical() const
    {
        json j = json::object();
        for (const auto& [s, body] : data_) {
            json sec = json::object();
            for (const auto& [k, e] : body)
                sec[k] = e.value;
            j[s] = sec;
        }
        return j;
    }

    std::string canonical_ini() const
    {
        std::string out;
        for (const auto& [s, body] : data_) {
            out += "[" + s + "]\n";
            for (const auto& [k, e] : body)
                out += k + " = " + e.value + "\n";
        }
        return out;
    }

    /// Accepts decimals and a / b fractions.
    static double to_number(const std::string& text, const std::string& section, const std::string& key)
    {
        auto parse_one = [&](const std::string& t) {
            const std::string s = detail::trim(t);
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
                fail(errc::validation_error,
                     "[" + section + "] " + key + ": '" + text + "' is not a number");
            return v;
        };
        if (const auto slash = text.find('/'); slash != std::string::npos)
            return parse_one(text.substr(0, slash)) / parse_one(text.substr(slash + 1));
        return parse_one(text);
    }

private:
    static std::string scalar_text(const json& v)
    {
        if (v.is_string())
            return v.get<std::string>();
        if (v.is_boolean())
            return v.get<bool>() ? "true" : "false";
        if (v.is_number_integer())
            return std::to_string(v.get<long long>());
        if (v.is_number())
            return detail::format_double(v.get<double>());
        if (v.is_array()) {
            std::string out;
            for (const auto& x : v)
                out += (out.empty() ? "" : ", ") + scalar_text(x);
            return out;
        }
        fail(errc::parse_error, "unsupported JSON value " + v.dump());
    }

    std::map<std::string, std::map<std::string, entry>> data_;
};

// ---------------------------------------------------------------------------
// typed views

/// U_0 (transport) or v_0 (stiff source) by shape name, x only.
inline std::function<double(const point&)> initial_shape(const std::string& name, double A, double c, double L)
{
    constexpr double pi = std::numbers::pi;
    if (name == "sin")
        return [=](const point& x) { return A * std::sin(pi * x[0] / L) + c; };
    if (name == "cos")
        return [=](const point& x) { return A * std::cos(pi * x[0] / L) + c; };
    if (name == "step")
        return [=](const point& x) { return x[0] < 0.0 ? c + A : c - A; };
    if (name == "zero" || name == "constant")
        return [=](const point&) { return c; };
    if (name == "wave2d")
        return [=](const point& x) { return A * (std::cos(pi * x[1] / L) + 0.5 * std::cos(pi * x[0] / L)) + c; };
    fail(errc::validation_error, "[problem] initial: unknown shape '" + name + "' (sin, cos, step, zero, wave2d, special)");
}

inline boundary_mode parse_boundary(const std::string& s)
{
    if (s == "periodic")
        return boundary_mode::periodic;
    if (s == "far_field" || s == "far-field")
        return boundary_mode::far_field;
    fail(errc::validation_error, "[grid] boundary must be periodic or far_field, got '" + s + "'");
}

inline bool is_stiff(const config& c)
{
    const auto k = c.str("problem", "kind");
    if (k == "both")
        fail(errc::validation_error, "[problem] kind = both needs an explicit problem choice");
    if (k == "stiff" || k == "stiff_source" || k == "p2")
        return true;
    if (k == "transport" || k == "p1")
        return false;
    fail(errc::validation_error, "[problem] kind must be transport or stiff, got '" + k + "'");
}

/// Problem specification from [problem], [flux], [noise], [oscillation], [grid].
/// `eps` replaces [problem] eps when positive. With kind = both the caller
/// picks the problem; the stiff one then takes its f1 from [flux] f1_stiff.
inline problem_spec build_problem(const config& c, double eps = 0.0, std::optional<bool> stiff_choice = {})
{
    const bool both = c.str("problem", "kind") == "both";
    const bool stiff = stiff_choice ? *stiff_choice : is_stiff(c);
    const double L = c.num("grid", "L");
    const std::string f1_name = both && stiff ? c.str("flux", "f1_stiff") : c.str("flux", "f1");
    const double slope = c.num("flux", "slope", 1.0);
    scalar_flux flux;
    flux.components.push_back(models::flux_by_name(f1_name, slope));
    flux.u_min = c.num("flux", "u_min", -3.0);
    flux.u_max = c.num("flux", "u_max", 3.0);
    const int dim = static_cast<int>(c.integer("problem", "dim", c.has("flux", "f2") && stiff ? 2 : 1));
    if (dim != 1 && dim != 2)
        fail(errc::validation_error, "[problem] dim must be 1 or 2");
    const double kappa0 = c.num("noise", "kappa0");
    const std::string shape = c.str("problem", "initial", "sin");
    const double A = c.num("problem", "amplitude", 0.5);
    const double off = c.num("problem", "offset", 0.0);
    const double alpha = c.num("problem", "alpha", 0.0);

    problem_spec spec;
    spec.epsilon = eps > 0.0 ? eps : c.num("problem", "eps");
    spec.final_time = c.num("problem", "T");
    if (stiff) {
        if (dim == 2)
            flux.components.push_back(models::flux_by_name(c.str("flux", "f2"), slope));
        if (c.has("flux", "delta0"))
            flux.delta0 = c.num("flux", "delta0");
        else if (models::flux_is_linear(f1_name))
            flux.delta0 = std::abs(slope);
        else
            fail(errc::validation_error, "[flux] delta0: lower bound for f1' is required when f1 = " + f1_name +
                                             " is nonlinear");
        if (!(flux.delta0 > 0.0))
            fail(errc::validation_error, "[flux] delta0 must be positive");
        stiff_source_problem sp;
        sp.flux = flux;
        sp.potential = models::potential_by_name(c.str("oscillation", "V", "sin"), c.num("oscillation", "amplitude", 1.0),
                                                 c.num("oscillation", "frequency", 1.0));
        sp.model = make_stiff_noise_model(sp.flux[0], kappa0);
        if (shape == "special")
            sp.v0 = [alpha](const point&) { return alpha; };
        else
            sp.v0 = initial_shape(shape, A, off, L);
        spec.variant = std::move(sp);
    } else {
        transport_problem tp;
        tp.flux = flux;
        const std::string vel = c.str("oscillation", "velocity", "constant");
        const int vdim = vel == "shear" ? 2 : dim;
        tp.velocity = models::velocity_by_name(vel, vdim, c.num("oscillation", "a0", 1.0), c.num("oscillation", "a1", 0.0),
                                               c.num("oscillation", "shear", 0.5));
        tp.model = models::noise_by_name(c.str("noise", "sigma", "one"), kappa0, flux.u_min, flux.u_max);
        if (shape == "special") {
            const double u = tp.model.g.forward(alpha);
            tp.initial = [u](const point&, const point&) { return u; };
        } else {
            auto f = initial_shape(shape, A, off, L);
            tp.initial = [f](const point& x, const point&) { return f(x); };
        }
        spec.variant = std::move(tp);
    }
    const int d = spec.is_transport() ? spec.transport().velocity.dimension : dim;
    spec.domain = {d, L, parse_boundary(c.str("grid", "boundary", "periodic"))};
    return spec;
}

inline scheme_config build_scheme(const config& c)
{
    scheme_config s;
    s.kind = parse_flux_kind(c.str("scheme", "flux", "godunov"));
    s.cfl = c.num("scheme", "cfl", 0.9);
    s.viscosity = c.num("scheme", "viscosity", 0.0);
    s.well_balanced = c.flag("scheme", "well_balanced", true);
    s.min_level = static_cast<int>(c.integer("scheme", "level", 0));
    if (!(s.cfl > 0.0 && s.cfl <= 1.0))
        fail(errc::validation_error, "[scheme] cfl must lie in (0, 1]");
    if (s.viscosity < 0.0)
        fail(errc::validation_error, "[scheme] viscosity must be nonnegative");
    return s;
}

/// Builds and validates; every failure surfaces as ValidationError.
inline problem_spec validated_problem(const config& c, double eps = 0.0, std::optional<bool> stiff_choice = {})
{
    problem_spec spec;
    validation_report rep;
    try {
        spec = build_problem(c, eps, stiff_choice);
        build_scheme(c);
        rep = validate_problem(spec);
    } catch (const error& e) {
        if (e.code() == errc::validation_error)
            throw;
        fail(errc::validation_error, e.what());
    }
    if (!rep.pass()) {
        std::string bad;
        for (const auto& e : rep.entries)
            if (!e.pass)
                bad += (bad.empty() ? "" : ", ") + e.name + " (residual " + detail::format_double(e.worst_residual) + ")";
        fail(errc::validation_error, "problem fails: " + bad);
    }
    return spec;
}

} // namespace sclhom::runner
