#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "experiments.hpp"
#include "manifest.hpp"

namespace sclhom::runner {

struct run_options {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    /// Worker threads; never recorded in any output.
    unsigned threads = 1;
};

inline std::vector<std::pair<std::string, std::string>> list_experiments()
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : registry())
        out.emplace_back(e.name, e.description);
    return out;
}

inline const experiment_info& find_experiment(const std::string& name)
{
    std::string names;
    for (const auto& e : registry()) {
        if (name == e.name)
            return e;
        names += (names.empty() ? "" : ", ") + std::string(e.name);
    }
    fail(errc::unknown_experiment, "'" + name + "'; valid names: " + names);
}

/// Defaults of the experiment, then the user file, then command-line overrides.
inline config effective_config(const experiment_info& exp, const config& user, const run_options& opt = {})
{
    config c = config::parse_ini(exp.defaults);
    c.merge(user);
    if (opt.seed) {
        if (c.has("sweep", "seeds")) {
            // keep the count, shift the start
            const auto n = c.list("sweep", "seeds").size();
            std::string s;
            for (std::size_t j = 0; j < n; ++j)
                s += (j ? ", " : "") + std::to_string(*opt.seed + j);
            c.set("sweep", "seeds", s);
        } else {
            c.set("sweep", "seed", std::to_string(*opt.seed));
        }
    }
    if (opt.paths)
        c.set("sweep", "paths", std::to_string(*opt.paths));
    return c;
}

/// Checks a configuration on its own: syntax, and the problem when [problem] kind is set.
inline void validate_config(const config& c)
{
    if (!c.has("problem", "kind"))
        return;
    if (c.str("problem", "kind") == "both") {
        validated_problem(c, 0.0, false);
        validated_problem(c, 0.0, true);
    } else {
        validated_problem(c);
    }
    build_scheme(c);
}

/// Checks a configuration as the named experiment will use it.
inline void validate_for(const experiment_info& exp, const config& c)
{
    if (exp.steps_in_time) {
        validate_config(c);
        return;
    }
    try {
        build_problem(c);
    } catch (const error& e) {
        if (e.code() == errc::parse_error || e.code() == errc::validation_error)
            throw;
        fail(errc::validation_error, e.what());
    }
}

/// --out, else SCLHOM_OUTPUT_ROOT, else ./runs.
inline std::filesystem::path output_root(const std::optional<std::string>& out)
{
    if (out && !out->empty())
        return *out;
    if (const char* env = std::getenv("SCLHOM_OUTPUT_ROOT"); env && *env)
        return env;
    return "runs";
}

/// Runs one experiment into root / name; the manifest records pass/fail.
inline run_manifest run_experiment(const std::string& name, const config& user, const std::filesystem::path& root,
                                   const run_options& opt = {})
{
    const auto& exp = find_experiment(name);
    const auto cfg = effective_config(exp, user, opt);
    const auto started = std::chrono::system_clock::now();
    run_context ctx{cfg, std::max(1u, opt.threads)};
    const auto res = exp.run(ctx);
    return commit_run(root / exp.name, exp.name, cfg.canonical(), res, started);
}

} // namespace sclhom::runner
