#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "sclhom/runner/runner.hpp"

using namespace sclhom;
using namespace sclhom::runner;

namespace {

int exit_code_for(const error& e)
{
    switch (e.code()) {
    case errc::parse_error:
    case errc::validation_error:
    case errc::unknown_experiment:
    case errc::io_error:
        return 2;
    default:
        return 1;
    }
}

config load_or_empty(const std::string& path) { return path.empty() ? config{} : config::load(path); }

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"stochastic conservation-law homogenization lab"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run one experiment and write its outputs and manifest");
    std::string name, config_path, out;
    long long seed = -1;
    long long paths = -1;
    unsigned threads = 1;
    run->add_option("experiment", name, "experiment name (see `list`)")->required();
    run->add_option("--config", config_path, "INI or JSON configuration merged over the defaults");
    run->add_option("--out", out, "output root; defaults to $SCLHOM_OUTPUT_ROOT, then ./runs");
    run->add_option("--seed", seed, "base seed")->check(CLI::NonNegativeNumber);
    run->add_option("--paths", paths, "Monte Carlo path count")->check(CLI::PositiveNumber);
    run->add_option("--threads", threads, "worker threads (outputs do not depend on it)")->check(CLI::PositiveNumber);

    auto* list = app.add_subcommand("list", "list experiments");

    auto* validate = app.add_subcommand("validate", "parse and validate a configuration");
    std::string validate_path, validate_exp;
    validate->add_option("--config", validate_path, "configuration file")->required();
    validate->add_option("--experiment", validate_exp, "check the file merged over this experiment's defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*list) {
            for (const auto& [n, d] : list_experiments())
                std::printf("%-24s %s\n", n.c_str(), d.c_str());
            return 0;
        }
        if (*validate) {
            auto c = config::load(validate_path);
            if (validate_exp.empty()) {
                validate_config(c);
            } else {
                const auto& exp = find_experiment(validate_exp);
                c = effective_config(exp, c);
                validate_for(exp, c);
            }
            std::printf("ok\n%s", c.canonical_ini().c_str());
            return 0;
        }
        run_options opt;
        if (seed >= 0)
            opt.seed = static_cast<std::uint64_t>(seed);
        if (paths > 0)
            opt.paths = static_cast<std::size_t>(paths);
        opt.threads = threads;
        const auto m = run_experiment(name, load_or_empty(config_path), output_root(out.empty() ? std::nullopt : std::optional(out)), opt);
        for (const auto& a : m.assertions)
            std::printf("%s %s = %.6g\n", a.pass ? "PASS" : "FAIL", a.name.c_str(), a.value);
        std::printf("%s: %s (%s)\n", m.experiment.c_str(), m.pass ? "pass" : "FAIL",
                    (m.directory / "manifest.json").string().c_str());
        return m.pass ? 0 : 1;
    } catch (const error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
