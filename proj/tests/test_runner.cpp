#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sclhom/runner/runner.hpp"

using namespace sclhom;
using namespace sclhom::runner;
namespace fs = std::filesystem;

namespace {

const char* minimal_p2 = R"([problem]
kind = stiff
eps = 0.125
T = 0.5
[flux]
f1 = "linear"
[noise]
kappa0 = 0.5
[oscillation]
V = "sin"
[grid]
n = 1024
L = 1
)";

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("sclhom_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

errc code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return errc::malformed_spec;
}

std::string message_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const error& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(Config, MinimalLinearStiffValidates)
{
    const auto c = config::parse_ini(minimal_p2);
    EXPECT_NO_THROW(validate_config(c));
    const auto spec = validated_problem(c);
    EXPECT_FALSE(spec.is_transport());
    EXPECT_EQ(spec.epsilon, 0.125);
    EXPECT_EQ(spec.final_time, 0.5);
    EXPECT_EQ(spec.domain.half_width, 1.0);
    EXPECT_EQ(spec.stiff().model.kappa0, 0.5);
    // linear f1 with slope 1: delta0 is exact
    EXPECT_EQ(spec.stiff().flux.delta0, 1.0);
    EXPECT_EQ(c.str("flux", "f1"), "linear");
}

TEST(Config, MissingDeltaZeroForNonlinearFlux)
{
    std::string text = minimal_p2;
    text.replace(text.find("\"linear\""), 8, "cubic");
    const auto c = config::parse_ini(text);
    const auto msg = message_of([&] { validate_config(c); });
    EXPECT_EQ(code_of([&] { validate_config(c); }), errc::validation_error);
    EXPECT_NE(msg.find("delta0"), std::string::npos) << msg;
}

TEST(Config, DuplicateKeyCitesBothLines)
{
    const char* text = "[grid]\nn = 64\nL = 1\n\nn = 128\n";
    const auto msg = message_of([&] { config::parse_ini(text); });
    EXPECT_EQ(code_of([&] { config::parse_ini(text); }), errc::parse_error);
    EXPECT_NE(msg.find("line 5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
}

TEST(Config, UnknownSectionAndKeyWithLineNumbers)
{
    const char* text = "[grid]\nn = 64\n[solver]\nx = 1\n[noise]\nkapa0 = 0.5\nnot a pair\n";
    const auto msg = message_of([&] { config::parse_ini(text); });
    EXPECT_NE(msg.find("line 3: unknown section [solver]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 6: unknown key 'kapa0'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 7: expected key = value"), std::string::npos) << msg;
    // keys inside the unknown section are not reported again
    EXPECT_EQ(msg.find("line 4"), std::string::npos) << msg;
}

TEST(Config, KeyOutsideSection)
{
    EXPECT_EQ(code_of([] { config::parse_ini("n = 3\n"); }), errc::parse_error);
}

TEST(Config, CommentsQuotesFractionsLists)
{
    const auto c = config::parse_ini("# top\n; also\n[sweep]\neps = 1/8, 1/16 # inline\nseed = '5'\n[problem]\nT = 0.25\n");
    EXPECT_EQ(c.list("sweep", "eps"), (std::vector<double>{0.125, 0.0625}));
    EXPECT_EQ(c.integer("sweep", "seed", 0), 5);
    EXPECT_EQ(c.num("problem", "T"), 0.25);
    EXPECT_EQ(c.num("problem", "eps", 7.0), 7.0);
    EXPECT_EQ(code_of([&] { c.num("sweep", "eps"); }), errc::validation_error);
}

TEST(Config, JsonUsesSameSchema)
{
    const auto ini = config::parse_ini(minimal_p2);
    const auto js = config::parse(R"({"problem": {"kind": "stiff", "eps": 0.125, "T": 0.5},
        "flux": {"f1": "linear"}, "noise": {"kappa0": 0.5}, "oscillation": {"V": "sin"},
        "grid": {"n": 1024, "L": 1}})");
    EXPECT_EQ(js.canonical(), ini.canonical());
    EXPECT_EQ(code_of([] { config::parse(R"({"grid": {"cells": 3}})"); }), errc::parse_error);
    EXPECT_EQ(code_of([] { config::parse(R"({"grid": )"); }), errc::parse_error);
}

TEST(Config, MergeAndCanonicalEcho)
{
    auto a = config::parse_ini("[grid]\nn = 64\nL = 1\n");
    a.merge(config::parse_ini("[grid]\nn = 128\n[noise]\nkappa0 = 0\n"));
    EXPECT_EQ(a.canonical_ini(), "[grid]\nL = 1\nn = 128\n[noise]\nkappa0 = 0\n");
    // round trip
    EXPECT_EQ(config::parse_ini(a.canonical_ini()).canonical(), a.canonical());
}

TEST(Config, ValidationFailureSurfacesAsValidationError)
{
    std::string text = minimal_p2;
    text += "[scheme]\ncfl = 1.5\n";
    EXPECT_EQ(code_of([&] { validate_config(config::parse_ini(text)); }), errc::validation_error);
    std::string bad_flux = minimal_p2;
    bad_flux.replace(bad_flux.find("\"linear\""), 8, "quartic");
    EXPECT_EQ(code_of([&] { validate_config(config::parse_ini(bad_flux)); }), errc::validation_error);
}

TEST(Registry, SizeOrderAndDefaults)
{
    const auto list = list_experiments();
    EXPECT_EQ(list.size(), 12u);
    EXPECT_TRUE(std::is_sorted(list.begin(), list.end()));
    EXPECT_NE(std::find_if(list.begin(), list.end(), [](const auto& e) { return e.first == "eps-sweep-p2"; }),
              list.end());
    for (const auto& e : registry()) {
        EXPECT_FALSE(std::string(e.description).empty());
        const auto c = config::parse_ini(e.defaults);
        // the flux-table check uses f2 = u^2/2, outside the monotone class the problem validator enforces
        EXPECT_NO_THROW(validate_for(e, c)) << e.name;
        if (std::string(e.name) == "effective-flux")
            EXPECT_EQ(code_of([&] { validate_config(c); }), errc::validation_error);
    }
}

TEST(Registry, UnknownExperimentListsNames)
{
    const auto msg = message_of([] { find_experiment("no-such-thing"); });
    EXPECT_EQ(code_of([] { find_experiment("no-such-thing"); }), errc::unknown_experiment);
    for (const auto& e : registry())
        EXPECT_NE(msg.find(e.name), std::string::npos) << e.name;
}

TEST(Registry, SeedAndPathOverrides)
{
    const auto& exp = find_experiment("eps-sweep-p2");
    run_options opt;
    opt.seed = 10;
    const auto c = effective_config(exp, {}, opt);
    EXPECT_EQ(c.list("sweep", "seeds"), (std::vector<double>{10, 11, 12}));
    run_options p;
    p.paths = 32;
    EXPECT_EQ(effective_config(find_experiment("contraction"), {}, p).integer("sweep", "paths", 0), 32);
    EXPECT_EQ(effective_config(find_experiment("kruzkov"), {}, opt).str("sweep", "seeds"), "10");
}

TEST(Manifest, Sha256KnownVector)
{
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Run, KineticIdentitiesWritesResidualsAndPasses)
{
    const auto root = scratch("kinetic");
    const auto m = run_experiment("kinetic-identities", {}, root);
    EXPECT_TRUE(m.pass);
    const auto dir = root / "kinetic-identities";
    ASSERT_TRUE(fs::exists(dir / "residuals.csv"));
    EXPECT_EQ(slurp(dir / "residuals.csv").substr(0, 41), "u,v,positive_part,absolute,quarter,bound\n");
    const auto j = json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(j.at("schema_version"), schema_version);
    EXPECT_EQ(j.at("experiment"), "kinetic-identities");
    EXPECT_TRUE(j.at("pass").get<bool>());
    EXPECT_EQ(j.at("config").at("sweep").at("xi_step"), "0.001");
    EXPECT_FALSE(j.at("outputs").empty());
    EXPECT_TRUE(verify_manifest(dir / "manifest.json").empty());
    fs::remove_all(root);
}

TEST(Run, RerunReproducesHashes)
{
    const auto root = scratch("rerun");
    const auto a = run_experiment("comparison", {}, root);
    const auto b = run_experiment("comparison", {}, root);
    ASSERT_EQ(a.outputs.size(), b.outputs.size());
    for (std::size_t k = 0; k < a.outputs.size(); ++k) {
        EXPECT_EQ(a.outputs[k].file, b.outputs[k].file);
        EXPECT_EQ(a.outputs[k].sha256, b.outputs[k].sha256);
    }
    run_options two;
    two.threads = 3;
    const auto c = run_experiment("comparison", {}, root, two);
    for (std::size_t k = 0; k < a.outputs.size(); ++k)
        EXPECT_EQ(a.outputs[k].sha256, c.outputs[k].sha256);
    fs::remove_all(root);
}

TEST(Run, CorruptedOutputDetected)
{
    const auto root = scratch("corrupt");
    run_experiment("kinetic-identities", {}, root);
    const auto dir = root / "kinetic-identities";
    std::ofstream(dir / "moments.csv", std::ios::app) << "tampered\n";
    EXPECT_EQ(verify_manifest(dir / "manifest.json"), std::vector<std::string>{"moments.csv"});
    fs::remove_all(root);
}

TEST(Run, FailingAssertionRecorded)
{
    // the corrector ratio cannot stay in [0.4, 0.7] with a single eps
    const auto user = config::parse_ini("[sweep]\neps = 1/8\nseeds = 1\n[output]\nfields = false\n");
    const auto root = scratch("failing");
    const auto m = run_experiment("eps-sweep-p2", user, root);
    EXPECT_FALSE(m.pass);
    fs::remove_all(root);
}

TEST(Run, OutputRootPrecedence)
{
    ::setenv("SCLHOM_OUTPUT_ROOT", "/tmp/from-env", 1);
    EXPECT_EQ(output_root(std::string("given")), fs::path("given"));
    EXPECT_EQ(output_root(std::nullopt), fs::path("/tmp/from-env"));
    ::unsetenv("SCLHOM_OUTPUT_ROOT");
    EXPECT_EQ(output_root(std::nullopt), fs::path("runs"));
}
