#pragma once

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include "../error.hpp"

namespace sclhom::runner {

using json = nlohmann::json;

inline constexpr int schema_version = 1;
inline constexpr const char* artifact_version = "sclhom 1.0.0";

inline std::string sha256_hex(const std::string& bytes)
{
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
        fail(errc::io_error, "sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline std::string sha256_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        fail(errc::io_error, "cannot read '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t)
{
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct assertion {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    /// "<=", ">=", "==", "in" (bound..upper) or "true".
    std::string relation = "<=";
    double upper = 0.0;
    bool pass = false;
    std::string detail;

    json to_json() const
    {
        json j{{"name", name}, {"value", value}, {"relation", relation}, {"pass", pass}};
        if (relation == "in")
            j["range"] = {bound, upper};
        else if (relation != "true")
            j["bound"] = bound;
        if (!detail.empty())
            j["detail"] = detail;
        return j;
    }
};

inline assertion check_le(std::string name, double value, double bound, std::string detail = {})
{
    return {std::move(name), value, bound, "<=", 0.0, value <= bound, std::move(detail)};
}

inline assertion check_ge(std::string name, double value, double bound, std::string detail = {})
{
    return {std::move(name), value, bound, ">=", 0.0, value >= bound, std::move(detail)};
}

inline assertion check_eq(std::string name, double value, double target, std::string detail = {})
{
    return {std::move(name), value, target, "==", 0.0, value == target, std::move(detail)};
}

inline assertion check_in(std::string name, double value, double lo, double hi, std::string detail = {})
{
    return {std::move(name), value, lo, "in", hi, value >= lo && value <= hi, std::move(detail)};
}

inline assertion check_true(std::string name, bool ok, std::string detail = {})
{
    return {std::move(name), ok ? 1.0 : 0.0, 0.0, "true", 0.0, ok, std::move(detail)};
}

/// One produced file, held in memory until the run commits it.
struct output_file {
    std::string name;
    /// convergence | snapshot | histogram | moments | table | path | results
    std::string kind;
    std::string content;
};

struct experiment_result {
    json metrics = json::object();
    std::vector<assertion> assertions;
    std::vector<output_file> files;
    std::vector<std::uint64_t> seeds;

    bool pass() const
    {
        for (const auto& a : assertions)
            if (!a.pass)
                return false;
        return !assertions.empty();
    }

    void add(assertion a) { assertions.push_back(std::move(a)); }
    void file(std::string name, std::string kind, std::string content)
    {
        files.push_back({std::move(name), std::move(kind), std::move(content)});
    }
};

struct manifest_output {
    std::string file;
    std::string kind;
    std::string sha256;
    std::size_t bytes = 0;
};

struct run_manifest {
    std::string experiment;
    json config;
    std::vector<std::uint64_t> seeds;
    std::string started;
    std::string finished;
    std::vector<manifest_output> outputs;
    std::vector<assertion> assertions;
    bool pass = false;
    std::filesystem::path directory;

    json to_json() const
    {
        json outs = json::array();
        for (const auto& o : outputs)
            outs.push_back({{"file", o.file}, {"kind", o.kind}, {"sha256", o.sha256}, {"bytes", o.bytes}});
        json as = json::array();
        for (const auto& a : assertions)
            as.push_back(a.to_json());
        return {{"schema_version", schema_version},
                {"artifact_version", artifact_version},
                {"experiment", experiment},
                {"config", config},
                {"seeds", seeds},
                {"started", started},
                {"finished", finished},
                {"outputs", outs},
                {"assertions", as},
                {"pass", pass}};
    }

    std::string hash_of(const std::string& file) const
    {
        for (const auto& o : outputs)
            if (o.file == file)
                return o.sha256;
        return {};
    }
};

/// Writes the files, results.json and manifest.json into `dir`.
inline run_manifest commit_run(const std::filesystem::path& dir, const std::string& experiment, const json& config,
                               const experiment_result& res, std::chrono::system_clock::time_point started)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        fail(errc::io_error, "cannot create '" + dir.string() + "': " + ec.message());

    json results{{"schema_version", schema_version}, {"experiment", experiment}, {"metrics", res.metrics}};
    json as = json::array();
    for (const auto& a : res.assertions)
        as.push_back(a.to_json());
    results["assertions"] = as;
    results["pass"] = res.pass();

    std::vector<output_file> files = res.files;
    files.push_back({"results.json", "results", results.dump(2) + "\n"});

    run_manifest m;
    m.experiment = experiment;
    m.config = config;
    m.seeds = res.seeds;
    m.assertions = res.assertions;
    m.pass = res.pass();
    m.directory = dir;
    for (const auto& f : files) {
        const auto p = dir / f.name;
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out << f.content;
        out.close();
        if (!out)
            fail(errc::io_error, "cannot write '" + p.string() + "'");
        m.outputs.push_back({f.name, f.kind, sha256_hex(f.content), f.content.size()});
    }
    m.started = utc_timestamp(started);
    m.finished = utc_timestamp(std::chrono::system_clock::now());
    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    out << m.to_json().dump(2) << "\n";
    if (!out)
        fail(errc::io_error, "cannot write manifest in '" + dir.string() + "'");
    return m;
}

/// Recomputes every listed hash; names of files that differ or are missing.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path)
{
    std::ifstream in(manifest_path);
    if (!in)
        fail(errc::io_error, "cannot read '" + manifest_path.string() + "'");
    const json m = json::parse(in);
    std::vector<std::string> bad;
    for (const auto& o : m.at("outputs")) {
        const auto p = manifest_path.parent_path() / o.at("file").get<std::string>();
        if (!std::filesystem::exists(p) || sha256_file(p) != o.at("sha256").get<std::string>())
            bad.push_back(o.at("file").get<std::string>());
    }
    return bad;
}

} // namespace sclhom::runner
