#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sclhom {

/// Failure categories raised by the library. Each operation documents which
/// of these it can produce.
enum class errc {
    malformed_spec,
    range_exceeded,
    level_too_deep,
    index_out_of_range,
    no_convergence,
    out_of_range,
    cfl_violation,
    stability_violation,
    unknown_kind,
    unsupported_velocity_family,
    grid_mismatch,
    resolution_too_coarse,
    grid_too_narrow,
    missing_step_data,
    insufficient_paths,
    unsupported_test_function,
    parse_error,
    validation_error,
    unknown_experiment,
    io_error,
};

inline std::string_view to_string(errc e)
{
    switch (e) {
    case errc::malformed_spec: return "MalformedSpec";
    case errc::range_exceeded: return "RangeExceeded";
    case errc::level_too_deep: return "LevelTooDeep";
    case errc::index_out_of_range: return "IndexOutOfRange";
    case errc::no_convergence: return "NoConvergence";
    case errc::out_of_range: return "OutOfRange";
    case errc::cfl_violation: return "CFLViolation";
    case errc::stability_violation: return "StabilityViolation";
    case errc::unknown_kind: return "UnknownKind";
    case errc::unsupported_velocity_family: return "UnsupportedVelocityFamily";
    case errc::grid_mismatch: return "GridMismatch";
    case errc::resolution_too_coarse: return "ResolutionTooCoarse";
    case errc::grid_too_narrow: return "GridTooNarrow";
    case errc::missing_step_data: return "MissingStepData";
    case errc::insufficient_paths: return "InsufficientPaths";
    case errc::unsupported_test_function: return "UnsupportedTestFunction";
    case errc::parse_error: return "ParseError";
    case errc::validation_error: return "ValidationError";
    case errc::unknown_experiment: return "UnknownExperiment";
    case errc::io_error: return "IOError";
    }
    return "Unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what)
{
    throw error(code, what);
}

} // namespace sclhom
