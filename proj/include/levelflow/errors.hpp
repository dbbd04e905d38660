#pragma once

#include <stdexcept>
#include <string>

namespace levelflow {

enum class ErrorCode {
    ConfigInvalid,
    IoFailure,
    GridMismatch,
    NoThreshold,
    CoercivityViolation,
    MonotonicityViolation,
    SignChange,
    CflViolation,
    NonConvexInput,
    FitUnstable,
    TailTooShort,
    OutOfValidityWindow,
    OutOfTable,
    DomainOverflow,
    MonotonicityRepairExceeded,
    ResolutionTooCoarse,
    LevelRangeExhausted,
    DescentAbort,
};

const char* to_string(ErrorCode code);

// Process exit code for the CLI: 2 config, 3 numerical assumption, 4 resolution.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace levelflow
