#include "levelflow/errors.hpp"

namespace levelflow {

const char* to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NoThreshold: return "NoThreshold";
    case ErrorCode::CoercivityViolation: return "CoercivityViolation";
    case ErrorCode::MonotonicityViolation: return "MonotonicityViolation";
    case ErrorCode::SignChange: return "SignChange";
    case ErrorCode::CflViolation: return "CflViolation";
    case ErrorCode::NonConvexInput: return "NonConvexInput";
    case ErrorCode::FitUnstable: return "FitUnstable";
    case ErrorCode::TailTooShort: return "TailTooShort";
    case ErrorCode::OutOfValidityWindow: return "OutOfValidityWindow";
    case ErrorCode::OutOfTable: return "OutOfTable";
    case ErrorCode::DomainOverflow: return "DomainOverflow";
    case ErrorCode::MonotonicityRepairExceeded: return "MonotonicityRepairExceeded";
    case ErrorCode::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorCode::LevelRangeExhausted: return "LevelRangeExhausted";
    case ErrorCode::DescentAbort: return "DescentAbort";
    }
    return "Unknown";
}

int exit_code_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::IoFailure:
    case ErrorCode::GridMismatch:
        return 2;
    case ErrorCode::NoThreshold:
    case ErrorCode::CoercivityViolation:
    case ErrorCode::MonotonicityViolation:
    case ErrorCode::SignChange:
    case ErrorCode::CflViolation:
    case ErrorCode::NonConvexInput:
    case ErrorCode::FitUnstable:
    case ErrorCode::TailTooShort:
    case ErrorCode::OutOfValidityWindow:
    case ErrorCode::DescentAbort:
        return 3;
    case ErrorCode::OutOfTable:
    case ErrorCode::DomainOverflow:
    case ErrorCode::MonotonicityRepairExceeded:
    case ErrorCode::ResolutionTooCoarse:
    case ErrorCode::LevelRangeExhausted:
        return 4;
    }
    return 1;
}

} // namespace levelflow
