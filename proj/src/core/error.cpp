#include "selinf/error.hpp"

namespace selinf {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::ZeroResidualDf: return "ZeroResidualDf";
        case ErrorCode::ZeroResidual: return "ZeroResidual";
        case ErrorCode::InterpolationDegenerate: return "InterpolationDegenerate";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::DegenerateScaling: return "DegenerateScaling";
        case ErrorCode::InfeasibleObserved: return "InfeasibleObserved";
        case ErrorCode::EmptyTruncation: return "EmptyTruncation";
        case ErrorCode::NoRoot: return "NoRoot";
        case ErrorCode::BracketFailure: return "BracketFailure";
        case ErrorCode::AcceptanceTooLow: return "AcceptanceTooLow";
        case ErrorCode::DegenerateGroup: return "DegenerateGroup";
    }
    return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
    return code == ErrorCode::InvalidArgument || code == ErrorCode::Io;
}

}  // namespace selinf
