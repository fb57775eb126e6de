#pragma once

#include <stdexcept>
#include <string>

namespace selinf {

enum class ErrorCode {
    InvalidArgument,
    Io,
    RankDeficient,
    ZeroResidualDf,
    ZeroResidual,
    InterpolationDegenerate,
    NonConvergence,
    DegenerateScaling,
    InfeasibleObserved,
    EmptyTruncation,
    NoRoot,
    BracketFailure,
    AcceptanceTooLow,
    DegenerateGroup,
};

const char* to_string(ErrorCode code) noexcept;

/// True for codes caused by bad input (as opposed to numerical failure).
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace selinf
