#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cltrust {

enum class ErrorCode {
    InvalidArgument,
    NotFound,
    Io,
    Parse,
    Infeasible,
    Protocol,
    Stage,
    Conflict,
    Duplicate,
    TypeError,
    Unsatisfiable,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception. The code is stable and
// machine-readable; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace cltrust
