#include "cltrust/error.hpp"

#include <cstdio>

#include "cltrust/hashing.hpp"

namespace cltrust {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::NotFound: return "not_found";
        case ErrorCode::Io: return "io";
        case ErrorCode::Parse: return "parse";
        case ErrorCode::Infeasible: return "infeasible";
        case ErrorCode::Protocol: return "protocol";
        case ErrorCode::Stage: return "stage";
        case ErrorCode::Conflict: return "conflict";
        case ErrorCode::Duplicate: return "duplicate";
        case ErrorCode::TypeError: return "type_error";
        case ErrorCode::Unsatisfiable: return "unsatisfiable";
    }
    return "unknown";
}

std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace cltrust
