#pragma once

#include <stdexcept>
#include <string>

namespace cground {

enum class ErrorCode {
    InvalidArgument,
    Parse,
    Integrity,
    Io,
    NotFound,
    Config,
    Backend,
    Timeout,
};

const char* error_code_name(ErrorCode code) noexcept;

// Single exception type for the library; the code drives exit codes in the
// C API and HTTP status mapping in the service.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace cground
