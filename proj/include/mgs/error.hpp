#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mgs {

enum class ErrorCode {
    // numerical
    DegenerateQuaternion,
    ScaleOverflow,
    NonFiniteLoss,
    // geometry / data
    InconsistentGrid,
    OutOfMemory,
    UninitializedField,
    ShapeMismatch,
    SliceTooSmall,
    ShrinkNotAllowed,
    GeometryMismatch,
    EmptyForeground,
    ConstantInput,
    // io
    BadMagic,
    UnsupportedDatatype,
    TruncatedPayload,
    EndianMismatch,
    IoError,
    // configuration
    ParseError,
    UnknownKey,
    OutOfRangeValue,
    Usage,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. Every failure path in mgs throws this type so
/// callers (the CLI in particular) can map the code onto an exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// 1 usage, 2 data/config, 3 numerical.
int exit_code_for(ErrorCode code);

}  // namespace mgs
