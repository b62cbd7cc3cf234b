#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace udfvault {

// Error names are part of the CLI surface ("error: <Name>: ...") and must stay stable.
enum class Errc {
    // container
    DuplicatePath,
    ShapeMismatch,
    UnknownFilter,
    NotFound,
    CorruptChunk,
    BadContainer,
    IoError,
    // filters
    FilterFailure,
    CorruptStream,
    LengthMismatch,
    // exprlang
    SyntaxError,
    UnknownIdentifier,
    ArityError,
    BudgetExceeded,
    InputDTypeUnsupported,
    BadMagic,
    UnsupportedVersion,
    MalformedBytecode,
    // udf engine
    CompileError,
    MissingInput,
    SignatureInvalid,
    TrustViolation,
    Timeout,
    UdfRuntimeError,
    CyclicDependency,
    MalformedHeader,
    DuplicateBackend,
    UnknownBackend,
    UnknownHostedFunction,
    // runtime
    UnknownName,
    NameCollision,
    OutOfBounds,
    StringTooLong,
    VarStringWriteUnsupported,
    MemoryCapExceeded,
    CapabilityDenied,
    UdfPanic,
    // trust
    StorageError,
    MalformedKey,
    DuplicateKey,
    // bench
    InsufficientSpace,
    InvalidArgument,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, std::optional<std::size_t> offset = std::nullopt)
        : std::runtime_error(message), code_(code), offset_(offset) {}

    Errc code() const noexcept { return code_; }

    /// Source offset for compile-time diagnostics, when known.
    std::optional<std::size_t> offset() const noexcept { return offset_; }

private:
    Errc code_;
    std::optional<std::size_t> offset_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message)
{
    throw Error(code, message);
}

} // namespace udfvault
