#include "udfvault/error.hpp"

namespace udfvault {

std::string_view errc_name(Errc code) noexcept
{
    switch (code) {
    case Errc::DuplicatePath: return "DuplicatePath";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::UnknownFilter: return "UnknownFilter";
    case Errc::NotFound: return "NotFound";
    case Errc::CorruptChunk: return "CorruptChunk";
    case Errc::BadContainer: return "BadContainer";
    case Errc::IoError: return "IoError";
    case Errc::FilterFailure: return "FilterFailure";
    case Errc::CorruptStream: return "CorruptStream";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownIdentifier: return "UnknownIdentifier";
    case Errc::ArityError: return "ArityError";
    case Errc::BudgetExceeded: return "BudgetExceeded";
    case Errc::InputDTypeUnsupported: return "InputDTypeUnsupported";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::MalformedBytecode: return "MalformedBytecode";
    case Errc::CompileError: return "CompileError";
    case Errc::MissingInput: return "MissingInput";
    case Errc::SignatureInvalid: return "SignatureInvalid";
    case Errc::TrustViolation: return "TrustViolation";
    case Errc::Timeout: return "Timeout";
    case Errc::UdfRuntimeError: return "UdfRuntimeError";
    case Errc::CyclicDependency: return "CyclicDependency";
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::DuplicateBackend: return "DuplicateBackend";
    case Errc::UnknownBackend: return "UnknownBackend";
    case Errc::UnknownHostedFunction: return "UnknownHostedFunction";
    case Errc::UnknownName: return "UnknownName";
    case Errc::NameCollision: return "NameCollision";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::StringTooLong: return "StringTooLong";
    case Errc::VarStringWriteUnsupported: return "VarStringWriteUnsupported";
    case Errc::MemoryCapExceeded: return "MemoryCapExceeded";
    case Errc::CapabilityDenied: return "CapabilityDenied";
    case Errc::UdfPanic: return "UdfPanic";
    case Errc::StorageError: return "StorageError";
    case Errc::MalformedKey: return "MalformedKey";
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::InsufficientSpace: return "InsufficientSpace";
    case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

} // namespace udfvault
