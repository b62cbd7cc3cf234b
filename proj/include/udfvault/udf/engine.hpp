#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "udfvault/container.hpp"
#include "udfvault/runtime.hpp"
#include "udfvault/trust.hpp"
#include "udfvault/udf/backend.hpp"
#include "udfvault/udf/metadata.hpp"

namespace udfvault::udf {

struct AttachRequest {
    std::string source;
    std::string backend;
    std::string output_path;
    DType output_dtype;
    Shape output_shape;
    /// (alias, container path), in input order.
    std::vector<std::pair<std::string, std::string>> inputs;
    bool embed_source = false;
};

struct InspectResult {
    UdfMetadata meta;
    std::string header;
    bool signature_valid = false;
    /// "valid", or why verification failed.
    std::string verification;
    std::string key_id;
    /// Profile already holding the signer's key; inspect never imports.
    std::optional<std::string> profile;
};

/// Observation points for tests and tooling.
struct EngineHooks {
    /// Called on the executing thread right before and after the backend runs.
    std::function<void(std::string_view path)> before_execute;
    std::function<void(std::string_view path)> after_execute;
};

struct EngineOptions {
    runtime::SandboxOptions sandbox;
};

class Engine {
public:
    Engine(BackendRegistry backends, trust::TrustStore store, EngineOptions options = {});

    const BackendRegistry& backends() const noexcept { return backends_; }
    trust::TrustStore& store() noexcept { return store_; }
    EngineHooks& hooks() noexcept { return hooks_; }

    /// Compiles, signs and stores a UDF dataset.
    /// Throws CompileError, MissingInput, DuplicatePath, UnknownBackend.
    UdfMetadata attach(Container& container, const AttachRequest& request, const trust::Identity& signer) const;

    /// Verifies, resolves trust, prefetches inputs (recursively for UDF
    /// inputs) and runs the backend in the sandbox.
    /// Throws SignatureInvalid, TrustViolation, BudgetExceeded, Timeout,
    /// UdfRuntimeError, CyclicDependency, UnknownBackend, MissingInput.
    DataBuffer decode_and_execute(Container& container, std::string_view path);
    /// Same, for a payload supplied by the caller in place of the stored one.
    DataBuffer execute_payload(Container& container, const DatasetMeta& meta, std::span<const std::uint8_t> payload);

    /// Parses and verifies without executing. Throws MalformedHeader.
    InspectResult inspect(Container& container, std::string_view path) const;

    /// Routes container reads of UDF datasets through this engine. The
    /// engine must outlive the container's use of it.
    void bind(Container& container);

private:
    struct Verified;
    Verified verify_payload(std::span<const std::uint8_t> payload) const;
    DataBuffer execute_verified(Container& container, const DatasetMeta& meta, const Verified& v);

    BackendRegistry backends_;
    trust::TrustStore store_;
    EngineOptions options_;
    EngineHooks hooks_;
};

} // namespace udfvault::udf
