#pragma once

// What an executing UDF can see: prefetched inputs, one writable output,
// limits, and the capability set granted by its trust profile. Every
// resource access a UDF makes goes through the lib:: functions below.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "udfvault/buffer.hpp"
#include "udfvault/dtype.hpp"

namespace udfvault::runtime {

struct Limits {
    std::uint64_t op_budget = 10'000'000'000ull;
    std::uint64_t memory_cap = 2ull << 30;
    std::chrono::milliseconds wall_timeout{30'000};

    friend bool operator==(const Limits&, const Limits&) = default;
};

struct Capabilities {
    std::vector<std::string> fs_read;  // path prefixes
    std::vector<std::string> fs_write; // path prefixes
    bool network = false;
    bool hosted_allowed = false;

    friend bool operator==(const Capabilities&, const Capabilities&) = default;
};

struct InputSlot {
    std::string alias;
    std::string path;
    DType dtype;
    Shape shape;
    std::shared_ptr<const DataBuffer> data;
};

struct OutputSlot {
    std::string path;
    DType dtype;
    Shape shape;
    /// Allocated (zeroed) by the sandbox for the duration of one run.
    DataBuffer data;
};

struct ExecutionEnv {
    std::vector<InputSlot> inputs;
    OutputSlot output;
    Limits limits;
    Capabilities capabilities;
    /// Set by the sandbox; UDF code may poll it and lib::sleep_for honours it.
    std::stop_token stop;
    /// Scratch bytes reserved through lib::reserve.
    std::uint64_t reserved = 0;
};

/// A resolved dataset handle. Inputs are read-only; only the output handle
/// exposes `writable`.
struct DataHandle {
    std::span<const std::uint8_t> bytes;
    std::span<std::uint8_t> writable;
    const DType* dtype = nullptr;
    const Shape* shape = nullptr;
    bool output = false;

    template <class T>
    std::span<const T> as() const noexcept
    {
        return {reinterpret_cast<const T*>(bytes.data()), bytes.size() / sizeof(T)};
    }

    template <class T>
    std::span<T> as_mut() const noexcept
    {
        return {reinterpret_cast<T*>(writable.data()), writable.size() / sizeof(T)};
    }
};

namespace lib {

/// Names resolve as: input alias, input path, output path, output basename.
/// Throws UnknownName.
DataHandle get_data(ExecutionEnv& env, std::string_view name);
Shape get_dims(const ExecutionEnv& env, std::string_view name);
std::string get_type(const ExecutionEnv& env, std::string_view name);

/// Element `index` of a string dataset, or of string member `member` of a
/// compound dataset. Throws UnknownName, OutOfBounds, InputDTypeUnsupported.
std::string string_get(const ExecutionEnv& env, std::string_view name, std::uint64_t index,
                       std::string_view member = {});
/// Writes into the output dataset (or one of its members). Only fixed-length
/// targets are writable; text longer than the target is rejected whole.
/// Throws StringTooLong, VarStringWriteUnsupported, OutOfBounds, UnknownName.
void string_set(ExecutionEnv& env, std::string_view name, std::uint64_t index, std::string_view text,
                std::string_view member = {});

/// Throws CapabilityDenied carrying the offending path.
std::string read_file(const ExecutionEnv& env, const std::filesystem::path& path);
void write_file(const ExecutionEnv& env, const std::filesystem::path& path, std::string_view contents);
/// Network access is never granted; always throws CapabilityDenied.
void connect(const ExecutionEnv& env, std::string_view endpoint);

/// Sleeps until `d` elapses or the sandbox asks the UDF to stop.
void sleep_for(const ExecutionEnv& env, std::chrono::milliseconds d);
bool stop_requested(const ExecutionEnv& env) noexcept;

/// Accounts scratch memory against memory_cap. Throws MemoryCapExceeded.
void reserve(ExecutionEnv& env, std::uint64_t bytes);

} // namespace lib

/// True when `path` lies inside one of `prefixes` (component-wise, after
/// lexical normalization against the current directory).
bool path_allowed(const std::filesystem::path& path, const std::vector<std::string>& prefixes);

struct ViewMember {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
    std::optional<DType> dtype; // empty for pads
    std::string raw_name;       // empty for pads

    bool is_pad() const noexcept { return !dtype.has_value(); }
};

struct CompoundView {
    std::vector<ViewMember> members;
    std::size_t record_size = 0;

    /// Throws UnknownName.
    const ViewMember& member(std::string_view name) const;
};

/// Truncate at the first "(", "[" or "{"; trim whitespace; lowercase; map
/// spaces and dashes to "_". Idempotent.
std::string sanitize_member_name(std::string_view raw);

/// Sanitized names plus "_padK" members for every storage gap, K counting
/// pads in member order. Throws NameCollision, InvalidArgument.
CompoundView build_compound_view(const DType& compound);

struct SandboxOptions {
    /// Run the thunk in a forked child with the address space capped at
    /// memory_cap. Off by default.
    bool process_isolation = false;
    /// How long a cancelled thunk gets to notice the stop request before the
    /// sandbox abandons it.
    std::chrono::milliseconds grace{200};
};

using Thunk = std::function<void(ExecutionEnv&)>;

/// Runs `thunk` against a private copy of `env` with a freshly allocated
/// output buffer, under the env's limits. The filled output is returned only
/// on success; on failure nothing produced by the thunk escapes.
///
/// Errors: Timeout, MemoryCapExceeded, CapabilityDenied, UdfPanic; library
/// errors raised by the thunk propagate with their own codes; other
/// exceptions become UdfRuntimeError.
DataBuffer run_sandboxed(const ExecutionEnv& env, const Thunk& thunk, const SandboxOptions& options = {});

/// Bytes the sandbox charges against memory_cap before starting.
std::uint64_t materialized_bytes(const ExecutionEnv& env);

} // namespace udfvault::runtime
